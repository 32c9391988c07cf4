#include "vsdalign/synth.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <string>

#include "vsdalign/error.hpp"

namespace vsdalign {
namespace {

// Box-Muller on top of the raw 64-bit engine so the stream does not depend
// on the standard library's distribution implementations.
class Gaussian {
 public:
  explicit Gaussian(std::uint64_t seed) : rng_(seed) {}

  double operator()() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = (static_cast<double>(rng_() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
    const double u2 = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

  Matrix matrix(std::size_t rows, std::size_t cols, double scale) {
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = scale * (*this)();
    return m;
  }

 private:
  std::mt19937_64 rng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

std::string make_id(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%05zu", prefix, i);
  return buf;
}

}  // namespace

void SynthSpec::validate() const {
  if (n_images == 0) throw Error(ErrorCode::InvalidArgument, "n_images must be >= 1");
  if (captions_per_image == 0) throw Error(ErrorCode::InvalidArgument, "captions_per_image must be >= 1");
  if (d < 2) throw Error(ErrorCode::InvalidArgument, "d must be >= 2");
  if (!(vsd_fidelity >= 0.0 && vsd_fidelity <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "vsd_fidelity must lie in [0, 1]");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma))
    throw Error(ErrorCode::InvalidArgument, "noise_sigma must be finite and >= 0");
  if (vsd_fidelity == 0.0 && noise_sigma == 0.0)
    throw Error(ErrorCode::InvalidArgument, "vsd_fidelity 0 with noise_sigma 0 yields zero vectors");
}

Dataset generate_synthetic(const SynthSpec& spec) {
  spec.validate();
  const std::size_t n = spec.n_images;
  const std::size_t nc = n * spec.captions_per_image;
  const double f = spec.vsd_fidelity;
  Gaussian gauss(spec.seed);

  const Matrix images = normalize_rows(gauss.matrix(n, spec.d, 1.0));
  const Matrix caption_noise = gauss.matrix(nc, spec.d, spec.noise_sigma);
  const Matrix vsd_noise = gauss.matrix(n, spec.d, spec.noise_sigma);
  const Matrix aux_noise = gauss.matrix(nc, spec.d, spec.noise_sigma);

  Matrix texts(static_cast<Eigen::Index>(nc), static_cast<Eigen::Index>(spec.d));
  Matrix text_aux(texts.rows(), texts.cols());
  Matrix vsd(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(spec.d));
  PairManifest manifest;
  std::vector<std::string> image_ids, caption_ids, vsd_ids;

  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    image_ids.push_back(make_id("img", i));
    vsd_ids.push_back(make_id("vsd", i));
    manifest.images.push_back(image_ids.back());
    manifest.vsd_map.emplace(image_ids.back(), vsd_ids.back());

    RowVector shared = RowVector::Zero(static_cast<Eigen::Index>(spec.d));
    for (std::size_t c = 0; c < spec.captions_per_image; ++c) {
      const auto j = static_cast<Eigen::Index>(i * spec.captions_per_image + c);
      const RowVector signal = images.row(r) + caption_noise.row(j);
      texts.row(j) = signal;
      text_aux.row(j) = f * signal + (1.0 - f) * aux_noise.row(j);
      shared += caption_noise.row(j);
      caption_ids.push_back(make_id("cap", static_cast<std::size_t>(j)));
      manifest.captions.emplace_back(caption_ids.back(), image_ids.back());
    }
    shared /= static_cast<double>(spec.captions_per_image);
    vsd.row(r) = f * (images.row(r) + shared) + (1.0 - f) * vsd_noise.row(r);
  }

  Dataset out;
  out.images = EmbeddingSet(Modality::image, images, image_ids);
  out.texts = EmbeddingSet(Modality::text, normalize_rows(texts), caption_ids);
  out.text_aux = EmbeddingSet(Modality::text, normalize_rows(text_aux), caption_ids);
  out.vsd = EmbeddingSet(Modality::vsd, normalize_rows(vsd), vsd_ids);
  out.manifest = std::move(manifest);
  return out;
}

}  // namespace vsdalign
