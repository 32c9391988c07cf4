#include "vsdalign/dataset.hpp"

#include <string>

#include "vsdalign/error.hpp"

namespace vsdalign {
namespace {

Matrix gather(const EmbeddingSet& set, const std::vector<std::string>& ids, const char* what) {
  Matrix out(static_cast<Eigen::Index>(ids.size()), static_cast<Eigen::Index>(set.dim()));
  for (std::size_t r = 0; r < ids.size(); ++r) {
    const auto idx = set.index_of(ids[r]);
    if (!idx) throw Error(ErrorCode::ManifestMismatch, std::string(what) + " set has no row '" + ids[r] + "'");
    out.row(static_cast<Eigen::Index>(r)) = set.data().row(static_cast<Eigen::Index>(*idx));
  }
  return out;
}

}  // namespace

AlignedData align(const Dataset& data) {
  data.manifest.validate(std::nullopt, /*require_vsd=*/true);
  const auto d = data.images.dim();
  auto check_dim = [d](const EmbeddingSet& s, const char* what) {
    if (s.dim() != d) {
      throw Error(ErrorCode::DimensionMismatch, std::string(what) + " dimension " + std::to_string(s.dim()) +
                                                    " differs from image dimension " + std::to_string(d));
    }
  };
  check_dim(data.texts, "text");
  check_dim(data.vsd, "vsd");
  if (data.text_aux) check_dim(*data.text_aux, "text_aux");

  std::vector<std::string> caption_ids, vsd_ids;
  caption_ids.reserve(data.manifest.captions.size());
  for (const auto& [cid, parent] : data.manifest.captions) caption_ids.push_back(cid);
  vsd_ids.reserve(data.manifest.images.size());
  for (const auto& img : data.manifest.images) vsd_ids.push_back(data.manifest.vsd_map.at(img));

  AlignedData out;
  out.images = normalize_rows(gather(data.images, data.manifest.images, "image"));
  out.vsd = normalize_rows(gather(data.vsd, vsd_ids, "vsd"));
  out.texts = normalize_rows(gather(data.texts, caption_ids, "text"));
  out.text_aux = data.text_aux ? normalize_rows(gather(*data.text_aux, caption_ids, "text_aux")) : out.texts;
  out.caption_parent = data.manifest.caption_parents();
  return out;
}

Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset d;
  d.images = load_embeddings(dir / dataset_files::images);
  d.texts = load_embeddings(dir / dataset_files::texts);
  d.vsd = load_embeddings(dir / dataset_files::vsd);
  if (std::filesystem::exists(dir / dataset_files::text_aux)) d.text_aux = load_embeddings(dir / dataset_files::text_aux);
  d.manifest = load_manifest(dir / dataset_files::manifest);
  return d;
}

void save_dataset(const std::filesystem::path& dir, const Dataset& data) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string());
  save_embeddings(dir / dataset_files::images, data.images);
  save_embeddings(dir / dataset_files::texts, data.texts);
  save_embeddings(dir / dataset_files::vsd, data.vsd);
  if (data.text_aux) save_embeddings(dir / dataset_files::text_aux, *data.text_aux);
  save_manifest(dir / dataset_files::manifest, data.manifest);
}

}  // namespace vsdalign
