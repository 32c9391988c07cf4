#pragma once

#include <cstddef>
#include <cstdint>

#include "vsdalign/dataset.hpp"

namespace vsdalign {

/// Parameters of the synthetic benchmark generator.
///
/// Each image is a random unit vector; each caption is the image plus
/// isotropic Gaussian noise of per-coordinate std `noise_sigma`. The VSD of
/// an image mixes its matched signal (the image plus the mean noise shared
/// by its captions) with fresh noise, weighted by `vsd_fidelity`. The
/// auxiliary caption view mixes the caption's signal with fresh noise the
/// same way. Every output row is L2-normalized.
struct SynthSpec {
  std::size_t n_images = 64;
  std::size_t captions_per_image = 5;
  std::size_t d = 32;
  double vsd_fidelity = 0.9;
  double noise_sigma = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

Dataset generate_synthetic(const SynthSpec& spec);

}  // namespace vsdalign
