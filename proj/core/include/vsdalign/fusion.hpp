#pragma once

#include <cstdint>
#include <optional>
#include <random>

#include "vsdalign/types.hpp"

namespace vsdalign {

/// Weights and bias of one scalar sigmoid gate over the concatenation
/// [primary ; auxiliary]. `weights` has length 2d.
struct GateParams {
  Vector weights;
  double bias = 0.0;

  std::size_t dim() const noexcept { return static_cast<std::size_t>(weights.size()) / 2; }
};

/// Gates for the image path (backbone image + VSD) and the text path
/// (backbone text + retrieval-encoder text).
struct FusionParams {
  GateParams image;
  GateParams text;

  /// w ~ U(-1/sqrt(2d), 1/sqrt(2d)), b = 0. Image weights are drawn before text weights.
  static FusionParams init(std::size_t d, std::mt19937_64& rng);
  static FusionParams zeros(std::size_t d);

  std::size_t dim() const noexcept { return image.dim(); }

  /// Flat layout: [w_img (2d) | b_img | w_txt (2d) | b_txt].
  Vector flatten() const;
  static FusionParams unflatten(const Vector& flat, std::size_t d);
};

struct FusedBatch {
  Matrix fused;  // m x d
  Vector gates;  // m, each in (0, 1)

  struct Cache {
    Matrix primary;
    Matrix auxiliary;
    GateParams params;
  };
  std::optional<Cache> cache;  // cleared by release_cache()

  void release_cache() noexcept { cache.reset(); }
};

struct GateGradients {
  Matrix primary;
  Matrix auxiliary;
  Vector weights;
  double bias = 0.0;
};

/// fused_i = g_i * primary_i + (1 - g_i) * auxiliary_i,
/// g_i = sigmoid(w . [primary_i ; auxiliary_i] + b).
FusedBatch gated_fuse(const Matrix& primary, const Matrix& auxiliary, const GateParams& params);

/// Gradients of sum(grad_out .* fused) with respect to both inputs and the
/// gate parameters. Throws StaleCache when the batch no longer holds its
/// forward inputs.
GateGradients gated_fuse_backward(const Matrix& grad_out, const FusedBatch& batch);

/// Row-wise L2 normalization and its vector-Jacobian product:
/// for y = x / |x|, dx = (dy - y (y . dy)) / |x|.
Matrix renormalize_backward(const Matrix& grad_normalized, const Matrix& raw);

}  // namespace vsdalign
