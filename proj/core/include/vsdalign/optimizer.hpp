#pragma once

#include <cstdint>

#include "vsdalign/types.hpp"

namespace vsdalign {

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  Vector m;  // first moment
  Vector v;  // second moment
  std::uint64_t step = 0;

  static AdamState zeros(Eigen::Index n) { return {Vector::Zero(n), Vector::Zero(n), 0}; }
};

/// In-place Adam update with bias correction.
void adam_step(Vector& params, const Vector& grads, AdamState& state, const AdamHyper& hyper);

/// Plain gradient descent.
void sgd_step(Vector& params, const Vector& grads, double lr);

}  // namespace vsdalign
