#include "vsdalign/optimizer.hpp"

#include <cmath>
#include <string>

#include "vsdalign/error.hpp"

namespace vsdalign {

void adam_step(Vector& params, const Vector& grads, AdamState& state, const AdamHyper& hyper) {
  if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    throw Error(ErrorCode::ShapeMismatch, "adam_step: params " + std::to_string(params.size()) + ", grads " +
                                              std::to_string(grads.size()) + ", moments " +
                                              std::to_string(state.m.size()));
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(hyper.beta1, t);
  const double c2 = 1.0 - std::pow(hyper.beta2, t);
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    state.m(i) = hyper.beta1 * state.m(i) + (1.0 - hyper.beta1) * grads(i);
    state.v(i) = hyper.beta2 * state.v(i) + (1.0 - hyper.beta2) * grads(i) * grads(i);
    const double m_hat = state.m(i) / c1;
    const double v_hat = state.v(i) / c2;
    params(i) -= hyper.lr * m_hat / (std::sqrt(v_hat) + hyper.eps);
  }
}

void sgd_step(Vector& params, const Vector& grads, double lr) {
  if (grads.size() != params.size()) throw Error(ErrorCode::ShapeMismatch, "sgd_step: size mismatch");
  params -= lr * grads;
}

}  // namespace vsdalign
