#include "vsdalign/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vsdalign/error.hpp"

namespace vsdalign {
namespace {

// Saturates inside the open interval (0, 1) instead of rounding to 0 or 1.
double sigmoid(double z) {
  constexpr double lo = 0x1.0p-53;
  constexpr double hi = 1.0 - 0x1.0p-53;
  double g;
  if (z >= 0) {
    g = 1.0 / (1.0 + std::exp(-z));
  } else {
    const double e = std::exp(z);
    g = e / (1.0 + e);
  }
  return std::clamp(g, lo, hi);
}

std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

GateParams random_gate(std::size_t d, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(2.0 * static_cast<double>(d));
  GateParams g{Vector(2 * d), 0.0};
  for (Eigen::Index i = 0; i < g.weights.size(); ++i) g.weights(i) = (2.0 * uniform01(rng) - 1.0) * bound;
  return g;
}

}  // namespace

FusionParams FusionParams::init(std::size_t d, std::mt19937_64& rng) {
  FusionParams p;
  p.image = random_gate(d, rng);
  p.text = random_gate(d, rng);
  return p;
}

FusionParams FusionParams::zeros(std::size_t d) {
  return {{Vector::Zero(2 * d), 0.0}, {Vector::Zero(2 * d), 0.0}};
}

Vector FusionParams::flatten() const {
  const auto n = image.weights.size();
  Vector flat(2 * n + 2);
  flat.segment(0, n) = image.weights;
  flat(n) = image.bias;
  flat.segment(n + 1, n) = text.weights;
  flat(2 * n + 1) = text.bias;
  return flat;
}

FusionParams FusionParams::unflatten(const Vector& flat, std::size_t d) {
  const auto n = static_cast<Eigen::Index>(2 * d);
  if (flat.size() != 2 * n + 2) {
    throw Error(ErrorCode::ShapeMismatch, "flat parameter vector of length " +
                                              std::to_string(flat.size()) + " for d=" + std::to_string(d));
  }
  FusionParams p;
  p.image = {flat.segment(0, n), flat(n)};
  p.text = {flat.segment(n + 1, n), flat(2 * n + 1)};
  return p;
}

FusedBatch gated_fuse(const Matrix& primary, const Matrix& auxiliary, const GateParams& params) {
  if (primary.rows() != auxiliary.rows() || primary.cols() != auxiliary.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "primary " + shape(primary) + " vs auxiliary " + shape(auxiliary));
  }
  const Eigen::Index d = primary.cols();
  if (params.weights.size() != 2 * d) {
    throw Error(ErrorCode::ShapeMismatch, "gate weights of length " + std::to_string(params.weights.size()) +
                                              " for embedding dimension " + std::to_string(d));
  }
  const auto w_p = params.weights.head(d);
  const auto w_a = params.weights.tail(d);

  FusedBatch out;
  out.fused.resize(primary.rows(), d);
  out.gates.resize(primary.rows());
  for (Eigen::Index i = 0; i < primary.rows(); ++i) {
    const double z = primary.row(i).dot(w_p) + auxiliary.row(i).dot(w_a) + params.bias;
    const double g = sigmoid(z);
    out.gates(i) = g;
    // a + g (p - a) is exactly a when p == a; the clamp keeps rounding from
    // stepping outside the segment.
    for (Eigen::Index j = 0; j < d; ++j) {
      const double p = primary(i, j);
      const double a = auxiliary(i, j);
      out.fused(i, j) = std::clamp(a + g * (p - a), std::min(p, a), std::max(p, a));
    }
  }
  out.cache = FusedBatch::Cache{primary, auxiliary, params};
  return out;
}

GateGradients gated_fuse_backward(const Matrix& grad_out, const FusedBatch& batch) {
  if (!batch.cache) throw Error(ErrorCode::StaleCache, "fused batch carries no forward cache");
  const auto& c = *batch.cache;
  if (grad_out.rows() != c.primary.rows() || grad_out.cols() != c.primary.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "grad_out " + shape(grad_out) + " vs fused " + shape(c.primary));
  }
  const Eigen::Index d = c.primary.cols();
  const auto w_p = c.params.weights.head(d);
  const auto w_a = c.params.weights.tail(d);

  GateGradients g;
  g.primary.resize(c.primary.rows(), d);
  g.auxiliary.resize(c.primary.rows(), d);
  g.weights = Vector::Zero(2 * d);
  g.bias = 0.0;
  for (Eigen::Index i = 0; i < c.primary.rows(); ++i) {
    const double gate = batch.gates(i);
    // d/dz of the row's contribution: <G_i, p_i - a_i> * g (1 - g)
    const double delta = grad_out.row(i).dot(c.primary.row(i) - c.auxiliary.row(i)) * gate * (1.0 - gate);
    g.primary.row(i) = gate * grad_out.row(i) + delta * w_p.transpose();
    g.auxiliary.row(i) = (1.0 - gate) * grad_out.row(i) + delta * w_a.transpose();
    g.weights.head(d) += delta * c.primary.row(i).transpose();
    g.weights.tail(d) += delta * c.auxiliary.row(i).transpose();
    g.bias += delta;
  }
  return g;
}

Matrix renormalize_backward(const Matrix& grad_normalized, const Matrix& raw) {
  if (grad_normalized.rows() != raw.rows() || grad_normalized.cols() != raw.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "gradient " + shape(grad_normalized) + " vs input " + shape(raw));
  }
  Matrix out(raw.rows(), raw.cols());
  for (Eigen::Index i = 0; i < raw.rows(); ++i) {
    const double norm = raw.row(i).norm();
    if (norm == 0.0) throw Error(ErrorCode::ZeroRow, "row " + std::to_string(i) + " is all zero");
    const RowVector y = raw.row(i) / norm;
    out.row(i) = (grad_normalized.row(i) - y * y.dot(grad_normalized.row(i))) / norm;
  }
  return out;
}

}  // namespace vsdalign
