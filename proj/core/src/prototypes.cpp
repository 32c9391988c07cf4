#include "vsdalign/prototypes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "vsdalign/embedding_store.hpp"
#include "vsdalign/error.hpp"
#include "vsdalign/parallel.hpp"
#include "vsdalign/softmax.hpp"

namespace vsdalign {
namespace {

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double squared_distance(const Matrix& a, Eigen::Index i, const Matrix& b, Eigen::Index j) {
  double s = 0.0;
  for (Eigen::Index c = 0; c < a.cols(); ++c) {
    const double diff = a(i, c) - b(j, c);
    s += diff * diff;
  }
  return s;
}

bool row_less(const Matrix& x, Eigen::Index a, Eigen::Index b) {
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    if (x(a, c) != x(b, c)) return x(a, c) < x(b, c);
  }
  return false;
}

bool row_equal(const Matrix& x, Eigen::Index a, Eigen::Index b) {
  return !row_less(x, a, b) && !row_less(x, b, a);
}

struct Assignment {
  std::vector<std::size_t> labels;
  std::vector<double> distances;
  double inertia = 0.0;
};

Assignment assign(const Matrix& points, const Matrix& centroids) {
  const auto n = static_cast<std::size_t>(points.rows());
  Assignment a;
  a.labels.resize(n);
  a.distances.resize(n);
  parallel_for(n, [&](std::size_t i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
      const double dist = squared_distance(points, static_cast<Eigen::Index>(i), centroids, c);
      if (dist < best) {
        best = dist;
        arg = static_cast<std::size_t>(c);
      }
    }
    a.labels[i] = arg;
    a.distances[i] = best;
  });
  // Sequential sum keeps the total independent of the thread count.
  for (double dist : a.distances) a.inertia += dist;
  return a;
}

Matrix seed_plus_plus(const Matrix& points, std::size_t k, std::mt19937_64& rng) {
  const auto n = static_cast<std::size_t>(points.rows());
  Matrix centroids(static_cast<Eigen::Index>(k), points.cols());
  auto first = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n));
  first = std::min(first, n - 1);
  centroids.row(0) = points.row(static_cast<Eigen::Index>(first));

  std::vector<double> nearest(n);
  for (std::size_t i = 0; i < n; ++i) nearest[i] = squared_distance(points, static_cast<Eigen::Index>(i), centroids, 0);

  for (std::size_t c = 1; c < k; ++c) {
    const double total = std::accumulate(nearest.begin(), nearest.end(), 0.0);
    const double target = uniform01(rng) * total;
    std::size_t pick = n;
    double cumulative = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      cumulative += nearest[i];
      if (nearest[i] > 0.0 && cumulative > target) {
        pick = i;
        break;
      }
    }
    if (pick == n) {
      // Rounding left target at the very top of the range: take the last point still uncovered.
      for (std::size_t i = n; i-- > 0;) {
        if (nearest[i] > 0.0) {
          pick = i;
          break;
        }
      }
    }
    centroids.row(static_cast<Eigen::Index>(c)) = points.row(static_cast<Eigen::Index>(pick));
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], squared_distance(points, static_cast<Eigen::Index>(i), centroids,
                                                         static_cast<Eigen::Index>(c)));
    }
  }
  return centroids;
}

// Means of the assigned points; empty clusters move onto the point farthest
// from its centroid (each point used at most once per update).
void update_centroids(const Matrix& points, const Assignment& a, Matrix& centroids) {
  const auto k = static_cast<std::size_t>(centroids.rows());
  Matrix sums = Matrix::Zero(centroids.rows(), centroids.cols());
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < a.labels.size(); ++i) {
    sums.row(static_cast<Eigen::Index>(a.labels[i])) += points.row(static_cast<Eigen::Index>(i));
    ++counts[a.labels[i]];
  }
  std::vector<bool> used(a.labels.size(), false);
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] > 0) {
      centroids.row(static_cast<Eigen::Index>(c)) = sums.row(static_cast<Eigen::Index>(c)) / static_cast<double>(counts[c]);
      continue;
    }
    std::size_t far = a.labels.size();
    for (std::size_t i = 0; i < a.labels.size(); ++i) {
      if (used[i]) continue;
      if (far == a.labels.size() || a.distances[i] > a.distances[far]) far = i;
    }
    used[far] = true;
    centroids.row(static_cast<Eigen::Index>(c)) = points.row(static_cast<Eigen::Index>(far));
  }
}

}  // namespace

void PrototypeBank::finalize() {
  centroids = normalize_rows(centroids);
  normalized = true;
}

PrototypeBank kmeans(const Matrix& points, std::size_t k, std::uint64_t seed, std::size_t max_iters) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (k == 0) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
  if (k > n) {
    throw Error(ErrorCode::KExceedsN, "k=" + std::to_string(k) + " exceeds n=" + std::to_string(n));
  }
  if (!points.allFinite()) throw Error(ErrorCode::NonFiniteValue, "non-finite point coordinates");

  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return row_less(points, a, b); });
  Matrix sorted(points.rows(), points.cols());
  for (std::size_t i = 0; i < n; ++i) sorted.row(static_cast<Eigen::Index>(i)) = points.row(order[i]);

  std::size_t distinct = n > 0 ? 1 : 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (!row_equal(sorted, static_cast<Eigen::Index>(i - 1), static_cast<Eigen::Index>(i))) ++distinct;
  }
  if (distinct < k) {
    throw Error(ErrorCode::DegeneratePoints, std::to_string(distinct) + " distinct points cannot seed k=" +
                                                 std::to_string(k) + " distinct centroids");
  }

  std::mt19937_64 rng(seed);
  PrototypeBank bank;
  bank.k = k;
  bank.seed = seed;
  bank.centroids = seed_plus_plus(sorted, k, rng);

  Assignment current = assign(sorted, bank.centroids);
  bank.inertia_trace.push_back(current.inertia);
  for (std::size_t it = 0; it < max_iters; ++it) {
    update_centroids(sorted, current, bank.centroids);
    ++bank.iterations;
    Assignment next = assign(sorted, bank.centroids);
    bank.inertia_trace.push_back(next.inertia);
    const bool unchanged = next.labels == current.labels;
    current = std::move(next);
    if (unchanged) break;
  }
  bank.inertia = current.inertia;
  bank.assignments.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) bank.assignments[static_cast<std::size_t>(order[i])] = current.labels[i];
  return bank;
}

Matrix prototype_logits(const Matrix& embeddings, const PrototypeBank& bank) {
  if (embeddings.cols() != bank.centroids.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "embedding dimension " + std::to_string(embeddings.cols()) +
                                              " vs prototype dimension " + std::to_string(bank.centroids.cols()));
  }
  return embeddings * bank.centroids.transpose();
}

Matrix project_scores(const Matrix& embeddings, const PrototypeBank& bank) {
  return softmax_rows(prototype_logits(embeddings, bank));
}

AssignmentPlan sinkhorn(const Matrix& scores, double epsilon, std::size_t iters) {
  if (!(epsilon > 0.0)) throw Error(ErrorCode::NonPositiveEpsilon, "epsilon must be > 0");
  if (iters == 0) throw Error(ErrorCode::InvalidArgument, "sinkhorn needs at least one iteration");
  if (scores.rows() == 0 || scores.cols() == 0) throw Error(ErrorCode::ShapeMismatch, "empty score matrix");
  if (!scores.allFinite()) throw Error(ErrorCode::NumericOverflow, "non-finite scores");

  const Eigen::Index m = scores.rows();
  const Eigen::Index k = scores.cols();
  const double log_row_mass = -std::log(static_cast<double>(m));
  const double log_col_mass = -std::log(static_cast<double>(k));
  const double target_col = static_cast<double>(m) / static_cast<double>(k);

  // Log-domain kernel. Shifting by the global max keeps exp(.) in range and,
  // being a uniform rescale, leaves every iterate unchanged.
  Matrix log_plan = ((scores.array() - scores.maxCoeff()) / epsilon).matrix();
  if (!log_plan.allFinite()) throw Error(ErrorCode::NumericOverflow, "scores / epsilon overflowed");

  auto lse = [](auto&& xs) {
    const double mx = xs.maxCoeff();
    return mx + std::log((xs.array() - mx).exp().sum());
  };
  auto normalize_rows_log = [&] {
    for (Eigen::Index i = 0; i < m; ++i) log_plan.row(i).array() += log_row_mass - lse(log_plan.row(i));
  };
  // Column deviations |colsum_j - m/k| of the plan scaled to row mass 1.
  auto column_deviation = [&] {
    Vector dev(k);
    for (Eigen::Index j = 0; j < k; ++j) {
      dev(j) = std::abs((log_plan.col(j).array().exp() * static_cast<double>(m)).sum() - target_col);
    }
    return dev;
  };

  AssignmentPlan out;
  out.epsilon = epsilon;
  out.residual_trace.reserve(iters);
  for (std::size_t round = 0; round < iters; ++round) {
    for (Eigen::Index j = 0; j < k; ++j) log_plan.col(j).array() += log_col_mass - lse(log_plan.col(j));
    normalize_rows_log();
    out.residual_trace.push_back(column_deviation().sum());
  }
  normalize_rows_log();
  out.iterations = iters;
  out.plan = (log_plan.array() + std::log(static_cast<double>(m))).exp().matrix();
  if (!out.plan.allFinite()) throw Error(ErrorCode::NumericOverflow, "transport plan is not finite");
  out.marginal_error = column_deviation().maxCoeff();
  return out;
}

}  // namespace vsdalign
