#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "vsdalign/types.hpp"

namespace vsdalign {

/// K-means centroids used as prototypes.
struct PrototypeBank {
  Matrix centroids;  // k x d
  std::size_t k = 0;
  double inertia = 0.0;  // within-cluster sum of squares at the last assignment
  std::uint64_t seed = 0;
  std::size_t iterations = 0;           // Lloyd update steps performed
  std::vector<double> inertia_trace;    // inertia after every assignment step
  std::vector<std::size_t> assignments;  // cluster per input point, input order
  bool normalized = false;

  /// Unit-normalizes every centroid.
  void finalize();
};

/// Lloyd's algorithm from a k-means++ start.
///
/// Points are put into a canonical (lexicographic) order before seeding, so
/// the result depends only on the multiset of points and the seed, not on
/// input order. Assignment ties go to the lowest centroid index. An empty
/// cluster is re-seeded at the point farthest from its current centroid.
/// Stops after `max_iters` updates or when assignments stop changing.
PrototypeBank kmeans(const Matrix& points, std::size_t k, std::uint64_t seed, std::size_t max_iters = 100);

/// Raw prototype scores E * P^T (m x k).
Matrix prototype_logits(const Matrix& embeddings, const PrototypeBank& bank);

/// Row-wise softmax of E * P^T.
Matrix project_scores(const Matrix& embeddings, const PrototypeBank& bank);

/// Entropic transport plan with equipartition marginals, rescaled so each
/// row is a distribution over prototypes.
struct AssignmentPlan {
  Matrix plan;  // m x k
  double epsilon = 0.0;
  std::size_t iterations = 0;
  double marginal_error = 0.0;           // max_j |colsum_j - m/k| of the returned plan
  std::vector<double> residual_trace;    // sum_j |colsum_j - m/k| after each round; never increases
};

/// Sinkhorn-Knopp in the log domain. Starting from exp(scores / epsilon),
/// each round rescales columns to mass 1/k, then rows to mass 1/m. A final
/// row rescale precedes the x m scaling.
AssignmentPlan sinkhorn(const Matrix& scores, double epsilon, std::size_t iters);

}  // namespace vsdalign
