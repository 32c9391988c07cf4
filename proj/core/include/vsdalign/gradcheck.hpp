#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace vsdalign {

struct GradcheckOptions {
  std::uint64_t seed = 7;
  std::size_t trials = 100;
  double step = 1e-6;        // central-difference step
  double tolerance = 1e-4;   // max relative error
  std::size_t max_dim = 8;
  std::size_t max_batch = 6;
  std::size_t max_prototypes = 5;
};

/// Aggregate over all trials for one gradient.
struct GradcheckCase {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t checked = 0;  // components compared
  std::size_t skipped = 0;  // components where a finite-difference probe crossed a kink
};

struct GradcheckReport {
  std::vector<GradcheckCase> cases;
  std::size_t trials = 0;
  double max_rel_error = 0.0;
  bool passed = false;
};

/// Relative error between two gradient tensors:
/// max_i |a_i - b_i| / max(max_i |a_i|, max_i |b_i|, 1e-4).
double gradient_rel_error(const std::vector<double>& analytic, const std::vector<double>& numeric);

/// Compares analytic gradients of gated fusion, renormalization, ISA, PSA
/// (both logit modes) and the full batch objective w.r.t. the gate
/// parameters against central finite differences on seeded random instances.
GradcheckReport run_gradcheck(const GradcheckOptions& opts);

}  // namespace vsdalign
