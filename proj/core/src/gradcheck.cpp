#include "vsdalign/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "vsdalign/embedding_store.hpp"
#include "vsdalign/fusion.hpp"
#include "vsdalign/losses.hpp"
#include "vsdalign/prototypes.hpp"
#include "vsdalign/trainer.hpp"

namespace vsdalign {
namespace {

class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}

  std::size_t between(std::size_t lo, std::size_t hi) {
    return lo + static_cast<std::size_t>(rng_() % (hi - lo + 1));
  }
  double normal() { return normal_(rng_); }
  Matrix gaussian(Eigen::Index r, Eigen::Index c, double scale = 1.0) {
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * normal();
    return m;
  }
  Matrix unit_rows(Eigen::Index r, Eigen::Index c) { return normalize_rows(gaussian(r, c)); }
  Matrix distributions(Eigen::Index r, Eigen::Index c) {
    Matrix m = gaussian(r, c).array().exp().matrix();
    for (Eigen::Index i = 0; i < r; ++i) m.row(i) /= m.row(i).sum();
    return m;
  }

 private:
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_;
};

std::vector<double> to_vec(const Matrix& m) { return {m.data(), m.data() + m.size()}; }
std::vector<double> to_vec(const Vector& v) { return {v.data(), v.data() + v.size()}; }

// Central differences of f over every entry of x. `stable(x_plus, x_minus)`
// reports whether both probes stay on the same smooth piece; components that
// fail it come back as NaN.
std::vector<double> numeric_gradient(double* x, std::size_t n, double h, const std::function<double()>& f,
                                     const std::function<bool()>& stable = {}) {
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double orig = x[i];
    x[i] = orig + h;
    const double fp = f();
    const bool sp = !stable || stable();
    x[i] = orig - h;
    const double fm = f();
    const bool sm = !stable || stable();
    x[i] = orig;
    g[i] = (sp && sm) ? (fp - fm) / (2.0 * h) : std::nan("");
  }
  return g;
}

void record(GradcheckCase& c, std::vector<double> analytic, std::vector<double> numeric) {
  std::vector<double> a, n;
  for (std::size_t i = 0; i < numeric.size(); ++i) {
    if (std::isnan(numeric[i])) {
      ++c.skipped;
      continue;
    }
    a.push_back(analytic[i]);
    n.push_back(numeric[i]);
  }
  c.checked += a.size();
  if (!a.empty()) c.max_rel_error = std::max(c.max_rel_error, gradient_rel_error(a, n));
}

}  // namespace

double gradient_rel_error(const std::vector<double>& analytic, const std::vector<double>& numeric) {
  double diff = 0.0, scale = 1e-4;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff = std::max(diff, std::abs(analytic[i] - numeric[i]));
    scale = std::max({scale, std::abs(analytic[i]), std::abs(numeric[i])});
  }
  return diff / scale;
}

GradcheckReport run_gradcheck(const GradcheckOptions& opts) {
  GradcheckReport report;
  GradcheckCase fusion_in{"fusion/inputs"}, fusion_par{"fusion/params"}, renorm{"renormalize"}, isa{"isa"},
      psa_raw{"psa/raw_scores"}, psa_lit{"psa/literal_double_softmax"}, pipeline{"objective/params"};
  Sampler s(opts.seed);
  const double h = opts.step;

  for (std::size_t trial = 0; trial < opts.trials; ++trial) {
    const auto d = static_cast<Eigen::Index>(s.between(2, opts.max_dim));
    const auto m = static_cast<Eigen::Index>(s.between(2, opts.max_batch));
    const auto k = static_cast<Eigen::Index>(s.between(1, opts.max_prototypes));

    {  // Gated fusion: L = sum(G .* fused).
      Matrix p = s.gaussian(m, d), a = s.gaussian(m, d), G = s.gaussian(m, d);
      GateParams gp{s.gaussian(2 * d, 1, 0.5).col(0), s.normal()};
      auto f = [&] { return (G.array() * gated_fuse(p, a, gp).fused.array()).sum(); };
      const auto grads = gated_fuse_backward(G, gated_fuse(p, a, gp));
      auto in_a = to_vec(grads.primary), in_n = numeric_gradient(p.data(), p.size(), h, f);
      auto aux_a = to_vec(grads.auxiliary), aux_n = numeric_gradient(a.data(), a.size(), h, f);
      in_a.insert(in_a.end(), aux_a.begin(), aux_a.end());
      in_n.insert(in_n.end(), aux_n.begin(), aux_n.end());
      record(fusion_in, in_a, in_n);
      auto par_a = to_vec(grads.weights);
      par_a.push_back(grads.bias);
      auto par_n = numeric_gradient(gp.weights.data(), gp.weights.size(), h, f);
      par_n.push_back(numeric_gradient(&gp.bias, 1, h, f)[0]);
      record(fusion_par, par_a, par_n);
    }
    {  // Row renormalization: L = sum(G .* x/|x|).
      Matrix x = s.gaussian(m, d), G = s.gaussian(m, d);
      auto f = [&] { return (G.array() * normalize_rows(x).array()).sum(); };
      record(renorm, to_vec(renormalize_backward(G, x)), numeric_gradient(x.data(), x.size(), h, f));
    }
    {  // ISA, skipping probes that change the selected negatives or active hinges.
      Matrix v = s.unit_rows(m, d), t = s.unit_rows(m, d);
      const IsaConfig cfg{0.2, Similarity::cosine};
      const IsaResult base = isa_loss(v, t, cfg);
      IsaSelection probe;
      auto f = [&] {
        auto r = isa_loss(v, t, cfg);
        probe = r.selection;
        return r.loss;
      };
      auto stable = [&] { return probe == base.selection; };
      auto ga = to_vec(base.grad_images), gn = numeric_gradient(v.data(), v.size(), h, f, stable);
      auto ta = to_vec(base.grad_texts), tn = numeric_gradient(t.data(), t.size(), h, f, stable);
      ga.insert(ga.end(), ta.begin(), ta.end());
      gn.insert(gn.end(), tn.begin(), tn.end());
      record(isa, ga, gn);
    }
    for (auto mode : {LogitMode::raw_scores, LogitMode::literal_double_softmax}) {
      Matrix si = s.gaussian(m, k), st = s.gaussian(m, k);
      const Matrix di = s.distributions(m, k), dt = s.distributions(m, k);
      const PsaConfig cfg{0.1, mode};
      const PsaResult base = psa_loss(si, st, di, dt, cfg);
      auto f = [&] { return psa_loss(si, st, di, dt, cfg).loss; };
      auto a = to_vec(base.grad_scores_img), n = numeric_gradient(si.data(), si.size(), h, f);
      auto a2 = to_vec(base.grad_scores_txt), n2 = numeric_gradient(st.data(), st.size(), h, f);
      a.insert(a.end(), a2.begin(), a2.end());
      n.insert(n.end(), n2.begin(), n2.end());
      record(mode == LogitMode::raw_scores ? psa_raw : psa_lit, a, n);
    }
    {  // Whole batch objective w.r.t. the flat gate parameters, targets frozen.
      BatchInputs batch{s.unit_rows(m, d), s.unit_rows(m, d), s.unit_rows(m, d), s.unit_rows(m, d), {}};
      for (Eigen::Index i = 0; i < m; ++i) batch.groups.push_back(static_cast<std::size_t>(i));
      PrototypeBank bank;
      bank.centroids = s.unit_rows(k, d);
      bank.k = static_cast<std::size_t>(k);
      bank.normalized = true;
      TrainConfig cfg;
      cfg.psa_on_raw = false;
      cfg.sinkhorn_iters = 3;
      Vector flat(4 * d + 2);
      for (Eigen::Index i = 0; i < flat.size(); ++i) flat(i) = 0.5 * s.normal();
      const auto dim = static_cast<std::size_t>(d);
      const BatchObjective base = batch_objective(FusionParams::unflatten(flat, dim), batch, bank, cfg);
      IsaSelection probe;
      auto f = [&] {
        auto r = batch_objective(FusionParams::unflatten(flat, dim), batch, bank, cfg, &base.targets);
        probe = r.isa_selection;
        return r.total;
      };
      auto stable = [&] { return probe == base.isa_selection; };
      record(pipeline, to_vec(base.grad), numeric_gradient(flat.data(), static_cast<std::size_t>(flat.size()), h, f, stable));
    }
  }

  report.trials = opts.trials;
  report.cases = {fusion_in, fusion_par, renorm, isa, psa_raw, psa_lit, pipeline};
  for (const auto& c : report.cases) report.max_rel_error = std::max(report.max_rel_error, c.max_rel_error);
  report.passed = report.max_rel_error <= opts.tolerance;
  return report;
}

}  // namespace vsdalign
