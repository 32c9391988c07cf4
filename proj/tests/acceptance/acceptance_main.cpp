// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <json.hpp>
#include <random>
#include <sstream>
#include <string>

#include "../oracles.hpp"
#include "../test_util.hpp"
#include "cli.hpp"
#include "vsdalign/binary_io.hpp"
#include "vsdalign/checkpoint.hpp"
#include "vsdalign/gradcheck.hpp"
#include "vsdalign/parallel.hpp"
#include "vsdalign/prototypes.hpp"
#include "vsdalign/retrieval_eval.hpp"
#include "vsdalign/synth.hpp"
#include "vsdalign/trainer.hpp"

namespace fs = std::filesystem;
using namespace vsdalign;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      detail = what;
    }
  }
};

int failures = 0;

void criterion(const char* name, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o.ok = false;
    o.detail = std::string("exception: ") + e.what();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (budget_s > 0 && secs >= budget_s) o.require(false, "runtime " + std::to_string(secs) + " s over budget");
  std::printf("%s  %-28s %7.2fs  %s\n", o.ok ? "PASS" : "FAIL", name, secs, o.detail.c_str());
  std::fflush(stdout);
  if (!o.ok) ++failures;
}

std::string fmt(const char* f, double x) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

int cli(const std::vector<std::string>& args, std::string* out = nullptr) {
  std::ostringstream o, e;
  const int code = cli::run(args, o, e);
  if (out) *out = o.str();
  if (code != 0) std::fprintf(stderr, "%s", e.str().c_str());
  return code;
}

std::vector<double> epoch_means(const fs::path& log) {
  const auto bytes = io::read_file(log);
  std::istringstream in(std::string(bytes.begin(), bytes.end()));
  std::vector<double> sum, count;
  std::string line;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    const auto e = j["epoch"].get<std::size_t>();
    if (sum.size() <= e) {
      sum.resize(e + 1, 0.0);
      count.resize(e + 1, 0.0);
    }
    sum[e] += j["total"].get<double>();
    count[e] += 1;
  }
  for (std::size_t e = 0; e < sum.size(); ++e) sum[e] /= count[e];
  return sum;
}

Outcome gradient_suite() {
  Outcome o;
  GradcheckOptions opts;  // d <= 8, m <= 6, k <= 5, h = 1e-6
  opts.trials = 100;
  const auto r = run_gradcheck(opts);
  o.require(r.trials >= 100, "fewer than 100 instances");
  o.require(r.max_rel_error <= 1e-4, fmt("max relative error %.3e", r.max_rel_error));
  o.require(r.passed, "gradcheck reported failure");
  std::size_t checked = 0;
  for (const auto& c : r.cases) checked += c.checked;
  if (o.ok) o.detail = fmt("max rel error %.2e", r.max_rel_error) + " over " + std::to_string(checked) + " components";
  return o;
}

Outcome sinkhorn_constraints() {
  Outcome o;
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> size(1, 32);
  double worst_col = 0.0, worst_row = 0.0, worst_rise = 0.0;
  for (int t = 0; t < 50; ++t) {
    const Eigen::Index m = size(rng), k = size(rng);
    // Prototype-style scores: products of unit vectors in the benchmark dimension.
    const Matrix s = normalize_rows(testutil::gaussian(rng, m, 64)) * testutil::unit_rows(rng, k, 64).transpose();
    const auto r = sinkhorn(s, 0.05, 100);
    for (Eigen::Index j = 0; j < k; ++j)
      worst_col = std::max(worst_col, std::abs(r.plan.col(j).sum() - static_cast<double>(m) / static_cast<double>(k)));
    for (Eigen::Index i = 0; i < m; ++i) worst_row = std::max(worst_row, std::abs(r.plan.row(i).sum() - 1.0));
    // Non-increasing up to rounding: once converged the residual sits at ~1e-15.
    for (std::size_t i = 1; i < r.residual_trace.size(); ++i) {
      const double rise = r.residual_trace[i] - r.residual_trace[i - 1];
      worst_rise = std::max(worst_rise, rise);
      o.require(rise <= 1e-12, "residual increased in instance " + std::to_string(t));
    }
  }
  o.require(worst_col <= 1e-4, fmt("column deviation %.3e", worst_col));
  o.require(worst_row <= 1e-6, fmt("row deviation %.3e", worst_row));
  if (o.ok) {
    o.detail = fmt("col dev %.2e", worst_col) + fmt(", row dev %.2e", worst_row) +
               fmt(", largest residual rise %.1e", std::max(worst_rise, 0.0));
  }
  return o;
}

Outcome kmeans_properties() {
  Outcome o;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::mt19937_64 rng(seed);
    const Eigen::Index n = 20 + static_cast<Eigen::Index>(seed * 7 % 200);
    const auto k = 1 + seed % 12;
    const auto bank = kmeans(testutil::gaussian(rng, n, 1 + static_cast<Eigen::Index>(seed % 16)), k, seed);
    for (std::size_t i = 1; i < bank.inertia_trace.size(); ++i)
      o.require(bank.inertia_trace[i] <= bank.inertia_trace[i - 1], "inertia rose, seed " + std::to_string(seed));
  }
  std::mt19937_64 rng(1);
  o.require(kmeans(testutil::gaussian(rng, 17, 5), 17, 0).inertia == 0.0, "k=n inertia not 0");

  Matrix pts(6, 2);
  pts << 0, 0, 0, 1, 1, 0, 10, 10, 10, 11, 11, 10;
  const auto bank = kmeans(pts, 2, 0);
  Matrix expect(2, 2);
  expect << 1.0 / 3, 1.0 / 3, 31.0 / 3, 31.0 / 3;
  for (Eigen::Index c = 0; c < 2; ++c) {
    const double d = std::min((bank.centroids.row(c) - expect.row(0)).norm(), (bank.centroids.row(c) - expect.row(1)).norm());
    o.require(d <= 1e-12, fmt("blob mean off by %.3e", d));
  }
  if (o.ok) o.detail = "50 seeded instances monotone";
  return o;
}

Outcome retrieval_oracle() {
  Outcome o;
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<std::size_t> size(1, 64);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = size(rng);
    std::vector<std::size_t> parent;
    for (std::size_t i = 0; i < n; ++i)
      for (int c = 0; c < 5; ++c) parent.push_back(i);
    Matrix sim = testutil::gaussian(rng, static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(5 * n));
    if (t % 4 == 0) sim = (sim * 2.0).array().round().matrix();
    const auto fast = recall_at_k(sim, parent);
    const auto slow = RetrievalReport::from_recalls(oracle::recall_bruteforce(sim, parent));
    o.require(fast == slow, "mismatch on instance " + std::to_string(t));
  }
  const auto row = RetrievalReport::from_recalls({86.1, 97.9, 98.5, 71.9, 91.6, 94.8});
  o.require(std::abs(row.rsum - 540.8) < 1e-9, fmt("rsum %.12f", row.rsum));
  o.require(row.to_table().find("540.8") != std::string::npos, "table does not print 540.8");
  if (o.ok) o.detail = "200 instances equal; rSum 540.8";
  return o;
}

Outcome end_to_end(const fs::path& dir) {
  Outcome o;
  const std::size_t saved = thread_count();
  set_thread_count(1);
  const std::string data = (dir / "data").string();
  o.require(cli({"synth", "--out", data, "--n-images", "256", "--d", "64", "--vsd-fidelity", "0.9", "--noise-sigma",
                 "0.6", "--seed", "42"}) == 0,
            "synth failed");
  const std::vector<std::string> hyper{"--batch-size", "32", "--k", "16", "--lr", "1e-3", "--margin", "0.2", "--tau", "0.1"};
  auto train_args = [&](const std::string& out, const std::string& log) {
    std::vector<std::string> a{"train", "--data", data, "--out", out, "--epochs", "10", "--log", log};
    a.insert(a.end(), hyper.begin(), hyper.end());
    return a;
  };
  std::vector<std::string> init{"train", "--data", data, "--out", (dir / "init.ckpt").string(), "--epochs", "10", "--init-only"};
  init.insert(init.end(), hyper.begin(), hyper.end());
  o.require(cli(init) == 0, "init-only failed");
  o.require(cli(train_args((dir / "a.ckpt").string(), (dir / "a.jsonl").string())) == 0, "train failed");
  o.require(cli(train_args((dir / "b.ckpt").string(), (dir / "b.jsonl").string())) == 0, "second train failed");
  set_thread_count(saved);
  if (!o.ok) return o;

  std::string ej_init, ej_trained;
  cli({"eval", "--data", data, "--checkpoint", (dir / "init.ckpt").string(), "--json"}, &ej_init);
  cli({"eval", "--data", data, "--checkpoint", (dir / "a.ckpt").string(), "--json"}, &ej_trained);
  const double r0 = nlohmann::json::parse(ej_init)["rsum"].get<double>();
  const double r1 = nlohmann::json::parse(ej_trained)["rsum"].get<double>();
  const auto losses = epoch_means(dir / "a.jsonl");
  o.require(r1 > r0, fmt("trained rSum %.1f", r1) + fmt(" not above untrained %.1f", r0));
  o.require(losses.size() == 10 && losses.back() < losses.front(), "final-epoch loss not below first");
  o.require(io::read_file(dir / "a.ckpt") == io::read_file(dir / "b.ckpt"), "checkpoints differ across runs");
  o.require(io::read_file(dir / "a.jsonl") == io::read_file(dir / "b.jsonl"), "loss logs differ across runs");
  if (o.ok) {
    o.detail = fmt("rSum %.1f", r0) + fmt(" -> %.1f", r1) + fmt("; loss %.3f", losses.front()) +
               fmt(" -> %.3f", losses.back());
  }
  return o;
}

Outcome determinism_and_resume() {
  Outcome o;
  SynthSpec spec;
  spec.n_images = 96;
  spec.captions_per_image = 2;
  spec.d = 16;
  spec.noise_sigma = 0.4;
  spec.seed = 5;
  const AlignedData data = align(generate_synthetic(spec));
  TrainConfig cfg;
  cfg.batch_size = 16;
  cfg.k = 8;
  cfg.seed = 11;
  auto with_epochs = [&](std::size_t e) {
    TrainConfig c = cfg;
    c.epochs = e;
    return c;
  };
  const auto a = train(data, with_epochs(4));
  const auto b = train(data, with_epochs(4));
  o.require(encode_checkpoint(a.checkpoint) == encode_checkpoint(b.checkpoint), "checkpoints not bitwise identical");

  const auto half = train(data, with_epochs(2));
  const Checkpoint reloaded = decode_checkpoint(encode_checkpoint(half.checkpoint));
  const auto rest = train(data, with_epochs(2), reloaded);
  auto joined = half.history;
  joined.insert(joined.end(), rest.history.begin(), rest.history.end());
  o.require(joined == a.history, "resumed loss trace differs");
  // The resumed run records its own length (2); everything else must match.
  Checkpoint resumed = rest.checkpoint;
  resumed.config.epochs = a.checkpoint.config.epochs;
  o.require(encode_checkpoint(resumed) == encode_checkpoint(a.checkpoint), "resumed checkpoint differs");
  if (o.ok) o.detail = std::to_string(a.history.size()) + " batch losses identical";
  return o;
}

}  // namespace

int main() {
  testutil::TempDir dir;
  criterion("gradient suite", 10.0, gradient_suite);
  criterion("sinkhorn constraints", 5.0, sinkhorn_constraints);
  criterion("k-means", 5.0, kmeans_properties);
  criterion("retrieval oracle", 10.0, retrieval_oracle);
  criterion("end-to-end synthetic", 60.0, [&] { return end_to_end(dir.path()); });
  criterion("determinism and resume", 0.0, determinism_and_resume);
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
