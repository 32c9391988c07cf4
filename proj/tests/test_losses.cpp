#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "test_util.hpp"
#include "vsdalign/error.hpp"
#include "vsdalign/losses.hpp"
#include "vsdalign/softmax.hpp"

using namespace vsdalign;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::IoError;
}

}  // namespace

TEST(IsaLoss, InactiveHingesGiveZero) {
  Matrix v(2, 2), t(2, 2);
  v << 1, 0, 0, 1;
  t << 1, 0, 0, 1;
  const auto r = isa_loss(v, t, {0.2});
  EXPECT_EQ(r.loss, 0.0);
  EXPECT_EQ(r.grad_images.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(r.grad_texts.cwiseAbs().maxCoeff(), 0.0);
}

TEST(IsaLoss, SingletonBatchIsZero) {
  Matrix v(1, 3), t(1, 3);
  v << 1, 0, 0;
  t << 0, 1, 0;
  EXPECT_EQ(isa_loss(v, t, {0.2}).loss, 0.0);
}

TEST(IsaLoss, MatchesDefinitionAndFiniteDifferences) {
  std::mt19937_64 rng(21);
  Matrix v = testutil::unit_rows(rng, 4, 6), t = testutil::unit_rows(rng, 4, 6);
  const IsaConfig cfg{0.2};
  const auto r = isa_loss(v, t, cfg);
  EXPECT_NEAR(r.loss, oracle::isa(v, t, 0.2), 1e-13);
  EXPECT_GT(r.loss, 0.0);

  auto f = [&] { return oracle::isa(v, t, 0.2); };
  auto selection = [&] { return isa_loss(v, t, cfg).selection; };
  std::size_t compared = 0;
  for (Matrix* x : {&v, &t}) {
    const Matrix& grad = x == &v ? r.grad_images : r.grad_texts;
    for (Eigen::Index i = 0; i < 4; ++i) {
      for (Eigen::Index j = 0; j < 6; ++j) {
        // Only compare where both probes keep the same negatives and hinges.
        const double orig = (*x)(i, j);
        (*x)(i, j) = orig + 1e-6;
        const bool up = selection() == r.selection;
        (*x)(i, j) = orig - 1e-6;
        const bool down = selection() == r.selection;
        (*x)(i, j) = orig;
        if (!(up && down)) continue;
        EXPECT_LE(testutil::rel_err(grad(i, j), testutil::central_diff(*x, i, j, 1e-6, f)), 1e-5);
        ++compared;
      }
    }
  }
  EXPECT_GT(compared, 40u);
}

TEST(IsaLossProperties, NonNegativeAndZeroExactlyWhenSeparated) {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 300; ++trial) {
    const Eigen::Index m = 2 + trial % 7, d = 2 + trial % 5;
    Matrix v = testutil::unit_rows(rng, m, d);
    // Mix texts toward their images so both regimes occur.
    const double pull = (trial % 3) * 2.0;
    Matrix t = normalize_rows(testutil::gaussian(rng, m, d) + pull * v);
    const double margin = 0.05 * (trial % 5);
    const auto r = isa_loss(v, t, {margin});
    EXPECT_GE(r.loss, 0.0);
    bool separated = true;
    for (Eigen::Index i = 0; i < m; ++i) {
      const double pos = oracle::cosine(v, i, t, i);
      for (Eigen::Index j = 0; j < m; ++j) {
        if (j == i) continue;
        if (pos - oracle::cosine(v, i, t, j) < margin || pos - oracle::cosine(v, j, t, i) < margin) separated = false;
      }
    }
    EXPECT_EQ(r.loss == 0.0, separated) << "trial " << trial;
  }
}

TEST(IsaLossProperties, HardestNegativeMatchesExhaustiveScan) {
  std::mt19937_64 rng(23);
  for (Eigen::Index m : {2, 3, 7, 16, 33, 64}) {
    const Matrix v = testutil::unit_rows(rng, m, 5), t = testutil::unit_rows(rng, m, 5);
    const auto r = isa_loss(v, t, {0.2});
    for (Eigen::Index i = 0; i < m; ++i) {
      ASSERT_TRUE(r.selection.hardest_text[i].has_value());
      EXPECT_EQ(*r.selection.hardest_text[i], oracle::hardest_text(v, t, i));
      // Text-anchor side: swap roles.
      EXPECT_EQ(*r.selection.hardest_image[i], oracle::hardest_text(t, v, i));
    }
  }
}

TEST(IsaLossProperties, ScaleInvariantRows) {
  std::mt19937_64 rng(24);
  const Matrix v = testutil::unit_rows(rng, 5, 4), t = testutil::unit_rows(rng, 5, 4);
  Matrix vs = v, ts = t;
  vs.row(1) *= 7.5;
  ts.row(3) *= 0.01;
  EXPECT_NEAR(isa_loss(vs, ts, {0.2}).loss, isa_loss(v, t, {0.2}).loss, 1e-13);
  EXPECT_NEAR(isa_loss(normalize_rows(vs), normalize_rows(ts), {0.2}).loss, isa_loss(v, t, {0.2}).loss, 1e-13);
}

TEST(IsaLoss, GroupsExcludeSameImageCaptions) {
  Matrix v(3, 2), t(3, 2);
  v << 1, 0, 1, 0, 0, 1;
  t << 1, 0, 1, 0, 0, 1;
  const std::vector<std::size_t> groups{0, 0, 1};
  const auto with = isa_loss(v, t, {0.2}, groups);
  EXPECT_EQ(with.loss, 0.0);
  EXPECT_EQ(*with.selection.hardest_text[0], 2u);
  EXPECT_GT(isa_loss(v, t, {0.2}).loss, 0.0);  // rows 0 and 1 collide without groups
}

TEST(IsaLoss, Errors) {
  EXPECT_EQ(code_of([] { isa_loss(Matrix::Ones(2, 2), Matrix::Ones(3, 2), {0.2}); }), ErrorCode::ShapeMismatch);
  EXPECT_EQ(code_of([] { isa_loss(Matrix::Ones(2, 2), Matrix::Ones(2, 2), {-1.0}); }), ErrorCode::InvalidArgument);
}

TEST(PsaLoss, SelfTargetsGiveEntropy) {
  std::mt19937_64 rng(31);
  const Matrix si = testutil::gaussian(rng, 3, 4), st = testutil::gaussian(rng, 3, 4);
  const double tau = 0.5;
  const Matrix pi = softmax_rows(si / tau), pt = softmax_rows(st / tau);
  const auto r = psa_loss(si, st, pi, pt, {tau, LogitMode::raw_scores});
  auto mean_entropy = [](const Matrix& p) {
    double h = 0.0;
    for (Eigen::Index i = 0; i < p.rows(); ++i)
      for (Eigen::Index j = 0; j < p.cols(); ++j) h -= p(i, j) * std::log(p(i, j));
    return h / static_cast<double>(p.rows());
  };
  EXPECT_NEAR(r.loss_img, mean_entropy(pi), 1e-12);
  EXPECT_NEAR(r.loss_txt, mean_entropy(pt), 1e-12);
}

TEST(PsaLoss, UniformGivesTwoLogK) {
  for (double tau : {0.05, 0.1, 1.0, 7.0}) {
    for (Eigen::Index k : {1, 3, 8}) {
      const Matrix s = Matrix::Constant(5, k, 0.3);
      const Matrix u = Matrix::Constant(5, k, 1.0 / static_cast<double>(k));
      for (auto mode : {LogitMode::raw_scores, LogitMode::literal_double_softmax}) {
        EXPECT_NEAR(psa_loss(s, s, u, u, {tau, mode}).loss, 2.0 * std::log(static_cast<double>(k)), 1e-12);
      }
    }
  }
}

TEST(PsaLoss, MatchesDoubleSumAndFiniteDifferences) {
  std::mt19937_64 rng(32);
  for (auto mode : {LogitMode::raw_scores, LogitMode::literal_double_softmax}) {
    Matrix si = testutil::gaussian(rng, 3, 4), st = testutil::gaussian(rng, 3, 4);
    const Matrix di = testutil::distributions(rng, 3, 4), dt = testutil::distributions(rng, 3, 4);
    const PsaConfig cfg{0.1, mode};
    const bool literal = mode == LogitMode::literal_double_softmax;
    const auto r = psa_loss(si, st, di, dt, cfg);
    auto f = [&] { return oracle::swapped_ce(si, di, 0.1, literal) + oracle::swapped_ce(st, dt, 0.1, literal); };
    EXPECT_NEAR(r.loss, f(), 1e-12);
    for (Eigen::Index i = 0; i < 3; ++i) {
      for (Eigen::Index j = 0; j < 4; ++j) {
        EXPECT_LE(testutil::rel_err(r.grad_scores_img(i, j), testutil::central_diff(si, i, j, 1e-6, f)), 1e-5);
        EXPECT_LE(testutil::rel_err(r.grad_scores_txt(i, j), testutil::central_diff(st, i, j, 1e-6, f)), 1e-5);
      }
    }
  }
}

TEST(PsaLossProperties, GibbsInequalityPerRow) {
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index k = 1 + trial % 6;
    const Matrix s = testutil::gaussian(rng, 1, k), d = testutil::distributions(rng, 1, k);
    const auto r = psa_loss(s, s, d, d, {0.1 + 0.1 * (trial % 4)});
    double entropy = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) entropy -= d(0, j) * std::log(d(0, j));
    EXPECT_GE(r.loss, 0.0);
    EXPECT_GE(r.loss_img, entropy - 1e-12);
  }
}

TEST(PsaLossProperties, RawGradientClosedForm) {
  std::mt19937_64 rng(34);
  const Matrix s = testutil::gaussian(rng, 5, 3), d = testutil::distributions(rng, 5, 3);
  const double tau = 0.1;
  const auto r = psa_loss(s, s, d, d, {tau, LogitMode::raw_scores});
  const Matrix expected = (softmax_rows(s / tau) - d) / (5.0 * tau);
  EXPECT_LE((r.grad_scores_img - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(PsaLoss, Errors) {
  const Matrix s = Matrix::Zero(2, 3);
  const Matrix u = Matrix::Constant(2, 3, 1.0 / 3.0);
  Matrix bad = u;
  bad(1, 0) += 1e-3;
  EXPECT_EQ(code_of([&] { psa_loss(s, s, bad, u, {0.1}); }), ErrorCode::RowNotNormalized);
  EXPECT_EQ(code_of([&] { psa_loss(s, s, u, bad, {0.1}); }), ErrorCode::RowNotNormalized);
  EXPECT_EQ(code_of([&] { psa_loss(s, s, u, u, {0.0}); }), ErrorCode::NonPositiveTemperature);
  EXPECT_EQ(code_of([&] { psa_loss(s, s, u, u, {-1.0}); }), ErrorCode::NonPositiveTemperature);
  EXPECT_EQ(code_of([&] { psa_loss(s, Matrix::Zero(3, 3), u, u, {0.1}); }), ErrorCode::ShapeMismatch);
}

TEST(TotalLoss, UnitWeights) {
  EXPECT_EQ(total_loss(0.0, 0.0), 0.0);
  EXPECT_EQ(total_loss(1.5, 2.5), 4.0);
  std::mt19937_64 rng(35);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  const double a = u(rng), b = u(rng);
  EXPECT_EQ(total_loss(a, b), a + b);
}
