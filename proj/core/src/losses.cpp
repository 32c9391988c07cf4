#include "vsdalign/losses.hpp"

#include <cmath>
#include <string>

#include "vsdalign/embedding_store.hpp"
#include "vsdalign/error.hpp"
#include "vsdalign/fusion.hpp"
#include "vsdalign/softmax.hpp"

namespace vsdalign {
namespace {

std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

struct Direction {
  double loss = 0.0;
  Matrix grad_scores;
};

// One swapped-prediction direction: -(1/m) sum_ij targets_ij log softmax(logits)_ij.
Direction cross_entropy(const Matrix& scores, const Matrix& targets, const PsaConfig& cfg) {
  const auto m = static_cast<double>(scores.rows());
  const double tau = cfg.temperature;
  const bool literal = cfg.logit_mode == LogitMode::literal_double_softmax;

  const Matrix u = literal ? softmax_rows(scores) : Matrix();
  const Matrix logits = (literal ? u : scores) / tau;
  const Matrix log_p = log_softmax_rows(logits);
  const Matrix p = log_p.array().exp().matrix();

  Direction out;
  out.loss = -(targets.array() * log_p.array()).sum() / m;

  // d/dlogits of -sum_j D_j log p_j is p * sum_j D_j - D.
  Matrix grad_logits(scores.rows(), scores.cols());
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    grad_logits.row(i) = (p.row(i) * targets.row(i).sum() - targets.row(i)) / m;
  }
  const Matrix grad_in = grad_logits / tau;
  if (!literal) {
    out.grad_scores = grad_in;
    return out;
  }
  // Softmax vector-Jacobian product: u * (g - <g, u>).
  out.grad_scores.resize(scores.rows(), scores.cols());
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    const double dot = grad_in.row(i).dot(u.row(i));
    out.grad_scores.row(i) = u.row(i).array() * (grad_in.row(i).array() - dot);
  }
  return out;
}

void check_targets(const Matrix& targets, const char* name) {
  for (Eigen::Index i = 0; i < targets.rows(); ++i) {
    const double s = targets.row(i).sum();
    if (!(std::abs(s - 1.0) <= 1e-6)) {
      throw Error(ErrorCode::RowNotNormalized,
                  std::string(name) + " row " + std::to_string(i) + " sums to " + std::to_string(s));
    }
  }
}

}  // namespace

IsaResult isa_loss(const Matrix& images, const Matrix& texts, const IsaConfig& cfg,
                   std::span<const std::size_t> groups) {
  if (images.rows() != texts.rows() || images.cols() != texts.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "images " + shape(images) + " vs texts " + shape(texts));
  }
  if (!std::isfinite(cfg.margin) || cfg.margin < 0.0) {
    throw Error(ErrorCode::InvalidArgument, "margin must be finite and >= 0");
  }
  const Eigen::Index m = images.rows();
  if (!groups.empty() && groups.size() != static_cast<std::size_t>(m)) {
    throw Error(ErrorCode::ShapeMismatch, std::to_string(groups.size()) + " group labels for " +
                                              std::to_string(m) + " rows");
  }

  IsaResult r;
  r.grad_images = Matrix::Zero(m, images.cols());
  r.grad_texts = Matrix::Zero(m, texts.cols());
  auto& sel = r.selection;
  sel.hardest_text.assign(m, std::nullopt);
  sel.hardest_image.assign(m, std::nullopt);
  sel.active_i2t.assign(m, false);
  sel.active_t2i.assign(m, false);
  if (m < 2) return r;

  const Matrix v = normalize_rows(images);
  const Matrix t = normalize_rows(texts);
  const Matrix sim = v * t.transpose();

  auto is_negative = [&](Eigen::Index i, Eigen::Index j) {
    if (i == j) return false;
    return groups.empty() || groups[i] != groups[j];
  };

  Matrix grad_sim = Matrix::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      if (!is_negative(i, j)) continue;
      if (!sel.hardest_text[i] || sim(i, j) > sim(i, static_cast<Eigen::Index>(*sel.hardest_text[i])))
        sel.hardest_text[i] = static_cast<std::size_t>(j);
      if (!sel.hardest_image[i] || sim(j, i) > sim(static_cast<Eigen::Index>(*sel.hardest_image[i]), i))
        sel.hardest_image[i] = static_cast<std::size_t>(j);
    }
    if (sel.hardest_text[i]) {
      const auto j = static_cast<Eigen::Index>(*sel.hardest_text[i]);
      const double h = cfg.margin - sim(i, i) + sim(i, j);
      if (h > 0.0) {
        r.loss += h;
        sel.active_i2t[i] = true;
        grad_sim(i, i) -= 1.0;
        grad_sim(i, j) += 1.0;
      }
    }
    if (sel.hardest_image[i]) {
      const auto j = static_cast<Eigen::Index>(*sel.hardest_image[i]);
      const double h = cfg.margin - sim(i, i) + sim(j, i);
      if (h > 0.0) {
        r.loss += h;
        sel.active_t2i[i] = true;
        grad_sim(i, i) -= 1.0;
        grad_sim(j, i) += 1.0;
      }
    }
  }

  r.grad_images = renormalize_backward(grad_sim * t, images);
  r.grad_texts = renormalize_backward(grad_sim.transpose() * v, texts);
  return r;
}

PsaResult psa_loss(const Matrix& scores_img, const Matrix& scores_txt, const Matrix& targets_img,
                   const Matrix& targets_txt, const PsaConfig& cfg) {
  if (!(cfg.temperature > 0.0)) {
    throw Error(ErrorCode::NonPositiveTemperature, "temperature must be > 0");
  }
  auto same = [](const Matrix& a, const Matrix& b) { return a.rows() == b.rows() && a.cols() == b.cols(); };
  if (!same(scores_img, scores_txt) || !same(scores_img, targets_img) || !same(scores_img, targets_txt)) {
    throw Error(ErrorCode::ShapeMismatch, "scores " + shape(scores_img) + "/" + shape(scores_txt) +
                                              ", targets " + shape(targets_img) + "/" + shape(targets_txt));
  }
  if (scores_img.rows() == 0) throw Error(ErrorCode::ShapeMismatch, "empty batch");
  check_targets(targets_img, "targets_img");
  check_targets(targets_txt, "targets_txt");

  auto img = cross_entropy(scores_img, targets_img, cfg);
  auto txt = cross_entropy(scores_txt, targets_txt, cfg);
  PsaResult r;
  r.loss_img = img.loss;
  r.loss_txt = txt.loss;
  r.loss = img.loss + txt.loss;
  r.grad_scores_img = std::move(img.grad_scores);
  r.grad_scores_txt = std::move(txt.grad_scores);
  return r;
}

}  // namespace vsdalign
