#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "vsdalign/types.hpp"

namespace vsdalign {

enum class Similarity { cosine };

struct IsaConfig {
  double margin = 0.2;
  Similarity similarity = Similarity::cosine;
};

/// Which negatives were picked and which hinges fired. The loss is smooth
/// wherever this stays constant.
struct IsaSelection {
  // Hardest in-batch negative per anchor; nullopt when the anchor has none.
  std::vector<std::optional<std::size_t>> hardest_text;   // for image anchor i
  std::vector<std::optional<std::size_t>> hardest_image;  // for text anchor i
  std::vector<bool> active_i2t;
  std::vector<bool> active_t2i;

  friend bool operator==(const IsaSelection&, const IsaSelection&) = default;
};

struct IsaResult {
  double loss = 0.0;
  Matrix grad_images;  // d loss / d images
  Matrix grad_texts;   // d loss / d texts
  IsaSelection selection;
};

/// Hard-negative triplet loss over aligned pairs (images_i, texts_i):
///
///   sum_i [m - s(v_i, t_i) + s(v_i, t_i^-)]_+ + [m - s(v_i, t_i) + s(v_i^-, t_i)]_+
///
/// with s the cosine similarity and the negatives chosen as the most similar
/// non-matching item in the batch (lowest index on ties). Gradients flow
/// through active hinges and the selected negatives only.
///
/// When `groups` is non-empty, rows sharing a group label (e.g. two captions
/// of one image) are not treated as negatives of each other.
IsaResult isa_loss(const Matrix& images, const Matrix& texts, const IsaConfig& cfg,
                   std::span<const std::size_t> groups = {});

enum class LogitMode { raw_scores, literal_double_softmax };

struct PsaConfig {
  double temperature = 0.1;
  LogitMode logit_mode = LogitMode::raw_scores;
};

struct PsaResult {
  double loss = 0.0;
  double loss_img = 0.0;
  double loss_txt = 0.0;
  Matrix grad_scores_img;
  Matrix grad_scores_txt;
};

/// Swapped prototype cross-entropy. Image predictions are supervised by the
/// text-side assignment (targets_img = D^t) and vice versa, each direction
/// averaged over the m rows.
///
/// Scores are raw embedding-prototype products. In raw_scores mode the logits
/// are scores / tau; in literal_double_softmax mode they are
/// softmax(scores) / tau. Gradients are with respect to the raw scores in
/// both modes; targets are constants.
PsaResult psa_loss(const Matrix& scores_img, const Matrix& scores_txt, const Matrix& targets_img,
                   const Matrix& targets_txt, const PsaConfig& cfg);

/// Joint objective with unit weights.
inline double total_loss(double isa, double psa) noexcept { return isa + psa; }

}  // namespace vsdalign
