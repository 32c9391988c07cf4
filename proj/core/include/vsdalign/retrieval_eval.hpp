#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "vsdalign/types.hpp"

namespace vsdalign {

/// Recall percentages in both directions, in the column order
/// i2t R@1, R@5, R@10, t2i R@1, R@5, R@10, rSum.
struct RetrievalReport {
  double i2t_r1 = 0, i2t_r5 = 0, i2t_r10 = 0;
  double t2i_r1 = 0, t2i_r5 = 0, t2i_r10 = 0;
  double rsum = 0;

  /// rsum is the left-to-right sum of the six recalls.
  static RetrievalReport from_recalls(const std::array<double, 6>& recalls);
  std::array<double, 6> recalls() const;

  std::string to_json() const;
  /// Two-line aligned table: header then values, one decimal place.
  std::string to_table() const;

  friend bool operator==(const RetrievalReport&, const RetrievalReport&) = default;
};

/// Cosine similarity between every image row and every text row.
Matrix similarity_matrix(const Matrix& images, const Matrix& texts);

/// Bidirectional R@{1,5,10}. `caption_parent[j]` is the image index of text
/// column j. An image query hits at K when any of its captions ranks in the
/// top K of all texts; a text query hits when its parent image ranks in the
/// top K of all images. Exact score ties rank the lower index first.
RetrievalReport recall_at_k(const Matrix& sim, std::span<const std::size_t> caption_parent);

}  // namespace vsdalign
