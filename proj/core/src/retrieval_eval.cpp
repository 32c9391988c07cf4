#include "vsdalign/retrieval_eval.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include <json.hpp>

#include "vsdalign/error.hpp"
#include "vsdalign/parallel.hpp"

namespace vsdalign {
namespace {

constexpr std::array<std::size_t, 3> kCutoffs{1, 5, 10};

void check_manifest(const Matrix& sim, std::span<const std::size_t> caption_parent) {
  if (caption_parent.size() != static_cast<std::size_t>(sim.cols())) {
    throw Error(ErrorCode::ManifestMismatch, std::to_string(caption_parent.size()) + " caption parents for " +
                                                 std::to_string(sim.cols()) + " text columns");
  }
  std::vector<bool> covered(static_cast<std::size_t>(sim.rows()), false);
  for (std::size_t j = 0; j < caption_parent.size(); ++j) {
    if (caption_parent[j] >= covered.size()) {
      throw Error(ErrorCode::ManifestMismatch, "caption " + std::to_string(j) + " has parent " +
                                                   std::to_string(caption_parent[j]) + " outside " +
                                                   std::to_string(sim.rows()) + " images");
    }
    covered[caption_parent[j]] = true;
  }
  for (std::size_t i = 0; i < covered.size(); ++i) {
    if (!covered[i]) throw Error(ErrorCode::ManifestMismatch, "image " + std::to_string(i) + " has no caption");
  }
}

// Zero-based rank of `target` within `scores` (higher first, lower index on ties).
template <typename Row>
std::size_t rank_of(const Row& scores, Eigen::Index target) {
  const double s = scores(target);
  std::size_t ahead = 0;
  for (Eigen::Index j = 0; j < scores.size(); ++j) {
    if (scores(j) > s || (scores(j) == s && j < target)) ++ahead;
  }
  return ahead;
}

RetrievalReport tally(const std::vector<std::size_t>& i2t_ranks, const std::vector<std::size_t>& t2i_ranks) {
  std::array<double, 6> recalls{};
  for (std::size_t c = 0; c < kCutoffs.size(); ++c) {
    const auto hits_i = std::count_if(i2t_ranks.begin(), i2t_ranks.end(), [&](auto r) { return r < kCutoffs[c]; });
    const auto hits_t = std::count_if(t2i_ranks.begin(), t2i_ranks.end(), [&](auto r) { return r < kCutoffs[c]; });
    recalls[c] = 100.0 * static_cast<double>(hits_i) / static_cast<double>(i2t_ranks.size());
    recalls[3 + c] = 100.0 * static_cast<double>(hits_t) / static_cast<double>(t2i_ranks.size());
  }
  return RetrievalReport::from_recalls(recalls);
}

}  // namespace

RetrievalReport RetrievalReport::from_recalls(const std::array<double, 6>& r) {
  RetrievalReport rep;
  rep.i2t_r1 = r[0];
  rep.i2t_r5 = r[1];
  rep.i2t_r10 = r[2];
  rep.t2i_r1 = r[3];
  rep.t2i_r5 = r[4];
  rep.t2i_r10 = r[5];
  rep.rsum = 0.0;
  for (double x : r) rep.rsum += x;
  return rep;
}

std::array<double, 6> RetrievalReport::recalls() const {
  return {i2t_r1, i2t_r5, i2t_r10, t2i_r1, t2i_r5, t2i_r10};
}

std::string RetrievalReport::to_json() const {
  nlohmann::ordered_json j;
  j["i2t"] = {{"r1", i2t_r1}, {"r5", i2t_r5}, {"r10", i2t_r10}};
  j["t2i"] = {{"r1", t2i_r1}, {"r5", t2i_r5}, {"r10", t2i_r10}};
  j["rsum"] = rsum;
  return j.dump();
}

std::string RetrievalReport::to_table() const {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-8s%-8s%-8s%-8s%-8s%-8s%s\n%-8.1f%-8.1f%-8.1f%-8.1f%-8.1f%-8.1f%.1f\n",
                "i2t@1", "i2t@5", "i2t@10", "t2i@1", "t2i@5", "t2i@10", "rSum", i2t_r1, i2t_r5, i2t_r10, t2i_r1,
                t2i_r5, t2i_r10, rsum);
  return buf;
}

Matrix similarity_matrix(const Matrix& images, const Matrix& texts) {
  if (images.cols() != texts.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "image dimension " + std::to_string(images.cols()) +
                                              " vs text dimension " + std::to_string(texts.cols()));
  }
  const Vector in = images.rowwise().norm();
  const Vector tn = texts.rowwise().norm();
  Matrix sim(images.rows(), texts.rows());
  parallel_for(static_cast<std::size_t>(images.rows()), [&](std::size_t i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (Eigen::Index j = 0; j < texts.rows(); ++j) {
      sim(r, j) = images.row(r).dot(texts.row(j)) / (in(r) * tn(j));
    }
  });
  return sim;
}

RetrievalReport recall_at_k(const Matrix& sim, std::span<const std::size_t> caption_parent) {
  check_manifest(sim, caption_parent);
  const auto n_img = static_cast<std::size_t>(sim.rows());
  const auto n_txt = static_cast<std::size_t>(sim.cols());

  std::vector<std::vector<Eigen::Index>> captions_of(n_img);
  for (std::size_t j = 0; j < n_txt; ++j) captions_of[caption_parent[j]].push_back(static_cast<Eigen::Index>(j));

  std::vector<std::size_t> i2t(n_img);
  parallel_for(n_img, [&](std::size_t i) {
    const auto row = sim.row(static_cast<Eigen::Index>(i));
    std::size_t best = n_txt;
    for (auto j : captions_of[i]) best = std::min(best, rank_of(row, j));
    i2t[i] = best;
  });
  std::vector<std::size_t> t2i(n_txt);
  parallel_for(n_txt, [&](std::size_t j) {
    const auto col = sim.col(static_cast<Eigen::Index>(j));
    t2i[j] = rank_of(col, static_cast<Eigen::Index>(caption_parent[j]));
  });
  return tally(i2t, t2i);
}

}  // namespace vsdalign
