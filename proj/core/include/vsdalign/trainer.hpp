#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vsdalign/dataset.hpp"
#include "vsdalign/fusion.hpp"
#include "vsdalign/losses.hpp"
#include "vsdalign/optimizer.hpp"
#include "vsdalign/prototypes.hpp"
#include "vsdalign/retrieval_eval.hpp"

namespace vsdalign {

enum class OptimizerKind { adam, sgd };

struct TrainConfig {
  std::size_t batch_size = 32;
  std::size_t epochs = 25;
  double learning_rate = 1e-3;
  double margin = 0.2;
  double temperature = 0.1;
  std::size_t k = 16;
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  LogitMode logit_mode = LogitMode::raw_scores;
  bool psa_on_raw = false;
  bool renormalize = true;
  double sinkhorn_epsilon = 0.05;
  std::size_t sinkhorn_iters = 3;
  std::size_t kmeans_iters = 100;

  /// Throws BatchTooSmall / InvalidArgument.
  void validate() const;

  /// Canonical JSON with sorted keys.
  std::string to_json() const;
  static TrainConfig from_json(const std::string& text);

  /// FNV-1a of the canonical JSON with `epochs` removed: the run length may
  /// change across a resume, nothing else may.
  std::uint64_t hash() const;

  IsaConfig isa() const { return {margin, Similarity::cosine}; }
  PsaConfig psa() const { return {temperature, logit_mode}; }
};

/// Full training state. Reloading and resuming reproduces the loss trace of
/// an uninterrupted run bit for bit.
struct Checkpoint {
  TrainConfig config;
  FusionParams params;
  AdamState adam;
  PrototypeBank bank;        // empty (k == 0) before the first epoch
  std::uint32_t epoch = 0;   // epochs completed
  std::string rng_state;     // textual std::mt19937_64 state

  friend bool operator==(const Checkpoint& a, const Checkpoint& b);
};

struct BatchLog {
  std::size_t epoch = 0;
  std::size_t batch = 0;
  double isa = 0.0;
  double psa = 0.0;
  double total = 0.0;

  /// {"epoch":..,"batch":..,"isa":..,"psa":..,"total":..}
  std::string to_jsonl() const;
  friend bool operator==(const BatchLog&, const BatchLog&) = default;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<BatchLog> history;
};

/// Inputs of one batch, row-aligned.
struct BatchInputs {
  Matrix images;
  Matrix vsd;
  Matrix texts;
  Matrix text_aux;
  std::vector<std::size_t> groups;  // parent image per row
};

/// Sinkhorn assignments for one batch; constants w.r.t. the parameters.
struct BatchTargets {
  Matrix image_plan;  // D^v
  Matrix text_plan;   // D^t
};

struct BatchObjective {
  double isa = 0.0;
  double psa = 0.0;
  double total = 0.0;
  Vector grad;  // flat, FusionParams::flatten() layout
  BatchTargets targets;
  IsaSelection isa_selection;
};

/// Forward and backward pass of the joint objective for one batch. Targets
/// are computed from the current scores unless `fixed_targets` is given.
BatchObjective batch_objective(const FusionParams& params, const BatchInputs& batch, const PrototypeBank& bank,
                               const TrainConfig& cfg, const BatchTargets* fixed_targets = nullptr);

/// Prototype bank over the (normalized) VSD rows, finalized to unit norm.
PrototypeBank build_prototypes(const AlignedData& data, const TrainConfig& cfg);

/// Seeded parameter initialization; epoch 0, zero moments.
Checkpoint initial_checkpoint(const AlignedData& data, const TrainConfig& cfg);

using BatchCallback = std::function<void(const BatchLog&)>;

/// Trains cfg.epochs epochs, starting fresh or from `resume` (whose config
/// hash must match; ConfigMismatch otherwise).
TrainResult train(const AlignedData& data, const TrainConfig& cfg, const std::optional<Checkpoint>& resume = {},
                  const BatchCallback& on_batch = {});

/// Fuses every image and caption with the checkpoint's frozen gates and
/// scores bidirectional retrieval.
RetrievalReport validate(const Checkpoint& checkpoint, const AlignedData& data);

/// Fused (and, if configured, renormalized) embeddings for the whole corpus.
std::pair<Matrix, Matrix> fuse_corpus(const FusionParams& params, const AlignedData& data, bool renormalize);

}  // namespace vsdalign
