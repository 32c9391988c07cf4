#include "vsdalign/trainer.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include <json.hpp>

#include "vsdalign/binary_io.hpp"
#include "vsdalign/error.hpp"
#include "vsdalign/softmax.hpp"

namespace vsdalign {

using nlohmann::json;

namespace {

const char* optimizer_name(OptimizerKind k) { return k == OptimizerKind::adam ? "adam" : "sgd"; }
const char* logit_mode_name(LogitMode m) {
  return m == LogitMode::raw_scores ? "raw_scores" : "literal_double_softmax";
}

json config_json(const TrainConfig& c) {
  return json{{"batch_size", c.batch_size},
              {"epochs", c.epochs},
              {"learning_rate", c.learning_rate},
              {"margin", c.margin},
              {"temperature", c.temperature},
              {"k", c.k},
              {"seed", c.seed},
              {"optimizer", optimizer_name(c.optimizer)},
              {"beta1", c.beta1},
              {"beta2", c.beta2},
              {"adam_eps", c.adam_eps},
              {"logit_mode", logit_mode_name(c.logit_mode)},
              {"psa_on_raw", c.psa_on_raw},
              {"renormalize", c.renormalize},
              {"sinkhorn_epsilon", c.sinkhorn_epsilon},
              {"sinkhorn_iters", c.sinkhorn_iters},
              {"kmeans_iters", c.kmeans_iters}};
}

// Modulo reduction: the bias is negligible for shuffling and, unlike
// std::uniform_int_distribution, the mapping is fixed across standard libraries.
std::size_t bounded(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

std::string rng_to_string(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

std::mt19937_64 rng_from_string(const std::string& s) {
  std::mt19937_64 rng;
  std::istringstream is(s);
  is >> rng;
  if (!is) throw Error(ErrorCode::CorruptCheckpoint, "unreadable RNG state");
  return rng;
}

Matrix maybe_normalize(const Matrix& m, bool on) { return on ? normalize_rows(m) : m; }

Matrix sinkhorn_input(const Matrix& scores, LogitMode mode) {
  return mode == LogitMode::raw_scores ? scores : softmax_rows(scores);
}

BatchInputs gather_batch(const AlignedData& data, std::span<const std::size_t> captions) {
  const auto m = static_cast<Eigen::Index>(captions.size());
  const auto d = static_cast<Eigen::Index>(data.dim());
  BatchInputs b{Matrix(m, d), Matrix(m, d), Matrix(m, d), Matrix(m, d), {}};
  b.groups.reserve(captions.size());
  for (Eigen::Index r = 0; r < m; ++r) {
    const auto c = static_cast<Eigen::Index>(captions[static_cast<std::size_t>(r)]);
    const auto img = data.caption_parent[static_cast<std::size_t>(c)];
    b.images.row(r) = data.images.row(static_cast<Eigen::Index>(img));
    b.vsd.row(r) = data.vsd.row(static_cast<Eigen::Index>(img));
    b.texts.row(r) = data.texts.row(c);
    b.text_aux.row(r) = data.text_aux.row(c);
    b.groups.push_back(img);
  }
  return b;
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 2) throw Error(ErrorCode::BatchTooSmall, "batch_size must be >= 2 for in-batch negatives");
  if (epochs < 1) throw Error(ErrorCode::InvalidArgument, "epochs must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw Error(ErrorCode::InvalidArgument, "learning_rate must be finite and >= 0");
  if (!(margin >= 0.0) || !std::isfinite(margin)) throw Error(ErrorCode::InvalidArgument, "margin must be >= 0");
  if (!(temperature > 0.0)) throw Error(ErrorCode::NonPositiveTemperature, "temperature must be > 0");
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
  if (!(sinkhorn_epsilon > 0.0)) throw Error(ErrorCode::NonPositiveEpsilon, "sinkhorn epsilon must be > 0");
  if (sinkhorn_iters < 1) throw Error(ErrorCode::InvalidArgument, "sinkhorn_iters must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0))
    throw Error(ErrorCode::InvalidArgument, "adam betas must lie in [0, 1)");
}

std::string TrainConfig::to_json() const { return config_json(*this).dump(); }

TrainConfig TrainConfig::from_json(const std::string& text) {
  TrainConfig c;
  try {
    const auto j = json::parse(text);
    c.batch_size = j.at("batch_size");
    c.epochs = j.at("epochs");
    c.learning_rate = j.at("learning_rate");
    c.margin = j.at("margin");
    c.temperature = j.at("temperature");
    c.k = j.at("k");
    c.seed = j.at("seed");
    c.optimizer = j.at("optimizer") == "adam" ? OptimizerKind::adam : OptimizerKind::sgd;
    c.beta1 = j.at("beta1");
    c.beta2 = j.at("beta2");
    c.adam_eps = j.at("adam_eps");
    c.logit_mode = j.at("logit_mode") == "raw_scores" ? LogitMode::raw_scores : LogitMode::literal_double_softmax;
    c.psa_on_raw = j.at("psa_on_raw");
    c.renormalize = j.at("renormalize");
    c.sinkhorn_epsilon = j.at("sinkhorn_epsilon");
    c.sinkhorn_iters = j.at("sinkhorn_iters");
    c.kmeans_iters = j.at("kmeans_iters");
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptCheckpoint, std::string("bad config json: ") + e.what());
  }
  return c;
}

std::uint64_t TrainConfig::hash() const {
  auto j = config_json(*this);
  j.erase("epochs");
  return io::fnv1a64(j.dump());
}

bool operator==(const Checkpoint& a, const Checkpoint& b) {
  auto eq = [](const Matrix& x, const Matrix& y) {
    return x.rows() == y.rows() && x.cols() == y.cols() && (x.size() == 0 || x == y);
  };
  return a.config.to_json() == b.config.to_json() && a.params.flatten() == b.params.flatten() &&
         a.adam.m == b.adam.m && a.adam.v == b.adam.v && a.adam.step == b.adam.step && a.bank.k == b.bank.k &&
         eq(a.bank.centroids, b.bank.centroids) && a.epoch == b.epoch && a.rng_state == b.rng_state;
}

std::string BatchLog::to_jsonl() const {
  nlohmann::ordered_json j;
  j["epoch"] = epoch;
  j["batch"] = batch;
  j["isa"] = isa;
  j["psa"] = psa;
  j["total"] = total;
  return j.dump();
}

BatchObjective batch_objective(const FusionParams& params, const BatchInputs& batch, const PrototypeBank& bank,
                               const TrainConfig& cfg, const BatchTargets* fixed_targets) {
  const FusedBatch img = gated_fuse(batch.images, batch.vsd, params.image);
  const FusedBatch txt = gated_fuse(batch.texts, batch.text_aux, params.text);
  const Matrix v_hat = maybe_normalize(img.fused, cfg.renormalize);
  const Matrix t_hat = maybe_normalize(txt.fused, cfg.renormalize);

  IsaResult isa = isa_loss(v_hat, t_hat, cfg.isa(), batch.groups);

  const Matrix& psa_img_in = cfg.psa_on_raw ? batch.images : v_hat;
  const Matrix& psa_txt_in = cfg.psa_on_raw ? batch.texts : t_hat;
  const Matrix scores_img = prototype_logits(psa_img_in, bank);
  const Matrix scores_txt = prototype_logits(psa_txt_in, bank);

  BatchObjective out;
  if (fixed_targets) {
    out.targets = *fixed_targets;
  } else {
    out.targets.image_plan =
        sinkhorn(sinkhorn_input(scores_img, cfg.logit_mode), cfg.sinkhorn_epsilon, cfg.sinkhorn_iters).plan;
    out.targets.text_plan =
        sinkhorn(sinkhorn_input(scores_txt, cfg.logit_mode), cfg.sinkhorn_epsilon, cfg.sinkhorn_iters).plan;
  }
  // Swapped: text-side assignments supervise image predictions and vice versa.
  const PsaResult psa =
      psa_loss(scores_img, scores_txt, out.targets.text_plan, out.targets.image_plan, cfg.psa());

  out.isa = isa.loss;
  out.isa_selection = isa.selection;
  out.psa = psa.loss;
  out.total = total_loss(isa.loss, psa.loss);

  Matrix grad_v = std::move(isa.grad_images);
  Matrix grad_t = std::move(isa.grad_texts);
  if (!cfg.psa_on_raw) {
    grad_v += psa.grad_scores_img * bank.centroids;
    grad_t += psa.grad_scores_txt * bank.centroids;
  }
  if (cfg.renormalize) {
    grad_v = renormalize_backward(grad_v, img.fused);
    grad_t = renormalize_backward(grad_t, txt.fused);
  }
  const GateGradients gi = gated_fuse_backward(grad_v, img);
  const GateGradients gt = gated_fuse_backward(grad_t, txt);
  FusionParams grads{{gi.weights, gi.bias}, {gt.weights, gt.bias}};
  out.grad = grads.flatten();
  return out;
}

PrototypeBank build_prototypes(const AlignedData& data, const TrainConfig& cfg) {
  if (cfg.k > static_cast<std::size_t>(data.vsd.rows())) {
    throw Error(ErrorCode::KExceedsN, "k=" + std::to_string(cfg.k) + " exceeds " +
                                          std::to_string(data.vsd.rows()) + " VSD rows");
  }
  PrototypeBank bank = kmeans(data.vsd, cfg.k, cfg.seed, cfg.kmeans_iters);
  bank.finalize();
  return bank;
}

Checkpoint initial_checkpoint(const AlignedData& data, const TrainConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  Checkpoint c;
  c.config = cfg;
  c.params = FusionParams::init(data.dim(), rng);
  c.adam = AdamState::zeros(c.params.flatten().size());
  c.epoch = 0;
  c.rng_state = rng_to_string(rng);
  return c;
}

TrainResult train(const AlignedData& data, const TrainConfig& cfg, const std::optional<Checkpoint>& resume,
                  const BatchCallback& on_batch) {
  cfg.validate();
  const std::size_t n_pairs = data.caption_parent.size();
  if (n_pairs < cfg.batch_size) {
    throw Error(ErrorCode::BatchTooSmall, std::to_string(n_pairs) + " pairs cannot fill one batch of " +
                                              std::to_string(cfg.batch_size));
  }

  TrainResult result;
  Checkpoint& state = result.checkpoint;
  if (resume) {
    if (resume->config.hash() != cfg.hash()) {
      throw Error(ErrorCode::ConfigMismatch, "checkpoint was produced under a different configuration");
    }
    if (resume->params.dim() != data.dim()) {
      throw Error(ErrorCode::DimensionMismatch, "checkpoint dimension " + std::to_string(resume->params.dim()) +
                                                    " vs data dimension " + std::to_string(data.dim()));
    }
    state = *resume;
    state.config = cfg;
  } else {
    state = initial_checkpoint(data, cfg);
  }

  std::mt19937_64 rng = rng_from_string(state.rng_state);
  Vector flat = state.params.flatten();
  const AdamHyper hyper{cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps};
  std::vector<std::size_t> order(n_pairs);

  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    const std::size_t epoch = state.epoch;
    // Prototypes are frozen within the epoch.
    state.bank = build_prototypes(data, cfg);

    for (std::size_t i = 0; i < n_pairs; ++i) order[i] = i;
    for (std::size_t i = n_pairs - 1; i > 0; --i) std::swap(order[i], order[bounded(rng, i + 1)]);

    const std::size_t n_batches = n_pairs / cfg.batch_size;  // tail dropped
    for (std::size_t b = 0; b < n_batches; ++b) {
      const BatchInputs batch =
          gather_batch(data, std::span(order).subspan(b * cfg.batch_size, cfg.batch_size));
      const FusionParams params = FusionParams::unflatten(flat, data.dim());
      const BatchObjective obj = batch_objective(params, batch, state.bank, cfg);
      if (cfg.optimizer == OptimizerKind::adam) {
        adam_step(flat, obj.grad, state.adam, hyper);
      } else {
        sgd_step(flat, obj.grad, cfg.learning_rate);
      }
      BatchLog log{epoch, b, obj.isa, obj.psa, obj.total};
      if (on_batch) on_batch(log);
      result.history.push_back(log);
    }
    state.epoch = static_cast<std::uint32_t>(epoch + 1);
  }
  state.params = FusionParams::unflatten(flat, data.dim());
  state.rng_state = rng_to_string(rng);
  return result;
}

std::pair<Matrix, Matrix> fuse_corpus(const FusionParams& params, const AlignedData& data, bool renormalize) {
  if (params.dim() != data.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "checkpoint dimension " + std::to_string(params.dim()) +
                                                  " vs data dimension " + std::to_string(data.dim()));
  }
  Matrix v = gated_fuse(data.images, data.vsd, params.image).fused;
  Matrix t = gated_fuse(data.texts, data.text_aux, params.text).fused;
  return {maybe_normalize(v, renormalize), maybe_normalize(t, renormalize)};
}

RetrievalReport validate(const Checkpoint& checkpoint, const AlignedData& data) {
  auto [v, t] = fuse_corpus(checkpoint.params, data, checkpoint.config.renormalize);
  return recall_at_k(similarity_matrix(v, t), data.caption_parent);
}

}  // namespace vsdalign
