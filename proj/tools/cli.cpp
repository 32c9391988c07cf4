#include "cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <numeric>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "vsdalign/binary_io.hpp"
#include "vsdalign/checkpoint.hpp"
#include "vsdalign/dataset.hpp"
#include "vsdalign/embedding_store.hpp"
#include "vsdalign/error.hpp"
#include "vsdalign/gradcheck.hpp"
#include "vsdalign/prototypes.hpp"
#include "vsdalign/synth.hpp"
#include "vsdalign/trainer.hpp"

namespace vsdalign::cli {
namespace {

namespace fs = std::filesystem;

struct SynthArgs {
  SynthSpec spec;
  std::string out_dir;
};

struct TrainArgs {
  TrainConfig cfg;
  std::string data_dir;
  std::string out;
  std::string log;
  std::string resume;
  std::string optimizer = "adam";
  std::string logit_mode = "raw_scores";
  bool no_renorm = false;
  bool paper_flickr = false;
  bool paper_coco = false;
  bool init_only = false;
};

struct EvalArgs {
  std::string data_dir;
  std::string checkpoint;
  std::string json_out;
  bool json = false;
};

struct ClusterArgs {
  std::string data_dir;
  std::string input;
  std::string out;
  std::size_t k = 16;
  std::uint64_t seed = 0;
  std::size_t max_iters = 100;
};

struct GradcheckArgs {
  GradcheckOptions opts;
};

struct InspectArgs {
  std::vector<std::string> files;
};

void add_train_flags(CLI::App& app, TrainArgs& a) {
  app.add_option("--data", a.data_dir, "Dataset directory")->required();
  app.add_option("--out", a.out, "Checkpoint output path")->required();
  app.add_option("--log", a.log, "Per-batch JSON-lines log path");
  app.add_option("--resume", a.resume, "Continue from this checkpoint for --epochs more epochs");
  app.add_option("--batch-size", a.cfg.batch_size)->capture_default_str();
  app.add_option("--epochs", a.cfg.epochs)->capture_default_str();
  app.add_option("--lr", a.cfg.learning_rate)->capture_default_str();
  app.add_option("--margin", a.cfg.margin)->capture_default_str();
  app.add_option("--tau", a.cfg.temperature, "PSA temperature")->capture_default_str();
  app.add_option("--k", a.cfg.k, "Prototype count")->capture_default_str();
  app.add_option("--seed", a.cfg.seed)->capture_default_str();
  app.add_option("--optimizer", a.optimizer)->check(CLI::IsMember({"adam", "sgd"}))->capture_default_str();
  app.add_option("--beta1", a.cfg.beta1)->capture_default_str();
  app.add_option("--beta2", a.cfg.beta2)->capture_default_str();
  app.add_option("--adam-eps", a.cfg.adam_eps)->capture_default_str();
  app.add_option("--logit-mode", a.logit_mode)
      ->check(CLI::IsMember({"raw_scores", "literal_double_softmax"}))
      ->capture_default_str();
  app.add_flag("--psa-on-raw", a.cfg.psa_on_raw, "Score prototypes with unfused embeddings");
  app.add_flag("--no-renorm", a.no_renorm, "Do not re-normalize fused embeddings");
  app.add_option("--sinkhorn-eps", a.cfg.sinkhorn_epsilon)->capture_default_str();
  app.add_option("--sinkhorn-iters", a.cfg.sinkhorn_iters)->capture_default_str();
  app.add_option("--kmeans-iters", a.cfg.kmeans_iters)->capture_default_str();
  auto* flickr = app.add_flag("--paper-flickr", a.paper_flickr, "batch 128, k 896, tau 0.1, 25 epochs");
  app.add_flag("--paper-coco", a.paper_coco, "batch 256, k 2560, tau 0.1, 25 epochs")->excludes(flickr);
  app.add_flag("--init-only", a.init_only, "Write the seeded initial checkpoint without training");
}

// Presets fill only the fields the user did not set explicitly.
void apply_preset(CLI::App& app, TrainArgs& a) {
  if (!a.paper_flickr && !a.paper_coco) return;
  auto unset = [&](const char* flag) { return app.get_option(flag)->count() == 0; };
  if (unset("--batch-size")) a.cfg.batch_size = a.paper_flickr ? 128 : 256;
  if (unset("--k")) a.cfg.k = a.paper_flickr ? 896 : 2560;
  if (unset("--tau")) a.cfg.temperature = 0.1;
  if (unset("--epochs")) a.cfg.epochs = 25;
}

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  const Dataset data = generate_synthetic(a.spec);
  save_dataset(a.out_dir, data);
  out << "wrote " << data.images.rows() << " images, " << data.texts.rows() << " captions (d=" << data.images.dim()
      << ") to " << a.out_dir << "\n";
  return kExitOk;
}

int cmd_train(CLI::App& app, TrainArgs& a, std::ostream& out) {
  apply_preset(app, a);
  a.cfg.optimizer = a.optimizer == "adam" ? OptimizerKind::adam : OptimizerKind::sgd;
  a.cfg.logit_mode = a.logit_mode == "raw_scores" ? LogitMode::raw_scores : LogitMode::literal_double_softmax;
  a.cfg.renormalize = !a.no_renorm;

  const AlignedData data = align(load_dataset(a.data_dir));
  if (a.init_only) {
    save_checkpoint(a.out, initial_checkpoint(data, a.cfg));
    out << "wrote initial checkpoint " << a.out << "\n";
    return kExitOk;
  }
  std::optional<Checkpoint> resume;
  if (!a.resume.empty()) resume = load_checkpoint(a.resume);

  const TrainResult result = train(data, a.cfg, resume);
  save_checkpoint(a.out, result.checkpoint);
  if (!a.log.empty()) {
    std::string lines;
    for (const auto& b : result.history) lines += b.to_jsonl() + "\n";
    io::write_file_atomic(a.log, lines);
  }

  std::map<std::size_t, std::pair<double, std::size_t>> per_epoch;
  for (const auto& b : result.history) {
    per_epoch[b.epoch].first += b.total;
    ++per_epoch[b.epoch].second;
  }
  for (const auto& [epoch, acc] : per_epoch) {
    char line[96];
    std::snprintf(line, sizeof line, "epoch %zu mean total loss %.6f\n", epoch, acc.first / static_cast<double>(acc.second));
    out << line;
  }
  out << "wrote checkpoint " << a.out << " (epoch " << result.checkpoint.epoch << ")\n";
  return kExitOk;
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const AlignedData data = align(load_dataset(a.data_dir));
  RetrievalReport report;
  if (a.checkpoint.empty()) {
    report = recall_at_k(similarity_matrix(data.images, data.texts), data.caption_parent);
  } else {
    report = validate(load_checkpoint(a.checkpoint), data);
  }
  if (a.json) {
    out << report.to_json() << "\n";
  } else {
    out << report.to_table();
  }
  if (!a.json_out.empty()) io::write_file_atomic(a.json_out, report.to_json() + "\n");
  return kExitOk;
}

int cmd_cluster(const ClusterArgs& a, std::ostream& out) {
  Matrix points;
  if (!a.input.empty()) {
    points = normalize_rows(load_embeddings(a.input).data());
  } else if (!a.data_dir.empty()) {
    points = align(load_dataset(a.data_dir)).vsd;
  } else {
    throw Error(ErrorCode::InvalidArgument, "cluster needs --data or --input");
  }
  PrototypeBank bank = kmeans(points, a.k, a.seed, a.max_iters);
  const double inertia = bank.inertia;
  bank.finalize();
  save_embeddings(a.out, EmbeddingSet(Modality::vsd, bank.centroids));
  nlohmann::ordered_json meta;
  meta["k"] = bank.k;
  meta["seed"] = bank.seed;
  meta["inertia"] = inertia;
  meta["iterations"] = bank.iterations;
  io::write_file_atomic(a.out + ".json", meta.dump(1) + "\n");
  out << "k=" << bank.k << " iterations=" << bank.iterations << " inertia=" << inertia << "\n";
  return kExitOk;
}

int cmd_gradcheck(const GradcheckArgs& a, std::ostream& out) {
  const GradcheckReport r = run_gradcheck(a.opts);
  char line[160];
  for (const auto& c : r.cases) {
    std::snprintf(line, sizeof line, "%-28s max_rel_error %.3e  checked %zu  skipped %zu\n", c.name.c_str(),
                  c.max_rel_error, c.checked, c.skipped);
    out << line;
  }
  std::snprintf(line, sizeof line, "trials %zu  max relative error %.3e  tolerance %.1e  %s\n", r.trials,
                r.max_rel_error, a.opts.tolerance, r.passed ? "PASS" : "FAIL");
  out << line;
  return r.passed ? kExitOk : kExitDomainError;
}

int cmd_inspect(const InspectArgs& a, std::ostream& out, std::ostream& err) {
  int status = kExitOk;
  for (const auto& f : a.files) {
    try {
      const auto bytes = io::read_file(f);
      const auto [data, modality] = decode_embeddings(bytes);
      const EmbeddingSet set = load_embeddings(f);
      out << f << ": EMB1 n=" << data.rows() << " d=" << data.cols() << " modality=" << to_string(modality)
          << " ids=" << (fs::exists(ids_sidecar_path(f)) ? "sidecar" : "default") << "\n";
    } catch (const Error& e) {
      err << f << ": " << e.what() << "\n";
      status = kExitDomainError;
    }
  }
  return status;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"vsdalign: gated VSD fusion, prototype alignment and retrieval evaluation on precomputed embeddings"};
  app.require_subcommand(1);

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "Write a seeded synthetic dataset");
  synth->add_option("--out", synth_args.out_dir, "Output directory")->required();
  synth->add_option("--n-images", synth_args.spec.n_images)->capture_default_str();
  synth->add_option("--captions-per-image", synth_args.spec.captions_per_image)->capture_default_str();
  synth->add_option("--d", synth_args.spec.d)->capture_default_str();
  synth->add_option("--vsd-fidelity", synth_args.spec.vsd_fidelity)->capture_default_str();
  synth->add_option("--noise-sigma", synth_args.spec.noise_sigma)->capture_default_str();
  synth->add_option("--seed", synth_args.spec.seed)->capture_default_str();

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train the fusion gates");
  add_train_flags(*train_cmd, train_args);

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Bidirectional R@1/5/10 and rSum");
  eval->add_option("--data", eval_args.data_dir, "Dataset directory")->required();
  eval->add_option("--checkpoint", eval_args.checkpoint, "Fuse with this checkpoint's gates (raw embeddings otherwise)");
  eval->add_flag("--json", eval_args.json, "Print JSON instead of the table");
  eval->add_option("--report", eval_args.json_out, "Also write the JSON report here");

  ClusterArgs cluster_args;
  auto* cluster = app.add_subcommand("cluster", "K-means prototype bank over VSD embeddings");
  cluster->add_option("--data", cluster_args.data_dir, "Dataset directory (clusters its vsd.emb)");
  cluster->add_option("--input", cluster_args.input, "Any EMB1 file to cluster instead");
  cluster->add_option("--out", cluster_args.out, "Output EMB1 path; metadata goes to <out>.json")->required();
  cluster->add_option("--k", cluster_args.k)->capture_default_str();
  cluster->add_option("--seed", cluster_args.seed)->capture_default_str();
  cluster->add_option("--max-iters", cluster_args.max_iters)->capture_default_str();

  GradcheckArgs gc_args;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every analytic gradient");
  gradcheck->add_option("--seed", gc_args.opts.seed)->capture_default_str();
  gradcheck->add_option("--trials", gc_args.opts.trials)->capture_default_str();
  gradcheck->add_option("--step", gc_args.opts.step)->capture_default_str();
  gradcheck->add_option("--tolerance", gc_args.opts.tolerance)->capture_default_str();

  InspectArgs inspect_args;
  auto* inspect = app.add_subcommand("inspect", "Validate EMB1 files and print their headers");
  inspect->add_option("files", inspect_args.files)->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (synth->parsed()) return cmd_synth(synth_args, out);
    if (train_cmd->parsed()) return cmd_train(*train_cmd, train_args, out);
    if (eval->parsed()) return cmd_eval(eval_args, out);
    if (cluster->parsed()) return cmd_cluster(cluster_args, out);
    if (gradcheck->parsed()) return cmd_gradcheck(gc_args, out);
    if (inspect->parsed()) return cmd_inspect(inspect_args, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitDomainError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitDomainError;
  }
  return kExitUsage;
}

}  // namespace vsdalign::cli
