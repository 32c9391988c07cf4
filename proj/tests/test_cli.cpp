#include <gtest/gtest.h>

#include <json.hpp>
#include <sstream>

#include "cli.hpp"
#include "test_util.hpp"
#include "vsdalign/binary_io.hpp"
#include "vsdalign/dataset.hpp"
#include "vsdalign/embedding_store.hpp"

namespace fs = std::filesystem;
using namespace vsdalign;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::uint8_t> payload(const fs::path& p) {
  auto bytes = io::read_file(p);
  return {bytes.begin() + static_cast<std::ptrdiff_t>(kEmbHeaderBytes), bytes.end()};
}

bool has_tmp_files(const fs::path& dir) {
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.path().string().find(".tmp") != std::string::npos) return true;
  return false;
}

}  // namespace

TEST(CliSynth, PerfectFidelityCopiesImages) {
  testutil::TempDir dir;
  const auto out = (dir / "s").string();
  const auto r = run({"synth", "--out", out, "--n-images", "10", "--captions-per-image", "2", "--d", "6",
                      "--vsd-fidelity", "1", "--noise-sigma", "0", "--seed", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(payload(dir / "s/vsd.emb"), payload(dir / "s/image.emb"));
  EXPECT_EQ(load_embeddings(dir / "s/vsd.emb").modality(), Modality::vsd);
  EXPECT_FALSE(has_tmp_files(dir.path()));
}

TEST(CliSynth, RepeatableAndMatchedPairsCloser) {
  testutil::TempDir dir;
  for (const char* name : {"a", "b"}) {
    ASSERT_EQ(run({"synth", "--out", (dir / name).string(), "--n-images", "40", "--d", "16", "--noise-sigma", "0.3",
                   "--seed", "9"})
                  .code,
              0);
  }
  for (const char* f : {"image.emb", "text.emb", "vsd.emb", "text_aux.emb", "manifest.json"}) {
    EXPECT_EQ(io::read_file(dir.path() / "a" / f), io::read_file(dir.path() / "b" / f)) << f;
  }
  const AlignedData data = align(load_dataset(dir / "a"));
  double matched = 0.0, mismatched = 0.0;
  std::size_t nm = 0, nx = 0;
  for (Eigen::Index j = 0; j < data.texts.rows(); ++j) {
    for (Eigen::Index i = 0; i < data.images.rows(); ++i) {
      const double c = data.images.row(i).dot(data.texts.row(j));
      if (data.caption_parent[static_cast<std::size_t>(j)] == static_cast<std::size_t>(i)) {
        matched += c;
        ++nm;
      } else {
        mismatched += c;
        ++nx;
      }
    }
  }
  EXPECT_GT(matched / static_cast<double>(nm), mismatched / static_cast<double>(nx));
}

TEST(CliGradcheck, Passes) {
  const auto r = run({"gradcheck", "--trials", "20"});
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("PASS"), std::string::npos);
}

TEST(CliEval, IdentitySetScoresPerfectly) {
  testutil::TempDir dir;
  std::mt19937_64 rng(71);
  const Matrix m = testutil::unit_rows(rng, 12, 8);
  auto ids = [](const char* prefix) {
    std::vector<std::string> v;
    for (int i = 0; i < 12; ++i) v.push_back(prefix + std::to_string(i));
    return v;
  };
  Dataset d{EmbeddingSet(Modality::image, m, ids("img")), EmbeddingSet(Modality::text, m, ids("cap")),
            EmbeddingSet(Modality::vsd, m, ids("vsd")), std::nullopt, {}};
  for (std::size_t i = 0; i < 12; ++i) {
    d.manifest.images.push_back(d.images.ids()[i]);
    d.manifest.captions.push_back({d.texts.ids()[i], d.images.ids()[i]});
    d.manifest.vsd_map[d.images.ids()[i]] = d.vsd.ids()[i];
  }
  save_dataset(dir / "id", d);
  const auto r = run({"eval", "--data", (dir / "id").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("100.0"), std::string::npos);
  EXPECT_NE(r.out.find("600.0"), std::string::npos);

  const auto j = run({"eval", "--data", (dir / "id").string(), "--json", "--report", (dir / "r.json").string()});
  ASSERT_EQ(j.code, 0);
  EXPECT_EQ(nlohmann::json::parse(j.out)["rsum"].get<double>(), 600.0);
  EXPECT_TRUE(fs::exists(dir / "r.json"));
}

TEST(CliTrain, ZeroLearningRateMatchesInitOnly) {
  testutil::TempDir dir;
  const auto data = (dir / "d").string();
  ASSERT_EQ(run({"synth", "--out", data, "--n-images", "32", "--captions-per-image", "2", "--d", "8"}).code, 0);
  const auto t = run({"train", "--data", data, "--out", (dir / "t.ckpt").string(), "--lr", "0", "--epochs", "1",
                      "--batch-size", "16", "--k", "4", "--log", (dir / "log.jsonl").string()});
  ASSERT_EQ(t.code, 0) << t.err;
  const auto i = run({"train", "--data", data, "--out", (dir / "i.ckpt").string(), "--init-only", "--batch-size", "16",
                      "--k", "4"});
  ASSERT_EQ(i.code, 0) << i.err;
  const auto et = run({"eval", "--data", data, "--checkpoint", (dir / "t.ckpt").string(), "--json"});
  const auto ei = run({"eval", "--data", data, "--checkpoint", (dir / "i.ckpt").string(), "--json"});
  ASSERT_EQ(et.code, 0);
  EXPECT_EQ(et.out, ei.out);

  const auto log = io::read_file(dir / "log.jsonl");
  const std::string text(log.begin(), log.end());
  std::istringstream lines(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_TRUE(j.contains("epoch") && j.contains("batch") && j.contains("isa") && j.contains("psa") &&
                j.contains("total"));
    ++n;
  }
  EXPECT_EQ(n, 4u);  // 64 captions / 16
  EXPECT_FALSE(has_tmp_files(dir.path()));
}

TEST(CliTrain, ResumeWithDifferentConfigFails) {
  testutil::TempDir dir;
  const auto data = (dir / "d").string();
  ASSERT_EQ(run({"synth", "--out", data, "--n-images", "32", "--captions-per-image", "1", "--d", "8"}).code, 0);
  ASSERT_EQ(run({"train", "--data", data, "--out", (dir / "a.ckpt").string(), "--epochs", "1", "--batch-size", "8",
                 "--k", "4"})
                .code,
            0);
  const auto r = run({"train", "--data", data, "--out", (dir / "b.ckpt").string(), "--epochs", "1", "--batch-size",
                      "8", "--k", "5", "--resume", (dir / "a.ckpt").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("configuration"), std::string::npos);
}

TEST(CliCluster, WritesBankAndMetadata) {
  testutil::TempDir dir;
  const auto data = (dir / "d").string();
  ASSERT_EQ(run({"synth", "--out", data, "--n-images", "30", "--d", "8"}).code, 0);
  const auto out = (dir / "bank.emb").string();
  const auto r = run({"cluster", "--data", data, "--out", out, "--k", "5", "--seed", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  const EmbeddingSet bank = load_embeddings(out);
  EXPECT_EQ(bank.rows(), 5u);
  EXPECT_EQ(bank.dim(), 8u);
  for (Eigen::Index i = 0; i < 5; ++i) EXPECT_NEAR(bank.data().row(i).norm(), 1.0, 1e-6);
  const auto meta = io::read_file(out + ".json");
  const auto j = nlohmann::json::parse(std::string(meta.begin(), meta.end()));
  EXPECT_EQ(j["k"].get<int>(), 5);
  EXPECT_EQ(j["seed"].get<int>(), 2);
  EXPECT_GE(j["inertia"].get<double>(), 0.0);

  EXPECT_EQ(run({"cluster", "--data", data, "--out", out, "--k", "31"}).code, 1);
}

TEST(CliInspect, GoodAndBadFiles) {
  testutil::TempDir dir;
  const auto data = (dir / "d").string();
  ASSERT_EQ(run({"synth", "--out", data, "--n-images", "4", "--d", "3"}).code, 0);
  const auto good = run({"inspect", (dir / "d/image.emb").string(), (dir / "d/text.emb").string()});
  EXPECT_EQ(good.code, 0);
  EXPECT_NE(good.out.find("n=4 d=3 modality=image"), std::string::npos);
  EXPECT_NE(good.out.find("n=20 d=3 modality=text"), std::string::npos);

  io::write_file_atomic(dir / "bad.emb", std::string("EMB2garbage"));
  const auto bad = run({"inspect", (dir / "bad.emb").string()});
  EXPECT_EQ(bad.code, 1);
  EXPECT_FALSE(bad.err.empty());
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"bogus"}).code, 2);
  EXPECT_EQ(run({"train", "--data", "x"}).code, 2);  // --out missing
  EXPECT_EQ(run({"eval", "--data", "/nonexistent/dir"}).code, 1);
  EXPECT_EQ(run({"--help"}).code, 0);
}
