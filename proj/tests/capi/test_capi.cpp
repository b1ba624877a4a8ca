#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "seqdn/seqdn.h"

namespace fs = std::filesystem;

namespace {

struct Config {
  seqdn_config* p = nullptr;
  Config() { REQUIRE(seqdn_config_create(nullptr, &p) == SEQDN_OK); }
  ~Config() { seqdn_config_free(p); }
  void set(const char* a) { REQUIRE_MESSAGE(seqdn_config_set(p, a) == SEQDN_OK, seqdn_last_error()); }
};

std::string take(char* s) {
  std::string out = s ? s : "";
  seqdn_string_free(s);
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("seqdn_capi_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void tiny(Config& c, const fs::path& dir) {
  for (const char* a : {"synth.n_users=60", "synth.n_items=24", "synth.n_clusters=3", "synth.min_len=8",
                        "synth.max_len=12", "synth.sem_dim=8", "data.k_core=3", "data.max_len=8",
                        "model.emb_dim=8", "model.hidden=8", "model.layers=1", "train.batch_size=16",
                        "train.lr=0.01", "train.max_epochs=2", "train.seed=1", "eval.n_buckets=3"}) {
    c.set(a);
  }
  REQUIRE(seqdn_synth(c.p, dir.string().c_str()) == SEQDN_OK);
}

}  // namespace

TEST_CASE("version and quiet") {
  seqdn_set_quiet(1);
  CHECK(std::string(seqdn_version()).size() > 0);
}

TEST_CASE("argument errors set a message") {
  CHECK(seqdn_config_create(nullptr, nullptr) == SEQDN_ERR_ARGUMENT);
  CHECK(std::string(seqdn_last_error()).size() > 0);
  CHECK(seqdn_config_set(nullptr, "train.lr=1") == SEQDN_ERR_ARGUMENT);
  CHECK(seqdn_config_hash(nullptr, nullptr) == SEQDN_ERR_ARGUMENT);
  CHECK(seqdn_report_metric(nullptr, "HR@5", nullptr) == SEQDN_ERR_ARGUMENT);
  seqdn_config_free(nullptr);
  seqdn_report_free(nullptr);
  seqdn_string_free(nullptr);
}

TEST_CASE("config overrides, hash and json") {
  Config a, b;
  std::uint64_t ha = 0, hb = 0;
  REQUIRE(seqdn_config_hash(a.p, &ha) == SEQDN_OK);
  REQUIRE(seqdn_config_hash(b.p, &hb) == SEQDN_OK);
  CHECK(ha == hb);
  a.set("train.lr=0.005");
  REQUIRE(seqdn_config_hash(a.p, &ha) == SEQDN_OK);
  CHECK(ha != hb);
  char* json = nullptr;
  REQUIRE(seqdn_config_json(a.p, &json) == SEQDN_OK);
  CHECK(take(json).find("0.005") != std::string::npos);

  CHECK(seqdn_config_set(a.p, "train.no_such_key=1") == SEQDN_ERR_INPUT);
  CHECK(std::string(seqdn_last_error()).find("no_such_key") != std::string::npos);
  CHECK(seqdn_config_set(a.p, "missing_equals") == SEQDN_ERR_INPUT);
  seqdn_config* none = nullptr;
  CHECK(seqdn_config_create("/nonexistent/config.json", &none) == SEQDN_ERR_INPUT);
  CHECK(none == nullptr);
}

TEST_CASE("missing inputs map to input errors") {
  const auto dir = scratch("missing");
  CHECK(seqdn_prepare("/nonexistent.tsv", "tsv", dir.string().c_str(), 5, 32, nullptr, nullptr) == SEQDN_ERR_INPUT);
  CHECK(seqdn_prepare("/nonexistent.tsv", "xml", dir.string().c_str(), 5, 32, nullptr, nullptr) != SEQDN_OK);
  seqdn_report* r = nullptr;
  CHECK(seqdn_evaluate("/nonexistent.sdck", "/nonexistent.manifest", nullptr, &r) == SEQDN_ERR_INPUT);
  CHECK(r == nullptr);
  char* out = nullptr;
  CHECK(seqdn_report_tables(nullptr, nullptr, nullptr, nullptr, &out) == SEQDN_ERR_INPUT);
  fs::remove_all(dir);
}

TEST_CASE("synth, prepare, embed, train, evaluate") {
  const auto dir = scratch("e2e");
  Config c;
  tiny(c, dir / "synth");
  seqdn_stats raw{}, filtered{};
  REQUIRE(seqdn_prepare((dir / "synth/interactions.tsv").string().c_str(), "tsv", (dir / "data").string().c_str(), 3,
                        8, &raw, &filtered) == SEQDN_OK);
  CHECK(raw.users == 60);
  CHECK(filtered.users <= raw.users);
  const auto manifest = (dir / "data/split.manifest").string();

  std::size_t n = 0;
  REQUIRE(seqdn_embed_pseudo(manifest.c_str(), 8, 3, (dir / "p.semb").string().c_str(), 0, &n) == SEQDN_OK);
  CHECK(n == filtered.items);
  REQUIRE(seqdn_embed_import(manifest.c_str(), (dir / "p.semb").string().c_str(), nullptr, 0, &n) == SEQDN_OK);

  c.set(("paths.split=" + manifest).c_str());
  c.set(("paths.embeddings=" + (dir / "synth/semantic.semb").string()).c_str());
  c.set(("paths.labels=" + (dir / "synth/noise_labels.tsv").string()).c_str());
  seqdn_train_summary sum{};
  REQUIRE_MESSAGE(seqdn_train(c.p, (dir / "run").string().c_str(), &sum) == SEQDN_OK, seqdn_last_error());
  CHECK(sum.epochs_run == 2);
  CHECK(sum.best_epoch >= 1);

  seqdn_report* rep = nullptr;
  REQUIRE(seqdn_evaluate((dir / "run/checkpoint.sdck").string().c_str(), manifest.c_str(), nullptr, &rep) ==
          SEQDN_OK);
  for (const char* name : {"HR@5", "HR@10", "HR@20", "NDCG@5", "NDCG@10", "NDCG@20", "bucket1_NDCG@5"}) {
    double v = -1;
    CHECK(seqdn_report_metric(rep, name, &v) == SEQDN_OK);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  double v = 0;
  CHECK(seqdn_report_metric(rep, "MRR", &v) == SEQDN_ERR_ARGUMENT);
  char* text = nullptr;
  REQUIRE(seqdn_report_format(rep, 0, &text) == SEQDN_OK);
  CHECK(take(text).find("NDCG@10 ") != std::string::npos);
  REQUIRE(seqdn_report_format(rep, 2, &text) == SEQDN_OK);
  CHECK(take(text).rfind("bucket,mode,users,NDCG@5\n", 0) == 0);
  CHECK(seqdn_report_format(rep, 9, &text) == SEQDN_ERR_ARGUMENT);
  seqdn_report_free(rep);

  REQUIRE(seqdn_report_tables((dir / "run/history.csv").string().c_str(), (dir / "run/masks.txt").string().c_str(),
                              (dir / "synth/noise_labels.tsv").string().c_str(),
                              (dir / "run/metrics.txt").string().c_str(), &text) == SEQDN_OK);
  const auto tables = take(text);
  CHECK(tables.find("# noise_recovery\n") != std::string::npos);

  // Training twice from the same config writes identical histories.
  REQUIRE(seqdn_train(c.p, (dir / "run2").string().c_str(), nullptr) == SEQDN_OK);
  CHECK(slurp(dir / "run/history.csv") == slurp(dir / "run2/history.csv"));
  fs::remove_all(dir);
}

TEST_CASE("sweep returns one row per theta") {
  const auto dir = scratch("sweep");
  Config c;
  tiny(c, dir / "synth");
  REQUIRE(seqdn_prepare((dir / "synth/interactions.tsv").string().c_str(), "tsv", (dir / "data").string().c_str(), 3,
                        8, nullptr, nullptr) == SEQDN_OK);
  c.set(("paths.split=" + (dir / "data/split.manifest").string()).c_str());
  c.set(("paths.embeddings=" + (dir / "synth/semantic.semb").string()).c_str());
  c.set("train.max_epochs=1");
  const double thetas[] = {-0.5, 0.5};
  const std::uint64_t seeds[] = {1};
  char* out = nullptr;
  REQUIRE_MESSAGE(seqdn_sweep(c.p, thetas, 2, seeds, 1, &out) == SEQDN_OK, seqdn_last_error());
  const auto csv = take(out);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  CHECK(seqdn_sweep(c.p, thetas, 2, seeds, 0, &out) != SEQDN_OK);
  fs::remove_all(dir);
}
