#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

// Runs the CLI through the shell, capturing stdout (stderr discarded).
Run cli(const std::string& args) {
  const std::string cmd = std::string(SEQDN_CLI) + " " + args + " 2>/dev/null";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("seqdn_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

const char* kTiny =
    " --set synth.min_len=8 --set synth.max_len=12 --set synth.sem_dim=8 --set data.k_core=3"
    " --set data.max_len=8 --set model.emb_dim=8 --set model.hidden=8 --set model.layers=1"
    " --set train.batch_size=16 --set train.lr=0.01 --set train.max_epochs=2 --set eval.n_buckets=3";

}  // namespace

TEST_CASE("help lists every command and its flags with defaults") {
  const auto top = cli("--help");
  CHECK(top.code == 0);
  for (const char* c : {"prepare", "embed", "synth", "train", "eval", "report", "sweep"}) {
    CHECK(top.out.find(c) != std::string::npos);
  }
  const auto prep = cli("prepare --help");
  CHECK(prep.code == 0);
  CHECK(prep.out.find("--k-core") != std::string::npos);
  CHECK(prep.out.find("[5]") != std::string::npos);
  const auto emb = cli("embed --help");
  CHECK(emb.out.find("--dim") != std::string::npos);
  CHECK(cli("train --help").out.find("--out-dir") != std::string::npos);
  CHECK(cli("eval --help").out.find("--checkpoint") != std::string::npos);
  CHECK(cli("sweep --help").out.find("--thetas") != std::string::npos);
}

TEST_CASE("errors exit with code 2") {
  CHECK(cli("").code == 2);
  CHECK(cli("no-such-command").code == 2);
  CHECK(cli("eval --checkpoint /nonexistent.sdck --split /nonexistent.manifest").code == 2);
  CHECK(cli("prepare --input /nonexistent.tsv --out /tmp/seqdn_cli_never").code == 2);
  CHECK(cli("train --out-dir /tmp/seqdn_cli_never --set train.bogus=1").code == 2);
  CHECK(cli("sweep --thetas 0.1,abc").code == 2);
}

TEST_CASE("synth, prepare, embed, train, eval, report") {
  const auto dir = scratch("e2e");
  const std::string d = dir.string();
  REQUIRE(cli("synth --out " + d + "/synth --users 60 --items 24 --clusters 3 --seed 1" + kTiny).code == 0);
  const auto prep = cli("prepare --input " + d + "/synth/interactions.tsv --out " + d + "/data --k-core 3 --max-len 8");
  REQUIRE(prep.code == 0);
  CHECK(prep.out.rfind("raw users 60 ", 0) == 0);
  CHECK(prep.out.find("\nfiltered users ") != std::string::npos);

  const std::string manifest = d + "/data/split.manifest";
  REQUIRE(cli("embed --catalog " + manifest + " --mode pseudo --dim 8 --seed 4 --out " + d + "/a.semb").code == 0);
  REQUIRE(cli("embed --catalog " + manifest + " --mode pseudo --dim 8 --seed 4 --out " + d + "/b.semb").code == 0);
  CHECK(slurp(dir / "a.semb") == slurp(dir / "b.semb"));
  CHECK(cli("embed --catalog " + manifest + " --mode import --input " + d + "/a.semb").code == 0);
  CHECK(cli("embed --catalog " + manifest + " --mode pseudo").code == 2);

  const std::string paths = " --set paths.split=" + manifest + " --set paths.embeddings=" + d +
                            "/synth/semantic.semb --set paths.labels=" + d + "/synth/noise_labels.tsv";
  const auto tr = cli("train --out-dir " + d + "/run" + kTiny + paths);
  REQUIRE(tr.code == 0);
  CHECK(tr.out.rfind("epochs 2 best_epoch ", 0) == 0);

  const auto ev = cli("eval --checkpoint " + d + "/run/checkpoint.sdck --split " + manifest);
  REQUIRE(ev.code == 0);
  for (const char* m : {"HR@5 ", "HR@10 ", "HR@20 ", "NDCG@5 ", "NDCG@10 ", "NDCG@20 "}) {
    CHECK(ev.out.find(m) != std::string::npos);
  }
  const auto csv = cli("eval --csv --checkpoint " + d + "/run/checkpoint.sdck --split " + manifest);
  CHECK(csv.out.rfind("users,HR@5,", 0) == 0);

  const auto rep = cli("report --history " + d + "/run/history.csv --masks " + d + "/run/masks.txt --labels " + d +
                       "/synth/noise_labels.tsv --metrics " + d + "/run/metrics.txt");
  REQUIRE(rep.code == 0);
  CHECK(rep.out.find("# noise_recovery\n") != std::string::npos);
  CHECK(cli("report --masks " + d + "/run/masks.txt").code == 2);

  // Same config, same seed: identical training history and metrics.
  REQUIRE(cli("train --out-dir " + d + "/run2" + kTiny + paths).code == 0);
  CHECK(slurp(dir / "run/history.csv") == slurp(dir / "run2/history.csv"));
  CHECK(slurp(dir / "run/metrics.txt") == slurp(dir / "run2/metrics.txt"));
  fs::remove_all(dir);
}
