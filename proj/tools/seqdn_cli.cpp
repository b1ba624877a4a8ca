// seqdn command-line tool. Every subcommand is a thin wrapper over the C API.

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "seqdn/seqdn.h"

namespace {

constexpr int kExitInput = 2;
constexpr int kExitNumeric = 3;

int exit_code(seqdn_status s) {
  switch (s) {
    case SEQDN_OK: return 0;
    case SEQDN_ERR_NUMERIC: return kExitNumeric;
    case SEQDN_ERR_INPUT:
    case SEQDN_ERR_ARGUMENT: return kExitInput;
    case SEQDN_ERR_INTERNAL: break;
  }
  return 1;
}

struct Failure {
  seqdn_status status;
};

void check(seqdn_status s) {
  if (s != SEQDN_OK) throw Failure{s};
}

struct OwnedString {
  char* p = nullptr;
  ~OwnedString() { seqdn_string_free(p); }
  std::string str() const { return p ? p : ""; }
};

struct ConfigHandle {
  seqdn_config* p = nullptr;
  ~ConfigHandle() { seqdn_config_free(p); }
};

void emit(const std::string& text, const std::string& path) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) {
    std::cerr << "error: cannot write " << path << "\n";
    throw Failure{SEQDN_ERR_INPUT};
  }
}

ConfigHandle load_config(const std::string& file, const std::vector<std::string>& sets) {
  ConfigHandle c;
  check(seqdn_config_create(file.empty() ? nullptr : file.c_str(), &c.p));
  for (const auto& s : sets) check(seqdn_config_set(c.p, s.c_str()));
  return c;
}

template <typename T>
std::vector<T> parse_list(const std::string& text) {
  std::vector<T> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    std::istringstream v(item);
    T x{};
    if (!(v >> x) || !(v >> std::ws).eof()) {
      std::cerr << "error: bad list element '" << item << "'\n";
      throw Failure{SEQDN_ERR_INPUT};
    }
    out.push_back(x);
  }
  if (out.empty()) {
    std::cerr << "error: empty list\n";
    throw Failure{SEQDN_ERR_INPUT};
  }
  return out;
}

void print_stats(const char* label, const seqdn_stats& s) {
  std::printf("%s users %" PRIu64 " items %" PRIu64 " actions %" PRIu64 " avg_len %.4f sparsity %.6f\n", label,
              s.users, s.items, s.actions, s.avg_len, s.sparsity);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sequential recommendation with cross-modal denoising"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Suppress warnings");

  // prepare
  auto* prepare = app.add_subcommand("prepare", "Filter and split an interaction log");
  std::string p_input, p_format = "tsv", p_out;
  int p_k = 5, p_len = 32;
  prepare->add_option("--input", p_input, "Interaction log")->required();
  prepare->add_option("--format", p_format, "Log format: tsv (user item timestamp) or movielens");
  prepare->add_option("--out", p_out, "Output directory")->required();
  prepare->add_option("--k-core", p_k, "Minimum interactions per user and item");
  prepare->add_option("--max-len", p_len, "Maximum sequence window");

  // embed
  auto* embed = app.add_subcommand("embed", "Write or import semantic item embeddings");
  std::string e_catalog, e_mode = "pseudo", e_out, e_input;
  std::size_t e_dim = 64;
  std::uint64_t e_seed = 7;
  bool e_binary = false;
  embed->add_option("--catalog", e_catalog, "Split manifest providing the item catalog")->required();
  embed->add_option("--mode", e_mode, "pseudo or import")->check(CLI::IsMember({"pseudo", "import"}));
  embed->add_option("--dim", e_dim, "Dimension of pseudo embeddings");
  embed->add_option("--seed", e_seed, "Seed for pseudo embeddings");
  embed->add_option("--input", e_input, "SEMB file to import");
  embed->add_option("--out", e_out, "Output SEMB file (optional for import)");
  embed->add_flag("--binary", e_binary, "Write the binary SEMB form");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic benchmark with noise labels");
  std::string s_config, s_out;
  std::vector<std::string> s_sets;
  synth->add_option("--config", s_config, "JSON config file");
  synth->add_option("--set", s_sets, "Override section.key=value (repeatable)");
  synth->add_option("--out", s_out, "Output directory")->required();
  std::string s_users, s_items, s_clusters, s_noise, s_seed;
  synth->add_option("--users", s_users, "synth.n_users override");
  synth->add_option("--items", s_items, "synth.n_items override");
  synth->add_option("--clusters", s_clusters, "synth.n_clusters override");
  synth->add_option("--noise", s_noise, "synth.noise_rate override");
  synth->add_option("--seed", s_seed, "synth.seed override");

  // train
  auto* train = app.add_subcommand("train", "Train a model");
  std::string t_config, t_out;
  std::vector<std::string> t_sets;
  train->add_option("--config", t_config, "JSON config file");
  train->add_option("--set", t_sets, "Override section.key=value (repeatable)");
  train->add_option("--out-dir", t_out, "Output directory")->required();

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the test stage");
  std::string v_ckpt, v_split, v_emb, v_out;
  bool v_csv = false;
  eval->add_option("--checkpoint", v_ckpt, "Checkpoint file")->required();
  eval->add_option("--split", v_split, "Split manifest")->required();
  eval->add_option("--embeddings", v_emb, "SEMB file (default: path stored in the checkpoint config)");
  eval->add_option("--out", v_out, "Write the report here instead of stdout");
  eval->add_flag("--csv", v_csv, "CSV instead of key-value text");

  // report
  auto* report = app.add_subcommand("report", "Summary, popularity-bucket and noise-recovery tables");
  std::string r_hist, r_masks, r_labels, r_metrics, r_out;
  report->add_option("--history", r_hist, "history.csv from train");
  report->add_option("--masks", r_masks, "Mask dump (masks.txt or final_masks.txt)");
  report->add_option("--labels", r_labels, "noise_labels.tsv from synth");
  report->add_option("--metrics", r_metrics, "Key-value metrics from eval or train");
  report->add_option("--out", r_out, "Output file (default stdout)");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Sweep the gate threshold theta");
  std::string w_config, w_out, w_thetas = "-0.9,-0.5,-0.1,0.3,0.7,0.9", w_seeds = "1,2,3";
  std::vector<std::string> w_sets;
  sweep->add_option("--config", w_config, "JSON config file");
  sweep->add_option("--set", w_sets, "Override section.key=value (repeatable)");
  sweep->add_option("--thetas", w_thetas, "Comma-separated theta values");
  sweep->add_option("--seeds", w_seeds, "Comma-separated training seeds");
  sweep->add_option("--out", w_out, "Output CSV (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitInput;
  }
  if (quiet) seqdn_set_quiet(1);

  try {
    if (*prepare) {
      seqdn_stats raw{}, filtered{};
      check(seqdn_prepare(p_input.c_str(), p_format.c_str(), p_out.c_str(), p_k, p_len, &raw, &filtered));
      print_stats("raw", raw);
      print_stats("filtered", filtered);
    } else if (*embed) {
      std::size_t count = 0;
      if (e_mode == "pseudo") {
        if (e_out.empty()) {
          std::cerr << "error: --out is required for pseudo mode\n";
          return kExitInput;
        }
        check(seqdn_embed_pseudo(e_catalog.c_str(), e_dim, e_seed, e_out.c_str(), e_binary, &count));
      } else {
        if (e_input.empty()) {
          std::cerr << "error: --input is required for import mode\n";
          return kExitInput;
        }
        check(seqdn_embed_import(e_catalog.c_str(), e_input.c_str(), e_out.empty() ? nullptr : e_out.c_str(),
                                 e_binary, &count));
      }
      std::printf("embeddings %zu\n", count);
    } else if (*synth) {
      auto sets = s_sets;
      if (!s_users.empty()) sets.push_back("synth.n_users=" + s_users);
      if (!s_items.empty()) sets.push_back("synth.n_items=" + s_items);
      if (!s_clusters.empty()) sets.push_back("synth.n_clusters=" + s_clusters);
      if (!s_noise.empty()) sets.push_back("synth.noise_rate=" + s_noise);
      if (!s_seed.empty()) sets.push_back("synth.seed=" + s_seed);
      auto cfg = load_config(s_config, sets);
      check(seqdn_synth(cfg.p, s_out.c_str()));
      std::printf("wrote %s/interactions.tsv %s/noise_labels.tsv %s/semantic.semb\n", s_out.c_str(), s_out.c_str(),
                  s_out.c_str());
    } else if (*train) {
      auto cfg = load_config(t_config, t_sets);
      seqdn_train_summary sum{};
      check(seqdn_train(cfg.p, t_out.c_str(), &sum));
      std::printf("epochs %d best_epoch %d best_valid_NDCG@10 %.6f%s\n", sum.epochs_run, sum.best_epoch,
                  sum.best_valid_ndcg10, sum.stopped_early ? " (early stop)" : "");
    } else if (*eval) {
      seqdn_report* rep = nullptr;
      check(seqdn_evaluate(v_ckpt.c_str(), v_split.c_str(), v_emb.empty() ? nullptr : v_emb.c_str(), &rep));
      std::unique_ptr<seqdn_report, void (*)(seqdn_report*)> guard(rep, seqdn_report_free);
      OwnedString text;
      check(seqdn_report_format(rep, v_csv ? 1 : 0, &text.p));
      emit(text.str(), v_out);
    } else if (*report) {
      OwnedString text;
      check(seqdn_report_tables(r_hist.empty() ? nullptr : r_hist.c_str(), r_masks.empty() ? nullptr : r_masks.c_str(),
                                r_labels.empty() ? nullptr : r_labels.c_str(),
                                r_metrics.empty() ? nullptr : r_metrics.c_str(), &text.p));
      emit(text.str(), r_out);
    } else if (*sweep) {
      auto cfg = load_config(w_config, w_sets);
      const auto thetas = parse_list<double>(w_thetas);
      const auto seeds = parse_list<std::uint64_t>(w_seeds);
      OwnedString text;
      check(seqdn_sweep(cfg.p, thetas.data(), thetas.size(), seeds.data(), seeds.size(), &text.p));
      emit(text.str(), w_out);
    }
  } catch (const Failure& f) {
    const char* msg = seqdn_last_error();
    if (msg && *msg) std::cerr << "error: " << msg << "\n";
    return exit_code(f.status);
  }
  return 0;
}
