#include "seqdn/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "seqdn/checkpoint.hpp"
#include "seqdn/errors.hpp"
#include "seqdn/fileio.hpp"
#include "seqdn/log.hpp"

namespace seqdn {

std::string format_stats(const std::string& label, const DatasetStats& s) {
  return label + " users " + std::to_string(s.users) + " items " + std::to_string(s.items) + " actions " +
         std::to_string(s.actions) + " avg_len " + format_double(s.avg_len) + " sparsity " + format_double(s.sparsity);
}

PrepareResult prepare_dataset(const std::filesystem::path& input, LogFormat format, const std::filesystem::path& out,
                              const PreprocessConfig& config) {
  const auto events = load_interactions(input, format);
  if (events.empty()) throw InputError(input.string() + ": no interactions");
  PrepareResult r;
  r.raw = compute_stats(events);
  const auto filtered = k_core_filter(events, config.k_core);
  if (filtered.empty()) throw InputError("k-core filter removed every interaction");
  const auto seqs = build_sequences(filtered, config);
  if (seqs.users.empty()) throw InputError("no user has at least 3 interactions after filtering");
  const auto split = leave_one_out_split(seqs.users, seqs.catalog, config);
  r.filtered = compute_stats(split);
  std::filesystem::create_directories(out);
  r.manifest = out / "split.manifest";
  r.stats = out / "stats.txt";
  write_manifest(r.manifest, split);
  write_file_atomic(r.stats, format_stats("raw", r.raw) + "\n" + format_stats("filtered", r.filtered) + "\n");
  return r;
}

std::size_t embed_pseudo(const DatasetSplit& split, std::size_t dim, std::uint64_t seed,
                         const std::filesystem::path& out, bool binary) {
  const auto emb = pseudo_embeddings(split.catalog, dim, seed);
  write_embeddings(out, emb, binary);
  return emb.count();
}

std::size_t embed_import(const DatasetSplit& split, const std::filesystem::path& in,
                         const std::optional<std::filesystem::path>& out, bool binary) {
  const auto emb = read_embeddings(in);
  const auto table = bind_embeddings(emb, split.catalog);
  table.require_complete(split.catalog);
  if (out) write_embeddings(*out, emb, binary);
  return emb.count();
}

SynthPaths write_synthetic(const SyntheticSpec& spec, const std::filesystem::path& out) {
  const auto data = generate_synthetic(spec);
  std::filesystem::create_directories(out);
  SynthPaths p{out / "interactions.tsv", out / "noise_labels.tsv", out / "semantic.semb"};
  std::ostringstream tsv;
  write_interactions_tsv(tsv, data.events);
  write_file_atomic(p.interactions, tsv.str());
  write_noise_labels(p.labels, data.labels);
  write_embeddings(p.semantic, data.semantic);
  return p;
}

SyntheticBenchmark make_synthetic_benchmark(const SyntheticSpec& spec, const PreprocessConfig& config) {
  const auto data = generate_synthetic(spec);
  const auto filtered = k_core_filter(data.events, config.k_core);
  if (filtered.size() != data.events.size()) {
    throw InputError("synthetic benchmark: k-core filtering removed events, noise labels would misalign");
  }
  const auto seqs = build_sequences(filtered, config);
  SyntheticBenchmark b{leave_one_out_split(seqs.users, seqs.catalog, config), {}, labels_by_user(data.labels)};
  RawEmbeddings present;
  present.dim = data.semantic.dim;
  for (std::size_t i = 0; i < data.semantic.count(); ++i) {
    if (!b.split.catalog.find_item(data.semantic.ids[i])) continue;
    present.ids.push_back(data.semantic.ids[i]);
    const auto r = data.semantic.row(i);
    present.values.insert(present.values.end(), r.begin(), r.end());
  }
  b.table = bind_embeddings(present, b.split.catalog);
  return b;
}

PrefixProvider make_provider(const Config& config, const Catalog& catalog) {
  switch (config.semantic.prefix_mode) {
    case PrefixMode::exact_file:
      if (config.paths.prefix_file.empty()) throw InputError("prefix_mode exact_file needs paths.prefix_file");
      return PrefixProvider::exact(read_prefix_file(config.paths.prefix_file));
    case PrefixMode::pseudo_random:
      return PrefixProvider::pseudo_random(catalog, config.semantic.pseudo_dim, config.semantic.pseudo_seed);
    case PrefixMode::mean_pool:
      break;
  }
  return PrefixProvider::mean_pool();
}

SemanticTable load_table(const Config& config, const Catalog& catalog) {
  if (!config.paths.embeddings.empty()) return load_semantic_table(config.paths.embeddings, catalog);
  if (config.semantic.prefix_mode == PrefixMode::pseudo_random) return SemanticTable(catalog.n_items(), 1);
  throw InputError("paths.embeddings is required unless semantic.prefix_mode is pseudo_random");
}

namespace {

std::span<const char> aligned_labels(const MaskRecord& m, const std::map<std::string, std::vector<char>>& labels) {
  auto it = labels.find(m.user_id);
  if (it == labels.end()) throw InputError("no noise labels for user '" + m.user_id + "'");
  const auto& l = it->second;
  if (l.size() < 2 || m.mask.size() > l.size() - 2) {
    throw InputError("mask for user '" + m.user_id + "' is longer than its labelled training positions");
  }
  const std::size_t end = l.size() - 2;
  return std::span(l).subspan(end - m.mask.size(), m.mask.size());
}

}  // namespace

NoiseRecovery score_masks(std::span<const MaskRecord> masks, const std::map<std::string, std::vector<char>>& labels) {
  NoiseRecovery acc;
  for (const auto& m : masks) accumulate_recovery(acc, m.mask, aligned_labels(m, labels));
  finalize_recovery(acc);
  return acc;
}

ExperimentResult run_experiment(const Config& config, const DatasetSplit& split, const SemanticTable& table,
                                const PrefixProvider& provider,
                                const std::map<std::string, std::vector<char>>* labels, const TrainIO& io) {
  Trainer trainer({split, table, provider}, config.train);
  ExperimentResult r;
  r.train = trainer.train(io);
  ModelScorer scorer(trainer.model(), split.catalog, table, provider, trainer.denoise_options(),
                     config.train.denoise_eval);
  EvalOptions opts;
  opts.batch_size = config.eval.batch_size;
  opts.n_buckets = config.eval.n_buckets;
  opts.bucket_mode = config.eval.bucket_mode;
  opts.buckets = split.catalog.n_items() >= config.eval.n_buckets;
  r.test = evaluate(scorer, split, Stage::test, opts);
  r.final_masks = final_masks(trainer.model(), split, table, provider, trainer.denoise_options(), r.train.best_epoch,
                              config.eval.batch_size);
  if (labels) r.test.recovery = score_masks(r.final_masks, *labels);
  return r;
}

TrainOutputs train_from_config(const Config& config, const std::filesystem::path& out_dir) {
  if (config.paths.split.empty()) throw InputError("paths.split is required for training");
  const auto split = read_manifest(std::filesystem::path(config.paths.split));
  const auto table = load_table(config, split.catalog);
  const auto provider = make_provider(config, split.catalog);
  std::optional<std::map<std::string, std::vector<char>>> labels;
  if (!config.paths.labels.empty()) labels = labels_by_user(read_noise_labels(config.paths.labels));

  std::filesystem::create_directories(out_dir);
  TrainOutputs out;
  out.checkpoint = out_dir / "checkpoint.sdck";
  out.history = out_dir / "history.csv";
  out.masks = out_dir / "masks.txt";
  out.final_masks = out_dir / "final_masks.txt";
  out.config = out_dir / "config.json";
  out.metrics = out_dir / "metrics.txt";
  const auto json = config_to_json(config);
  write_file_atomic(out.config, json + "\n");
  TrainIO io;
  io.checkpoint = out.checkpoint;
  io.history = out.history;
  io.mask_dump = out.masks;
  io.metadata_config = json;
  io.config_hash = config_hash(config);
  out.result = run_experiment(config, split, table, provider, labels ? &*labels : nullptr, io);
  write_mask_dump(out.final_masks, out.result.final_masks);
  write_file_atomic(out.metrics, "config_hash " + hash_hex(io.config_hash) + "\nbest_epoch " +
                                     std::to_string(out.result.train.best_epoch) + "\n" + format_report(out.result.test));
  return out;
}

LoadedModel load_model(const std::filesystem::path& checkpoint) {
  if (!std::filesystem::exists(checkpoint)) throw InputError("checkpoint not found: " + checkpoint.string());
  const auto ck = read_checkpoint(checkpoint);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(ck.metadata);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(checkpoint.string() + ": unreadable metadata: " + e.what());
  }
  if (!meta.contains("config")) throw InputError(checkpoint.string() + ": metadata has no config");
  LoadedModel lm;
  lm.config = config_from_json(meta["config"].dump());
  lm.epoch = meta.value("epoch", 0);
  const auto* emb = ck.find("item_emb");
  const auto* proj = ck.find("proj.W");
  if (!emb || !proj || emb->shape.size() != 2 || proj->shape.size() != 2 || emb->shape[0] < 2) {
    throw InputError(checkpoint.string() + ": missing item_emb or proj.W");
  }
  lm.model = std::make_unique<DenoisingRecommender>(emb->shape[0] - 1, proj->shape[0], lm.config.train.model,
                                                    lm.config.train.seed);
  auto params = lm.model->parameters();
  restore_parameters(ck, params);
  return lm;
}

MetricsReport evaluate_checkpoint(const std::filesystem::path& checkpoint, const std::filesystem::path& split_path,
                                  const std::optional<std::filesystem::path>& embeddings) {
  auto lm = load_model(checkpoint);
  const auto split = read_manifest(split_path);
  if (split.catalog.n_items() != lm.model->n_items()) {
    throw InputError("checkpoint has " + std::to_string(lm.model->n_items()) + " items, split has " +
                     std::to_string(split.catalog.n_items()));
  }
  Config cfg = lm.config;
  if (embeddings) cfg.paths.embeddings = embeddings->string();
  const auto table = load_table(cfg, split.catalog);
  const auto provider = make_provider(cfg, split.catalog);
  if (provider.output_dim(table) != lm.model->sem_dim()) {
    throw InputError("semantic dimension " + std::to_string(provider.output_dim(table)) +
                     " differs from the checkpoint's " + std::to_string(lm.model->sem_dim()));
  }
  ModelScorer scorer(*lm.model, split.catalog, table, provider,
                     {cfg.train.gate, score_terms(cfg.train.ablation)}, cfg.train.denoise_eval);
  EvalOptions opts;
  opts.batch_size = cfg.eval.batch_size;
  opts.n_buckets = cfg.eval.n_buckets;
  opts.bucket_mode = cfg.eval.bucket_mode;
  opts.buckets = split.catalog.n_items() >= cfg.eval.n_buckets;
  return evaluate(scorer, split, Stage::test, opts);
}

std::string recovery_csv(std::span<const MaskRecord> masks, const std::map<std::string, std::vector<char>>& labels) {
  std::map<int, std::vector<MaskRecord>> by_epoch;
  for (const auto& m : masks) by_epoch[m.epoch].push_back(m);
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string("undefined"); };
  std::string out = "epoch,flagged,noise,hits,precision,recall,F1\n";
  for (const auto& [epoch, records] : by_epoch) {
    const auto r = score_masks(records, labels);
    out += std::to_string(epoch) + "," + std::to_string(r.flagged) + "," + std::to_string(r.noise) + "," +
           std::to_string(r.hits) + "," + opt(r.precision) + "," + opt(r.recall) + "," + opt(r.f1) + "\n";
  }
  return out;
}

std::vector<SweepRow> sweep_theta(const Config& base, const DatasetSplit& split, const SemanticTable& table,
                                  std::span<const double> thetas, std::span<const std::uint64_t> seeds) {
  if (seeds.empty()) throw InputError("sweep needs at least one seed");
  const auto provider = make_provider(base, split.catalog);
  std::vector<SweepRow> rows;
  for (const double theta : thetas) {
    SweepRow row;
    row.theta = theta;
    for (const auto seed : seeds) {
      Config c = base;
      c.train.gate.theta = theta;
      c.train.seed = seed;
      const auto r = run_experiment(c, split, table, provider);
      row.hr5 += r.test.hr[0];
      row.ndcg5 += r.test.ndcg[0];
      row.ndcg10 += r.test.ndcg[1];
    }
    const double n = static_cast<double>(seeds.size());
    row.hr5 /= n;
    row.ndcg5 /= n;
    row.ndcg10 /= n;
    rows.push_back(row);
  }
  return rows;
}

std::string sweep_csv(std::span<const SweepRow> rows) {
  std::string out = "theta,HR@5,NDCG@5,NDCG@10\n";
  for (const auto& r : rows) {
    out += format_double(r.theta) + "," + format_double(r.hr5) + "," + format_double(r.ndcg5) + "," +
           format_double(r.ndcg10) + "\n";
  }
  return out;
}

}  // namespace seqdn

namespace seqdn {

namespace {

std::vector<std::string> split_fields(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  return out;
}

std::string history_summary(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line) || line.rfind("epoch,", 0) != 0) throw InputError(path.string() + ": not a history CSV");
  int epochs = 0, best_epoch = 0;
  double best = -1.0, last_total = 0.0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_fields(line, ',');
    if (f.size() != 9) throw InputError(path.string() + ": malformed history row");
    ++epochs;
    last_total = std::stod(f[5]);
    const double ndcg = std::stod(f[7]);
    if (ndcg > best) {
      best = ndcg;
      best_epoch = std::stoi(f[0]);
    }
  }
  return "epochs,best_epoch,best_valid_NDCG@10,final_L_total\n" + std::to_string(epochs) + "," +
         std::to_string(best_epoch) + "," + format_double(best) + "," + format_double(last_total) + "\n";
}

std::string bucket_table(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::string line, mode = "items";
  std::map<int, std::pair<std::string, std::string>> rows;
  while (std::getline(in, line)) {
    const auto sp = line.find(' ');
    if (sp == std::string::npos) continue;
    const std::string key = line.substr(0, sp), value = line.substr(sp + 1);
    if (key == "bucket_mode") mode = value;
    if (key.rfind("bucket", 0) != 0 || key == "bucket_mode") continue;
    const auto us = key.find('_');
    const int b = std::stoi(key.substr(6, us - 6));
    if (key.ends_with("_NDCG@5")) rows[b].first = value;
    if (key.ends_with("_users")) rows[b].second = value;
  }
  if (rows.empty()) throw InputError(path.string() + ": no bucket metrics");
  std::string out = "bucket,mode,users,NDCG@5\n";
  for (const auto& [b, r] : rows) out += std::to_string(b) + "," + mode + "," + r.second + "," + r.first + "\n";
  return out;
}

}  // namespace

std::string report_tables(const ReportInputs& in) {
  if (!in.history && !in.masks && !in.metrics) throw InputError("report needs --history, --masks or --metrics");
  std::string out;
  if (in.history) out += "# training\n" + history_summary(*in.history);
  if (in.metrics) out += "# popularity_buckets\n" + bucket_table(*in.metrics);
  if (in.masks) {
    if (!in.labels) throw InputError("report: --masks requires --labels");
    const auto masks = read_mask_dump(*in.masks);
    const auto labels = labels_by_user(read_noise_labels(*in.labels));
    out += "# noise_recovery\n" + recovery_csv(masks, labels);
  }
  return out;
}

}  // namespace seqdn
