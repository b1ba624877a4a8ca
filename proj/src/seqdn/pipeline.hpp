#pragma once

// End-to-end operations behind the command-line tool and the C API.

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "seqdn/config.hpp"
#include "seqdn/model.hpp"

namespace seqdn {

struct PrepareResult {
  DatasetStats raw;
  DatasetStats filtered;
  std::filesystem::path manifest;
  std::filesystem::path stats;
};

std::string format_stats(const std::string& label, const DatasetStats& s);

// Log -> k-core -> sequences -> leave-one-out split. Writes
// <out>/split.manifest and <out>/stats.txt.
PrepareResult prepare_dataset(const std::filesystem::path& input, LogFormat format, const std::filesystem::path& out,
                              const PreprocessConfig& config);

// Pseudo embeddings for every catalog item.
std::size_t embed_pseudo(const DatasetSplit& split, std::size_t dim, std::uint64_t seed,
                         const std::filesystem::path& out, bool binary);
// Validates an external SEMB file against the catalog; optionally rewrites it.
std::size_t embed_import(const DatasetSplit& split, const std::filesystem::path& in,
                         const std::optional<std::filesystem::path>& out, bool binary);

struct SynthPaths {
  std::filesystem::path interactions;
  std::filesystem::path labels;
  std::filesystem::path semantic;
};

// Writes interactions.tsv, noise_labels.tsv and semantic.semb under out.
SynthPaths write_synthetic(const SyntheticSpec& spec, const std::filesystem::path& out);

// Synthetic data already split, with labels keyed by user id.
struct SyntheticBenchmark {
  DatasetSplit split;
  SemanticTable table;
  std::map<std::string, std::vector<char>> labels;
};

SyntheticBenchmark make_synthetic_benchmark(const SyntheticSpec& spec, const PreprocessConfig& config);

PrefixProvider make_provider(const Config& config, const Catalog& catalog);

// Semantic table for training: paths.embeddings, or for pseudo_random
// prefixes an unused placeholder of matching size.
SemanticTable load_table(const Config& config, const Catalog& catalog);

// Noise recovery of masks against labels. Each mask covers a window ending
// just before the two held-out positions of the user's labelled sequence.
NoiseRecovery score_masks(std::span<const MaskRecord> masks, const std::map<std::string, std::vector<char>>& labels);

struct ExperimentResult {
  TrainResult train;
  MetricsReport test;
  std::vector<MaskRecord> final_masks;
};

// Train, evaluate on test, and (with labels) score the final masks.
ExperimentResult run_experiment(const Config& config, const DatasetSplit& split, const SemanticTable& table,
                                const PrefixProvider& provider,
                                const std::map<std::string, std::vector<char>>* labels = nullptr,
                                const TrainIO& io = {});

struct TrainOutputs {
  std::filesystem::path checkpoint;
  std::filesystem::path history;
  std::filesystem::path masks;
  std::filesystem::path final_masks;
  std::filesystem::path config;
  std::filesystem::path metrics;
  ExperimentResult result;
};

// Reads paths.split / paths.embeddings (and paths.labels if set) and writes
// checkpoint.sdck, history.csv, masks.txt, final_masks.txt, config.json and
// metrics.txt under out_dir.
TrainOutputs train_from_config(const Config& config, const std::filesystem::path& out_dir);

struct LoadedModel {
  Config config;
  std::unique_ptr<DenoisingRecommender> model;
  int epoch = 0;
};

// Rebuilds the model from a checkpoint; dimensions come from stored shapes
// and the configuration from its metadata.
LoadedModel load_model(const std::filesystem::path& checkpoint);

// Evaluates a checkpoint on the test stage of a split. The semantic table
// comes from `embeddings` when given, else from the checkpoint's config.
MetricsReport evaluate_checkpoint(const std::filesystem::path& checkpoint, const std::filesystem::path& split_path,
                                  const std::optional<std::filesystem::path>& embeddings);

// Per-epoch noise recovery rows for a mask dump.
std::string recovery_csv(std::span<const MaskRecord> masks, const std::map<std::string, std::vector<char>>& labels);

struct SweepRow {
  double theta = 0.0;
  double hr5 = 0.0;
  double ndcg5 = 0.0;
  double ndcg10 = 0.0;
};

// Mean test metrics per theta over the given training seeds.
std::vector<SweepRow> sweep_theta(const Config& base, const DatasetSplit& split, const SemanticTable& table,
                                  std::span<const double> thetas, std::span<const std::uint64_t> seeds);
std::string sweep_csv(std::span<const SweepRow> rows);

}  // namespace seqdn

namespace seqdn {

struct ReportInputs {
  std::optional<std::filesystem::path> history;
  std::optional<std::filesystem::path> masks;
  std::optional<std::filesystem::path> labels;
  std::optional<std::filesystem::path> metrics;  // key-value report from eval/train
};

// CSV sections: training summary, popularity buckets and per-epoch noise
// recovery, each preceded by a "# name" line. At least one input is needed.
std::string report_tables(const ReportInputs& inputs);

}  // namespace seqdn
