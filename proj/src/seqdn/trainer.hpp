#pragma once

// Joint training: progressive masked inputs, alignment, gating, mask
// sampling, reconstruction and early stopping on validation NDCG@10.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "seqdn/model.hpp"

namespace seqdn {

struct LossWeights {
  double ce = 1.0;
  double info = 1.0;
  double recon = 1.0;
};

struct Ablation {
  bool disable_info = false;
  bool disable_recon = false;
  bool long_only = false;   // drops c3 and L_short
  bool short_only = false;  // drops c1, c2 and L_long
};

struct TrainConfig {
  double lr = 1e-4;
  std::size_t batch_size = 32;
  int patience = 10;
  int max_epochs = 50;
  std::uint64_t seed = 42;
  LossWeights weights;
  Ablation ablation;
  // Weight each next-item CE target by the previous epoch's mask bit.
  bool mask_targets = true;
  // Use noiseless masks when ranking during validation and evaluation.
  bool denoise_eval = true;
  ModelConfig model;
  AlignConfig align;
  GateConfig gate;
};

void validate(const TrainConfig& cfg);
ScoreTerms score_terms(const Ablation& ablation);

// K^(e-1) per user index; users without an entry read as all ones.
class EpochMaskStore {
 public:
  // Missing users yield an empty span (all ones); `warn_missing` logs it.
  std::span<const char> get(std::size_t user, bool warn_missing = false) const;
  void set(std::size_t user, std::vector<char> mask);
  void replace(std::map<std::size_t, std::vector<char>> masks) { masks_ = std::move(masks); }
  const std::map<std::size_t, std::vector<char>>& all() const { return masks_; }

 private:
  std::map<std::size_t, std::vector<char>> masks_;
};

// X^(e) = X_original * K^(e-1), rowwise; an empty mask keeps X unchanged.
ad::Tensor masked_input(ad::Graph& g, const ad::Tensor& original, std::span<const char> mask);

// Decoder(H * K) rowwise; K is a [rows] tensor (may carry gradients).
ad::Tensor reconstruct(ad::Graph& g, const ad::Tensor& H, const ad::Tensor& K, const Decoder& decoder);

// Sum of squared errors over all rows/dims divided by the number of gated
// users. Target is detached. Zero users gives 0 with a warning.
ad::Tensor recon_loss(ad::Graph& g, const ad::Tensor& reconstruction, const ad::Tensor& original,
                      std::size_t gated_users);

struct LossParts {
  ad::Tensor ce;
  ad::Tensor info_long;
  ad::Tensor info_short;
  ad::Tensor recon;
};

struct TermWeights {
  double ce = 1.0;
  double info_long = 1.0;
  double info_short = 1.0;
  double recon = 1.0;
};

TermWeights term_weights(const LossWeights& w, const Ablation& ablation);

// Weighted sum. Throws NumericError naming any non-finite part.
ad::Tensor total_loss(ad::Graph& g, const LossParts& parts, const TermWeights& weights);

struct EpochRecord {
  int epoch = 0;  // 1-based
  double ce = 0.0;
  double info_long = 0.0;
  double info_short = 0.0;
  double recon = 0.0;
  double total = 0.0;
  double valid_hr10 = 0.0;
  double valid_ndcg10 = 0.0;
  double denoise_ratio = 0.0;
};

std::string history_csv(std::span<const EpochRecord> history);

struct TrainResult {
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  double best_metric = -1.0;
  bool stopped_early = false;
};

struct TrainIO {
  // Written after every improvement when set.
  std::optional<std::filesystem::path> checkpoint;
  std::optional<std::filesystem::path> history;
  std::optional<std::filesystem::path> mask_dump;  // per-epoch masks
  std::string metadata_config;                     // JSON text stored in checkpoint metadata
  std::uint64_t config_hash = 0;
};

struct TrainData {
  const DatasetSplit& split;
  const SemanticTable& table;
  const PrefixProvider& provider;
};

class Trainer {
 public:
  Trainer(TrainData data, TrainConfig config);

  DenoisingRecommender& model() { return model_; }
  const DenoisingRecommender& model() const { return model_; }
  const EpochMaskStore& masks() const { return store_; }
  const TrainConfig& config() const { return config_; }

  // One pass over all users; returns the epoch's averaged losses (valid
  // metrics left zero). `epoch` is 0-based.
  EpochRecord run_epoch(int epoch);
  MetricsReport validate_model() const;

  // Full loop with early stopping. Leaves the best parameters in model().
  TrainResult train(const TrainIO& io = {});

  // Training window of a user: newest max_len items of the train sequence.
  std::span<const std::size_t> window(std::size_t split_index) const;

  DenoiseOptions denoise_options() const;

 private:
  struct BatchLosses {
    double ce, info_long, info_short, recon, total;
    std::size_t gated_positions, removed;
  };
  BatchLosses step(std::span<const std::size_t> users, int epoch, std::map<std::size_t, std::vector<char>>& next);

  TrainData data_;
  TrainConfig config_;
  DenoisingRecommender model_;
  std::vector<NamedParameter> params_;
  Adam adam_;
  Rng rng_;
  EpochMaskStore store_;
};

std::string checkpoint_metadata(int epoch, std::uint64_t config_hash, double best_metric,
                                const std::string& config_json);

}  // namespace seqdn
