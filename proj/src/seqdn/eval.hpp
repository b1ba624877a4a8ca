#pragma once

// Full-catalog ranking metrics, popularity buckets and noise-recovery
// scoring.

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "seqdn/dataio.hpp"

namespace seqdn {

inline constexpr std::array<std::size_t, 3> kCutoffs = {5, 10, 20};

struct RankResult {
  std::size_t rank = 0;  // 1-based
  std::array<double, 3> hr{};
  std::array<double, 3> ndcg{};
};

// scores[j] is the score of item j + 1. Ties rank the lower item index
// first. target is a catalog item index (>= 1).
RankResult rank_and_score(std::span<const double> scores, std::size_t target);
double ndcg_at(std::size_t rank, std::size_t k);

// One evaluation query: the model sees `history` (full chronological
// history) through its newest `prefix` window and must rank `target`.
struct EvalCase {
  std::size_t user = 0;
  std::vector<std::size_t> history;
  std::vector<std::size_t> prefix;
  std::size_t target = 0;
};

enum class Stage { valid, test };
std::vector<EvalCase> eval_cases(const DatasetSplit& split, Stage stage);

class Scorer {
 public:
  virtual ~Scorer() = default;
  // Row-major [batch.size(), n_items] scores, column j = item j + 1.
  virtual std::vector<double> score(std::span<const EvalCase> batch) = 0;
  // Fraction of positions removed while scoring, if the scorer masks.
  virtual std::optional<double> denoise_ratio() const { return std::nullopt; }
};

enum class BucketMode { items, interactions };
BucketMode parse_bucket_mode(std::string_view name);
std::string_view bucket_mode_name(BucketMode mode);

// Item index -> bucket in [0, n_buckets), bucket 0 hottest. Entry 0 (padding)
// is unused. Counts come from training sequences only.
std::vector<std::size_t> popularity_buckets(std::span<const std::size_t> train_counts, std::size_t n_buckets,
                                            BucketMode mode);
// counts[i] = occurrences of item i in the training sequences.
std::vector<std::size_t> train_item_counts(const DatasetSplit& split);

struct NoiseRecovery {
  std::size_t flagged = 0;
  std::size_t noise = 0;
  std::size_t hits = 0;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
};

// keep[t] == 0 counts as flagged noise; labels[t] == 1 marks injected noise.
void accumulate_recovery(NoiseRecovery& acc, std::span<const char> keep, std::span<const char> labels);
void finalize_recovery(NoiseRecovery& acc);
NoiseRecovery noise_recovery(std::span<const std::vector<char>> masks, std::span<const std::vector<char>> labels);

struct MetricsReport {
  std::size_t users = 0;
  std::array<double, 3> hr{};
  std::array<double, 3> ndcg{};
  BucketMode bucket_mode = BucketMode::items;
  std::vector<double> bucket_ndcg5;
  std::vector<std::size_t> bucket_users;
  std::optional<double> denoise_ratio;
  std::optional<NoiseRecovery> recovery;
};

struct EvalOptions {
  std::size_t batch_size = 64;
  std::size_t n_buckets = 5;
  BucketMode bucket_mode = BucketMode::items;
  bool buckets = true;
};

MetricsReport evaluate(Scorer& scorer, const DatasetSplit& split, Stage stage, const EvalOptions& options = {});

// Pairwise sum in index order, for bit-stable averages.
double pairwise_sum(std::span<const double> values);

// "key value" lines.
std::string format_report(const MetricsReport& report);
// Header and one data row.
std::string report_csv(const MetricsReport& report);
// bucket,users,NDCG@5 rows.
std::string bucket_csv(const MetricsReport& report);

}  // namespace seqdn
