#pragma once

// Interaction ingestion, k-core filtering, chronological sequences and
// leave-one-out splits.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace seqdn {

struct Interaction {
  std::string user_id;
  std::string item_id;
  std::int64_t timestamp = 0;

  bool operator==(const Interaction&) const = default;
};

enum class LogFormat { tsv, movielens };

LogFormat parse_log_format(std::string_view name);

// Dense ids. Users occupy [0, m); items occupy [1, n] with 0 reserved for
// padding.
class Catalog {
 public:
  std::size_t add_user(const std::string& id);
  std::size_t add_item(const std::string& id);

  std::size_t n_users() const { return user_ids_.size(); }
  std::size_t n_items() const { return item_ids_.size() - 1; }

  const std::string& user_id(std::size_t index) const { return user_ids_.at(index); }
  const std::string& item_id(std::size_t index) const;
  std::optional<std::size_t> find_user(const std::string& id) const;
  std::optional<std::size_t> find_item(const std::string& id) const;

 private:
  std::vector<std::string> user_ids_;
  std::vector<std::string> item_ids_{std::string()};
  std::unordered_map<std::string, std::size_t> user_index_;
  std::unordered_map<std::string, std::size_t> item_index_;
};

struct UserSequence {
  std::size_t user = 0;
  std::vector<std::size_t> items;
  std::vector<std::int64_t> timestamps;
};

struct PreprocessConfig {
  int k_core = 5;
  int max_len = 32;
};

struct SequenceSet {
  Catalog catalog;
  std::vector<UserSequence> users;
};

struct Holdout {
  std::vector<std::size_t> prefix;  // newest max_len items before target
  std::size_t target = 0;
};

struct UserSplit {
  std::size_t user = 0;
  std::vector<std::size_t> train;  // full sequence minus the last two items
  Holdout valid;
  Holdout test;

  // train + valid target + test target, i.e. the untruncated sequence.
  std::vector<std::size_t> full_sequence() const;
};

struct DatasetSplit {
  Catalog catalog;
  PreprocessConfig config;
  std::vector<UserSplit> users;
};

struct DatasetStats {
  std::size_t users = 0;
  std::size_t items = 0;
  std::size_t actions = 0;
  double avg_len = 0.0;
  double sparsity = 0.0;  // 1 - actions / (users * items)
};

// Malformed rows raise InputError naming the 1-based line number. Blank
// lines are skipped; a trailing '\r' is accepted.
std::vector<Interaction> parse_interactions(std::istream& in, LogFormat format);
std::vector<Interaction> load_interactions(const std::filesystem::path& path, LogFormat format);
void write_interactions_tsv(std::ostream& out, std::span<const Interaction> events);

// Largest subset in which every user and every item has at least k events.
// Input order is preserved.
std::vector<Interaction> k_core_filter(std::span<const Interaction> events, int k);

// Per-user stable sort by timestamp; users with fewer than 3 events are
// dropped. Ids are assigned in order of first appearance.
SequenceSet build_sequences(std::span<const Interaction> events, const PreprocessConfig& config);

DatasetSplit leave_one_out_split(std::span<const UserSequence> sequences, const Catalog& catalog,
                                 const PreprocessConfig& config);

DatasetStats compute_stats(std::span<const Interaction> events);
DatasetStats compute_stats(const DatasetSplit& split);

// Split manifest: line-oriented text, see write_manifest for the layout.
void write_manifest(std::ostream& out, const DatasetSplit& split);
void write_manifest(const std::filesystem::path& path, const DatasetSplit& split);
DatasetSplit read_manifest(std::istream& in);
DatasetSplit read_manifest(const std::filesystem::path& path);

// Keeps the newest max_len entries.
std::vector<std::size_t> truncate_newest(std::span<const std::size_t> items, std::size_t max_len);

}  // namespace seqdn
