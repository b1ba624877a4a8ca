#pragma once

// Synthetic interaction logs with known noise positions. Users prefer one
// item cluster; a fraction of positions is replaced by out-of-cluster items
// and labelled as noise. Item semantics are cluster-correlated so the
// semantic channel carries a real noise signal.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "seqdn/dataio.hpp"
#include "seqdn/semantic.hpp"

namespace seqdn {

struct SyntheticSpec {
  std::size_t n_users = 500;
  std::size_t n_items = 300;
  std::size_t n_clusters = 5;
  std::size_t min_len = 20;
  std::size_t max_len = 40;
  double noise_rate = 0.2;
  // Probability that a clean position follows the cluster's item order from
  // the previous clean item instead of drawing uniformly in the cluster.
  double transition = 0.5;
  std::size_t sem_dim = 32;
  // Norm of the per-item perturbation around the cluster centroid.
  double sem_spread = 0.5;
  std::uint64_t seed = 1;
};

void validate(const SyntheticSpec& spec);

struct NoiseLabel {
  std::string user_id;
  std::size_t position = 0;  // 0-based position in the user's sequence
  bool noise = false;
};

struct SyntheticData {
  std::vector<Interaction> events;
  std::vector<NoiseLabel> labels;
  RawEmbeddings semantic;
  std::vector<std::size_t> item_cluster;  // by item number (1-based ids "i<k>"), entry 0 unused
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);

// `user_id position 0/1`, tab-separated.
void write_noise_labels(const std::filesystem::path& path, const std::vector<NoiseLabel>& labels);
std::vector<NoiseLabel> read_noise_labels(const std::filesystem::path& path);
// Per user, labels ordered by position. Positions must be 0..len-1.
std::map<std::string, std::vector<char>> labels_by_user(const std::vector<NoiseLabel>& labels);

}  // namespace seqdn
