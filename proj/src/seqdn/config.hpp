#pragma once

// Run configuration: a JSON document with one object per section. Every key
// has a default; unknown keys are rejected. Flag-level overrides use
// "section.key=value" with a JSON value (bare words are taken as strings).

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>

#include "seqdn/dataio.hpp"
#include "seqdn/eval.hpp"
#include "seqdn/semantic.hpp"
#include "seqdn/synthetic.hpp"
#include "seqdn/trainer.hpp"

namespace seqdn {

struct SemanticConfig {
  PrefixMode prefix_mode = PrefixMode::mean_pool;
  std::size_t pseudo_dim = 32;  // for pseudo_random prefixes
  std::uint64_t pseudo_seed = 7;
};

struct EvalConfig {
  BucketMode bucket_mode = BucketMode::items;
  std::size_t n_buckets = 5;
  std::size_t batch_size = 64;
};

struct PathConfig {
  std::string split;
  std::string embeddings;
  std::string prefix_file;
  std::string labels;
};

struct Config {
  PreprocessConfig data;
  TrainConfig train;
  SemanticConfig semantic;
  EvalConfig eval;
  SyntheticSpec synth;
  PathConfig paths;
};

// Canonical JSON text (sorted sections, fixed key order, 2-space indent).
std::string config_to_json(const Config& config);
Config config_from_json(std::string_view text);

// Defaults <- file (optional) <- overrides. If train.seed is set by neither
// the file nor an override and SEQDN_SEED is set, that value is used.
Config build_config(const std::optional<std::filesystem::path>& file, std::span<const std::string> overrides);

// FNV-1a 64 of the canonical JSON.
std::uint64_t config_hash(const Config& config);
std::string hash_hex(std::uint64_t hash);

}  // namespace seqdn
