#pragma once

// Small synthetic benchmarks and configs for fast end-to-end tests.

#include "seqdn/config.hpp"
#include "seqdn/pipeline.hpp"

namespace seqdn::testing {

inline Config tiny_config(std::uint64_t seed = 1) {
  Config c;
  c.synth.n_users = 60;
  c.synth.n_items = 24;
  c.synth.n_clusters = 3;
  c.synth.min_len = 8;
  c.synth.max_len = 12;
  c.synth.sem_dim = 8;
  c.synth.seed = seed;
  c.data.k_core = 3;
  c.data.max_len = 8;
  c.train.model.emb_dim = 8;
  c.train.model.hidden = 8;
  c.train.model.layers = 1;
  c.train.batch_size = 16;
  c.train.lr = 1e-2;
  c.train.max_epochs = 2;
  c.train.seed = seed;
  c.eval.n_buckets = 3;
  return c;
}

struct Bench {
  Config config;
  SyntheticBenchmark data;
  PrefixProvider provider;
};

inline Bench tiny_bench(std::uint64_t seed = 1) {
  Config c = tiny_config(seed);
  auto data = make_synthetic_benchmark(c.synth, c.data);
  auto provider = make_provider(c, data.split.catalog);
  return {c, std::move(data), std::move(provider)};
}

}  // namespace seqdn::testing
