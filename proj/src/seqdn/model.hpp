#pragma once

// The full denoising recommender: collaborative encoder, semantic
// projection and reconstruction decoder, plus batched forward helpers shared
// by training and evaluation.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "seqdn/alignment.hpp"
#include "seqdn/dataio.hpp"
#include "seqdn/denoiser.hpp"
#include "seqdn/encoder.hpp"
#include "seqdn/eval.hpp"
#include "seqdn/semantic.hpp"

namespace seqdn {

struct ModelConfig {
  std::size_t emb_dim = 64;
  std::size_t hidden = 128;
  std::size_t layers = 2;
  std::uint64_t init_seed = 0;  // 0: derive from the training seed
};

struct Decoder {
  ad::Tensor W;  // [hidden, emb_dim]
  ad::Tensor b;  // [emb_dim]
};

class DenoisingRecommender {
 public:
  DenoisingRecommender(std::size_t n_items, std::size_t sem_dim, const ModelConfig& config, std::uint64_t seed);

  std::size_t n_items() const { return encoder_.n_items(); }
  std::size_t sem_dim() const { return sem_dim_; }
  const ModelConfig& config() const { return config_; }

  CollaborativeEncoder& encoder() { return encoder_; }
  const CollaborativeEncoder& encoder() const { return encoder_; }
  const SemanticProjection& projection() const { return proj_; }
  const Decoder& decoder() const { return decoder_; }

  // Stable order: encoder parameters, proj.W, proj.b, decoder.W, decoder.b.
  std::vector<NamedParameter> parameters();

 private:
  ModelConfig config_;
  std::size_t sem_dim_;
  Rng init_rng_;
  CollaborativeEncoder encoder_;
  SemanticProjection proj_;
  Decoder decoder_;
};

// One sequence in a batch: the model reads `window` (the newest items of
// `history`); `keep` (empty = all ones) is the progressive mask over window.
struct SequenceInput {
  const std::string* user_id = nullptr;
  std::span<const std::size_t> history;
  std::span<const std::size_t> window;
  std::span<const char> keep;
};

// Left-padded batched GRU pass. Row (step * batch + b) of `states` is user
// b's state after `step`.
struct BatchForward {
  ad::Tensor states;
  std::size_t steps = 0;
  std::size_t batch = 0;
  std::vector<std::size_t> lengths;
  // Rows for window positions 0..n-2 of every user, user-major, with owner.
  std::vector<std::size_t> prefix_rows;
  std::vector<std::size_t> prefix_owner;
  std::vector<std::size_t> prefix_begin;  // per user offset into prefix_rows
  std::vector<std::size_t> last_rows;

  std::size_t row(std::size_t b, std::size_t t) const { return (steps - lengths[b] + t) * batch + b; }
};

// X = E[window] * keep, with masked steps also holding the recurrent state.
BatchForward encode_batch(ad::Graph& g, const DenoisingRecommender& model, std::span<const SequenceInput> batch);

// Raw semantic vectors: e1 [B, D] over each history, l [M, D] for the prefix
// lengths ending at window positions 0..n-2 (matching prefix_rows order).
struct SemanticBatch {
  ad::Tensor e1;
  ad::Tensor l;
};

SemanticBatch semantic_batch(std::span<const SequenceInput> batch, const PrefixProvider& provider,
                             const SemanticTable& table);

InterestBundle interests(ad::Graph& g, const DenoisingRecommender& model, const BatchForward& fwd,
                         const SemanticBatch& sem);

// Values of rows of a matrix tensor.
std::span<const double> row_values(const ad::Tensor& m, std::size_t r);

struct DenoiseOptions {
  GateConfig gate;
  ScoreTerms terms;
};

// Noiseless (g = 0) masks: per user, window-length keep flags with the last
// position always kept; ungated users get all ones. gated[b] reports the
// gate outcome.
std::vector<std::vector<char>> noiseless_masks(ad::Graph& g, const BatchForward& fwd, const InterestBundle& bundle,
                                               const DenoiseOptions& options, std::vector<char>* gated = nullptr);

// Ranks with the trained model. When denoising, the prefix is first encoded
// as is, noiseless masks are derived, and the masked prefix is re-encoded.
class ModelScorer final : public Scorer {
 public:
  ModelScorer(const DenoisingRecommender& model, const Catalog& catalog, const SemanticTable& table,
              const PrefixProvider& provider, DenoiseOptions options, bool denoise);

  std::vector<double> score(std::span<const EvalCase> batch) override;
  std::optional<double> denoise_ratio() const override;

 private:
  const DenoisingRecommender& model_;
  const Catalog& catalog_;
  const SemanticTable& table_;
  const PrefixProvider& provider_;
  DenoiseOptions options_;
  bool denoise_;
  std::size_t removed_ = 0;
  std::size_t maskable_ = 0;
};

// Noiseless masks over each user's full training sequence, in catalog user
// order. Used for noise-recovery scoring.
std::vector<MaskRecord> final_masks(const DenoisingRecommender& model, const DatasetSplit& split,
                                    const SemanticTable& table, const PrefixProvider& provider,
                                    const DenoiseOptions& options, int epoch, std::size_t batch_size = 64);

}  // namespace seqdn
