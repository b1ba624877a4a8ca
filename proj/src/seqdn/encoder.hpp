#pragma once

// Collaborative encoder: item-ID embedding table, a sequence backbone that
// yields per-step states, and a dot-product prediction head tied to the
// item table.

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "seqdn/adam.hpp"
#include "seqdn/rng.hpp"
#include "seqdn/tensor.hpp"

namespace seqdn {

// Sequence-in, states-out. Inputs are per-time-step [B, d_in] matrices for a
// left-padded batch; keep[t][b] == 0 means row b holds its previous state at
// step t. Returns the top-layer state after every step, each [B, hidden].
class SequenceBackbone {
 public:
  virtual ~SequenceBackbone() = default;
  virtual std::vector<ad::Tensor> encode(ad::Graph& g, std::span<const ad::Tensor> inputs,
                                         std::span<const std::vector<char>> keep) const = 0;
  virtual std::size_t input_dim() const = 0;
  virtual std::size_t hidden_dim() const = 0;
  virtual void collect_parameters(std::vector<NamedParameter>& out) = 0;
};

struct GruLayer {
  ad::Tensor Wz, Wr, Wh;  // [d_in, hidden]
  ad::Tensor Uz, Ur, Uh;  // [hidden, hidden]
  ad::Tensor bz, br, bh;  // [hidden]
};

// Stacked GRU with zero initial state:
//   z = sigmoid(x Wz + h Uz + bz)
//   r = sigmoid(x Wr + h Ur + br)
//   c = tanh(x Wh + (r * h) Uh + bh)
//   h' = h + z * (c - h)
class GruBackbone final : public SequenceBackbone {
 public:
  GruBackbone(std::size_t input_dim, std::size_t hidden, std::size_t layers, Rng& rng);

  std::vector<ad::Tensor> encode(ad::Graph& g, std::span<const ad::Tensor> inputs,
                                 std::span<const std::vector<char>> keep) const override;
  std::size_t input_dim() const override { return input_dim_; }
  std::size_t hidden_dim() const override { return hidden_; }
  void collect_parameters(std::vector<NamedParameter>& out) override;

  std::vector<GruLayer>& layers() { return layers_; }
  const std::vector<GruLayer>& layers() const { return layers_; }

 private:
  std::size_t input_dim_;
  std::size_t hidden_;
  std::vector<GruLayer> layers_;
};

struct PredictionHead {
  ad::Tensor W;  // [hidden, d_c]
  ad::Tensor b;  // [d_c]
};

class CollaborativeEncoder {
 public:
  CollaborativeEncoder(std::size_t n_items, std::size_t emb_dim, std::unique_ptr<SequenceBackbone> backbone,
                       Rng& rng);

  std::size_t n_items() const { return n_items_; }
  std::size_t emb_dim() const { return emb_dim_; }
  std::size_t hidden_dim() const { return backbone_->hidden_dim(); }

  ad::Tensor& item_table() { return item_emb_; }
  const ad::Tensor& item_table() const { return item_emb_; }
  const SequenceBackbone& backbone() const { return *backbone_; }
  SequenceBackbone& backbone() { return *backbone_; }
  const PredictionHead& head() const { return head_; }
  PredictionHead& head() { return head_; }

  // item_emb, backbone parameters, head.W, head.b
  void collect_parameters(std::vector<NamedParameter>& out);

  // Resets row 0 (padding) of the item table and its gradient to zero.
  void clear_padding_row();

 private:
  std::size_t n_items_;
  std::size_t emb_dim_;
  ad::Tensor item_emb_;  // [n_items + 1, d_c], row 0 = padding
  std::unique_ptr<SequenceBackbone> backbone_;
  PredictionHead head_;
};

struct EncoderOutput {
  ad::Tensor h;   // [len, hidden], state after every step
  ad::Tensor e2;  // [hidden], state at the last kept step
};

// Row gather from the item table; index 0 yields the zero padding row.
ad::Tensor embed_sequence(ad::Graph& g, std::span<const std::size_t> items, const ad::Tensor& table);

// Single-sequence forward. x is [len, d_in]; keep (optional) marks steps that
// update the state.
EncoderOutput gru_forward(ad::Graph& g, const ad::Tensor& x, const SequenceBackbone& backbone,
                          std::span<const char> keep = {});

// Logits over real items 1..n for each row of state ([B, hidden] or
// [hidden]); column j scores item j + 1, so padding never ranks.
ad::Tensor score_items(ad::Graph& g, const ad::Tensor& state, const ad::Tensor& table,
                       const PredictionHead& head);

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialised trainable tensor.
ad::Tensor uniform_init(ad::Shape shape, std::size_t fan_in, Rng& rng);

}  // namespace seqdn
