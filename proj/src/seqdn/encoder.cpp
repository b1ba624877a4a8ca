#include "seqdn/encoder.hpp"

#include <cmath>

#include "seqdn/errors.hpp"

namespace seqdn {

ad::Tensor uniform_init(ad::Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<double> values(ad::numel_of(shape));
  for (auto& v : values) v = rng.uniform(-bound, bound);
  return ad::Tensor::from(std::move(shape), std::move(values), true);
}

GruBackbone::GruBackbone(std::size_t input_dim, std::size_t hidden, std::size_t layers, Rng& rng)
    : input_dim_(input_dim), hidden_(hidden) {
  if (layers == 0) throw std::invalid_argument("GruBackbone: need at least one layer");
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t in = l == 0 ? input_dim : hidden;
    GruLayer layer;
    layer.Wz = uniform_init({in, hidden}, hidden, rng);
    layer.Wr = uniform_init({in, hidden}, hidden, rng);
    layer.Wh = uniform_init({in, hidden}, hidden, rng);
    layer.Uz = uniform_init({hidden, hidden}, hidden, rng);
    layer.Ur = uniform_init({hidden, hidden}, hidden, rng);
    layer.Uh = uniform_init({hidden, hidden}, hidden, rng);
    layer.bz = uniform_init({hidden}, hidden, rng);
    layer.br = uniform_init({hidden}, hidden, rng);
    layer.bh = uniform_init({hidden}, hidden, rng);
    layers_.push_back(std::move(layer));
  }
}

std::vector<ad::Tensor> GruBackbone::encode(ad::Graph& g, std::span<const ad::Tensor> inputs,
                                            std::span<const std::vector<char>> keep) const {
  if (inputs.empty()) throw ShapeError("gru: empty input sequence");
  if (keep.size() != inputs.size()) throw ShapeError("gru: keep mask length differs from input length");
  const std::size_t batch = inputs[0].rows();
  for (const auto& x : inputs) {
    if (x.rank() != 2 || x.shape()[0] != batch || x.shape()[1] != input_dim_) {
      throw ShapeError("gru: step input " + ad::shape_str(x.shape()) + ", expected [" + std::to_string(batch) +
                       "," + std::to_string(input_dim_) + "]");
    }
  }
  std::vector<ad::Tensor> states(layers_.size(), ad::Tensor::zeros({batch, hidden_}));
  std::vector<ad::Tensor> top;
  top.reserve(inputs.size());
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    const auto& flags = keep[t];
    if (flags.size() != batch) throw ShapeError("gru: keep row has wrong batch size");
    bool all_kept = true, none_kept = true;
    for (const char f : flags) {
      all_kept = all_kept && f;
      none_kept = none_kept && !f;
    }
    if (none_kept) {
      top.push_back(states.back());
      continue;
    }
    ad::Tensor x = inputs[t];
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const GruLayer& p = layers_[l];
      const ad::Tensor& h = states[l];
      auto z = g.sigmoid(g.add(g.affine(x, p.Wz, p.bz), g.matmul(h, p.Uz)));
      auto r = g.sigmoid(g.add(g.affine(x, p.Wr, p.br), g.matmul(h, p.Ur)));
      auto c = g.tanh(g.add(g.affine(x, p.Wh, p.bh), g.matmul(g.mul(r, h), p.Uh)));
      auto next = g.add(h, g.mul(z, g.sub(c, h)));
      states[l] = all_kept ? next : g.where_rows(flags, next, h);
      x = states[l];
    }
    top.push_back(states.back());
  }
  return top;
}

void GruBackbone::collect_parameters(std::vector<NamedParameter>& out) {
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const std::string p = "gru.l" + std::to_string(l + 1) + ".";
    auto& L = layers_[l];
    out.push_back({p + "Wz", L.Wz});
    out.push_back({p + "Wr", L.Wr});
    out.push_back({p + "Wh", L.Wh});
    out.push_back({p + "Uz", L.Uz});
    out.push_back({p + "Ur", L.Ur});
    out.push_back({p + "Uh", L.Uh});
    out.push_back({p + "bz", L.bz});
    out.push_back({p + "br", L.br});
    out.push_back({p + "bh", L.bh});
  }
}

CollaborativeEncoder::CollaborativeEncoder(std::size_t n_items, std::size_t emb_dim,
                                           std::unique_ptr<SequenceBackbone> backbone, Rng& rng)
    : n_items_(n_items), emb_dim_(emb_dim), backbone_(std::move(backbone)) {
  if (backbone_->input_dim() != emb_dim) throw ShapeError("encoder: backbone input dim differs from embedding dim");
  std::vector<double> table((n_items + 1) * emb_dim, 0.0);
  for (std::size_t i = emb_dim; i < table.size(); ++i) table[i] = 0.1 * rng.normal();
  item_emb_ = ad::Tensor::matrix(n_items + 1, emb_dim, std::move(table), true);
  head_.W = uniform_init({backbone_->hidden_dim(), emb_dim}, backbone_->hidden_dim(), rng);
  head_.b = uniform_init({emb_dim}, backbone_->hidden_dim(), rng);
}

void CollaborativeEncoder::collect_parameters(std::vector<NamedParameter>& out) {
  out.push_back({"item_emb", item_emb_});
  backbone_->collect_parameters(out);
  out.push_back({"head.W", head_.W});
  out.push_back({"head.b", head_.b});
}

void CollaborativeEncoder::clear_padding_row() {
  auto values = item_emb_.mutable_data();
  std::fill(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(emb_dim_), 0.0);
  if (item_emb_.has_grad()) {
    auto grad = item_emb_.mutable_grad();
    std::fill(grad.begin(), grad.begin() + static_cast<std::ptrdiff_t>(emb_dim_), 0.0);
  }
}

ad::Tensor embed_sequence(ad::Graph& g, std::span<const std::size_t> items, const ad::Tensor& table) {
  for (const auto i : items) {
    if (i >= table.rows()) {
      throw ShapeError("embed_sequence: item index " + std::to_string(i) + " outside table of " +
                       std::to_string(table.rows()) + " rows");
    }
  }
  return g.gather_rows(table, items);
}

EncoderOutput gru_forward(ad::Graph& g, const ad::Tensor& x, const SequenceBackbone& backbone,
                          std::span<const char> keep) {
  if (x.rank() != 2 || x.rows() == 0) throw ShapeError("gru_forward: expected [len, d_in] input");
  const std::size_t len = x.rows();
  if (!keep.empty() && keep.size() != len) throw ShapeError("gru_forward: keep mask length differs from input");
  std::vector<ad::Tensor> steps;
  std::vector<std::vector<char>> flags;
  for (std::size_t t = 0; t < len; ++t) {
    steps.push_back(g.slice_rows(x, t, t + 1));
    flags.push_back({keep.empty() ? char{1} : keep[t]});
  }
  auto states = backbone.encode(g, steps, flags);
  EncoderOutput out;
  out.h = g.concat(states);
  out.e2 = g.row(states.back(), 0);
  return out;
}

ad::Tensor score_items(ad::Graph& g, const ad::Tensor& state, const ad::Tensor& table, const PredictionHead& head) {
  const ad::Tensor s = state.rank() == 1 ? g.stack(std::span(&state, 1)) : state;
  auto projected = g.affine(s, head.W, head.b);
  auto items = g.slice_rows(table, 1, table.rows());
  return g.matmul_nt(projected, items);
}

}  // namespace seqdn
