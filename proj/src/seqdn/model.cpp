#include "seqdn/model.hpp"

#include <algorithm>

#include "seqdn/errors.hpp"

namespace seqdn {

DenoisingRecommender::DenoisingRecommender(std::size_t n_items, std::size_t sem_dim, const ModelConfig& config,
                                           std::uint64_t seed)
    : config_(config),
      sem_dim_(sem_dim),
      init_rng_(mix_seed(config.init_seed != 0 ? config.init_seed : seed ^ 0x5eed1417ULL)),
      encoder_(n_items, config.emb_dim,
               std::make_unique<GruBackbone>(config.emb_dim, config.hidden, config.layers, init_rng_), init_rng_),
      proj_(SemanticProjection::init(sem_dim, config.hidden, init_rng_)) {
  if (n_items == 0) throw InputError("model: empty catalog");
  if (sem_dim == 0) throw InputError("model: semantic dimension is zero");
  decoder_.W = uniform_init({config.hidden, config.emb_dim}, config.hidden, init_rng_);
  decoder_.b = uniform_init({config.emb_dim}, config.hidden, init_rng_);
}

std::vector<NamedParameter> DenoisingRecommender::parameters() {
  std::vector<NamedParameter> out;
  encoder_.collect_parameters(out);
  out.push_back({"proj.W", proj_.W});
  out.push_back({"proj.b", proj_.b});
  out.push_back({"decoder.W", decoder_.W});
  out.push_back({"decoder.b", decoder_.b});
  return out;
}

BatchForward encode_batch(ad::Graph& g, const DenoisingRecommender& model, std::span<const SequenceInput> batch) {
  if (batch.empty()) throw std::invalid_argument("encode_batch: empty batch");
  BatchForward f;
  f.batch = batch.size();
  for (const auto& s : batch) {
    if (s.window.empty()) throw std::invalid_argument("encode_batch: empty sequence");
    if (!s.keep.empty() && s.keep.size() != s.window.size()) throw ShapeError("encode_batch: mask length mismatch");
    f.lengths.push_back(s.window.size());
    f.steps = std::max(f.steps, s.window.size());
  }
  const std::size_t L = f.steps, B = f.batch;
  std::vector<std::size_t> index(L * B, 0);
  std::vector<double> scale(L * B, 0.0);
  std::vector<std::vector<char>> keep(L, std::vector<char>(B, 0));
  for (std::size_t b = 0; b < B; ++b) {
    const auto& s = batch[b];
    const std::size_t pad = L - s.window.size();
    for (std::size_t t = 0; t < s.window.size(); ++t) {
      const bool k = s.keep.empty() || s.keep[t];
      index[(pad + t) * B + b] = s.window[t];
      scale[(pad + t) * B + b] = k ? 1.0 : 0.0;
      keep[pad + t][b] = k ? 1 : 0;
    }
  }
  const auto& table = model.encoder().item_table();
  auto x = g.row_scale(embed_sequence(g, index, table), ad::Tensor::vector(std::move(scale)));
  std::vector<ad::Tensor> steps;
  steps.reserve(L);
  for (std::size_t t = 0; t < L; ++t) steps.push_back(g.slice_rows(x, t * B, (t + 1) * B));
  const auto states = model.encoder().backbone().encode(g, steps, keep);
  f.states = g.concat(states);
  for (std::size_t b = 0; b < B; ++b) {
    f.prefix_begin.push_back(f.prefix_rows.size());
    for (std::size_t t = 0; t + 1 < f.lengths[b]; ++t) {
      f.prefix_rows.push_back(f.row(b, t));
      f.prefix_owner.push_back(b);
    }
    f.last_rows.push_back(f.row(b, f.lengths[b] - 1));
  }
  f.prefix_begin.push_back(f.prefix_rows.size());
  return f;
}

SemanticBatch semantic_batch(std::span<const SequenceInput> batch, const PrefixProvider& provider,
                             const SemanticTable& table) {
  const std::size_t D = provider.output_dim(table);
  std::vector<double> e1, l;
  std::size_t m = 0;
  for (const auto& s : batch) {
    if (s.user_id == nullptr) throw std::invalid_argument("semantic_batch: missing user id");
    const std::size_t n = s.window.size();
    const std::size_t offset = s.history.size() - n;
    if (s.history.size() < n) throw ShapeError("semantic_batch: window longer than history");
    const auto whole = provider.embed(*s.user_id, s.history, table);
    e1.insert(e1.end(), whole.begin(), whole.end());
    if (n < 2) continue;
    if (provider.mode() == PrefixMode::exact_file) {
      for (std::size_t t = 1; t < n; ++t) {
        const auto v = provider.embed(*s.user_id, s.history.first(offset + t), table);
        l.insert(l.end(), v.begin(), v.end());
      }
    } else {
      const auto all = provider.embed_all_prefixes(*s.user_id, s.history.first(offset + n - 1), table);
      l.insert(l.end(), all.begin() + static_cast<std::ptrdiff_t>(offset * D), all.end());
    }
    m += n - 1;
  }
  SemanticBatch out;
  out.e1 = ad::Tensor::matrix(batch.size(), D, std::move(e1));
  out.l = ad::Tensor::matrix(m, D, std::move(l));
  return out;
}

InterestBundle interests(ad::Graph& g, const DenoisingRecommender& model, const BatchForward& fwd,
                         const SemanticBatch& sem) {
  InterestBundle b;
  b.e1 = project(g, model.projection(), sem.e1);
  b.e2 = g.gather_rows(fwd.states, fwd.last_rows);
  if (!fwd.prefix_rows.empty()) {
    b.l = project(g, model.projection(), sem.l);
    b.h = g.gather_rows(fwd.states, fwd.prefix_rows);
  } else {
    b.l = ad::Tensor::zeros({0, model.config().hidden});
    b.h = ad::Tensor::zeros({0, model.config().hidden});
  }
  b.owner = fwd.prefix_owner;
  return b;
}

std::span<const double> row_values(const ad::Tensor& m, std::size_t r) {
  const std::size_t c = m.cols();
  return m.data().subspan(r * c, c);
}

std::vector<std::vector<char>> noiseless_masks(ad::Graph& g, const BatchForward& fwd, const InterestBundle& bundle,
                                               const DenoiseOptions& options, std::vector<char>* gated) {
  std::vector<std::vector<char>> masks(fwd.batch);
  std::vector<char> gate(fwd.batch, 0);
  std::vector<std::size_t> rows;
  for (std::size_t b = 0; b < fwd.batch; ++b) {
    masks[b].assign(fwd.lengths[b], 1);
    gate[b] = user_gate(row_values(bundle.e1, b), row_values(bundle.e2, b), options.gate.theta) ? 1 : 0;
    if (!gate[b]) continue;
    for (std::size_t i = fwd.prefix_begin[b]; i < fwd.prefix_begin[b + 1]; ++i) rows.push_back(i);
  }
  if (!rows.empty()) {
    std::vector<std::size_t> owner;
    for (const auto i : rows) owner.push_back(bundle.owner[i]);
    const auto scores = score_tensor(g, bundle.e1, bundle.e2, g.gather_rows(bundle.l, rows),
                                     g.gather_rows(bundle.h, rows), owner, options.terms);
    const auto sample = sample_masks(g, scores, {}, 1.0, options.gate);
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const std::size_t i = rows[k];
      const std::size_t b = bundle.owner[i];
      masks[b][i - fwd.prefix_begin[b]] = sample.keep[k];
    }
  }
  if (gated) *gated = std::move(gate);
  return masks;
}

ModelScorer::ModelScorer(const DenoisingRecommender& model, const Catalog& catalog, const SemanticTable& table,
                         const PrefixProvider& provider, DenoiseOptions options, bool denoise)
    : model_(model), catalog_(catalog), table_(table), provider_(provider), options_(options), denoise_(denoise) {}

std::vector<double> ModelScorer::score(std::span<const EvalCase> batch) {
  ad::Graph g;
  g.set_grad_enabled(false);
  std::vector<SequenceInput> inputs;
  inputs.reserve(batch.size());
  for (const auto& c : batch) {
    inputs.push_back({&catalog_.user_id(c.user), c.history, c.prefix, {}});
  }
  auto fwd = encode_batch(g, model_, inputs);
  std::vector<std::vector<char>> masks;
  if (denoise_) {
    const auto bundle = interests(g, model_, fwd, semantic_batch(inputs, provider_, table_));
    std::vector<char> gated;
    masks = noiseless_masks(g, fwd, bundle, options_, &gated);
    bool any_removed = false;
    for (std::size_t b = 0; b < batch.size(); ++b) {
      inputs[b].keep = masks[b];
      if (!gated[b]) continue;
      maskable_ += masks[b].size() - 1;
      for (const char k : masks[b]) {
        removed_ += k ? 0 : 1;
        any_removed = any_removed || !k;
      }
    }
    if (any_removed) fwd = encode_batch(g, model_, inputs);
  }
  const auto state = g.gather_rows(fwd.states, fwd.last_rows);
  const auto logits = score_items(g, state, model_.encoder().item_table(), model_.encoder().head());
  return {logits.data().begin(), logits.data().end()};
}

std::optional<double> ModelScorer::denoise_ratio() const {
  if (!denoise_) return std::nullopt;
  return maskable_ == 0 ? 0.0 : static_cast<double>(removed_) / static_cast<double>(maskable_);
}

std::vector<MaskRecord> final_masks(const DenoisingRecommender& model, const DatasetSplit& split,
                                    const SemanticTable& table, const PrefixProvider& provider,
                                    const DenoiseOptions& options, int epoch, std::size_t batch_size) {
  std::vector<MaskRecord> out;
  batch_size = std::max<std::size_t>(1, batch_size);
  for (std::size_t begin = 0; begin < split.users.size(); begin += batch_size) {
    const std::size_t end = std::min(split.users.size(), begin + batch_size);
    std::vector<SequenceInput> inputs;
    for (std::size_t i = begin; i < end; ++i) {
      const auto& u = split.users[i];
      inputs.push_back({&split.catalog.user_id(u.user), u.train, u.train, {}});
    }
    ad::Graph g;
    g.set_grad_enabled(false);
    const auto fwd = encode_batch(g, model, inputs);
    const auto bundle = interests(g, model, fwd, semantic_batch(inputs, provider, table));
    auto masks = noiseless_masks(g, fwd, bundle, options);
    for (std::size_t b = 0; b < inputs.size(); ++b) out.push_back({*inputs[b].user_id, epoch, std::move(masks[b])});
  }
  return out;
}

}  // namespace seqdn
