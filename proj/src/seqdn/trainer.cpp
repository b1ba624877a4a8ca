#include "seqdn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "seqdn/checkpoint.hpp"
#include "seqdn/errors.hpp"
#include "seqdn/fileio.hpp"
#include "seqdn/log.hpp"

namespace seqdn {

void validate(const TrainConfig& c) {
  if (!(c.lr > 0.0)) throw InputError("train.lr must be > 0");
  if (c.batch_size == 0) throw InputError("train.batch_size must be >= 1");
  if (c.patience < 1) throw InputError("train.patience must be >= 1");
  if (c.max_epochs < 1) throw InputError("train.max_epochs must be >= 1");
  if (c.weights.ce < 0 || c.weights.info < 0 || c.weights.recon < 0) throw InputError("loss weights must be >= 0");
  if (c.ablation.long_only && c.ablation.short_only) throw InputError("long_only and short_only are exclusive");
  if (!(c.align.tau > 0.0)) throw InputError("align.tau must be > 0");
  if (!(c.gate.tau_gumbel > 0.0)) throw InputError("gate.tau_gumbel must be > 0");
  if (c.gate.theta < -1.0 - 1e-12) throw InputError("gate.theta below -1 gates nothing out; use -1");
  if (c.gate.warmup_epochs < 0) throw InputError("gate.warmup_epochs must be >= 0");
  if (c.model.emb_dim == 0 || c.model.hidden == 0 || c.model.layers == 0) {
    throw InputError("model dimensions must be >= 1");
  }
}

ScoreTerms score_terms(const Ablation& a) {
  ScoreTerms t;
  if (a.long_only) t.c3 = false;
  if (a.short_only) t.c1 = t.c2 = false;
  return t;
}

std::span<const char> EpochMaskStore::get(std::size_t user, bool warn_missing) const {
  auto it = masks_.find(user);
  if (it == masks_.end()) {
    if (warn_missing) log::warn("mask store: no mask for user " + std::to_string(user) + ", using all ones");
    return {};
  }
  return it->second;
}

void EpochMaskStore::set(std::size_t user, std::vector<char> mask) { masks_[user] = std::move(mask); }

ad::Tensor masked_input(ad::Graph& g, const ad::Tensor& original, std::span<const char> mask) {
  if (mask.empty()) return original;
  if (original.rank() != 2 || mask.size() != original.rows()) throw ShapeError("masked_input: mask length mismatch");
  std::vector<double> s(mask.begin(), mask.end());
  for (auto& v : s) v = v != 0 ? 1.0 : 0.0;
  return g.row_scale(original, ad::Tensor::vector(std::move(s)));
}

ad::Tensor reconstruct(ad::Graph& g, const ad::Tensor& H, const ad::Tensor& K, const Decoder& decoder) {
  return g.affine(g.row_scale(H, K), decoder.W, decoder.b);
}

ad::Tensor recon_loss(ad::Graph& g, const ad::Tensor& reconstruction, const ad::Tensor& original,
                      std::size_t gated_users) {
  if (gated_users == 0) {
    log::warn("recon_loss: no gated users, loss defined as 0");
    return ad::Tensor::scalar(0.0);
  }
  const auto diff = g.sub(reconstruction, g.detach(original));
  return g.scale(g.sum(g.mul(diff, diff)), 1.0 / static_cast<double>(gated_users));
}

TermWeights term_weights(const LossWeights& w, const Ablation& a) {
  TermWeights t;
  t.ce = w.ce;
  const double info = a.disable_info ? 0.0 : w.info;
  t.info_long = a.short_only ? 0.0 : info;
  t.info_short = a.long_only ? 0.0 : info;
  t.recon = a.disable_recon ? 0.0 : w.recon;
  return t;
}

ad::Tensor total_loss(ad::Graph& g, const LossParts& parts, const TermWeights& w) {
  const std::pair<const char*, const ad::Tensor*> named[] = {
      {"L_CE", &parts.ce}, {"L_long", &parts.info_long}, {"L_short", &parts.info_short}, {"L_recon", &parts.recon}};
  for (const auto& [name, t] : named) {
    if (!t->defined()) throw std::invalid_argument(std::string("total_loss: missing ") + name);
    if (!std::isfinite(t->item())) throw NumericError(std::string("non-finite loss term ") + name);
  }
  auto total = g.scale(parts.ce, w.ce);
  total = g.add(total, g.scale(parts.info_long, w.info_long));
  total = g.add(total, g.scale(parts.info_short, w.info_short));
  total = g.add(total, g.scale(parts.recon, w.recon));
  return total;
}

std::string history_csv(std::span<const EpochRecord> history) {
  std::string out = "epoch,L_CE,L_long,L_short,L_recon,L_total,valid_HR@10,valid_NDCG@10,denoise_ratio\n";
  for (const auto& r : history) {
    out += std::to_string(r.epoch);
    for (const double v : {r.ce, r.info_long, r.info_short, r.recon, r.total, r.valid_hr10, r.valid_ndcg10,
                           r.denoise_ratio}) {
      out += "," + format_double(v);
    }
    out += "\n";
  }
  return out;
}

std::string checkpoint_metadata(int epoch, std::uint64_t config_hash, double best_metric,
                                const std::string& config_json) {
  nlohmann::ordered_json j;
  j["format"] = "seqdn-checkpoint";
  j["epoch"] = epoch;
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(config_hash));
  j["config_hash"] = hash;
  j["best_metric"] = best_metric;
  j["best_metric_name"] = "valid_NDCG@10";
  j["config"] = config_json.empty() ? nlohmann::ordered_json::object() : nlohmann::ordered_json::parse(config_json);
  return j.dump(2);
}

namespace {

std::size_t sem_dim_of(const TrainData& d) { return d.provider.output_dim(d.table); }

}  // namespace

Trainer::Trainer(TrainData data, TrainConfig config)
    : data_(data),
      config_(std::move(config)),
      model_((validate(config_), data.split.catalog.n_items()), sem_dim_of(data), config_.model, config_.seed),
      params_(model_.parameters()),
      adam_(AdamConfig{config_.lr}),
      rng_(mix_seed(config_.seed ^ 0x7a11ULL)) {
  if (data_.split.users.empty()) throw InputError("training split has no users");
  if (data_.provider.mode() != PrefixMode::pseudo_random) data_.table.require_complete(data_.split.catalog);
}

std::span<const std::size_t> Trainer::window(std::size_t i) const {
  const auto& train = data_.split.users[i].train;
  const std::size_t max_len = static_cast<std::size_t>(std::max(1, data_.split.config.max_len));
  const std::size_t n = std::min(train.size(), max_len);
  return std::span(train).last(n);
}

DenoiseOptions Trainer::denoise_options() const { return {config_.gate, score_terms(config_.ablation)}; }

Trainer::BatchLosses Trainer::step(std::span<const std::size_t> users, int epoch,
                                   std::map<std::size_t, std::vector<char>>& next) {
  ad::Graph g;
  const auto& split = data_.split;
  std::vector<SequenceInput> inputs;
  inputs.reserve(users.size());
  for (const auto u : users) {
    const auto w = window(u);
    auto keep = store_.get(u, epoch > 0);
    if (!keep.empty() && keep.size() != w.size()) {
      log::warn("mask store: mask length differs from window, using all ones");
      keep = {};
    }
    inputs.push_back({&split.catalog.user_id(split.users[u].user), split.users[u].train, w, keep});
  }
  const auto fwd = encode_batch(g, model_, inputs);
  const auto bundle = interests(g, model_, fwd, semantic_batch(inputs, data_.provider, data_.table));
  const auto& table = model_.encoder().item_table();

  LossParts parts;
  {
    std::vector<std::size_t> targets;
    std::vector<double> weights;
    for (std::size_t b = 0; b < inputs.size(); ++b) {
      const auto& in = inputs[b];
      for (std::size_t t = 0; t + 1 < in.window.size(); ++t) {
        targets.push_back(in.window[t + 1] - 1);
        weights.push_back(config_.mask_targets && !in.keep.empty() && !in.keep[t + 1] ? 0.0 : 1.0);
      }
    }
    parts.ce = targets.empty() ? ad::Tensor::scalar(0.0)
                               : g.softmax_cross_entropy(score_items(g, bundle.h, table, model_.encoder().head()),
                                                         targets, weights);
  }
  const auto align = alignment_loss(g, bundle, config_.align);
  parts.info_long = align.long_term;
  parts.info_short = align.short_term;

  // Gate, score and sample this epoch's masks.
  const bool gating = epoch >= config_.gate.warmup_epochs;
  std::vector<std::size_t> gated_users;
  std::vector<std::size_t> rows, owner;
  for (std::size_t b = 0; b < inputs.size(); ++b) {
    next[users[b]] = std::vector<char>(inputs[b].window.size(), 1);
    if (!gating || !user_gate(row_values(bundle.e1, b), row_values(bundle.e2, b), config_.gate.theta)) continue;
    gated_users.push_back(b);
    for (std::size_t i = fwd.prefix_begin[b]; i < fwd.prefix_begin[b + 1]; ++i) {
      rows.push_back(i);
      owner.push_back(b);
    }
  }
  BatchLosses out{};
  ad::Tensor sampled;
  if (!rows.empty()) {
    const auto scores = score_tensor(g, bundle.e1, bundle.e2, g.gather_rows(bundle.l, rows),
                                     g.gather_rows(bundle.h, rows), owner, score_terms(config_.ablation));
    const auto noise = draw_uniforms(rows.size(), rng_);
    const auto sample = sample_masks(g, scores, noise, gumbel_tau(config_.gate, epoch, config_.max_epochs), config_.gate);
    sampled = sample.mask;
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const std::size_t b = owner[k];
      next[users[b]][rows[k] - fwd.prefix_begin[b]] = sample.keep[k];
      out.removed += sample.keep[k] ? 0 : 1;
    }
    out.gated_positions = rows.size();
  }

  if (gated_users.empty()) {
    parts.recon = ad::Tensor::scalar(0.0);
  } else {
    std::vector<std::size_t> state_rows, items, kindex;
    const std::size_t n_sampled = rows.size();
    std::size_t sample_pos = 0;
    for (std::size_t gi = 0; gi < gated_users.size(); ++gi) {
      const std::size_t b = gated_users[gi];
      const auto& w = inputs[b].window;
      for (std::size_t t = 0; t < w.size(); ++t) {
        state_rows.push_back(fwd.row(b, t));
        items.push_back(w[t]);
        kindex.push_back(t + 1 < w.size() ? sample_pos++ : n_sampled + gi);
      }
    }
    const auto ones = ad::Tensor::vector(std::vector<double>(gated_users.size(), 1.0));
    ad::Tensor kall = ones;
    if (sampled.defined()) {
      const ad::Tensor pieces[] = {sampled, ones};
      kall = g.concat(pieces);
    }
    const auto K = g.gather_rows(kall, kindex);
    const auto xhat = reconstruct(g, g.gather_rows(fwd.states, state_rows), K, model_.decoder());
    parts.recon = recon_loss(g, xhat, embed_sequence(g, items, table), gated_users.size());
  }

  const auto total = total_loss(g, parts, term_weights(config_.weights, config_.ablation));
  for (auto& p : params_) p.tensor.zero_grad();
  g.backward(total);
  adam_.step(params_);
  model_.encoder().clear_padding_row();

  out.ce = parts.ce.item();
  out.info_long = parts.info_long.item();
  out.info_short = parts.info_short.item();
  out.recon = parts.recon.item();
  out.total = total.item();
  if (!std::isfinite(out.total)) throw NumericError("non-finite total loss");
  return out;
}

EpochRecord Trainer::run_epoch(int epoch) {
  const std::size_t n = data_.split.users.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng_.shuffle(std::span(order));
  std::map<std::size_t, std::vector<char>> next;
  EpochRecord rec;
  rec.epoch = epoch + 1;
  std::size_t batches = 0, gated = 0, removed = 0;
  for (std::size_t begin = 0; begin < n; begin += config_.batch_size) {
    const auto users = std::span(order).subspan(begin, std::min(config_.batch_size, n - begin));
    const auto l = step(users, epoch, next);
    rec.ce += l.ce;
    rec.info_long += l.info_long;
    rec.info_short += l.info_short;
    rec.recon += l.recon;
    rec.total += l.total;
    gated += l.gated_positions;
    removed += l.removed;
    ++batches;
  }
  const double nb = static_cast<double>(batches);
  rec.ce /= nb;
  rec.info_long /= nb;
  rec.info_short /= nb;
  rec.recon /= nb;
  rec.total /= nb;
  rec.denoise_ratio = gated == 0 ? 0.0 : static_cast<double>(removed) / static_cast<double>(gated);
  store_.replace(std::move(next));
  return rec;
}

MetricsReport Trainer::validate_model() const {
  ModelScorer scorer(model_, data_.split.catalog, data_.table, data_.provider, denoise_options(), config_.denoise_eval);
  EvalOptions opts;
  opts.buckets = false;
  return evaluate(scorer, data_.split, Stage::valid, opts);
}

TrainResult Trainer::train(const TrainIO& io) {
  TrainResult result;
  std::vector<std::vector<double>> best(params_.size());
  std::vector<MaskRecord> dump;
  int bad = 0;
  for (int e = 0; e < config_.max_epochs; ++e) {
    auto rec = run_epoch(e);
    const auto report = validate_model();
    rec.valid_hr10 = report.hr[1];
    rec.valid_ndcg10 = report.ndcg[1];
    result.history.push_back(rec);
    log::info("epoch " + std::to_string(rec.epoch) + " loss " + format_double(rec.total) + " valid NDCG@10 " +
              format_double(rec.valid_ndcg10));
    if (io.mask_dump) {
      for (const auto& [u, m] : store_.all()) {
        dump.push_back({data_.split.catalog.user_id(data_.split.users[u].user), rec.epoch, m});
      }
      write_mask_dump(*io.mask_dump, dump);
    }
    if (rec.valid_ndcg10 > result.best_metric) {
      result.best_metric = rec.valid_ndcg10;
      result.best_epoch = rec.epoch;
      for (std::size_t i = 0; i < params_.size(); ++i) {
        const auto v = params_[i].tensor.data();
        best[i].assign(v.begin(), v.end());
      }
      if (io.checkpoint) {
        write_checkpoint(*io.checkpoint,
                         checkpoint_metadata(rec.epoch, io.config_hash, rec.valid_ndcg10, io.metadata_config),
                         params_);
      }
      bad = 0;
    } else {
      ++bad;
    }
    if (io.history) write_file_atomic(*io.history, history_csv(result.history));
    if (bad >= config_.patience) {
      result.stopped_early = e + 1 < config_.max_epochs;
      break;
    }
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto dst = params_[i].tensor.mutable_data();
    std::copy(best[i].begin(), best[i].end(), dst.begin());
  }
  return result;
}

}  // namespace seqdn
