#include "seqdn/denoiser.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "seqdn/errors.hpp"
#include "seqdn/fileio.hpp"
#include "seqdn/log.hpp"

namespace seqdn {

double gumbel_tau(const GateConfig& cfg, int epoch, int max_epochs) {
  if (!(cfg.tau_gumbel > 0.0)) throw std::invalid_argument("gate.tau_gumbel must be > 0");
  if (cfg.tau_final <= 0.0 || max_epochs <= 1) return cfg.tau_gumbel;
  const double frac = std::min(1.0, static_cast<double>(epoch) / static_cast<double>(max_epochs - 1));
  return cfg.tau_gumbel + (cfg.tau_final - cfg.tau_gumbel) * frac;
}

double cosine(std::span<const double> a, std::span<const double> b, bool* ok) {
  if (a.size() != b.size()) throw ShapeError("cosine: length mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) {
    if (ok) *ok = false;
    return 0.0;
  }
  if (ok) *ok = true;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

bool user_gate(std::span<const double> e1, std::span<const double> e2, double theta) {
  bool ok = false;
  const double c = cosine(e1, e2, &ok);
  if (!ok) {
    log::warn("user_gate: zero long-term vector, user not gated");
    return false;
  }
  return c >= theta;
}

std::vector<NoiseScore> item_scores(std::span<const double> e1, std::span<const double> e2,
                                    std::span<const double> l, std::span<const double> h, std::size_t dim,
                                    const ScoreTerms& terms) {
  if (dim == 0 || l.size() != h.size() || l.size() % dim != 0 || e1.size() != dim || e2.size() != dim) {
    throw ShapeError("item_scores: inconsistent dimensions");
  }
  const std::size_t steps = l.size() / dim;
  if (steps == 0) throw std::invalid_argument("item_scores: no prefixes");
  std::vector<NoiseScore> out(steps);
  bool warned = false;
  for (std::size_t t = 0; t < steps; ++t) {
    const auto lt = l.subspan(t * dim, dim);
    const auto ht = h.subspan(t * dim, dim);
    bool ok1 = true, ok2 = true, ok3 = true;
    auto& s = out[t];
    s.c1 = cosine(e1, ht, &ok1);
    s.c2 = cosine(e2, lt, &ok2);
    s.c3 = cosine(ht, lt, &ok3);
    if (!(ok1 && ok2 && ok3) && !warned) {
      log::warn("item_scores: zero vector at step " + std::to_string(t + 1) + ", cosine set to 0");
      warned = true;
    }
    s.score = (terms.c1 ? s.c1 : 0.0) + (terms.c2 ? s.c2 : 0.0) + (terms.c3 ? s.c3 : 0.0);
  }
  return out;
}

ad::Tensor score_tensor(ad::Graph& g, const ad::Tensor& e1, const ad::Tensor& e2, const ad::Tensor& l,
                        const ad::Tensor& h, std::span<const std::size_t> owner, const ScoreTerms& terms) {
  if (l.rank() != 2 || l.shape() != h.shape() || owner.size() != l.rows()) {
    throw ShapeError("score_tensor: inconsistent prefix shapes");
  }
  ad::Tensor total;
  auto accumulate = [&](const ad::Tensor& term) { total = total.defined() ? g.add(total, term) : term; };
  if (terms.c1) accumulate(g.row_cosine(g.gather_rows(e1, owner), h));
  if (terms.c2) accumulate(g.row_cosine(g.gather_rows(e2, owner), l));
  if (terms.c3) accumulate(g.row_cosine(h, l));
  if (!total.defined()) total = ad::Tensor::zeros({l.rows()});
  return total;
}

namespace {

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double gumbel_noise(double u, double eps) { return -std::log(-std::log(u + eps) + eps); }

}  // namespace

GumbelSample gumbel_sigmoid(double score, double u, double tau, bool hard, double eps) {
  if (!(tau > 0.0)) throw std::invalid_argument("gumbel_sigmoid: tau must be > 0");
  GumbelSample s;
  s.y = stable_sigmoid((score + gumbel_noise(u, eps)) / tau);
  s.m = hard ? (s.y > 0.5 ? 1.0 : 0.0) : s.y;
  return s;
}

GumbelSample gumbel_sigmoid(double score, const GateConfig& cfg, double tau, Rng& rng) {
  return gumbel_sigmoid(score, rng.uniform(), tau, cfg.hard, cfg.eps);
}

std::vector<double> draw_uniforms(std::size_t count, Rng& rng) {
  std::vector<double> u(count);
  for (auto& x : u) x = rng.uniform();
  return u;
}

MaskSample sample_masks(ad::Graph& g, const ad::Tensor& scores, std::span<const double> noise, double tau,
                        const GateConfig& cfg) {
  if (!(tau > 0.0)) throw std::invalid_argument("sample_masks: tau must be > 0");
  const std::size_t m = scores.numel();
  if (!noise.empty() && noise.size() != m) throw ShapeError("sample_masks: noise length mismatch");
  std::vector<double> offset(m, 0.0);
  if (!noise.empty()) {
    for (std::size_t i = 0; i < m; ++i) offset[i] = gumbel_noise(noise[i], cfg.eps);
  }
  const auto y = g.sigmoid(g.scale(g.add(scores, ad::Tensor::vector(offset)), 1.0 / tau));
  MaskSample out;
  out.soft.assign(y.data().begin(), y.data().end());
  out.keep.resize(m);
  std::vector<double> hard(m);
  for (std::size_t i = 0; i < m; ++i) {
    out.keep[i] = out.soft[i] > 0.5 ? 1 : 0;
    hard[i] = out.keep[i] ? 1.0 : 0.0;
  }
  // (y - stop(y)) is exactly zero forward, so the mask holds the hard values
  // while gradients follow y.
  out.mask = cfg.hard ? g.add(g.sub(y, g.detach(y)), ad::Tensor::vector(std::move(hard))) : y;
  return out;
}

template <typename T>
std::vector<T> apply_mask(std::span<const T> seq, std::span<const char> mask) {
  if (seq.size() != mask.size()) throw ShapeError("apply_mask: length mismatch");
  std::vector<T> out;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (mask[i]) out.push_back(seq[i]);
  }
  if (out.empty() && !seq.empty()) out.push_back(seq.back());
  return out;
}

template std::vector<std::size_t> apply_mask<std::size_t>(std::span<const std::size_t>, std::span<const char>);
template std::vector<std::string> apply_mask<std::string>(std::span<const std::string>, std::span<const char>);

double denoise_ratio(std::span<const std::vector<char>> masks) {
  std::size_t zeros = 0, total = 0;
  for (const auto& m : masks) {
    total += m.size();
    for (const char c : m) zeros += c ? 0 : 1;
  }
  return total == 0 ? 0.0 : static_cast<double>(zeros) / static_cast<double>(total);
}

void write_mask_dump(std::ostream& out, std::span<const MaskRecord> records) {
  for (const auto& r : records) {
    out << r.user_id << ' ' << r.epoch << ' ';
    for (const char c : r.mask) out << (c ? '1' : '0');
    out << '\n';
  }
}

void write_mask_dump(const std::filesystem::path& path, std::span<const MaskRecord> records) {
  std::ostringstream out;
  write_mask_dump(out, records);
  write_file_atomic(path, out.str());
}

std::vector<MaskRecord> parse_mask_dump(std::istream& in) {
  std::vector<MaskRecord> out;
  std::string line;
  std::size_t ln = 0;
  while (std::getline(in, line)) {
    ++ln;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream fields(line);
    MaskRecord r;
    std::string bits, extra;
    if (!(fields >> r.user_id >> r.epoch >> bits) || (fields >> extra)) {
      throw InputError("mask dump line " + std::to_string(ln) + ": expected '<user_id> <epoch> <bits>'");
    }
    for (const char c : bits) {
      if (c != '0' && c != '1') throw InputError("mask dump line " + std::to_string(ln) + ": mask must be 0/1");
      r.mask.push_back(c == '1' ? 1 : 0);
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<MaskRecord> read_mask_dump(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open mask dump " + path.string());
  try {
    return parse_mask_dump(in);
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

}  // namespace seqdn
