#pragma once

// User gating, per-position noise scores, Gumbel-Sigmoid masks and mask
// application.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "seqdn/rng.hpp"
#include "seqdn/tensor.hpp"

namespace seqdn {

struct GateConfig {
  double theta = -0.9;
  double tau_gumbel = 1.0;
  // Temperature reached at the last epoch under linear annealing; a value
  // <= 0 disables annealing.
  double tau_final = 0.0;
  bool hard = true;
  double eps = 1e-10;
  int warmup_epochs = 0;
};

// Temperature for `epoch` (0-based) of `max_epochs`.
double gumbel_tau(const GateConfig& cfg, int epoch, int max_epochs);

// Plain cosine; nullopt-like behaviour is expressed by `ok` = false when
// either vector has zero norm.
double cosine(std::span<const double> a, std::span<const double> b, bool* ok = nullptr);

// cos(e1, e2) >= theta. Zero vectors fail the gate with a warning.
bool user_gate(std::span<const double> e1, std::span<const double> e2, double theta);

// Which similarity terms enter the score. Ablations switch some off.
struct ScoreTerms {
  bool c1 = true;  // cos(e1, h_t)
  bool c2 = true;  // cos(e2, l_t)
  bool c3 = true;  // cos(h_t, l_t)
};

struct NoiseScore {
  double c1 = 0.0;
  double c2 = 0.0;
  double c3 = 0.0;
  double score = 0.0;
};

// Value-only scores for one user; l and h are [T, d] row-major.
std::vector<NoiseScore> item_scores(std::span<const double> e1, std::span<const double> e2,
                                    std::span<const double> l, std::span<const double> h, std::size_t dim,
                                    const ScoreTerms& terms = {});

// Differentiable scores for M prefixes. e1 and e2 are [N, d] (one row per
// user); l and h are [M, d]; owner maps prefixes to user rows. Returns [M].
ad::Tensor score_tensor(ad::Graph& g, const ad::Tensor& e1, const ad::Tensor& e2, const ad::Tensor& l,
                        const ad::Tensor& h, std::span<const std::size_t> owner, const ScoreTerms& terms = {});

struct GumbelSample {
  double m = 0.0;
  double y = 0.0;
};

// y = sigmoid((score + g) / tau), g = -log(-log(U + eps) + eps). Hard mode
// gives m = 1[y > 0.5]; soft mode gives m = y.
GumbelSample gumbel_sigmoid(double score, double u, double tau, bool hard, double eps);
GumbelSample gumbel_sigmoid(double score, const GateConfig& cfg, double tau, Rng& rng);

struct MaskSample {
  ad::Tensor mask;          // [M]; hard values forward, soft gradient backward
  std::vector<double> soft; // y per position
  std::vector<char> keep;   // m_t == 1 (hard) or y_t > 0.5 (soft)
};

// Samples one mask value per score entry. `noise` supplies U per position;
// when empty the noiseless path (g = 0) is used.
MaskSample sample_masks(ad::Graph& g, const ad::Tensor& scores, std::span<const double> noise, double tau,
                        const GateConfig& cfg);
// Draws U from rng in position order.
std::vector<double> draw_uniforms(std::size_t count, Rng& rng);

// Keeps positions with mask != 0 in order; an all-zero mask keeps the last
// item.
template <typename T>
std::vector<T> apply_mask(std::span<const T> seq, std::span<const char> mask);

// Fraction of zeros among the given masks.
double denoise_ratio(std::span<const std::vector<char>> masks);

struct MaskRecord {
  std::string user_id;
  int epoch = 0;
  std::vector<char> mask;
};

void write_mask_dump(std::ostream& out, std::span<const MaskRecord> records);
void write_mask_dump(const std::filesystem::path& path, std::span<const MaskRecord> records);
std::vector<MaskRecord> read_mask_dump(const std::filesystem::path& path);
std::vector<MaskRecord> parse_mask_dump(std::istream& in);

}  // namespace seqdn
