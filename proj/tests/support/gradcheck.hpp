#pragma once

// Central finite-difference checks against the tape's reverse pass. Each
// check reduces the op output to a scalar through a fixed random weighting
// so that every output element contributes to the gradient.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "seqdn/rng.hpp"
#include "seqdn/tensor.hpp"

namespace seqdn::testing {

inline constexpr double kFdStep = 1e-5;
inline constexpr double kFdTol = 1e-4;
// Denominator floor: gradients below this magnitude are compared absolutely.
inline constexpr double kFdFloor = 1e-2;

using Fn = std::function<ad::Tensor(ad::Graph&, std::vector<ad::Tensor>&)>;

struct GradReport {
  double max_rel = 0.0;
  std::size_t checked = 0;
  std::string worst;
};

inline ad::Tensor random_tensor(ad::Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(ad::numel_of(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return ad::Tensor::from(std::move(shape), std::move(v), true);
}

// Weighted sum of out with weights fixed by `seed`, so the scalar depends on
// every element.
inline ad::Tensor reduce(ad::Graph& g, const ad::Tensor& out, std::uint64_t seed) {
  if (out.numel() == 1 && out.rank() == 0) return out;
  Rng rng(seed);
  std::vector<double> w(out.numel());
  for (auto& x : w) x = rng.uniform(0.5, 1.5) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
  auto weights = ad::Tensor::from(out.shape(), std::move(w));
  return g.sum(g.mul(out, weights));
}

inline double evaluate(const Fn& fn, std::vector<ad::Tensor>& inputs, std::uint64_t seed) {
  ad::Graph g;
  g.set_grad_enabled(false);
  return reduce(g, fn(g, inputs), seed).item();
}

// Compares analytic and numeric gradients for every element of every input
// that requires a gradient.
inline GradReport gradcheck(const Fn& fn, std::vector<ad::Tensor> inputs, std::uint64_t seed = 99) {
  GradReport report;
  for (auto& t : inputs) {
    if (t.requires_grad()) t.zero_grad();
  }
  {
    ad::Graph g;
    g.backward(reduce(g, fn(g, inputs), seed));
  }
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto& t = inputs[k];
    if (!t.requires_grad()) continue;
    const std::vector<double> analytic(t.grad().begin(), t.grad().end());
    for (std::size_t i = 0; i < t.numel(); ++i) {
      const double saved = t.at(i);
      t.mutable_data()[i] = saved + kFdStep;
      const double up = evaluate(fn, inputs, seed);
      t.mutable_data()[i] = saved - kFdStep;
      const double down = evaluate(fn, inputs, seed);
      t.mutable_data()[i] = saved;
      const double numeric = (up - down) / (2.0 * kFdStep);
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), kFdFloor});
      const double rel = std::abs(analytic[i] - numeric) / denom;
      ++report.checked;
      if (rel > report.max_rel) {
        report.max_rel = rel;
        report.worst = "input " + std::to_string(k) + " element " + std::to_string(i) + ": analytic " +
                       std::to_string(analytic[i]) + " numeric " + std::to_string(numeric);
      }
    }
  }
  return report;
}

}  // namespace seqdn::testing
