#pragma once

// Contrastive alignment of collaborative and semantic interests.

#include <cstddef>
#include <vector>

#include "seqdn/tensor.hpp"

namespace seqdn {

struct AlignConfig {
  double tau = 0.1;
};

// Batched interests. Long-term vectors have one row per user; short-term
// vectors have one row per real prefix, owner[i] naming the user row.
struct InterestBundle {
  ad::Tensor e1;  // [N, d] projected semantic long-term
  ad::Tensor e2;  // [N, d] collaborative long-term
  ad::Tensor l;   // [M, d] projected semantic short-term
  ad::Tensor h;   // [M, d] collaborative short-term
  std::vector<std::size_t> owner;
};

struct AlignmentLoss {
  ad::Tensor long_term;
  ad::Tensor short_term;
  ad::Tensor total;
};

// -(1/N) sum_i log softmax_j(cos(a_i, p_j) / tau)[i]. Anchors are rows of
// `anchors`; an empty batch gives 0 with a warning.
ad::Tensor info_nce(ad::Graph& g, const ad::Tensor& anchors, const ad::Tensor& positives, double tau);

AlignmentLoss alignment_loss(ad::Graph& g, const InterestBundle& bundle, const AlignConfig& cfg);

}  // namespace seqdn
