#include "seqdn/alignment.hpp"

#include <numeric>
#include <stdexcept>

#include "seqdn/errors.hpp"
#include "seqdn/log.hpp"

namespace seqdn {

ad::Tensor info_nce(ad::Graph& g, const ad::Tensor& anchors, const ad::Tensor& positives, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("info_nce: tau must be > 0");
  if (!anchors.defined() || anchors.numel() == 0) {
    log::warn("info_nce: empty batch, loss defined as 0");
    return ad::Tensor::scalar(0.0);
  }
  if (anchors.rank() != 2 || anchors.shape() != positives.shape()) {
    throw ShapeError("info_nce: anchors " + ad::shape_str(anchors.shape()) + " vs positives " +
                     ad::shape_str(positives.shape()));
  }
  const std::size_t n = anchors.rows();
  const auto logits = g.scale(g.matmul_nt(g.normalize_rows(anchors), g.normalize_rows(positives)), 1.0 / tau);
  std::vector<std::size_t> targets(n);
  std::iota(targets.begin(), targets.end(), std::size_t{0});
  return g.softmax_cross_entropy(logits, targets);
}

AlignmentLoss alignment_loss(ad::Graph& g, const InterestBundle& bundle, const AlignConfig& cfg) {
  if (!bundle.e1.defined() || bundle.e1.numel() == 0) throw std::invalid_argument("alignment_loss: empty batch");
  AlignmentLoss out;
  out.long_term = info_nce(g, bundle.e2, bundle.e1, cfg.tau);
  out.short_term = info_nce(g, bundle.h, bundle.l, cfg.tau);
  out.total = g.add(out.long_term, out.short_term);
  return out;
}

}  // namespace seqdn
