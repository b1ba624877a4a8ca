#include "seqdn/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace seqdn {

void Adam::step(std::span<NamedParameter> params) {
  for (const auto& p : params) {
    if (!p.tensor.has_grad()) {
      throw std::logic_error("adam_step: parameter '" + p.name + "' has no gradient");
    }
  }
  if (first_.empty()) {
    for (const auto& p : params) {
      first_.emplace_back(p.tensor.numel(), 0.0);
      second_.emplace_back(p.tensor.numel(), 0.0);
    }
  } else if (first_.size() != params.size()) {
    throw std::logic_error("adam_step: parameter list changed size between steps");
  }

  ++step_;
  const double t = static_cast<double>(step_);
  const double c1 = 1.0 - std::pow(config_.beta1, t);
  const double c2 = 1.0 - std::pow(config_.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& tensor = params[k].tensor;
    auto value = tensor.mutable_data();
    auto grad = tensor.mutable_grad();
    auto& m = first_[k];
    auto& v = second_[k];
    if (m.size() != value.size()) {
      throw std::logic_error("adam_step: parameter '" + params[k].name + "' changed shape");
    }
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad[i];
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      value[i] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
    tensor.zero_grad();
  }
}

}  // namespace seqdn
