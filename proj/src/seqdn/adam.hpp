#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "seqdn/tensor.hpp"

namespace seqdn {

struct NamedParameter {
  std::string name;
  ad::Tensor tensor;
};

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction. Moment buffers are bound to parameter position
// in the list handed to step(), so the list must keep a stable order.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  // Applies one update to every parameter and zeroes its gradient. Throws
  // std::logic_error naming the first parameter that has no gradient buffer.
  void step(std::span<NamedParameter> params);

  std::size_t steps() const { return step_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  std::vector<std::vector<double>> first_;
  std::vector<std::vector<double>> second_;
  std::size_t step_ = 0;
};

}  // namespace seqdn
