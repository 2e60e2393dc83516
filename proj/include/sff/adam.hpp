#ifndef SFF_ADAM_HPP
#define SFF_ADAM_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "sff/tensor.hpp"

namespace sff {

struct AdamConfig {
  float learning_rate = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float epsilon = 1e-8f;
};

// Optimizer state for a fixed list of parameters. Moment buffers are sized
// on the first step and must keep matching the parameter shapes after that.
struct AdamState {
  explicit AdamState(AdamConfig cfg = {}) : config(cfg) {}

  AdamConfig config;
  std::uint64_t step = 0;
  std::vector<std::vector<float>> first_moment;
  std::vector<std::vector<float>> second_moment;
};

// One bias-corrected Adam update. Every parameter must carry a gradient;
// gradients are left untouched for the caller to clear.
void adam_step(std::span<Tensor> params, AdamState& state);

}  // namespace sff

#endif  // SFF_ADAM_HPP
