#include "sff/adam.hpp"

#include <cmath>
#include <string>

#include "sff/errors.hpp"

namespace sff {

void adam_step(std::span<Tensor> params, AdamState& state) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].has_grad()) {
      throw std::invalid_argument("adam_step: parameter " + std::to_string(i) +
                                  " has no gradient");
    }
  }
  if (state.step == 0 && state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.emplace_back(p.size(), 0.0f);
      state.second_moment.emplace_back(p.size(), 0.0f);
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw ShapeError("adam_step: state tracks " +
                     std::to_string(state.first_moment.size()) +
                     " parameters, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.first_moment[i].size() != params[i].size()) {
      throw ShapeError("adam_step: moment buffer " + std::to_string(i) +
                       " has " + std::to_string(state.first_moment[i].size()) +
                       " entries, parameter has " +
                       std::to_string(params[i].size()));
    }
  }

  const auto& c = state.config;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(static_cast<double>(c.beta1), t);
  const double correction2 = 1.0 - std::pow(static_cast<double>(c.beta2), t);

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto data = params[i].data();
    auto grad = params[i].grad();
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    for (std::size_t k = 0; k < data.size(); ++k) {
      const float g = grad[k];
      m[k] = c.beta1 * m[k] + (1.0f - c.beta1) * g;
      v[k] = c.beta2 * v[k] + (1.0f - c.beta2) * g * g;
      const double m_hat = m[k] / correction1;
      const double v_hat = v[k] / correction2;
      data[k] -= static_cast<float>(c.learning_rate * m_hat /
                                    (std::sqrt(v_hat) + c.epsilon));
    }
  }
}

}  // namespace sff
