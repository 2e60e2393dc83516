#include "sff/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "sff/errors.hpp"

namespace sff {

namespace {
float eval_scalar(const std::function<Tensor()>& fn) {
  NoGradScope no_grad;
  Tensor out = fn();
  if (out.size() != 1) {
    throw ShapeError("grad_check: function output has shape " +
                     shape_string(out.shape()) + ", expected a scalar");
  }
  return out.item();
}
}  // namespace

double grad_check(const std::function<Tensor()>& fn, std::span<Tensor> inputs,
                  const GradCheckOptions& options) {
  if (!(options.step > 0.0f)) {
    throw std::invalid_argument("grad_check: step must be positive");
  }
  for (auto& in : inputs) {
    in.set_requires_grad(true);
    in.zero_grad();
  }

  {
    Tape tape;
    TapeScope scope(tape);
    Tensor out = fn();
    if (out.size() != 1) {
      throw ShapeError("grad_check: function output has shape " +
                       shape_string(out.shape()) + ", expected a scalar");
    }
    if (tape.contains(out)) backward(tape, out);
  }

  double worst = 0.0;
  for (auto& in : inputs) {
    std::vector<float> analytic(in.grad().begin(), in.grad().end());
    auto data = in.data();
    for (std::size_t k = 0; k < data.size(); ++k) {
      const float original = data[k];
      auto at = [&](float offset) {
        data[k] = original + offset;
        const double v = eval_scalar(fn);
        data[k] = original;
        return v;
      };
      const float h = options.step;
      double numeric = 0.0;
      if (options.fourth_order) {
        numeric = (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) /
                  (12.0 * static_cast<double>(h));
      } else {
        // Divide by the displacement actually representable in float.
        const double span = static_cast<double>(original + h) -
                            static_cast<double>(original - h);
        numeric = (at(h) - at(-h)) / span;
      }
      const double a = analytic[k];
      const double scale =
          std::max({options.floor, std::fabs(a), std::fabs(numeric)});
      worst = std::max(worst, std::fabs(a - numeric) / scale);
    }
    in.clear_grad();
  }
  return worst;
}

}  // namespace sff
