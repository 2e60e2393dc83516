#ifndef SFF_GRADCHECK_HPP
#define SFF_GRADCHECK_HPP

#include <functional>
#include <span>

#include "sff/tensor.hpp"

namespace sff {

struct GradCheckOptions {
  float step = 1e-3f;
  // Relative error is |analytic - numeric| / max(floor, |analytic|, |numeric|).
  // A floor keeps near-zero gradients from turning float rounding noise in
  // the finite difference into huge relative errors.
  double floor = 1.0;
  // Five-point central stencil (error O(step^4)) instead of the two-point
  // one (O(step^2)). Allows a larger step, which shrinks the float32
  // rounding noise amplified by 1/step.
  bool fourth_order = false;
};

// Compares reverse-mode gradients of the scalar returned by `fn` against
// central finite differences over every coordinate of `inputs`. Returns the
// maximum relative error. `inputs` are marked requires_grad and their grad
// slots are cleared before and after the check. A constant `fn` whose
// output never reaches the tape has an analytic gradient of zero.
double grad_check(const std::function<Tensor()>& fn, std::span<Tensor> inputs,
                  const GradCheckOptions& options = {});

}  // namespace sff

#endif  // SFF_GRADCHECK_HPP
