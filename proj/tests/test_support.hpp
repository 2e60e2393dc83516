#ifndef SFF_TESTS_TEST_SUPPORT_HPP
#define SFF_TESTS_TEST_SUPPORT_HPP

#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "sff/gradcheck.hpp"
#include "sff/ops.hpp"
#include "sff/random.hpp"

namespace test_support {

// Primitive-level finite-difference settings: five-point stencil at step
// 1e-2 keeps float32 rounding noise well under the 1e-4 tolerance.
inline const sff::GradCheckOptions kPrimitiveCheck{1e-2f, 1.0, true};

inline bool bit_equal(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::bit_cast<std::uint32_t>(a[i]) != std::bit_cast<std::uint32_t>(b[i]))
      return false;
  return true;
}

struct PrimitiveCase {
  std::vector<sff::Tensor> inputs;
  std::function<sff::Tensor()> fn;
};

// Random inputs in [-2, 2] for primitive `p` plus a scalar objective that
// contracts the primitive's output with a fixed random weight tensor.
inline PrimitiveCase primitive_case(sff::ops::Primitive p, sff::Rng& rng) {
  using sff::Tensor;
  using sff::ops::Primitive;
  namespace o = sff::ops;
  auto rand = [&](sff::Shape s) { return sff::uniform_tensor(std::move(s), 2.0f, rng); };

  PrimitiveCase c;
  sff::ops::PrimitiveArgs args;
  switch (p) {
    case Primitive::kMatmul: {
      const int variant = static_cast<int>(rng() % 3);
      if (variant == 0) c.inputs = {rand({3, 4}), rand({4, 2})};
      if (variant == 1) c.inputs = {rand({3, 4}), rand({4})};
      if (variant == 2) c.inputs = {rand({4}), rand({4, 3})};
      break;
    }
    case Primitive::kTranspose: c.inputs = {rand({3, 2})}; break;
    case Primitive::kAdd:
    case Primitive::kSub:
    case Primitive::kMul:
    case Primitive::kDot:
    case Primitive::kCosine: c.inputs = {rand({5}), rand({5})}; break;
    case Primitive::kAffine:
      args.scale = 1.7f;
      args.shift = -0.3f;
      c.inputs = {rand({5})};
      break;
    case Primitive::kMaximum: {
      args.shift = 0.1f;
      auto x = rand({6});
      // Keep clear of the kink so the finite difference is well defined.
      for (auto& v : x.data())
        if (std::fabs(v - args.shift) < 0.05f) v += 0.2f;
      c.inputs = {x};
      break;
    }
    case Primitive::kLog: {
      auto x = rand({5});
      for (auto& v : x.data()) v = 0.5f + std::fabs(v) * 0.75f;
      c.inputs = {x};
      break;
    }
    case Primitive::kConcat: c.inputs = {rand({2}), rand({3}), rand({1})}; break;
    case Primitive::kStack: c.inputs = {rand({4}), rand({4}), rand({4})}; break;
    case Primitive::kSlice:
      args.offset = 1;
      args.length = 3;
      c.inputs = {rand({6})};
      break;
    case Primitive::kPick:
      args.offset = 2;
      c.inputs = {rand({5})};
      break;
    default: c.inputs = {rand({5})}; break;
  }

  // Output shape is fixed by the inputs; build matching weights once.
  Tensor probe = o::apply_primitive(p, c.inputs, args);
  Tensor weights = sff::uniform_tensor(probe.shape(), 1.0f, rng);
  // Subtracting the base output keeps the objective near zero, so its own
  // float rounding stays far below the finite-difference signal.
  Tensor base = probe.clone();
  base.set_requires_grad(false);
  auto inputs = c.inputs;
  c.fn = [p, inputs, args, weights, base] {
    Tensor out = o::apply_primitive(p, inputs, args);
    return o::sum(o::mul(o::sub(out, base), weights));
  };
  return c;
}

}  // namespace test_support

#endif  // SFF_TESTS_TEST_SUPPORT_HPP
