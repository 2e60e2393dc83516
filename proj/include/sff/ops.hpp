#ifndef SFF_OPS_HPP
#define SFF_OPS_HPP

#include <span>
#include <string_view>
#include <vector>

#include "sff/tensor.hpp"

// Differentiable primitives. Each one computes its forward value eagerly
// and, when a tape is active and any input requires grad, records a node
// carrying the backward rule. Shape violations throw ShapeError naming the
// primitive and the offending shapes.
namespace sff::ops {

// Rank-2 x rank-2, rank-2 x rank-1 (matrix-vector) and rank-1 x rank-2
// (row-vector times matrix).
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& m);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
// scale * x + shift, with constant scale and shift.
Tensor affine(const Tensor& x, float scale, float shift);

Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
// Elementwise max(x, floor); floor = 0 gives ReLU.
Tensor maximum(const Tensor& x, float floor);
Tensor log(const Tensor& x);
Tensor square(const Tensor& x);

// Rank-1 only.
Tensor softmax(const Tensor& x);
Tensor log_softmax(const Tensor& x);
Tensor l2_normalize(const Tensor& x);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor dot(const Tensor& a, const Tensor& b);
Tensor cosine(const Tensor& a, const Tensor& b);

// Rank-1 concatenation and stacking of equal-length rank-1 rows into a
// matrix.
Tensor concat(std::span<const Tensor> parts);
Tensor stack(std::span<const Tensor> rows);
Tensor slice(const Tensor& x, std::size_t offset, std::size_t length);
// Scalar element x[index] of a rank-1 tensor.
Tensor pick(const Tensor& x, std::size_t index);

Tensor concat(std::initializer_list<Tensor> parts);
Tensor stack(std::initializer_list<Tensor> rows);

// Identifiers for generic dispatch.
enum class Primitive {
  kMatmul,
  kTranspose,
  kAdd,
  kSub,
  kMul,
  kAffine,
  kTanh,
  kSigmoid,
  kMaximum,
  kLog,
  kSquare,
  kSoftmax,
  kLogSoftmax,
  kL2Normalize,
  kSum,
  kMean,
  kDot,
  kCosine,
  kConcat,
  kStack,
  kSlice,
  kPick,
};

// Constant operands for primitives that take them (affine, maximum,
// slice, pick); ignored by the rest.
struct PrimitiveArgs {
  float scale = 1.0f;
  float shift = 0.0f;
  std::size_t offset = 0;
  std::size_t length = 1;
};

std::string_view primitive_name(Primitive p);
std::vector<Primitive> all_primitives();
Tensor apply_primitive(Primitive p, std::span<const Tensor> inputs,
                       const PrimitiveArgs& args = {});

}  // namespace sff::ops

#endif  // SFF_OPS_HPP
