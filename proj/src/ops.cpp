#include "sff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sff/errors.hpp"

namespace sff::ops {

namespace {

bool wants_record(std::span<const Tensor> inputs) {
  if (active_tape() == nullptr) return false;
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Tensor& t) { return t.requires_grad(); });
}

Tensor finish(const char* op, std::vector<Tensor> inputs, Shape shape,
              std::vector<float> values, BackwardFn fn) {
  const bool record = wants_record(inputs);
  Tensor out = Tensor::from(std::move(shape), std::move(values), record);
  if (record) active_tape()->record(op, std::move(inputs), out, std::move(fn));
  return out;
}

[[noreturn]] void shape_fail(const char* op, const std::string& detail) {
  throw ShapeError(std::string(op) + ": " + detail);
}

void require_defined(const char* op, const Tensor& t) {
  if (!t.defined()) shape_fail(op, "undefined input tensor");
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  require_defined(op, a);
  require_defined(op, b);
  if (a.shape() != b.shape()) {
    shape_fail(op, "shape mismatch " + shape_string(a.shape()) + " vs " +
                       shape_string(b.shape()));
  }
}

void require_rank1(const char* op, const Tensor& x) {
  require_defined(op, x);
  if (x.rank() != 1) {
    shape_fail(op, "expected rank-1 input, got " + shape_string(x.shape()));
  }
}

double norm_of(std::span<const float> v) {
  double s = 0.0;
  for (float x : v) s += static_cast<double>(x) * x;
  return std::sqrt(s);
}

// Generic unary elementwise op; `deriv(x, y)` gives dy/dx.
template <typename F, typename D>
Tensor unary(const char* op, const Tensor& x, F f, D deriv) {
  require_defined(op, x);
  auto in = x.data();
  std::vector<float> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  std::vector<float> saved = out;
  return finish(op, {x}, x.shape(), std::move(out),
                [x, saved = std::move(saved), deriv](std::span<const float> g,
                                                     const GradRefs& refs) {
                  if (!refs[0]) return;
                  auto xin = x.data();
                  auto& gx = *refs[0];
                  for (std::size_t i = 0; i < g.size(); ++i) {
                    gx[i] += g[i] * deriv(xin[i], saved[i]);
                  }
                });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  constexpr const char* op = "matmul";
  require_defined(op, a);
  require_defined(op, b);
  const bool a_vec = a.rank() == 1;
  const bool b_vec = b.rank() == 1;
  if (a.rank() > 2 || b.rank() > 2 || (a_vec && b_vec)) {
    shape_fail(op, "unsupported ranks " + shape_string(a.shape()) + " x " +
                       shape_string(b.shape()));
  }
  // View both operands as matrices: a row vector is [1, k], a column
  // vector is [k, 1].
  const std::size_t m = a_vec ? 1 : a.dim(0);
  const std::size_t k = a_vec ? a.dim(0) : a.dim(1);
  const std::size_t kb = b.dim(0);
  const std::size_t n = b_vec ? 1 : b.dim(1);
  if (k != kb) {
    shape_fail(op, "inner dimensions differ " + shape_string(a.shape()) +
                       " x " + shape_string(b.shape()));
  }
  auto A = a.data();
  auto B = b.data();
  std::vector<float> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) {
        acc += static_cast<double>(A[i * k + p]) * B[p * n + j];
      }
      out[i * n + j] = static_cast<float>(acc);
    }
  }
  Shape shape = a_vec ? Shape{n} : (b_vec ? Shape{m} : Shape{m, n});
  return finish(op, {a, b}, std::move(shape), std::move(out),
                [a, b, m, k, n](std::span<const float> g,
                                const GradRefs& refs) {
                  auto A = a.data();
                  auto B = b.data();
                  if (refs[0]) {  // dA = G B^T
                    auto& ga = *refs[0];
                    for (std::size_t i = 0; i < m; ++i) {
                      for (std::size_t p = 0; p < k; ++p) {
                        double acc = 0.0;
                        for (std::size_t j = 0; j < n; ++j) {
                          acc += static_cast<double>(g[i * n + j]) * B[p * n + j];
                        }
                        ga[i * k + p] += static_cast<float>(acc);
                      }
                    }
                  }
                  if (refs[1]) {  // dB = A^T G
                    auto& gb = *refs[1];
                    for (std::size_t p = 0; p < k; ++p) {
                      for (std::size_t j = 0; j < n; ++j) {
                        double acc = 0.0;
                        for (std::size_t i = 0; i < m; ++i) {
                          acc += static_cast<double>(A[i * k + p]) * g[i * n + j];
                        }
                        gb[p * n + j] += static_cast<float>(acc);
                      }
                    }
                  }
                });
}

Tensor transpose(const Tensor& x) {
  constexpr const char* op = "transpose";
  require_defined(op, x);
  if (x.rank() != 2) {
    shape_fail(op, "expected rank-2 input, got " + shape_string(x.shape()));
  }
  const std::size_t r = x.dim(0), c = x.dim(1);
  auto in = x.data();
  std::vector<float> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = in[i * c + j];
  return finish(op, {x}, {c, r}, std::move(out),
                [r, c](std::span<const float> g, const GradRefs& refs) {
                  if (!refs[0]) return;
                  auto& gx = *refs[0];
                  for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < c; ++j)
                      gx[i * c + j] += g[j * r + i];
                });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  auto x = a.data(), y = b.data();
  std::vector<float> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
  return finish("add", {a, b}, a.shape(), std::move(out),
                [](std::span<const float> g, const GradRefs& refs) {
                  for (auto* r : refs) {
                    if (!r) continue;
                    for (std::size_t i = 0; i < g.size(); ++i) (*r)[i] += g[i];
                  }
                });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  auto x = a.data(), y = b.data();
  std::vector<float> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
  return finish("sub", {a, b}, a.shape(), std::move(out),
                [](std::span<const float> g, const GradRefs& refs) {
                  if (refs[0])
                    for (std::size_t i = 0; i < g.size(); ++i) (*refs[0])[i] += g[i];
                  if (refs[1])
                    for (std::size_t i = 0; i < g.size(); ++i) (*refs[1])[i] -= g[i];
                });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  auto x = a.data(), y = b.data();
  std::vector<float> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
  return finish("mul", {a, b}, a.shape(), std::move(out),
                [a, b](std::span<const float> g, const GradRefs& refs) {
                  auto x = a.data(), y = b.data();
                  if (refs[0])
                    for (std::size_t i = 0; i < g.size(); ++i)
                      (*refs[0])[i] += g[i] * y[i];
                  if (refs[1])
                    for (std::size_t i = 0; i < g.size(); ++i)
                      (*refs[1])[i] += g[i] * x[i];
                });
}

Tensor affine(const Tensor& x, float scale, float shift) {
  return unary(
      "affine", x, [scale, shift](float v) { return scale * v + shift; },
      [scale](float, float) { return scale; });
}

Tensor tanh(const Tensor& x) {
  return unary(
      "tanh", x, [](float v) { return std::tanh(v); },
      [](float, float y) { return 1.0f - y * y; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      "sigmoid", x,
      [](float v) {
        if (v >= 0.0f) return 1.0f / (1.0f + std::exp(-v));
        const float e = std::exp(v);
        return e / (1.0f + e);
      },
      [](float, float y) { return y * (1.0f - y); });
}

Tensor maximum(const Tensor& x, float floor) {
  return unary(
      "maximum", x, [floor](float v) { return v > floor ? v : floor; },
      [floor](float v, float) { return v > floor ? 1.0f : 0.0f; });
}

Tensor log(const Tensor& x) {
  require_defined("log", x);
  for (float v : x.data()) {
    if (!(v > 0.0f)) {
      throw NumericError("log: non-positive input " + std::to_string(v));
    }
  }
  return unary(
      "log", x, [](float v) { return std::log(v); },
      [](float v, float) { return 1.0f / v; });
}

Tensor square(const Tensor& x) {
  return unary(
      "square", x, [](float v) { return v * v; },
      [](float v, float) { return 2.0f * v; });
}

Tensor softmax(const Tensor& x) {
  require_rank1("softmax", x);
  auto in = x.data();
  const float mx = *std::max_element(in.begin(), in.end());
  std::vector<double> e(in.size());
  double total = 0.0;
  for (std::size_t i = 0; i < in.size(); ++i) {
    e[i] = std::exp(static_cast<double>(in[i]) - mx);
    total += e[i];
  }
  std::vector<float> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i)
    out[i] = static_cast<float>(e[i] / total);
  std::vector<float> saved = out;
  return finish("softmax", {x}, x.shape(), std::move(out),
                [y = std::move(saved)](std::span<const float> g,
                                       const GradRefs& refs) {
                  if (!refs[0]) return;
                  double gy = 0.0;
                  for (std::size_t i = 0; i < g.size(); ++i)
                    gy += static_cast<double>(g[i]) * y[i];
                  for (std::size_t i = 0; i < g.size(); ++i)
                    (*refs[0])[i] += y[i] * static_cast<float>(g[i] - gy);
                });
}

Tensor log_softmax(const Tensor& x) {
  require_rank1("log_softmax", x);
  auto in = x.data();
  const float mx = *std::max_element(in.begin(), in.end());
  double total = 0.0;
  for (float v : in) total += std::exp(static_cast<double>(v) - mx);
  const double lse = mx + std::log(total);
  std::vector<float> out(in.size());
  std::vector<float> probs(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    const double z = static_cast<double>(in[i]) - lse;
    out[i] = static_cast<float>(z);
    probs[i] = static_cast<float>(std::exp(z));
  }
  return finish("log_softmax", {x}, x.shape(), std::move(out),
                [p = std::move(probs)](std::span<const float> g,
                                       const GradRefs& refs) {
                  if (!refs[0]) return;
                  double gs = 0.0;
                  for (float v : g) gs += v;
                  for (std::size_t i = 0; i < g.size(); ++i)
                    (*refs[0])[i] += static_cast<float>(g[i] - p[i] * gs);
                });
}

Tensor l2_normalize(const Tensor& x) {
  require_rank1("l2_normalize", x);
  const double n = norm_of(x.data());
  if (n < 1e-12) {
    throw NumericError("l2_normalize: input norm " + std::to_string(n) +
                       " is below 1e-12");
  }
  auto in = x.data();
  std::vector<float> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i)
    out[i] = static_cast<float>(in[i] / n);
  std::vector<float> saved = out;
  return finish("l2_normalize", {x}, x.shape(), std::move(out),
                [y = std::move(saved), n](std::span<const float> g,
                                          const GradRefs& refs) {
                  if (!refs[0]) return;
                  double yg = 0.0;
                  for (std::size_t i = 0; i < g.size(); ++i)
                    yg += static_cast<double>(y[i]) * g[i];
                  for (std::size_t i = 0; i < g.size(); ++i)
                    (*refs[0])[i] += static_cast<float>((g[i] - y[i] * yg) / n);
                });
}

Tensor sum(const Tensor& x) {
  require_defined("sum", x);
  double acc = 0.0;
  for (float v : x.data()) acc += v;
  return finish("sum", {x}, {1}, {static_cast<float>(acc)},
                [](std::span<const float> g, const GradRefs& refs) {
                  if (!refs[0]) return;
                  for (auto& v : *refs[0]) v += g[0];
                });
}

Tensor mean(const Tensor& x) {
  require_defined("mean", x);
  double acc = 0.0;
  for (float v : x.data()) acc += v;
  const double n = static_cast<double>(x.size());
  return finish("mean", {x}, {1}, {static_cast<float>(acc / n)},
                [n](std::span<const float> g, const GradRefs& refs) {
                  if (!refs[0]) return;
                  const float share = static_cast<float>(g[0] / n);
                  for (auto& v : *refs[0]) v += share;
                });
}

Tensor dot(const Tensor& a, const Tensor& b) {
  require_same_shape("dot", a, b);
  auto x = a.data(), y = b.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    acc += static_cast<double>(x[i]) * y[i];
  return finish("dot", {a, b}, {1}, {static_cast<float>(acc)},
                [a, b](std::span<const float> g, const GradRefs& refs) {
                  auto x = a.data(), y = b.data();
                  if (refs[0])
                    for (std::size_t i = 0; i < x.size(); ++i)
                      (*refs[0])[i] += g[0] * y[i];
                  if (refs[1])
                    for (std::size_t i = 0; i < x.size(); ++i)
                      (*refs[1])[i] += g[0] * x[i];
                });
}

Tensor cosine(const Tensor& a, const Tensor& b) {
  require_same_shape("cosine", a, b);
  const double na = norm_of(a.data());
  const double nb = norm_of(b.data());
  if (na < 1e-12 || nb < 1e-12) {
    throw NumericError("cosine: zero-norm operand");
  }
  auto x = a.data(), y = b.data();
  double ab = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    ab += static_cast<double>(x[i]) * y[i];
  const double c = ab / (na * nb);
  return finish("cosine", {a, b}, {1}, {static_cast<float>(c)},
                [a, b, na, nb, c](std::span<const float> g,
                                  const GradRefs& refs) {
                  auto x = a.data(), y = b.data();
                  const double gg = g[0];
                  if (refs[0])
                    for (std::size_t i = 0; i < x.size(); ++i)
                      (*refs[0])[i] += static_cast<float>(
                          gg * (y[i] / (na * nb) - c * x[i] / (na * na)));
                  if (refs[1])
                    for (std::size_t i = 0; i < x.size(); ++i)
                      (*refs[1])[i] += static_cast<float>(
                          gg * (x[i] / (na * nb) - c * y[i] / (nb * nb)));
                });
}

Tensor concat(std::span<const Tensor> parts) {
  constexpr const char* op = "concat";
  if (parts.empty()) shape_fail(op, "no inputs");
  std::vector<std::size_t> sizes;
  std::vector<float> out;
  for (const auto& p : parts) {
    require_rank1(op, p);
    sizes.push_back(p.size());
    out.insert(out.end(), p.data().begin(), p.data().end());
  }
  const std::size_t total = out.size();
  return finish(op, std::vector<Tensor>(parts.begin(), parts.end()), {total},
                std::move(out),
                [sizes = std::move(sizes)](std::span<const float> g,
                                           const GradRefs& refs) {
                  std::size_t off = 0;
                  for (std::size_t k = 0; k < sizes.size(); ++k) {
                    if (refs[k])
                      for (std::size_t i = 0; i < sizes[k]; ++i)
                        (*refs[k])[i] += g[off + i];
                    off += sizes[k];
                  }
                });
}

Tensor stack(std::span<const Tensor> rows) {
  constexpr const char* op = "stack";
  if (rows.empty()) shape_fail(op, "no inputs");
  require_rank1(op, rows[0]);
  const std::size_t width = rows[0].size();
  std::vector<float> out;
  out.reserve(rows.size() * width);
  for (const auto& r : rows) {
    require_rank1(op, r);
    if (r.size() != width) {
      shape_fail(op, "row shapes differ " + shape_string(rows[0].shape()) +
                         " vs " + shape_string(r.shape()));
    }
    out.insert(out.end(), r.data().begin(), r.data().end());
  }
  const std::size_t n = rows.size();
  return finish(op, std::vector<Tensor>(rows.begin(), rows.end()), {n, width},
                std::move(out),
                [width](std::span<const float> g, const GradRefs& refs) {
                  for (std::size_t k = 0; k < refs.size(); ++k) {
                    if (!refs[k]) continue;
                    for (std::size_t i = 0; i < width; ++i)
                      (*refs[k])[i] += g[k * width + i];
                  }
                });
}

Tensor slice(const Tensor& x, std::size_t offset, std::size_t length) {
  require_rank1("slice", x);
  if (length == 0 || offset + length > x.size()) {
    shape_fail("slice", "range [" + std::to_string(offset) + ", " +
                            std::to_string(offset + length) +
                            ") out of bounds for shape " +
                            shape_string(x.shape()));
  }
  auto in = x.data();
  std::vector<float> out(in.begin() + static_cast<std::ptrdiff_t>(offset),
                         in.begin() + static_cast<std::ptrdiff_t>(offset + length));
  return finish("slice", {x}, {length}, std::move(out),
                [offset](std::span<const float> g, const GradRefs& refs) {
                  if (!refs[0]) return;
                  for (std::size_t i = 0; i < g.size(); ++i)
                    (*refs[0])[offset + i] += g[i];
                });
}

Tensor pick(const Tensor& x, std::size_t index) {
  require_rank1("pick", x);
  if (index >= x.size()) {
    shape_fail("pick", "index " + std::to_string(index) +
                           " out of bounds for shape " + shape_string(x.shape()));
  }
  return finish("pick", {x}, {1}, {x.data()[index]},
                [index](std::span<const float> g, const GradRefs& refs) {
                  if (refs[0]) (*refs[0])[index] += g[0];
                });
}

Tensor concat(std::initializer_list<Tensor> parts) {
  return concat(std::span<const Tensor>(parts.begin(), parts.size()));
}

Tensor stack(std::initializer_list<Tensor> rows) {
  return stack(std::span<const Tensor>(rows.begin(), rows.size()));
}

std::string_view primitive_name(Primitive p) {
  switch (p) {
    case Primitive::kMatmul: return "matmul";
    case Primitive::kTranspose: return "transpose";
    case Primitive::kAdd: return "add";
    case Primitive::kSub: return "sub";
    case Primitive::kMul: return "mul";
    case Primitive::kAffine: return "affine";
    case Primitive::kTanh: return "tanh";
    case Primitive::kSigmoid: return "sigmoid";
    case Primitive::kMaximum: return "maximum";
    case Primitive::kLog: return "log";
    case Primitive::kSquare: return "square";
    case Primitive::kSoftmax: return "softmax";
    case Primitive::kLogSoftmax: return "log_softmax";
    case Primitive::kL2Normalize: return "l2_normalize";
    case Primitive::kSum: return "sum";
    case Primitive::kMean: return "mean";
    case Primitive::kDot: return "dot";
    case Primitive::kCosine: return "cosine";
    case Primitive::kConcat: return "concat";
    case Primitive::kStack: return "stack";
    case Primitive::kSlice: return "slice";
    case Primitive::kPick: return "pick";
  }
  return "unknown";
}

std::vector<Primitive> all_primitives() {
  std::vector<Primitive> out;
  for (int i = 0; i <= static_cast<int>(Primitive::kPick); ++i)
    out.push_back(static_cast<Primitive>(i));
  return out;
}

Tensor apply_primitive(Primitive p, std::span<const Tensor> in,
                       const PrimitiveArgs& args) {
  auto arity = [&](std::size_t n) {
    if (in.size() != n) {
      throw ShapeError(std::string(primitive_name(p)) + ": expected " +
                       std::to_string(n) + " inputs, got " +
                       std::to_string(in.size()));
    }
  };
  switch (p) {
    case Primitive::kMatmul: arity(2); return matmul(in[0], in[1]);
    case Primitive::kTranspose: arity(1); return transpose(in[0]);
    case Primitive::kAdd: arity(2); return add(in[0], in[1]);
    case Primitive::kSub: arity(2); return sub(in[0], in[1]);
    case Primitive::kMul: arity(2); return mul(in[0], in[1]);
    case Primitive::kAffine: arity(1); return affine(in[0], args.scale, args.shift);
    case Primitive::kTanh: arity(1); return tanh(in[0]);
    case Primitive::kSigmoid: arity(1); return sigmoid(in[0]);
    case Primitive::kMaximum: arity(1); return maximum(in[0], args.shift);
    case Primitive::kLog: arity(1); return log(in[0]);
    case Primitive::kSquare: arity(1); return square(in[0]);
    case Primitive::kSoftmax: arity(1); return softmax(in[0]);
    case Primitive::kLogSoftmax: arity(1); return log_softmax(in[0]);
    case Primitive::kL2Normalize: arity(1); return l2_normalize(in[0]);
    case Primitive::kSum: arity(1); return sum(in[0]);
    case Primitive::kMean: arity(1); return mean(in[0]);
    case Primitive::kDot: arity(2); return dot(in[0], in[1]);
    case Primitive::kCosine: arity(2); return cosine(in[0], in[1]);
    case Primitive::kConcat: return concat(in);
    case Primitive::kStack: return stack(in);
    case Primitive::kSlice: arity(1); return slice(in[0], args.offset, args.length);
    case Primitive::kPick: arity(1); return pick(in[0], args.offset);
  }
  throw ShapeError("apply_primitive: unknown primitive");
}

}  // namespace sff::ops
