#include "sff/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_map>

#include "sff/errors.hpp"

namespace sff {

namespace {
thread_local Tape* g_active_tape = nullptr;
}

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const std::size_t n = shape_size(shape);
  return from(std::move(shape), std::vector<float>(n, 0.0f), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<float> values,
                    bool requires_grad) {
  if (shape.empty()) throw ShapeError("tensor: rank-0 shapes are not allowed");
  for (auto d : shape) {
    if (d == 0) {
      throw ShapeError("tensor: zero dimension in shape " + shape_string(shape));
    }
  }
  if (values.size() != shape_size(shape)) {
    throw ShapeError("tensor: " + std::to_string(values.size()) +
                     " values do not fill shape " + shape_string(shape));
  }
  auto impl = std::make_shared<detail::TensorData>();
  impl->shape = std::move(shape);
  impl->data = std::move(values);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::vector(std::vector<float> values, bool requires_grad) {
  const std::size_t n = values.size();
  return from({n}, std::move(values), requires_grad);
}

Tensor Tensor::scalar(float value, bool requires_grad) {
  return from({1}, {value}, requires_grad);
}

const detail::TensorData& Tensor::impl() const {
  if (!impl_) throw std::logic_error("tensor: use of undefined tensor");
  return *impl_;
}

detail::TensorData& Tensor::impl() {
  if (!impl_) throw std::logic_error("tensor: use of undefined tensor");
  return *impl_;
}

const Shape& Tensor::shape() const { return impl().shape; }
std::size_t Tensor::size() const { return impl().data.size(); }

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) {
    throw ShapeError("tensor: axis " + std::to_string(axis) +
                     " out of range for shape " + shape_string(s));
  }
  return s[axis];
}

std::span<float> Tensor::data() { return impl().data; }
std::span<const float> Tensor::data() const { return impl().data; }
std::vector<float> Tensor::values() const { return impl().data; }

float Tensor::item() const {
  if (size() != 1) {
    throw ShapeError("tensor: item() on non-scalar of shape " +
                     shape_string(shape()));
  }
  return impl().data[0];
}

bool Tensor::requires_grad() const { return impl().requires_grad; }
void Tensor::set_requires_grad(bool on) { impl().requires_grad = on; }
bool Tensor::has_grad() const { return !impl().grad.empty(); }
std::span<const float> Tensor::grad() const { return impl().grad; }

std::span<float> Tensor::mutable_grad() {
  auto& d = impl();
  if (d.grad.empty()) d.grad.assign(d.data.size(), 0.0f);
  return d.grad;
}

void Tensor::zero_grad() {
  auto& d = impl();
  d.grad.assign(d.data.size(), 0.0f);
}

void Tensor::clear_grad() { impl().grad.clear(); }

Tensor Tensor::clone() const {
  const auto& d = impl();
  auto copy = std::make_shared<detail::TensorData>(d);
  return Tensor(std::move(copy));
}

void Tape::record(const char* op, std::vector<Tensor> inputs, Tensor output,
                  BackwardFn backward) {
  outputs_.push_back(output.id());
  nodes_.push_back(
      Node{op, std::move(inputs), std::move(output), std::move(backward)});
}

bool Tape::contains(const Tensor& t) const {
  return std::find(outputs_.begin(), outputs_.end(), t.id()) != outputs_.end();
}

void Tape::clear() {
  nodes_.clear();
  outputs_.clear();
  last_visits_ = 0;
}

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) {
  g_active_tape = &tape;
}
TapeScope::~TapeScope() { g_active_tape = previous_; }

NoGradScope::NoGradScope() : previous_(g_active_tape) {
  g_active_tape = nullptr;
}
NoGradScope::~NoGradScope() { g_active_tape = previous_; }

Tape* active_tape() { return g_active_tape; }

void backward(Tape& tape, const Tensor& loss) {
  if (!loss.defined()) throw std::invalid_argument("backward: undefined loss");
  if (loss.size() != 1) {
    throw ShapeError("backward: loss must be scalar, got shape " +
                     shape_string(loss.shape()));
  }
  // Locate the node that produced the loss; only it and earlier nodes
  // can contribute.
  std::ptrdiff_t start = -1;
  for (std::ptrdiff_t i = static_cast<std::ptrdiff_t>(tape.outputs_.size()) - 1;
       i >= 0; --i) {
    if (tape.outputs_[static_cast<std::size_t>(i)] == loss.id()) {
      start = i;
      break;
    }
  }
  if (start < 0) {
    throw std::invalid_argument("backward: loss tensor is not on the tape");
  }

  std::unordered_map<const detail::TensorData*, std::size_t> producer;
  producer.reserve(static_cast<std::size_t>(start) + 1);
  for (std::size_t i = 0; i <= static_cast<std::size_t>(start); ++i) {
    producer[tape.outputs_[i]] = i;
  }

  // Adjoints of intermediate tensors, indexed by producing node.
  std::vector<std::vector<float>> adjoint(static_cast<std::size_t>(start) + 1);
  adjoint[static_cast<std::size_t>(start)] = {1.0f};

  std::size_t visits = 0;
  GradRefs refs;
  for (std::ptrdiff_t i = start; i >= 0; --i) {
    auto& node = tape.nodes_[static_cast<std::size_t>(i)];
    ++visits;
    auto& out_grad = adjoint[static_cast<std::size_t>(i)];
    if (out_grad.empty()) continue;

    refs.assign(node.inputs.size(), nullptr);
    for (std::size_t k = 0; k < node.inputs.size(); ++k) {
      Tensor& in = node.inputs[k];
      if (!in.requires_grad()) continue;
      auto it = producer.find(in.id());
      if (it != producer.end() && it->second < static_cast<std::size_t>(i)) {
        auto& buf = adjoint[it->second];
        if (buf.empty()) buf.assign(in.size(), 0.0f);
        refs[k] = &buf;
      } else {
        // Leaf: accumulate straight into its gradient slot.
        in.mutable_grad();
        refs[k] = &in.impl().grad;
      }
    }
    // Several inputs may alias one tensor (e.g. mul(x, x)); each ref then
    // points at the same buffer and the backward functions accumulate.
    node.backward(out_grad, refs);
    out_grad.clear();
    out_grad.shrink_to_fit();
  }
  tape.last_visits_ = visits;
}

}  // namespace sff
