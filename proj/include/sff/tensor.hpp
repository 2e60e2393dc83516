#ifndef SFF_TENSOR_HPP
#define SFF_TENSOR_HPP

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace sff {

using Shape = std::vector<std::size_t>;

class Tensor;
class Tape;
void backward(Tape& tape, const Tensor& loss);

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {
struct TensorData {
  Shape shape;
  std::vector<float> data;
  std::vector<float> grad;  // empty until a gradient is written
  bool requires_grad = false;
};
}  // namespace detail

// Dense row-major float32 tensor with an optional gradient slot.
//
// Tensor is a handle: copies alias the same storage, which is what lets
// parameters be shared between a model and the optimizer. Use clone() for
// an independent copy. A scalar is a tensor of shape {1}.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<float> values,
                     bool requires_grad = false);
  static Tensor vector(std::vector<float> values, bool requires_grad = false);
  static Tensor scalar(float value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size() const;
  std::size_t dim(std::size_t axis) const;

  std::span<float> data();
  std::span<const float> data() const;
  std::vector<float> values() const;
  float item() const;

  bool requires_grad() const;
  void set_requires_grad(bool on);

  bool has_grad() const;
  std::span<const float> grad() const;
  // Allocates a zero gradient buffer on first use.
  std::span<float> mutable_grad();
  void zero_grad();
  void clear_grad();

  Tensor clone() const;
  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }
  const detail::TensorData* id() const { return impl_.get(); }

 private:
  friend void backward(Tape& tape, const Tensor& loss);

  explicit Tensor(std::shared_ptr<detail::TensorData> impl)
      : impl_(std::move(impl)) {}
  const detail::TensorData& impl() const;
  detail::TensorData& impl();

  std::shared_ptr<detail::TensorData> impl_;
};

// Adjoint buffers handed to a node's backward function; an entry is null
// when the corresponding input does not need a gradient.
using GradRefs = std::vector<std::vector<float>*>;
using BackwardFn =
    std::function<void(std::span<const float> out_grad, const GradRefs& in)>;

// Ordered record of primitive applications, appended in forward order,
// so the record is topologically sorted by construction.
class Tape {
 public:
  struct Node {
    const char* op;
    std::vector<Tensor> inputs;
    Tensor output;
    BackwardFn backward;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(const char* op, std::vector<Tensor> inputs, Tensor output,
              BackwardFn backward);
  std::size_t size() const { return nodes_.size(); }
  bool contains(const Tensor& t) const;
  const std::vector<Node>& nodes() const { return nodes_; }
  void clear();

  // Number of node visits performed by the last backward pass.
  std::size_t last_backward_visits() const { return last_visits_; }

 private:
  friend void backward(Tape& tape, const Tensor& loss);
  std::vector<Node> nodes_;
  std::vector<const detail::TensorData*> outputs_;
  std::size_t last_visits_ = 0;
};

// Makes `tape` the active tape of the calling thread for the scope's
// lifetime. Scopes nest; the previous tape is restored on exit.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

// Suspends recording on the calling thread.
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape* previous_;
};

Tape* active_tape();

// Reverse-mode sweep from `loss` (a scalar recorded on `tape`). Gradients
// of leaf tensors that require grad are accumulated into their grad slot;
// intermediate adjoints live only for the duration of the call.
void backward(Tape& tape, const Tensor& loss);

}  // namespace sff

#endif  // SFF_TENSOR_HPP
