#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace hfe {

// (batch, channel, height, width) extents of a dense tensor.
struct Shape {
  std::size_t n = 0;
  std::size_t c = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  std::size_t numel() const { return n * c * h * w; }
  std::size_t plane() const { return h * w; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

class Tape;

namespace detail {

struct TensorImpl {
  Shape shape;
  std::vector<float> data;
  std::vector<float> grad;
  bool requires_grad = false;
  // Set when the tensor was produced by an op recorded on a tape.
  const Tape* tape = nullptr;
};

}  // namespace detail

// Shared handle to a 4-D float tensor in NCHW order.
//
// Copies of a Tensor alias the same storage; use clone() for an independent
// copy. Op outputs are never written after the op returns. Leaves (parameters
// and inputs) may be mutated in place through mutable_data(), which is how
// the optimizer applies its updates.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, float value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<float> data,
                          bool requires_grad = false);
  static Tensor scalar(float value);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t numel() const { return shape().numel(); }

  std::span<const float> data() const;
  std::span<float> mutable_data();
  float item() const;
  float at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const;

  bool requires_grad() const;
  // Turning gradients on allocates a zeroed gradient buffer.
  void set_requires_grad(bool on);
  bool has_grad() const;
  std::span<const float> grad() const;
  std::span<float> mutable_grad();
  void zero_grad();

  // Deep copy, detached from any tape, requires_grad off.
  Tensor clone() const;
  bool all_finite() const;
  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

  const std::shared_ptr<detail::TensorImpl>& impl() const { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl)
      : impl_(std::move(impl)) {}
  friend class Tape;
  friend Tensor make_op_output(Shape, std::vector<float>);

  std::shared_ptr<detail::TensorImpl> impl_;
};

// Allocates an op output that does not yet participate in autodiff.
Tensor make_op_output(Shape shape, std::vector<float> data);

// Define-by-run record of differentiable ops. Rebuilt for every forward pass.
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Marks `output` as produced on this tape. `fn` reads output's gradient and
  // accumulates into the gradients of `inputs` that require them.
  void record(std::vector<Tensor> inputs, Tensor& output, BackwardFn fn);

  std::size_t size() const { return nodes_.size(); }
  void clear();

  // Reverse-mode sweep from a scalar loss recorded on this tape.
  void backward(const Tensor& loss);

 private:
  struct Node {
    std::vector<Tensor> inputs;
    Tensor output;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

// Ops record onto the tape installed by the innermost TapeScope of the
// calling thread. With no scope active nothing is recorded.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

Tape* active_tape();

// Populates dLoss/dLeaf on every leaf that requires gradients.
void backward(const Tensor& loss, Tape& tape);

}  // namespace hfe
