#include "hfe/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hfe/error.hpp"

namespace hfe {

std::string Shape::str() const {
  std::ostringstream os;
  os << '(' << n << ',' << c << ',' << h << ',' << w << ')';
  return os.str();
}

namespace {

std::shared_ptr<detail::TensorImpl> new_impl(Shape shape,
                                             std::vector<float> data,
                                             bool requires_grad) {
  if (data.size() != shape.numel()) {
    throw ContractViolation("tensor data length " +
                            std::to_string(data.size()) +
                            " does not match shape " + shape.str());
  }
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = shape;
  impl->data = std::move(data);
  if (requires_grad) {
    impl->requires_grad = true;
    impl->grad.assign(impl->data.size(), 0.0f);
  }
  return impl;
}

thread_local Tape* g_active_tape = nullptr;

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(shape, 0.0f, requires_grad);
}

Tensor Tensor::full(Shape shape, float value, bool requires_grad) {
  return Tensor(new_impl(shape, std::vector<float>(shape.numel(), value),
                         requires_grad));
}

Tensor Tensor::from_data(Shape shape, std::vector<float> data,
                         bool requires_grad) {
  return Tensor(new_impl(shape, std::move(data), requires_grad));
}

Tensor Tensor::scalar(float value) { return full({1, 1, 1, 1}, value); }

Tensor make_op_output(Shape shape, std::vector<float> data) {
  return Tensor(new_impl(shape, std::move(data), false));
}

const Shape& Tensor::shape() const {
  static const Shape empty{};
  return impl_ ? impl_->shape : empty;
}

std::span<const float> Tensor::data() const {
  if (!impl_) return {};
  return impl_->data;
}

std::span<float> Tensor::mutable_data() {
  if (!impl_) return {};
  return impl_->data;
}

float Tensor::item() const {
  if (numel() != 1) {
    throw ContractViolation("item() on tensor of shape " + shape().str());
  }
  return impl_->data[0];
}

float Tensor::at(std::size_t n, std::size_t c, std::size_t h,
                 std::size_t w) const {
  const Shape& s = shape();
  return impl_->data[((n * s.c + c) * s.h + h) * s.w + w];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

void Tensor::set_requires_grad(bool on) {
  if (!impl_) throw ContractViolation("set_requires_grad on empty tensor");
  impl_->requires_grad = on;
  if (on) {
    impl_->grad.assign(impl_->data.size(), 0.0f);
  } else {
    impl_->grad.clear();
  }
}

bool Tensor::has_grad() const {
  return impl_ && impl_->grad.size() == impl_->data.size() &&
         !impl_->data.empty();
}

std::span<const float> Tensor::grad() const {
  if (!impl_) return {};
  return impl_->grad;
}

std::span<float> Tensor::mutable_grad() {
  if (!impl_) return {};
  return impl_->grad;
}

void Tensor::zero_grad() {
  if (impl_) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0f);
}

Tensor Tensor::clone() const {
  if (!impl_) return {};
  return Tensor(new_impl(impl_->shape, impl_->data, false));
}

bool Tensor::all_finite() const {
  if (!impl_) return true;
  return std::all_of(impl_->data.begin(), impl_->data.end(),
                     [](float v) { return std::isfinite(v); });
}

void Tape::record(std::vector<Tensor> inputs, Tensor& output, BackwardFn fn) {
  output.impl_->requires_grad = true;
  output.impl_->tape = this;
  nodes_.push_back({std::move(inputs), output, std::move(fn)});
}

void Tape::clear() { nodes_.clear(); }

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ContractViolation("backward needs a scalar loss, got shape " +
                            loss.shape().str());
  }
  if (loss.impl()->tape != this) {
    throw ContractViolation("backward: loss was not recorded on this tape");
  }
  // Intermediate gradients start at zero for every sweep; leaves accumulate.
  for (Node& node : nodes_) {
    node.output.impl_->grad.assign(node.output.numel(), 0.0f);
    for (Tensor& in : node.inputs) {
      auto& impl = *in.impl_;
      if (impl.requires_grad && impl.grad.size() != impl.data.size()) {
        impl.grad.assign(impl.data.size(), 0.0f);
      }
    }
  }
  loss.impl()->grad[0] = 1.0f;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    it->backward();
  }
}

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) {
  g_active_tape = &tape;
}

TapeScope::~TapeScope() { g_active_tape = previous_; }

Tape* active_tape() { return g_active_tape; }

void backward(const Tensor& loss, Tape& tape) { tape.backward(loss); }

}  // namespace hfe
