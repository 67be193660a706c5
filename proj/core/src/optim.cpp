#include "hfe/optim.hpp"

#include <cmath>

#include "hfe/error.hpp"

namespace hfe {

AdamState AdamState::for_params(const std::vector<Tensor>& params,
                                AdamHyper hyper) {
  AdamState state;
  state.hyper = hyper;
  for (const Tensor& p : params) {
    state.m.emplace_back(p.numel(), 0.0f);
    state.v.emplace_back(p.numel(), 0.0f);
  }
  return state;
}

void adam_step(std::vector<Tensor>& params, AdamState& state) {
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ContractViolation("adam_step: state tracks " +
                            std::to_string(state.m.size()) +
                            " parameters, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].has_grad()) {
      throw ContractViolation("adam_step: parameter " + std::to_string(i) +
                              " " + params[i].shape().str() +
                              " has no gradient");
    }
    if (state.m[i].size() != params[i].numel() ||
        state.v[i].size() != params[i].numel()) {
      throw ContractViolation("adam_step: moment length mismatch for parameter " +
                              std::to_string(i));
    }
  }
  state.t += 1;
  const AdamHyper& h = state.hyper;
  const double t = static_cast<double>(state.t);
  const float c1 = static_cast<float>(1.0 - std::pow(h.beta1, t));
  const float c2 = static_cast<float>(1.0 - std::pow(h.beta2, t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto data = params[i].mutable_data();
    auto grad = params[i].grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < data.size(); ++j) {
      const float g = grad[j];
      m[j] = h.beta1 * m[j] + (1.0f - h.beta1) * g;
      v[j] = h.beta2 * v[j] + (1.0f - h.beta2) * g * g;
      const float m_hat = m[j] / c1;
      const float v_hat = v[j] / c2;
      data[j] -= h.lr * m_hat / (std::sqrt(v_hat) + h.eps);
    }
  }
}

double lr_schedule(double base_lr, std::uint64_t step, double decay,
                   std::uint64_t every) {
  return base_lr * std::pow(decay, static_cast<double>(step / every));
}

}  // namespace hfe
