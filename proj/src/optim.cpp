#include "miner/optim.hpp"

#include <cmath>

#include "miner/error.hpp"

namespace miner {

double decayed_lr(double base_lr, double gamma, std::uint64_t epoch) {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw Error(ErrorCode::InvalidConfig, "gamma must be in (0, 1]");
  return base_lr * std::pow(gamma, static_cast<double>(epoch));
}

void adam_step(std::span<float> params, std::span<const float> grads, AdamState& state, double lr,
               const AdamConfig& cfg) {
  if (params.size() != grads.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    throw Error(ErrorCode::ShapeMismatch, "adam buffers are not congruent");
  }
  ++state.step;
  const auto t = static_cast<double>(state.step);
  const auto b1 = static_cast<float>(cfg.beta1);
  const auto b2 = static_cast<float>(cfg.beta2);
  const auto eps = static_cast<float>(cfg.epsilon);
  const auto c1 = static_cast<float>(1.0 / (1.0 - std::pow(cfg.beta1, t)));
  const auto c2 = static_cast<float>(1.0 / (1.0 - std::pow(cfg.beta2, t)));
  const auto rate = static_cast<float>(lr);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const float g = grads[i];
    state.m[i] = b1 * state.m[i] + (1.0f - b1) * g;
    state.v[i] = b2 * state.v[i] + (1.0f - b2) * g * g;
    const float m_hat = state.m[i] * c1;
    const float v_hat = state.v[i] * c2;
    params[i] -= rate * m_hat / (std::sqrt(v_hat) + eps);
  }
}

}  // namespace miner
