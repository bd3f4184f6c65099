#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace miner {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moment accumulators for one parameter buffer (one block net).
struct AdamState {
  std::uint64_t step = 0;
  std::vector<float> m;
  std::vector<float> v;

  AdamState() = default;
  explicit AdamState(std::size_t n) : m(n, 0.0f), v(n, 0.0f) {}

  void release() {
    step = 0;
    m = {};
    v = {};
  }
};

/// Learning rate after `epoch` epochs of exponential decay: base * gamma^epoch.
double decayed_lr(double base_lr, double gamma, std::uint64_t epoch);

/// One bias-corrected Adam update at learning rate `lr`. Throws
/// ShapeMismatch when the buffers are not congruent.
void adam_step(std::span<float> params, std::span<const float> grads, AdamState& state, double lr,
               const AdamConfig& cfg = {});

}  // namespace miner
