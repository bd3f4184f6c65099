#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "miner/blocks.hpp"

namespace miner {

/// Shape of a block MLP. `num_layers` counts linear maps; every map except
/// the last is followed by sin(omega0 * .).
struct NetArch {
  std::uint16_t in_dim = 2;
  std::uint16_t out_dim = 3;
  std::uint16_t hidden_features = 20;
  std::uint16_t num_layers = 4;
  float omega0 = 30.0f;

  void validate() const;
  std::size_t layer_in(std::size_t layer) const noexcept { return layer == 0 ? in_dim : hidden_features; }
  std::size_t layer_out(std::size_t layer) const noexcept {
    return layer + 1 == num_layers ? out_dim : hidden_features;
  }
  /// Offset of layer `layer`'s weight block in the flat parameter vector.
  std::size_t weight_offset(std::size_t layer) const noexcept;
  std::size_t bias_offset(std::size_t layer) const noexcept {
    return weight_offset(layer) + layer_in(layer) * layer_out(layer);
  }
  std::size_t num_params() const noexcept { return weight_offset(num_layers); }

  friend bool operator==(const NetArch&, const NetArch&) = default;
};

/// Parameters of one block MLP. Flat layout is layer-major: for each layer
/// the row-major (out x in) weight matrix followed by its bias.
template <typename Scalar>
struct TinyNet {
  NetArch arch;
  std::vector<Scalar> params;

  TinyNet() = default;
  explicit TinyNet(const NetArch& a) : arch(a), params(a.num_params(), Scalar(0)) {}

  std::span<Scalar> weights(std::size_t layer) {
    return {params.data() + arch.weight_offset(layer), arch.layer_in(layer) * arch.layer_out(layer)};
  }
  std::span<const Scalar> weights(std::size_t layer) const {
    return {params.data() + arch.weight_offset(layer), arch.layer_in(layer) * arch.layer_out(layer)};
  }
  std::span<Scalar> bias(std::size_t layer) {
    return {params.data() + arch.bias_offset(layer), arch.layer_out(layer)};
  }
  std::span<const Scalar> bias(std::size_t layer) const {
    return {params.data() + arch.bias_offset(layer), arch.layer_out(layer)};
  }

  template <typename Other>
  TinyNet<Other> cast() const {
    TinyNet<Other> out(arch);
    for (std::size_t i = 0; i < params.size(); ++i) out.params[i] = static_cast<Other>(params[i]);
    return out;
  }

  friend bool operator==(const TinyNet&, const TinyNet&) = default;
};

/// SIREN initialisation: first layer U(-1/in, 1/in), deeper layers
/// U(-sqrt(6/fan_in)/omega0, +sqrt(6/fan_in)/omega0), zero biases.
template <typename Scalar = float>
TinyNet<Scalar> init_siren(const NetArch& arch, std::uint64_t seed);

/// Evaluates a net at `coords` (tuple-major, in_dim components per point).
/// Returns points x out_dim values, channel-interleaved.
template <typename Scalar>
std::vector<Scalar> forward(const TinyNet<Scalar>& net, std::span<const Scalar> coords);

std::vector<float> forward(const TinyNet<float>& net, const LocalCoords& coords);

/// K nets sharing one architecture, stored contiguously, with gradient
/// buffers and the activations of the most recent forward pass per net.
template <typename Scalar>
class NetBatch {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  NetBatch() = default;
  NetBatch(const NetArch& arch, std::size_t count);
  explicit NetBatch(const std::vector<TinyNet<Scalar>>& nets);

  const NetArch& arch() const noexcept { return arch_; }
  std::size_t size() const noexcept { return count_; }
  std::size_t params_per_net() const noexcept { return stride_; }

  std::span<const Scalar> params(std::size_t k) const;
  /// Mutable access; invalidates the net's cached activations.
  std::span<Scalar> mutable_params(std::size_t k);
  std::span<Scalar> grads(std::size_t k);
  std::span<const Scalar> grads(std::size_t k) const;
  std::span<const Scalar> all_params() const noexcept { return params_; }

  TinyNet<Scalar> net(std::size_t k) const;
  void set_net(std::size_t k, const TinyNet<Scalar>& net);

  void zero_grads();
  void zero_grads(std::size_t k);

  /// Forward pass of net k; caches activations for backward_net. The
  /// returned span (points x out_dim) stays valid until the next forward
  /// of the same net.
  std::span<const Scalar> forward_net(std::size_t k, std::span<const Scalar> coords);

  /// Accumulates d(loss)/d(params of net k) into grads(k), given
  /// d(loss)/d(output) laid out like forward_net's result. Throws
  /// StaleActivations unless forward_net ran on these coords with the
  /// current parameters.
  void backward_net(std::size_t k, std::span<const Scalar> coords, std::span<const Scalar> output_grad);

  /// Row k of the result equals forward(net(k), coords).
  std::vector<Scalar> forward_batched(std::span<const Scalar> coords);
  /// `output_grads` holds K consecutive per-net output gradients.
  void backward(std::span<const Scalar> coords, std::span<const Scalar> output_grads);

  /// Drops cached activations of net k (frees memory of frozen nets).
  void release_cache(std::size_t k);

 private:
  struct Cache {
    std::vector<Matrix> pre;   // pre-activations per hidden layer
    std::vector<Matrix> post;  // sin outputs per hidden layer
    Matrix output;
    std::uint64_t version = 0;
    const Scalar* coords = nullptr;
    std::size_t coords_size = 0;
    bool valid = false;
  };

  void check_index(std::size_t k) const;

  NetArch arch_;
  std::size_t count_ = 0;
  std::size_t stride_ = 0;
  std::vector<Scalar> params_;
  std::vector<Scalar> grads_;
  std::vector<std::uint64_t> versions_;
  std::vector<Cache> caches_;
};

extern template class NetBatch<float>;
extern template class NetBatch<double>;

}  // namespace miner
