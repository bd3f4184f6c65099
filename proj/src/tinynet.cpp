#include "miner/tinynet.hpp"

#include <cmath>
#include <random>
#include <string>

#include "miner/error.hpp"
#include "miner/parallel.hpp"

namespace miner {

void NetArch::validate() const {
  if (in_dim == 0) throw Error(ErrorCode::InvalidConfig, "in_dim must be positive");
  if (out_dim == 0) throw Error(ErrorCode::InvalidConfig, "out_dim must be positive");
  if (num_layers < 2) throw Error(ErrorCode::InvalidConfig, "num_layers must be >= 2");
  if (hidden_features < 1) throw Error(ErrorCode::InvalidConfig, "hidden_features must be >= 1");
  if (!(omega0 > 0.0f) || !std::isfinite(omega0)) throw Error(ErrorCode::InvalidConfig, "omega0 must be > 0");
}

std::size_t NetArch::weight_offset(std::size_t layer) const noexcept {
  std::size_t off = 0;
  for (std::size_t l = 0; l < layer; ++l) off += (layer_in(l) + 1) * layer_out(l);
  return off;
}

template <typename Scalar>
TinyNet<Scalar> init_siren(const NetArch& arch, std::uint64_t seed) {
  arch.validate();
  TinyNet<Scalar> net(arch);
  std::mt19937_64 gen(seed);
  // Portable uniform in [lo, hi): the distribution classes are not
  // bit-reproducible across standard libraries, the engine is.
  auto uniform = [&gen](double lo, double hi) {
    const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
  };
  for (std::size_t l = 0; l < arch.num_layers; ++l) {
    const double fan_in = static_cast<double>(arch.layer_in(l));
    const double bound = l == 0 ? 1.0 / fan_in : std::sqrt(6.0 / fan_in) / arch.omega0;
    for (Scalar& w : net.weights(l)) w = static_cast<Scalar>(uniform(-bound, bound));
  }
  return net;
}

template TinyNet<float> init_siren<float>(const NetArch&, std::uint64_t);
template TinyNet<double> init_siren<double>(const NetArch&, std::uint64_t);

namespace {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using RowMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
Eigen::Map<const RowMat<Scalar>> weight_map(const NetArch& arch, const Scalar* params, std::size_t l) {
  return {params + arch.weight_offset(l), static_cast<Eigen::Index>(arch.layer_out(l)),
          static_cast<Eigen::Index>(arch.layer_in(l))};
}

template <typename Scalar>
Eigen::Map<const Eigen::Vector<Scalar, Eigen::Dynamic>> bias_map(const NetArch& arch, const Scalar* params,
                                                                std::size_t l) {
  return {params + arch.bias_offset(l), static_cast<Eigen::Index>(arch.layer_out(l))};
}

template <typename Scalar>
Eigen::Map<const Mat<Scalar>> coords_map(const NetArch& arch, std::span<const Scalar> coords) {
  if (coords.size() % arch.in_dim != 0) {
    throw Error(ErrorCode::ShapeMismatch, "coordinate buffer is not a multiple of in_dim");
  }
  return {coords.data(), static_cast<Eigen::Index>(arch.in_dim),
          static_cast<Eigen::Index>(coords.size() / arch.in_dim)};
}

// The single forward kernel shared by the per-net and batched paths, so
// both produce bit-identical results.
template <typename Scalar>
void forward_kernel(const NetArch& arch, const Scalar* params, std::span<const Scalar> coords,
                    std::vector<Mat<Scalar>>& pre, std::vector<Mat<Scalar>>& post, Mat<Scalar>& output) {
  const auto x = coords_map(arch, coords);
  const std::size_t hidden = arch.num_layers - 1u;
  const Scalar omega = static_cast<Scalar>(arch.omega0);
  pre.resize(hidden);
  post.resize(hidden);
  for (std::size_t l = 0; l < hidden; ++l) {
    const auto w = weight_map(arch, params, l);
    if (l == 0) {
      pre[l].noalias() = w * x;
    } else {
      pre[l].noalias() = w * post[l - 1];
    }
    pre[l].colwise() += bias_map(arch, params, l);
    post[l] = (omega * pre[l].array()).sin().matrix();
  }
  const std::size_t last = arch.num_layers - 1u;
  output.noalias() = weight_map(arch, params, last) * post[hidden - 1];
  output.colwise() += bias_map(arch, params, last);
}

template <typename Scalar>
void backward_kernel(const NetArch& arch, const Scalar* params, std::span<const Scalar> coords,
                     const std::vector<Mat<Scalar>>& pre, const std::vector<Mat<Scalar>>& post,
                     std::span<const Scalar> output_grad, Scalar* grads) {
  const auto x = coords_map(arch, coords);
  const Eigen::Index npts = x.cols();
  if (output_grad.size() != static_cast<std::size_t>(npts) * arch.out_dim) {
    throw Error(ErrorCode::ShapeMismatch, "output gradient size");
  }
  const Scalar omega = static_cast<Scalar>(arch.omega0);
  const Eigen::Map<const Mat<Scalar>> g_out(output_grad.data(), arch.out_dim, npts);

  auto grad_w = [&](std::size_t l) {
    return Eigen::Map<RowMat<Scalar>>(grads + arch.weight_offset(l), static_cast<Eigen::Index>(arch.layer_out(l)),
                                      static_cast<Eigen::Index>(arch.layer_in(l)));
  };
  auto grad_b = [&](std::size_t l) {
    return Eigen::Map<Eigen::Vector<Scalar, Eigen::Dynamic>>(grads + arch.bias_offset(l),
                                                             static_cast<Eigen::Index>(arch.layer_out(l)));
  };

  const std::size_t last = arch.num_layers - 1u;
  grad_w(last).noalias() += g_out * post[last - 1].transpose();
  grad_b(last) += g_out.rowwise().sum();
  Mat<Scalar> delta = weight_map(arch, params, last).transpose() * g_out;

  for (std::size_t l = last; l-- > 0;) {
    delta.array() *= omega * (omega * pre[l].array()).cos();
    if (l == 0) {
      grad_w(l).noalias() += delta * x.transpose();
    } else {
      grad_w(l).noalias() += delta * post[l - 1].transpose();
    }
    grad_b(l) += delta.rowwise().sum();
    if (l > 0) delta = weight_map(arch, params, l).transpose() * delta;
  }
}

}  // namespace

template <typename Scalar>
std::vector<Scalar> forward(const TinyNet<Scalar>& net, std::span<const Scalar> coords) {
  net.arch.validate();
  std::vector<Mat<Scalar>> pre;
  std::vector<Mat<Scalar>> post;
  Mat<Scalar> output;
  forward_kernel(net.arch, net.params.data(), coords, pre, post, output);
  return {output.data(), output.data() + output.size()};
}

template std::vector<float> forward<float>(const TinyNet<float>&, std::span<const float>);
template std::vector<double> forward<double>(const TinyNet<double>&, std::span<const double>);

std::vector<float> forward(const TinyNet<float>& net, const LocalCoords& coords) {
  if (coords.dims != net.arch.in_dim) throw Error(ErrorCode::ShapeMismatch, "coordinate dims != in_dim");
  return forward<float>(net, std::span<const float>(coords.values));
}

// ---------------------------------------------------------------------------
// NetBatch

template <typename Scalar>
NetBatch<Scalar>::NetBatch(const NetArch& arch, std::size_t count)
    : arch_(arch), count_(count), stride_(arch.num_params()) {
  arch_.validate();
  params_.assign(count_ * stride_, Scalar(0));
  grads_.assign(count_ * stride_, Scalar(0));
  versions_.assign(count_, 1);
  caches_.resize(count_);
}

template <typename Scalar>
NetBatch<Scalar>::NetBatch(const std::vector<TinyNet<Scalar>>& nets)
    : NetBatch(nets.empty() ? NetArch{} : nets.front().arch, nets.size()) {
  for (std::size_t k = 0; k < nets.size(); ++k) set_net(k, nets[k]);
}

template <typename Scalar>
void NetBatch<Scalar>::check_index(std::size_t k) const {
  if (k >= count_) throw Error(ErrorCode::IndexOutOfRange, "net " + std::to_string(k));
}

template <typename Scalar>
std::span<const Scalar> NetBatch<Scalar>::params(std::size_t k) const {
  check_index(k);
  return {params_.data() + k * stride_, stride_};
}

template <typename Scalar>
std::span<Scalar> NetBatch<Scalar>::mutable_params(std::size_t k) {
  check_index(k);
  ++versions_[k];
  return {params_.data() + k * stride_, stride_};
}

template <typename Scalar>
std::span<Scalar> NetBatch<Scalar>::grads(std::size_t k) {
  check_index(k);
  return {grads_.data() + k * stride_, stride_};
}

template <typename Scalar>
std::span<const Scalar> NetBatch<Scalar>::grads(std::size_t k) const {
  check_index(k);
  return {grads_.data() + k * stride_, stride_};
}

template <typename Scalar>
TinyNet<Scalar> NetBatch<Scalar>::net(std::size_t k) const {
  TinyNet<Scalar> n(arch_);
  const auto p = params(k);
  std::copy(p.begin(), p.end(), n.params.begin());
  return n;
}

template <typename Scalar>
void NetBatch<Scalar>::set_net(std::size_t k, const TinyNet<Scalar>& net) {
  if (!(net.arch == arch_)) throw Error(ErrorCode::ShapeMismatch, "net architecture differs from batch");
  auto p = mutable_params(k);
  std::copy(net.params.begin(), net.params.end(), p.begin());
}

template <typename Scalar>
void NetBatch<Scalar>::zero_grads() {
  std::fill(grads_.begin(), grads_.end(), Scalar(0));
}

template <typename Scalar>
void NetBatch<Scalar>::zero_grads(std::size_t k) {
  auto g = grads(k);
  std::fill(g.begin(), g.end(), Scalar(0));
}

template <typename Scalar>
std::span<const Scalar> NetBatch<Scalar>::forward_net(std::size_t k, std::span<const Scalar> coords) {
  check_index(k);
  Cache& c = caches_[k];
  forward_kernel(arch_, params_.data() + k * stride_, coords, c.pre, c.post, c.output);
  c.version = versions_[k];
  c.coords = coords.data();
  c.coords_size = coords.size();
  c.valid = true;
  return {c.output.data(), static_cast<std::size_t>(c.output.size())};
}

template <typename Scalar>
void NetBatch<Scalar>::backward_net(std::size_t k, std::span<const Scalar> coords,
                                    std::span<const Scalar> output_grad) {
  check_index(k);
  const Cache& c = caches_[k];
  if (!c.valid || c.version != versions_[k] || c.coords != coords.data() || c.coords_size != coords.size()) {
    throw Error(ErrorCode::StaleActivations, "net " + std::to_string(k) + " has no forward pass for these inputs");
  }
  backward_kernel(arch_, params_.data() + k * stride_, coords, c.pre, c.post, output_grad,
                  grads_.data() + k * stride_);
}

template <typename Scalar>
std::vector<Scalar> NetBatch<Scalar>::forward_batched(std::span<const Scalar> coords) {
  const std::size_t per_net = coords.size() / arch_.in_dim * arch_.out_dim;
  std::vector<Scalar> out(count_ * per_net);
  parallel_for(count_, [&](std::size_t k) {
    const auto y = forward_net(k, coords);
    std::copy(y.begin(), y.end(), out.begin() + static_cast<std::ptrdiff_t>(k * per_net));
  });
  return out;
}

template <typename Scalar>
void NetBatch<Scalar>::backward(std::span<const Scalar> coords, std::span<const Scalar> output_grads) {
  const std::size_t per_net = coords.size() / arch_.in_dim * arch_.out_dim;
  if (output_grads.size() != count_ * per_net) throw Error(ErrorCode::ShapeMismatch, "batched output gradient size");
  parallel_for(count_, [&](std::size_t k) { backward_net(k, coords, output_grads.subspan(k * per_net, per_net)); });
}

template <typename Scalar>
void NetBatch<Scalar>::release_cache(std::size_t k) {
  check_index(k);
  caches_[k] = Cache{};
}

template class NetBatch<float>;
template class NetBatch<double>;

}  // namespace miner
