#include "miner/pyramid.hpp"

#include <cmath>
#include <string>

#include "miner/error.hpp"

namespace miner {
namespace {

struct AxisLayout {
  std::size_t outer = 1;  // product of dims before the axis
  std::size_t extent = 1;
  std::size_t inner = 1;  // product of dims after the axis, times channels
};

AxisLayout layout_for(const std::vector<std::size_t>& dims, std::size_t channels, std::size_t axis) {
  AxisLayout l;
  for (std::size_t a = 0; a < axis; ++a) l.outer *= dims[a];
  l.extent = dims[axis];
  l.inner = channels;
  for (std::size_t a = axis + 1; a < dims.size(); ++a) l.inner *= dims[a];
  return l;
}

// Pairwise mean along one axis, halving its extent.
GridSignal halve_axis(const GridSignal& in, std::size_t axis) {
  auto dims = in.dims();
  const AxisLayout l = layout_for(dims, in.channels(), axis);
  dims[axis] /= 2;
  GridSignal out(in.kind(), dims, in.channels());
  const auto src = in.values();
  auto dst = out.values();
  const std::size_t half = l.extent / 2;
  for (std::size_t o = 0; o < l.outer; ++o) {
    const float* s = src.data() + o * l.extent * l.inner;
    float* d = dst.data() + o * half * l.inner;
    for (std::size_t i = 0; i < half; ++i) {
      const float* a = s + (2 * i) * l.inner;
      const float* b = a + l.inner;
      float* r = d + i * l.inner;
      for (std::size_t k = 0; k < l.inner; ++k) r[k] = (a[k] + b[k]) * 0.5f;
    }
  }
  return out;
}

// Cell-centred linear interpolation along one axis by an integer factor.
GridSignal stretch_axis(const GridSignal& in, std::size_t axis, std::size_t factor) {
  auto dims = in.dims();
  const AxisLayout l = layout_for(dims, in.channels(), axis);
  const std::size_t n_out = l.extent * factor;
  dims[axis] = n_out;
  GridSignal out(in.kind(), dims, in.channels());
  const auto src = in.values();
  auto dst = out.values();

  std::vector<std::size_t> lo(n_out);
  std::vector<std::size_t> hi(n_out);
  std::vector<float> w(n_out);
  for (std::size_t i = 0; i < n_out; ++i) {
    const double x = (static_cast<double>(i) + 0.5) / static_cast<double>(factor) - 0.5;
    if (x <= 0.0) {
      lo[i] = hi[i] = 0;
      w[i] = 0.0f;
    } else if (x >= static_cast<double>(l.extent - 1)) {
      lo[i] = hi[i] = l.extent - 1;
      w[i] = 0.0f;
    } else {
      const double f = std::floor(x);
      lo[i] = static_cast<std::size_t>(f);
      hi[i] = lo[i] + 1;
      w[i] = static_cast<float>(x - f);
    }
  }

  for (std::size_t o = 0; o < l.outer; ++o) {
    const float* s = src.data() + o * l.extent * l.inner;
    float* d = dst.data() + o * n_out * l.inner;
    for (std::size_t i = 0; i < n_out; ++i) {
      const float* a = s + lo[i] * l.inner;
      const float* b = s + hi[i] * l.inner;
      float* r = d + i * l.inner;
      const float wi = w[i];
      // a + w (b - a) reproduces constants exactly.
      for (std::size_t k = 0; k < l.inner; ++k) r[k] = a[k] + wi * (b[k] - a[k]);
    }
  }
  return out;
}

}  // namespace

void require_divisible(const GridSignal& signal, std::size_t factor) {
  for (std::size_t d : signal.dims()) {
    if (factor == 0 || d % factor != 0) {
      throw Error(ErrorCode::NonDivisibleDims,
                  "dim " + std::to_string(d) + " is not divisible by " + std::to_string(factor));
    }
  }
}

GridSignal downsample(const GridSignal& signal, unsigned levels) {
  require_divisible(signal, std::size_t{1} << levels);
  GridSignal cur = signal;
  for (unsigned l = 0; l < levels; ++l) {
    for (std::size_t axis = 0; axis < cur.rank(); ++axis) cur = halve_axis(cur, axis);
  }
  return cur;
}

GridSignal upsample(const GridSignal& signal, unsigned levels) {
  if (levels == 0) return signal;
  const std::size_t factor = std::size_t{1} << levels;
  GridSignal cur = signal;
  for (std::size_t axis = 0; axis < cur.rank(); ++axis) cur = stretch_axis(cur, axis, factor);
  return cur;
}

Pyramid build_pyramid(const GridSignal& signal, std::size_t num_scales, PyramidKind kind) {
  if (num_scales == 0) throw Error(ErrorCode::InvalidConfig, "pyramid needs at least one scale");
  require_divisible(signal, std::size_t{1} << (num_scales - 1));

  Pyramid pyr;
  pyr.kind = kind;
  pyr.levels.reserve(num_scales);
  pyr.levels.push_back(signal);
  for (std::size_t j = 1; j < num_scales; ++j) {
    pyr.levels.push_back(downsample(pyr.levels.back(), 1));
  }
  if (kind == PyramidKind::Laplacian) {
    for (std::size_t j = 0; j + 1 < num_scales; ++j) {
      pyr.levels[j] = subtract(pyr.levels[j], upsample(pyr.levels[j + 1], 1));
    }
  }
  return pyr;
}

GridSignal reconstruct_pyramid(const Pyramid& pyramid) {
  if (pyramid.kind != PyramidKind::Laplacian) {
    throw Error(ErrorCode::WrongKind, "only Laplacian pyramids can be reconstructed");
  }
  if (pyramid.levels.empty()) throw Error(ErrorCode::InvalidConfig, "empty pyramid");
  GridSignal est = pyramid.levels.back();
  for (std::size_t j = pyramid.levels.size() - 1; j-- > 0;) {
    est = add(upsample(est, 1), pyramid.levels[j]);
  }
  return est;
}

}  // namespace miner
