#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "miner/grid_signal.hpp"

namespace miner {

enum class PyramidKind : std::uint8_t { Laplacian = 0, Gaussian = 1 };

/// Multiscale stack indexed by scale: level(0) is the finest, level(J-1)
/// the coarsest. A Laplacian pyramid stores band-pass residues at every
/// scale except the coarsest, which holds the low-pass signal.
struct Pyramid {
  PyramidKind kind = PyramidKind::Laplacian;
  std::vector<GridSignal> levels;

  std::size_t num_scales() const noexcept { return levels.size(); }
  const GridSignal& level(std::size_t j) const { return levels.at(j); }
};

/// Box-filter downsampling by 2^levels per axis: each output sample is the
/// mean of its 2^levels-per-axis input cell. Applied as repeated pairwise
/// halving so constants survive bit-exactly and the operator composes
/// exactly (downsample(downsample(s,1),1) == downsample(s,2)).
GridSignal downsample(const GridSignal& signal, unsigned levels);

/// Cell-centred separable linear upsampling by 2^levels per axis with edge
/// clamping.
GridSignal upsample(const GridSignal& signal, unsigned levels);

/// Throws NonDivisibleDims unless every spatial dim is divisible by `factor`.
void require_divisible(const GridSignal& signal, std::size_t factor);

Pyramid build_pyramid(const GridSignal& signal, std::size_t num_scales, PyramidKind kind);

/// Inverse of a Laplacian build_pyramid. Throws WrongKind for Gaussian.
GridSignal reconstruct_pyramid(const Pyramid& pyramid);

}  // namespace miner
