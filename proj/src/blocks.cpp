#include "miner/blocks.hpp"

#include <string>

#include "miner/error.hpp"

namespace miner {

BlockGrid::BlockGrid(std::size_t scale, std::size_t block_size, std::vector<std::size_t> counts)
    : scale_(scale), block_size_(block_size), counts_(std::move(counts)) {
  std::size_t total = 1;
  for (std::size_t c : counts_) total *= c;
  active_bits_.assign(total, true);
  rebuild_list();
}

std::size_t BlockGrid::block_points() const noexcept {
  std::size_t n = 1;
  for (std::size_t a = 0; a < counts_.size(); ++a) n *= block_size_;
  return n;
}

bool BlockGrid::is_active(std::size_t index) const {
  if (index >= total_blocks()) {
    throw Error(ErrorCode::IndexOutOfRange, "block " + std::to_string(index));
  }
  return active_bits_[index];
}

void BlockGrid::deactivate(std::span<const std::size_t> indices) {
  if (indices.empty()) return;
  for (std::size_t i : indices) {
    if (i >= total_blocks()) throw Error(ErrorCode::IndexOutOfRange, "block " + std::to_string(i));
    active_bits_[i] = false;
  }
  rebuild_list();
}

void BlockGrid::deactivate_all() {
  active_bits_.assign(active_bits_.size(), false);
  active_list_.clear();
}

void BlockGrid::set_active_bits(std::vector<bool> bits) {
  if (bits.size() != active_bits_.size()) {
    throw Error(ErrorCode::ShapeMismatch, "active bitmap size does not match block count");
  }
  active_bits_ = std::move(bits);
  rebuild_list();
}

void BlockGrid::rebuild_list() {
  active_list_.clear();
  for (std::size_t i = 0; i < active_bits_.size(); ++i) {
    if (active_bits_[i]) active_list_.push_back(i);
  }
}

std::vector<std::size_t> BlockGrid::multi_index(std::size_t index) const {
  if (index >= total_blocks()) throw Error(ErrorCode::IndexOutOfRange, "block " + std::to_string(index));
  std::vector<std::size_t> m(counts_.size());
  for (std::size_t a = counts_.size(); a-- > 0;) {
    m[a] = index % counts_[a];
    index /= counts_[a];
  }
  return m;
}

std::size_t BlockGrid::linear_index(std::span<const std::size_t> multi) const {
  std::size_t lin = 0;
  for (std::size_t a = 0; a < counts_.size(); ++a) {
    if (multi[a] >= counts_[a]) throw Error(ErrorCode::IndexOutOfRange, "block multi-index");
    lin = lin * counts_[a] + multi[a];
  }
  return lin;
}

BlockGrid make_block_grid(std::span<const std::size_t> dims_at_scale, std::size_t block_size,
                          std::size_t scale) {
  if (block_size == 0) throw Error(ErrorCode::InvalidConfig, "block size must be positive");
  std::vector<std::size_t> counts;
  for (std::size_t d : dims_at_scale) {
    if (d % block_size != 0) {
      throw Error(ErrorCode::NonDivisibleDims, "dim " + std::to_string(d) +
                                                   " is not divisible by block size " +
                                                   std::to_string(block_size));
    }
    counts.push_back(d / block_size);
  }
  return BlockGrid(scale, block_size, std::move(counts));
}

namespace {

// Visits each sample of a block in local row-major order, passing the
// signal offset of its first channel.
template <typename Fn>
void for_each_block_sample(const GridSignal& signal, const BlockGrid& grid, std::size_t index, Fn&& fn) {
  if (signal.rank() != grid.rank()) throw Error(ErrorCode::DimMismatch, "grid rank differs from signal");
  for (std::size_t a = 0; a < grid.rank(); ++a) {
    if (grid.counts()[a] * grid.block_size() != signal.dim(a)) {
      throw Error(ErrorCode::DimMismatch, "grid does not tile the signal");
    }
  }
  const auto origin = grid.multi_index(index);
  const std::size_t b = grid.block_size();
  const std::size_t ch = signal.channels();
  const auto& dims = signal.dims();
  std::size_t k = 0;
  if (grid.rank() == 2) {
    for (std::size_t y = 0; y < b; ++y) {
      const std::size_t row = (origin[0] * b + y) * dims[1] + origin[1] * b;
      for (std::size_t x = 0; x < b; ++x) fn(k++, (row + x) * ch);
    }
  } else {
    for (std::size_t z = 0; z < b; ++z) {
      for (std::size_t y = 0; y < b; ++y) {
        const std::size_t row =
            ((origin[0] * b + z) * dims[1] + origin[1] * b + y) * dims[2] + origin[2] * b;
        for (std::size_t x = 0; x < b; ++x) fn(k++, (row + x) * ch);
      }
    }
  }
}

}  // namespace

void gather_block(const GridSignal& signal, const BlockGrid& grid, std::size_t index,
                  std::span<float> out) {
  const std::size_t ch = signal.channels();
  if (out.size() != grid.block_points() * ch) throw Error(ErrorCode::ShapeMismatch, "gather buffer size");
  const auto v = signal.values();
  for_each_block_sample(signal, grid, index, [&](std::size_t k, std::size_t off) {
    for (std::size_t c = 0; c < ch; ++c) out[k * ch + c] = v[off + c];
  });
}

std::vector<float> gather_block(const GridSignal& signal, const BlockGrid& grid, std::size_t index) {
  std::vector<float> out(grid.block_points() * signal.channels());
  gather_block(signal, grid, index, out);
  return out;
}

void scatter_block(GridSignal& signal, const BlockGrid& grid, std::size_t index,
                   std::span<const float> samples) {
  const std::size_t ch = signal.channels();
  if (samples.size() != grid.block_points() * ch) throw Error(ErrorCode::ShapeMismatch, "scatter size");
  auto v = signal.values();
  for_each_block_sample(signal, grid, index, [&](std::size_t k, std::size_t off) {
    for (std::size_t c = 0; c < ch; ++c) v[off + c] = samples[k * ch + c];
  });
}

std::size_t parent_index(const BlockGrid& fine_grid, std::size_t child_index) {
  auto m = fine_grid.multi_index(child_index);
  std::size_t lin = 0;
  for (std::size_t a = 0; a < m.size(); ++a) {
    // Coarse counts are ceil(fine/2); equal to fine/2 for dyadic grids.
    const std::size_t coarse_count = (fine_grid.counts()[a] + 1) / 2;
    lin = lin * coarse_count + m[a] / 2;
  }
  return lin;
}

std::vector<float> local_axis_positions(std::size_t block_size) {
  std::vector<float> pos(block_size);
  for (std::size_t i = 0; i < block_size; ++i) {
    pos[i] = static_cast<float>(-1.0 + (2.0 * static_cast<double>(i) + 1.0) / static_cast<double>(block_size));
  }
  return pos;
}

LocalCoords local_coord_grid(std::size_t block_size, std::size_t dims) {
  if (block_size == 0) throw Error(ErrorCode::InvalidConfig, "block size must be positive");
  if (dims < 1 || dims > 3) throw Error(ErrorCode::InvalidConfig, "coordinate dims must be 1..3");
  const auto axis = local_axis_positions(block_size);
  LocalCoords lc;
  lc.dims = dims;
  lc.block_size = block_size;
  std::size_t count = 1;
  for (std::size_t a = 0; a < dims; ++a) count *= block_size;
  lc.values.resize(count * dims);
  for (std::size_t k = 0; k < count; ++k) {
    std::size_t rem = k;
    for (std::size_t a = dims; a-- > 0;) {
      lc.values[k * dims + a] = axis[rem % block_size];
      rem /= block_size;
    }
  }
  return lc;
}

double block_mean_square(const GridSignal& signal, const BlockGrid& grid, std::size_t index) {
  double acc = 0.0;
  const std::size_t ch = signal.channels();
  const auto v = signal.values();
  for_each_block_sample(signal, grid, index, [&](std::size_t, std::size_t off) {
    for (std::size_t c = 0; c < ch; ++c) {
      const double x = v[off + c];
      acc += x * x;
    }
  });
  return acc / static_cast<double>(grid.block_points() * ch);
}

}  // namespace miner
