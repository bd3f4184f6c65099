#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "miner/grid_signal.hpp"

namespace miner {

/// Partition of one scale into equal b^d blocks with an active set.
///
/// The active set is held twice: a bitmap for O(1) membership and a dense
/// ascending list of indices that training kernels iterate over. The list
/// is rebuilt whenever blocks are removed.
class BlockGrid {
 public:
  BlockGrid() = default;
  BlockGrid(std::size_t scale, std::size_t block_size, std::vector<std::size_t> counts);

  std::size_t scale() const noexcept { return scale_; }
  std::size_t block_size() const noexcept { return block_size_; }
  const std::vector<std::size_t>& counts() const noexcept { return counts_; }
  std::size_t rank() const noexcept { return counts_.size(); }
  std::size_t total_blocks() const noexcept { return active_bits_.size(); }
  /// Samples per block (b^d).
  std::size_t block_points() const noexcept;

  bool is_active(std::size_t index) const;
  const std::vector<std::size_t>& active_indices() const noexcept { return active_list_; }
  std::size_t num_active() const noexcept { return active_list_.size(); }
  const std::vector<bool>& active_bits() const noexcept { return active_bits_; }

  /// Removes every index in `indices` from the active set. Removal only;
  /// the active set never grows.
  void deactivate(std::span<const std::size_t> indices);
  void deactivate_all();
  /// Replace the bitmap wholesale (used when loading a model).
  void set_active_bits(std::vector<bool> bits);

  std::vector<std::size_t> multi_index(std::size_t index) const;
  std::size_t linear_index(std::span<const std::size_t> multi) const;

  friend bool operator==(const BlockGrid& a, const BlockGrid& b) {
    return a.scale_ == b.scale_ && a.block_size_ == b.block_size_ && a.counts_ == b.counts_ &&
           a.active_bits_ == b.active_bits_;
  }

 private:
  void rebuild_list();

  std::size_t scale_ = 0;
  std::size_t block_size_ = 1;
  std::vector<std::size_t> counts_;
  std::vector<bool> active_bits_;
  std::vector<std::size_t> active_list_;
};

/// Coordinates shared by every block at a scale: b^d tuples, stored
/// tuple-major (x0 y0 [z0] x1 y1 ...), components cell-centred in (-1, 1).
struct LocalCoords {
  std::size_t dims = 0;
  std::size_t block_size = 0;
  std::vector<float> values;

  std::size_t count() const noexcept { return dims == 0 ? 0 : values.size() / dims; }
};

BlockGrid make_block_grid(std::span<const std::size_t> dims_at_scale, std::size_t block_size,
                          std::size_t scale = 0);

/// Copies a block's b^d x channels samples out in local row-major order.
std::vector<float> gather_block(const GridSignal& signal, const BlockGrid& grid, std::size_t index);
void gather_block(const GridSignal& signal, const BlockGrid& grid, std::size_t index,
                  std::span<float> out);

/// Writes a block back; exact inverse of gather_block.
void scatter_block(GridSignal& signal, const BlockGrid& grid, std::size_t index,
                   std::span<const float> samples);

/// Parent block at the next coarser scale (floor of the multi-index by 2).
std::size_t parent_index(const BlockGrid& fine_grid, std::size_t child_index);

/// Per-axis component values -1 + (2i+1)/b for i in [0, b).
std::vector<float> local_axis_positions(std::size_t block_size);

LocalCoords local_coord_grid(std::size_t block_size, std::size_t dims);

/// Sum of squared samples of one block divided by its sample count.
double block_mean_square(const GridSignal& signal, const BlockGrid& grid, std::size_t index);

}  // namespace miner
