#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "miner/blocks.hpp"
#include "miner/grid_signal.hpp"
#include "miner/pyramid.hpp"
#include "miner/tinynet.hpp"

namespace miner {

/// Nets of one scale. `grid`'s active bits mark the blocks that received
/// an MLP; `params` packs their parameters in ascending block order.
struct ScaleModel {
  BlockGrid grid;
  std::vector<float> params;

  friend bool operator==(const ScaleModel& a, const ScaleModel& b);
};

struct MinerModel {
  DomainKind domain = DomainKind::Image2D;
  PyramidKind pyramid = PyramidKind::Laplacian;
  std::size_t block_size = 32;
  std::vector<std::size_t> dims;  // finest scale
  std::size_t channels = 3;
  NetArch arch;
  std::vector<ScaleModel> scales;  // indexed by scale, 0 = finest

  std::size_t num_scales() const noexcept { return scales.size(); }
  std::vector<std::size_t> dims_at(std::size_t scale) const;
  std::size_t nets_at(std::size_t scale) const;
  std::size_t total_params() const;
  /// Parameters of the `ordinal`-th net (in ascending block order) at a scale.
  std::span<const float> net_params(std::size_t scale, std::size_t ordinal) const;
  /// Throws CorruptFile if the model is internally inconsistent.
  void validate() const;

  friend bool operator==(const MinerModel& a, const MinerModel& b);
};

/// Block-wise evaluation of scale j's nets; blocks without a net are zero.
GridSignal residue_field(const MinerModel& model, std::size_t scale);

/// Estimate of the signal at scale j: the coarsest field, then repeated
/// upsample-by-2 plus the next residue field (Laplacian models), or the
/// scale's own field (Gaussian-baseline models). Throws ScaleOutOfRange.
GridSignal decode(const MinerModel& model, std::size_t scale);

/// Decoded value at a finest-scale position given in cell-centred sample
/// units per axis (sample i sits at i; valid range [-0.5, n-0.5]).
/// Returns one value per channel. Throws OutOfDomain.
std::vector<float> decode_point(const MinerModel& model, std::span<const double> position);

inline constexpr std::uint32_t kModelVersion = 1;

std::vector<std::uint8_t> serialize(const MinerModel& model);
MinerModel deserialize(std::span<const std::uint8_t> bytes);

void save(const MinerModel& model, std::ostream& sink);
MinerModel load(std::istream& source);
void save_file(const MinerModel& model, const std::filesystem::path& path);
MinerModel load_file(const std::filesystem::path& path);

}  // namespace miner
