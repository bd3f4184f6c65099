#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <string>

#include "miner/grid_signal.hpp"

namespace miner::cli {

enum class VoxelType { U8, F32 };

/// Sidecar metadata stored next to a raw grid as `<raw path>.json`:
/// {"dims":[d0,d1,d2], "dtype":"u8"|"f32"} for volumes, plus
/// "channels" for images ("dims":[h,w]). dims are listed slowest axis
/// first; dtype defaults to u8 and channels to 1.
std::filesystem::path sidecar_path(const std::filesystem::path& raw);

/// Reads a raw grid using its sidecar. Three dims give a volume, two an
/// image. u8 grids holding only 0/1 are taken as-is, others are divided
/// by 255.
GridSignal read_raw(const std::filesystem::path& raw);

/// Writes the raw samples and the sidecar. U8 volumes are thresholded at
/// 0.5, u8 images quantised to 0..255. F32 keeps values unclamped.
void write_raw(const GridSignal& signal, const std::filesystem::path& raw, VoxelType type);

bool has_sidecar(const std::filesystem::path& path);

/// Occupancy fixtures sampled at voxel centres. The shape is centred in
/// the grid unless `center` is given (voxel units).
GridSignal make_sphere(std::size_t n, double radius);
GridSignal make_sphere(std::size_t n, double radius, const std::array<double, 3>& center);
GridSignal make_torus(std::size_t n, double major, double minor);
/// Axis-aligned cube of half-size `half` with a centred sphere of
/// `radius` removed.
GridSignal make_csg(std::size_t n, double half, double radius);

}  // namespace miner::cli
