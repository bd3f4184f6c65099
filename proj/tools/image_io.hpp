#pragma once

#include <filesystem>

#include "miner/grid_signal.hpp"

namespace miner::cli {

/// PNG (8/16-bit gray, gray+alpha, RGB, RGBA; alpha is dropped) or binary
/// PPM/PGM, normalised to [0, 1]. Throws Error(Io) on unreadable input.
GridSignal read_image(const std::filesystem::path& path);

/// 16-bit PNG with samples clamped to [0, 1]. One or three channels.
void write_png16(const GridSignal& image, const std::filesystem::path& path);

/// Binary PPM (3 channels) or PGM (1 channel), 8 or 16 bit.
void write_pnm(const GridSignal& image, const std::filesystem::path& path, bool sixteen_bit = true);

bool is_image_path(const std::filesystem::path& path);

}  // namespace miner::cli
