#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "miner/grid_signal.hpp"

namespace miner::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;

/// Runs the command line (args excludes the program name) and returns
/// the process exit code. Diagnostics go to `err`, reports to `out`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Image (by extension), model file (.minr, decoded at scale 0) or raw
/// volume with sidecar.
GridSignal load_signal(const std::filesystem::path& path);

/// Centre crop so every dim is a multiple of `factor`. Throws
/// NonDivisibleDims if a dim would become zero.
GridSignal crop_divisible(const GridSignal& signal, std::size_t factor);

}  // namespace miner::cli
