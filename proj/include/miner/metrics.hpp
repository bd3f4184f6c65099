#pragma once

#include <optional>

#include "miner/grid_signal.hpp"

namespace miner {

struct MetricReport {
  double mse = 0.0;
  double psnr_db = 0.0;        // +inf when mse == 0
  std::optional<double> iou;   // volumes only
};

double mse(const GridSignal& a, const GridSignal& b);

/// 10 log10(1/mse) with unit peak; +infinity for identical signals.
double psnr_from_mse(double mse);
double psnr(const GridSignal& a, const GridSignal& b);

/// Intersection over union of the two occupancies binarised at
/// `threshold` (value >= threshold is occupied). Both empty -> 1.
double iou(const GridSignal& a, const GridSignal& b, float threshold = 0.5f);

MetricReport evaluate(const GridSignal& a, const GridSignal& b);

}  // namespace miner
