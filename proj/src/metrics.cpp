#include "miner/metrics.hpp"

#include <cmath>
#include <limits>

#include "miner/error.hpp"

namespace miner {

double mse(const GridSignal& a, const GridSignal& b) {
  if (!a.same_shape(b)) throw Error(ErrorCode::DimMismatch, "metric inputs differ in shape");
  const auto av = a.values();
  const auto bv = b.values();
  double acc = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double d = static_cast<double>(av[i]) - static_cast<double>(bv[i]);
    acc += d * d;
  }
  return av.empty() ? 0.0 : acc / static_cast<double>(av.size());
}

double psnr_from_mse(double mse) {
  if (mse <= 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

double psnr(const GridSignal& a, const GridSignal& b) { return psnr_from_mse(mse(a, b)); }

double iou(const GridSignal& a, const GridSignal& b, float threshold) {
  if (a.kind() != DomainKind::Volume3D || b.kind() != DomainKind::Volume3D) {
    throw Error(ErrorCode::WrongDomain, "IoU is defined for occupancy volumes only");
  }
  if (!a.same_shape(b)) throw Error(ErrorCode::DimMismatch, "metric inputs differ in shape");
  const auto av = a.values();
  const auto bv = b.values();
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t i = 0; i < av.size(); ++i) {
    const bool in_a = av[i] >= threshold;
    const bool in_b = bv[i] >= threshold;
    inter += (in_a && in_b) ? 1 : 0;
    uni += (in_a || in_b) ? 1 : 0;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

MetricReport evaluate(const GridSignal& a, const GridSignal& b) {
  MetricReport r;
  r.mse = mse(a, b);
  r.psnr_db = psnr_from_mse(r.mse);
  if (a.kind() == DomainKind::Volume3D) r.iou = iou(a, b);
  return r;
}

}  // namespace miner
