#include "miner/grid_signal.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>

#include "miner/error.hpp"

namespace miner {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NonDivisibleDims: return "NonDivisibleDims";
    case ErrorCode::WrongKind: return "WrongKind";
    case ErrorCode::WrongDomain: return "WrongDomain";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::StaleActivations: return "StaleActivations";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::ScaleOutOfRange: return "ScaleOutOfRange";
    case ErrorCode::OutOfDomain: return "OutOfDomain";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InvalidSignal: return "InvalidSignal";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::ChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::CorruptFile: return "CorruptFile";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

namespace {

std::size_t product(const std::vector<std::size_t>& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

}  // namespace

GridSignal::GridSignal(DomainKind kind, std::vector<std::size_t> dims, std::size_t channels)
    : kind_(kind), dims_(std::move(dims)), channels_(channels) {
  validate();
  values_.assign(product(dims_) * channels_, 0.0f);
}

GridSignal::GridSignal(DomainKind kind, std::vector<std::size_t> dims, std::size_t channels,
                       std::vector<float> values)
    : kind_(kind), dims_(std::move(dims)), channels_(channels), values_(std::move(values)) {
  validate();
  if (values_.size() != product(dims_) * channels_) {
    throw Error(ErrorCode::InvalidSignal, "sample count " + std::to_string(values_.size()) +
                                              " does not match dims x channels");
  }
}

GridSignal GridSignal::image(std::size_t height, std::size_t width, std::size_t channels) {
  return GridSignal(DomainKind::Image2D, {height, width}, channels);
}

GridSignal GridSignal::volume(std::size_t d0, std::size_t d1, std::size_t d2) {
  return GridSignal(DomainKind::Volume3D, {d0, d1, d2}, 1);
}

GridSignal GridSignal::filled_like(const GridSignal& like, float value) {
  GridSignal out(like.kind_, like.dims_, like.channels_);
  std::fill(out.values_.begin(), out.values_.end(), value);
  return out;
}

void GridSignal::validate() const {
  const std::size_t want_rank = kind_ == DomainKind::Image2D ? 2 : 3;
  if (dims_.size() != want_rank) {
    throw Error(ErrorCode::InvalidSignal, "expected " + std::to_string(want_rank) +
                                              " spatial axes, got " + std::to_string(dims_.size()));
  }
  for (std::size_t d : dims_) {
    if (d == 0) throw Error(ErrorCode::InvalidSignal, "zero-sized axis");
  }
  if (channels_ == 0) throw Error(ErrorCode::InvalidSignal, "zero channels");
  if (kind_ == DomainKind::Volume3D && channels_ != 1) {
    throw Error(ErrorCode::InvalidSignal, "volumes carry exactly one channel");
  }
}

std::size_t GridSignal::num_points() const noexcept { return dims_.empty() ? 0 : product(dims_); }

std::size_t GridSignal::offset(std::span<const std::size_t> index) const noexcept {
  std::size_t lin = 0;
  for (std::size_t a = 0; a < dims_.size(); ++a) lin = lin * dims_[a] + index[a];
  return lin * channels_;
}

void GridSignal::check_finite() const {
  for (float v : values_) {
    if (!std::isfinite(v)) throw Error(ErrorCode::InvalidSignal, "non-finite sample");
  }
}

bool GridSignal::same_shape(const GridSignal& other) const noexcept {
  return kind_ == other.kind_ && dims_ == other.dims_ && channels_ == other.channels_;
}

GridSignal subtract(const GridSignal& a, const GridSignal& b) {
  if (!a.same_shape(b)) throw Error(ErrorCode::DimMismatch, "subtract: shapes differ");
  GridSignal out = a;
  auto o = out.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bv[i];
  return out;
}

GridSignal add(const GridSignal& a, const GridSignal& b) {
  if (!a.same_shape(b)) throw Error(ErrorCode::DimMismatch, "add: shapes differ");
  GridSignal out = a;
  auto o = out.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bv[i];
  return out;
}

}  // namespace miner
