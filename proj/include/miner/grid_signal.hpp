#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace miner {

enum class DomainKind : std::uint8_t { Image2D = 0, Volume3D = 1 };

/// Dense sampled signal: a multi-channel 2D image or a single-channel 3D
/// volume. Samples are stored row-major over the spatial axes (axis 0 is
/// the slowest) with channels interleaved.
class GridSignal {
 public:
  GridSignal() = default;

  /// Zero-filled signal. Throws InvalidSignal if the shape is inconsistent
  /// with the domain kind.
  GridSignal(DomainKind kind, std::vector<std::size_t> dims, std::size_t channels);
  GridSignal(DomainKind kind, std::vector<std::size_t> dims, std::size_t channels,
             std::vector<float> values);

  static GridSignal image(std::size_t height, std::size_t width, std::size_t channels);
  static GridSignal volume(std::size_t d0, std::size_t d1, std::size_t d2);
  /// Same shape as `like`, every sample equal to `value`.
  static GridSignal filled_like(const GridSignal& like, float value);

  DomainKind kind() const noexcept { return kind_; }
  std::size_t rank() const noexcept { return dims_.size(); }
  const std::vector<std::size_t>& dims() const noexcept { return dims_; }
  std::size_t dim(std::size_t axis) const { return dims_.at(axis); }
  std::size_t channels() const noexcept { return channels_; }
  std::size_t num_points() const noexcept;
  std::size_t size() const noexcept { return values_.size(); }

  std::span<float> values() noexcept { return values_; }
  std::span<const float> values() const noexcept { return values_; }

  float& operator[](std::size_t i) noexcept { return values_[i]; }
  float operator[](std::size_t i) const noexcept { return values_[i]; }

  /// Linear offset of the first channel of the sample at `index`.
  std::size_t offset(std::span<const std::size_t> index) const noexcept;

  /// Throws InvalidSignal on NaN/Inf samples.
  void check_finite() const;

  bool same_shape(const GridSignal& other) const noexcept;

  friend bool operator==(const GridSignal&, const GridSignal&) = default;

 private:
  void validate() const;

  DomainKind kind_ = DomainKind::Image2D;
  std::vector<std::size_t> dims_;
  std::size_t channels_ = 0;
  std::vector<float> values_;
};

/// Sample-wise a - b. Throws DimMismatch when shapes differ.
GridSignal subtract(const GridSignal& a, const GridSignal& b);
/// Sample-wise a + b. Throws DimMismatch when shapes differ.
GridSignal add(const GridSignal& a, const GridSignal& b);

}  // namespace miner
