#include <gtest/gtest.h>

#include <cmath>

#include "miner/error.hpp"
#include "miner/metrics.hpp"
#include "test_util.hpp"

using namespace miner;

namespace {

GridSignal cube(std::size_t n, std::size_t a0, std::size_t b0, std::size_t c0, std::size_t side) {
  GridSignal v = GridSignal::volume(n, n, n);
  for (std::size_t a = a0; a < a0 + side; ++a)
    for (std::size_t b = b0; b < b0 + side; ++b)
      for (std::size_t c = c0; c < c0 + side; ++c) v[(a * n + b) * n + c] = 1.0f;
  return v;
}

// Enumerates voxels directly.
double iou_oracle(const GridSignal& a, const GridSignal& b) {
  std::size_t i = 0, u = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const bool x = a[k] >= 0.5f;
    const bool y = b[k] >= 0.5f;
    i += x && y;
    u += x || y;
  }
  return u == 0 ? 1.0 : double(i) / double(u);
}

}  // namespace

TEST(Psnr, IdenticalIsInfinite) {
  GridSignal a = test::random_signal(DomainKind::Image2D, {8, 8}, 3, 1);
  EXPECT_TRUE(std::isinf(psnr(a, a)));
  EXPECT_GT(psnr(a, a), 0.0);
}

TEST(Psnr, FullScaleError) {
  GridSignal a = GridSignal::filled_like(GridSignal::image(4, 4, 1), 0.0f);
  GridSignal b = GridSignal::filled_like(a, 1.0f);
  EXPECT_DOUBLE_EQ(psnr(a, b), 0.0);
}

TEST(Psnr, TenthError) {
  GridSignal a = GridSignal::filled_like(GridSignal::image(4, 4, 3), 0.0f);
  GridSignal b = GridSignal::filled_like(a, 0.1f);
  EXPECT_NEAR(psnr(a, b), 20.0, 1e-6);
}

TEST(Psnr, SymmetricAndShapeChecked) {
  GridSignal a = test::random_signal(DomainKind::Image2D, {8, 8}, 3, 1);
  GridSignal b = test::random_signal(DomainKind::Image2D, {8, 8}, 3, 2);
  EXPECT_EQ(psnr(a, b), psnr(b, a));
  GridSignal c = GridSignal::image(8, 4, 3);
  try {
    psnr(a, c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimMismatch);
  }
}

TEST(Iou, IdenticalAndDisjoint) {
  GridSignal a = cube(6, 0, 0, 0, 2);
  EXPECT_EQ(iou(a, a), 1.0);
  EXPECT_EQ(iou(a, cube(6, 3, 3, 3, 2)), 0.0);
  GridSignal empty = GridSignal::volume(6, 6, 6);
  EXPECT_EQ(iou(empty, empty), 1.0);
}

TEST(Iou, ShiftedCube) {
  GridSignal a = cube(4, 0, 0, 0, 2);
  GridSignal b = cube(4, 1, 0, 0, 2);
  EXPECT_DOUBLE_EQ(iou_oracle(a, b), 4.0 / 12.0);
  EXPECT_DOUBLE_EQ(iou(a, b), iou_oracle(a, b));
}

TEST(Iou, RandomMatchesOracleAndSymmetric) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    GridSignal a = test::random_signal(DomainKind::Volume3D, {5, 6, 7}, 1, s);
    GridSignal b = test::random_signal(DomainKind::Volume3D, {5, 6, 7}, 1, s + 50);
    EXPECT_DOUBLE_EQ(iou(a, b), iou_oracle(a, b));
    EXPECT_EQ(iou(a, b), iou(b, a));
  }
}

TEST(Iou, InvariantToThresholdPreservingRemap) {
  GridSignal a = test::random_signal(DomainKind::Volume3D, {6, 6, 6}, 1, 4);
  GridSignal b = test::random_signal(DomainKind::Volume3D, {6, 6, 6}, 1, 5);
  GridSignal c = a;
  for (auto& v : c.values()) v = v >= 0.5f ? 0.5f + 0.1f * v : 0.2f * v;
  EXPECT_EQ(iou(a, b), iou(c, b));
}

TEST(Iou, Errors) {
  GridSignal img = GridSignal::image(4, 4, 1);
  try {
    iou(img, img);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::WrongDomain);
  }
  try {
    iou(GridSignal::volume(2, 2, 2), GridSignal::volume(2, 2, 4));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimMismatch);
  }
}

TEST(Evaluate, ReportsIouOnlyForVolumes) {
  GridSignal img = test::random_signal(DomainKind::Image2D, {4, 4}, 3, 1);
  EXPECT_FALSE(evaluate(img, img).iou.has_value());
  GridSignal v = cube(4, 0, 0, 0, 2);
  const MetricReport r = evaluate(v, cube(4, 1, 0, 0, 2));
  ASSERT_TRUE(r.iou.has_value());
  EXPECT_NEAR(*r.iou, 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(r.mse, 8.0 / 64.0, 1e-12);
}
