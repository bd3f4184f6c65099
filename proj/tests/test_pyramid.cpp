#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "miner/error.hpp"
#include "miner/pyramid.hpp"
#include "test_util.hpp"

using namespace miner;
using miner::test::random_signal;

namespace {

// Brute-force box mean of each 2^j cell.
GridSignal box_mean_oracle(const GridSignal& s, unsigned j) {
  const std::size_t f = std::size_t{1} << j;
  std::vector<std::size_t> od = s.dims();
  for (auto& d : od) d /= f;
  GridSignal out(s.kind(), od, s.channels());
  const std::size_t rank = od.size();
  std::vector<std::size_t> o(rank, 0);
  for (std::size_t p = 0; p < out.num_points(); ++p) {
    for (std::size_t c = 0; c < s.channels(); ++c) {
      double acc = 0.0;
      std::size_t cnt = 0;
      std::vector<std::size_t> in(rank, 0);
      std::vector<std::size_t> off(rank, 0);
      while (true) {
        for (std::size_t a = 0; a < rank; ++a) in[a] = o[a] * f + off[a];
        acc += s[s.offset(in) + c];
        ++cnt;
        std::size_t a = rank;
        while (a-- > 0) {
          if (++off[a] < f) break;
          off[a] = 0;
        }
        if (a == static_cast<std::size_t>(-1)) break;
      }
      out[p * s.channels() + c] = static_cast<float>(acc / cnt);
    }
    for (std::size_t a = rank; a-- > 0;) {
      if (++o[a] < od[a]) break;
      o[a] = 0;
    }
  }
  return out;
}

// Cell-centred linear interpolation along one axis, evaluated in double.
double interp_1d(const std::vector<double>& src, std::size_t factor, std::size_t o) {
  const double x = (o + 0.5) / static_cast<double>(factor) - 0.5;
  const double xc = std::clamp(x, 0.0, static_cast<double>(src.size() - 1));
  const std::size_t i0 = static_cast<std::size_t>(std::floor(xc));
  const std::size_t i1 = std::min(i0 + 1, src.size() - 1);
  const double w = xc - i0;
  return src[i0] + w * (src[i1] - src[i0]);
}

double max_abs(const GridSignal& s) {
  double m = 0.0;
  for (float v : s.values()) m = std::max(m, static_cast<double>(std::abs(v)));
  return m;
}

}  // namespace

TEST(Downsample, ConstantStaysConstant) {
  GridSignal s = GridSignal::filled_like(GridSignal::image(8, 8, 3), 0.37f);
  GridSignal d = downsample(s, 1);
  EXPECT_EQ(d.dims(), (std::vector<std::size_t>{4, 4}));
  for (float v : d.values()) EXPECT_EQ(v, 0.37f);
}

TEST(Downsample, TwoByTwoMean) {
  GridSignal s(DomainKind::Image2D, {2, 2}, 1, {0, 1, 2, 3});
  GridSignal d = downsample(s, 1);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0], 1.5f);
}

TEST(Downsample, CheckerboardVolume) {
  GridSignal s = GridSignal::volume(4, 4, 4);
  for (std::size_t a = 0; a < 4; ++a)
    for (std::size_t b = 0; b < 4; ++b)
      for (std::size_t c = 0; c < 4; ++c) s[(a * 4 + b) * 4 + c] = static_cast<float>((a + b + c) % 2);
  GridSignal d = downsample(s, 1);
  EXPECT_EQ(d.dims(), (std::vector<std::size_t>{2, 2, 2}));
  for (float v : d.values()) EXPECT_EQ(v, 0.5f);
}

TEST(Downsample, MatchesBruteForceMean) {
  for (unsigned j = 1; j <= 3; ++j) {
    GridSignal s = random_signal(DomainKind::Image2D, {16, 24}, 3, j);
    GridSignal d = downsample(s, j);
    GridSignal o = box_mean_oracle(s, j);
    for (std::size_t i = 0; i < d.size(); ++i) EXPECT_NEAR(d[i], o[i], 1e-6);
  }
  GridSignal v = random_signal(DomainKind::Volume3D, {8, 8, 16}, 1, 9);
  GridSignal d = downsample(v, 2);
  GridSignal o = box_mean_oracle(v, 2);
  for (std::size_t i = 0; i < d.size(); ++i) EXPECT_NEAR(d[i], o[i], 1e-6);
}

TEST(Downsample, RejectsNonDivisible) {
  GridSignal s = GridSignal::image(6, 8, 1);
  try {
    downsample(s, 2);
    FAIL() << "expected NonDivisibleDims";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonDivisibleDims);
  }
}

TEST(Downsample, SemigroupExact) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    GridSignal s = random_signal(DomainKind::Image2D, {32, 16}, 3, seed, -2.0f, 5.0f);
    EXPECT_EQ(downsample(downsample(s, 1), 1), downsample(s, 2));
    EXPECT_EQ(downsample(downsample(s, 2), 1), downsample(s, 3));
    GridSignal v = random_signal(DomainKind::Volume3D, {8, 16, 8}, 1, seed + 100);
    EXPECT_EQ(downsample(downsample(v, 1), 1), downsample(v, 2));
  }
}

TEST(Downsample, MeanPreserved) {
  GridSignal s = random_signal(DomainKind::Image2D, {64, 32}, 1, 4);
  auto mean = [](const GridSignal& g) {
    double acc = 0.0;
    for (float v : g.values()) acc += v;
    return acc / g.size();
  };
  for (unsigned j = 1; j <= 4; ++j) EXPECT_NEAR(mean(downsample(s, j)), mean(s), 1e-6);
}

TEST(Upsample, ConstantStaysConstant) {
  GridSignal s = GridSignal::filled_like(GridSignal::volume(2, 3, 4), 0.81f);
  for (unsigned j = 1; j <= 3; ++j) {
    GridSignal u = upsample(s, j);
    EXPECT_EQ(u.dims(), (std::vector<std::size_t>{2u << j, 3u << j, 4u << j}));
    for (float v : u.values()) EXPECT_EQ(v, 0.81f);
  }
}

TEST(Upsample, SingleSample) {
  GridSignal s(DomainKind::Image2D, {1, 1}, 1, {0.3f});
  GridSignal u = upsample(s, 1);
  EXPECT_EQ(u.dims(), (std::vector<std::size_t>{2, 2}));
  for (float v : u.values()) EXPECT_EQ(v, 0.3f);
}

TEST(Upsample, TwoByOneHandOracle) {
  GridSignal s(DomainKind::Image2D, {2, 1}, 1, {0.0f, 2.0f});
  GridSignal u = upsample(s, 1);
  ASSERT_EQ(u.dims(), (std::vector<std::size_t>{4, 2}));
  const float col[4] = {0.0f, 0.5f, 1.5f, 2.0f};
  for (std::size_t y = 0; y < 4; ++y) {
    EXPECT_FLOAT_EQ(u[y * 2], col[y]);
    EXPECT_FLOAT_EQ(u[y * 2 + 1], col[y]);
  }
}

TEST(Upsample, SeparableLinearOracle) {
  GridSignal s = random_signal(DomainKind::Image2D, {5, 3}, 2, 17);
  for (unsigned j = 1; j <= 2; ++j) {
    const std::size_t f = std::size_t{1} << j;
    GridSignal u = upsample(s, j);
    for (std::size_t c = 0; c < 2; ++c) {
      // Axis 0 first, then axis 1, each with the 1D oracle.
      std::vector<std::vector<double>> rows(5 * f, std::vector<double>(3));
      for (std::size_t x = 0; x < 3; ++x) {
        std::vector<double> col(5);
        for (std::size_t y = 0; y < 5; ++y) col[y] = s[(y * 3 + x) * 2 + c];
        for (std::size_t oy = 0; oy < 5 * f; ++oy) rows[oy][x] = interp_1d(col, f, oy);
      }
      for (std::size_t oy = 0; oy < 5 * f; ++oy) {
        for (std::size_t ox = 0; ox < 3 * f; ++ox) {
          EXPECT_NEAR(u[(oy * 3 * f + ox) * 2 + c], interp_1d(rows[oy], f, ox), 1e-6);
        }
      }
    }
  }
}

TEST(BuildPyramid, SingleScaleIsInput) {
  GridSignal s = random_signal(DomainKind::Image2D, {8, 8}, 3, 1);
  for (auto kind : {PyramidKind::Laplacian, PyramidKind::Gaussian}) {
    Pyramid p = build_pyramid(s, 1, kind);
    ASSERT_EQ(p.num_scales(), 1u);
    EXPECT_EQ(p.level(0), s);
  }
}

TEST(BuildPyramid, ConstantLaplacian) {
  GridSignal s = GridSignal::filled_like(GridSignal::image(16, 16, 3), 0.6f);
  Pyramid p = build_pyramid(s, 3, PyramidKind::Laplacian);
  EXPECT_EQ(p.level(2).dims(), (std::vector<std::size_t>{4, 4}));
  for (float v : p.level(2).values()) EXPECT_EQ(v, 0.6f);
  for (float v : p.level(1).values()) EXPECT_EQ(v, 0.0f);
  for (float v : p.level(0).values()) EXPECT_EQ(v, 0.0f);
}

TEST(BuildPyramid, TwoByOneExample) {
  // [0, 2] as a column; J=2 needs every axis even, so the column is doubled.
  GridSignal s2(DomainKind::Image2D, {2, 2}, 1, {0.0f, 0.0f, 2.0f, 2.0f});
  Pyramid p = build_pyramid(s2, 2, PyramidKind::Laplacian);
  ASSERT_EQ(p.level(1).size(), 1u);
  EXPECT_EQ(p.level(1)[0], 1.0f);
  EXPECT_EQ(p.level(0), GridSignal(DomainKind::Image2D, {2, 2}, 1, {-1.0f, -1.0f, 1.0f, 1.0f}));
  EXPECT_EQ(reconstruct_pyramid(p), s2);
}

TEST(BuildPyramid, GaussianLevelsAreDownsamples) {
  GridSignal s = random_signal(DomainKind::Volume3D, {16, 16, 16}, 1, 3);
  Pyramid p = build_pyramid(s, 4, PyramidKind::Gaussian);
  for (unsigned j = 0; j < 4; ++j) EXPECT_EQ(p.level(j), j == 0 ? s : downsample(s, j));
}

TEST(BuildPyramid, LaplacianLevelsMatchDefinition) {
  GridSignal s = random_signal(DomainKind::Image2D, {16, 32}, 3, 5);
  Pyramid p = build_pyramid(s, 3, PyramidKind::Laplacian);
  EXPECT_EQ(p.level(2), downsample(s, 2));
  EXPECT_EQ(p.level(1), subtract(downsample(s, 1), upsample(downsample(s, 2), 1)));
  EXPECT_EQ(p.level(0), subtract(s, upsample(downsample(s, 1), 1)));
}

TEST(BuildPyramid, RejectsNonDivisible) {
  GridSignal s = GridSignal::image(12, 16, 1);
  EXPECT_THROW(build_pyramid(s, 4, PyramidKind::Laplacian), Error);
}

TEST(ReconstructPyramid, ConstantSignal) {
  GridSignal s = GridSignal::filled_like(GridSignal::volume(8, 8, 8), 0.25f);
  EXPECT_EQ(reconstruct_pyramid(build_pyramid(s, 4, PyramidKind::Laplacian)), s);
}

TEST(ReconstructPyramid, RandomEightByEight) {
  GridSignal s = random_signal(DomainKind::Image2D, {8, 8}, 1, 77);
  GridSignal r = reconstruct_pyramid(build_pyramid(s, 3, PyramidKind::Laplacian));
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_NEAR(r[i], s[i], 1e-6);
}

TEST(ReconstructPyramid, RejectsGaussian) {
  GridSignal s = random_signal(DomainKind::Image2D, {8, 8}, 1, 1);
  try {
    reconstruct_pyramid(build_pyramid(s, 2, PyramidKind::Gaussian));
    FAIL() << "expected WrongKind";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::WrongKind);
  }
}

TEST(ReconstructPyramid, RoundTripProperty) {
  for (std::size_t J = 1; J <= 5; ++J) {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      const std::size_t n = std::size_t{1} << (J + 1);
      GridSignal img = random_signal(DomainKind::Image2D, {n, 2 * n}, 3, seed * 10 + J, -3.0f, 3.0f);
      GridSignal r = reconstruct_pyramid(build_pyramid(img, J, PyramidKind::Laplacian));
      const double scale = max_abs(img);
      for (std::size_t i = 0; i < img.size(); ++i) EXPECT_LE(std::abs(r[i] - img[i]) / scale, 1e-5);
      if (J <= 4) {
        GridSignal vol = random_signal(DomainKind::Volume3D, {n, n, n}, 1, seed * 10 + J + 5);
        GridSignal rv = reconstruct_pyramid(build_pyramid(vol, J, PyramidKind::Laplacian));
        const double sv = max_abs(vol);
        for (std::size_t i = 0; i < vol.size(); ++i) EXPECT_LE(std::abs(rv[i] - vol[i]) / sv, 1e-5);
      }
    }
  }
}

TEST(BuildPyramid, ResidueVanishesOnFixedPoints) {
  // Signals with s == upsample(downsample(s)) have an all-zero band.
  for (float c : {0.0f, 0.2f, 1.0f}) {
    GridSignal img = GridSignal::filled_like(GridSignal::image(8, 16, 3), c);
    ASSERT_EQ(upsample(downsample(img, 1), 1), img);
    const Pyramid p = build_pyramid(img, 2, PyramidKind::Laplacian);
    for (float v : p.level(0).values()) EXPECT_EQ(v, 0.0f);
  }
  GridSignal vol = GridSignal::filled_like(GridSignal::volume(4, 8, 4), 0.5f);
  ASSERT_EQ(upsample(downsample(vol, 1), 1), vol);
  const Pyramid p = build_pyramid(vol, 3, PyramidKind::Laplacian);
  for (float v : p.level(1).values()) EXPECT_EQ(v, 0.0f);
}
