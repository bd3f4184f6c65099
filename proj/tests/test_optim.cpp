#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "miner/error.hpp"
#include "miner/optim.hpp"

using namespace miner;

namespace {

// Textbook Adam in double for a single scalar.
struct ScalarAdam {
  double m = 0.0, v = 0.0, p = 0.0;
  int t = 0;
  void step(double g, double lr) {
    ++t;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1.0 - std::pow(0.9, t));
    const double vh = v / (1.0 - std::pow(0.999, t));
    p -= lr * mh / (std::sqrt(vh) + 1e-8);
  }
};

}  // namespace

TEST(DecayedLr, Values) {
  EXPECT_EQ(decayed_lr(5e-4, 0.999, 0), 5e-4);
  EXPECT_EQ(decayed_lr(1e-3, 1.0, 1234), 1e-3);
  EXPECT_NEAR(decayed_lr(5e-4, 0.999, 500), 5e-4 * std::pow(0.999, 500), 1e-15);
  EXPECT_NEAR(decayed_lr(5e-4, 0.999, 500), 3.03e-4, 5e-7);
  EXPECT_THROW(decayed_lr(1e-3, 0.0, 1), Error);
  EXPECT_THROW(decayed_lr(1e-3, 1.5, 1), Error);
}

TEST(AdamStep, ZeroGradientLeavesParams) {
  std::vector<float> p{0.5f, -1.25f, 3.0f};
  const auto before = p;
  std::vector<float> g(3, 0.0f);
  AdamState s(3);
  for (int i = 0; i < 50; ++i) adam_step(p, g, s, 1e-2);
  EXPECT_EQ(p, before);
  EXPECT_EQ(s.step, 50u);
}

TEST(AdamStep, FirstStepClosedForm) {
  std::vector<float> p{0.0f};
  std::vector<float> g{1.0f};
  AdamState s(1);
  adam_step(p, g, s, 0.1);
  EXPECT_NEAR(p[0], -0.1, 1e-6);
}

TEST(AdamStep, MatchesScalarOracle) {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> nd;
  ScalarAdam ref;
  ref.p = 0.3;
  std::vector<float> p{0.3f};
  AdamState s(1);
  for (int e = 0; e < 200; ++e) {
    const double g = nd(gen);
    const double lr = decayed_lr(5e-3, 0.99, e);
    std::vector<float> gv{static_cast<float>(g)};
    adam_step(p, gv, s, lr);
    ref.step(static_cast<float>(g), lr);
  }
  EXPECT_NEAR(p[0], ref.p, 1e-5);
}

TEST(AdamStep, CoordinateWise) {
  std::vector<float> joint{1.0f, -2.0f};
  std::vector<float> a{1.0f};
  std::vector<float> b{-2.0f};
  AdamState sj(2), sa(1), sb(1);
  for (int i = 0; i < 20; ++i) {
    const float ga = std::sin(0.3f * i);
    const float gb = std::cos(0.7f * i) * 4.0f;
    std::vector<float> gj{ga, gb};
    std::vector<float> gav{ga};
    std::vector<float> gbv{gb};
    adam_step(joint, gj, sj, 1e-2);
    adam_step(a, gav, sa, 1e-2);
    adam_step(b, gbv, sb, 1e-2);
  }
  EXPECT_EQ(joint[0], a[0]);
  EXPECT_EQ(joint[1], b[0]);
}

TEST(AdamStep, ShapeMismatch) {
  std::vector<float> p(3), g(2);
  AdamState s(3);
  try {
    adam_step(p, g, s, 1e-3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ShapeMismatch);
  }
  std::vector<float> g3(3);
  AdamState wrong(4);
  EXPECT_THROW(adam_step(p, g3, wrong, 1e-3), Error);
}

TEST(AdamState, ReleaseClearsMoments) {
  AdamState s(10);
  s.step = 4;
  s.release();
  EXPECT_EQ(s.step, 0u);
  EXPECT_TRUE(s.m.empty());
  EXPECT_TRUE(s.v.empty());
}
