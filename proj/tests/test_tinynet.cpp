#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "gradcheck.hpp"
#include "miner/error.hpp"
#include "miner/tinynet.hpp"

using namespace miner;

namespace {

NetArch small_arch(std::uint16_t in, std::uint16_t out, std::uint16_t hidden, std::uint16_t layers) {
  NetArch a;
  a.in_dim = in;
  a.out_dim = out;
  a.hidden_features = hidden;
  a.num_layers = layers;
  a.omega0 = 30.0f;
  return a;
}

std::vector<float> grid_coords(std::size_t b, std::size_t d) { return local_coord_grid(b, d).values; }

}  // namespace

TEST(NetArch, ParamCountAndValidation) {
  NetArch img = small_arch(2, 3, 20, 4);
  EXPECT_EQ(img.num_params(), (2 * 20 + 20) + 2 * (20 * 20 + 20) + (20 * 3 + 3));
  NetArch vol = small_arch(3, 1, 22, 3);
  EXPECT_EQ(vol.num_params(), (3 * 22 + 22) + (22 * 22 + 22) + (22 + 1));
  EXPECT_THROW(small_arch(2, 3, 20, 1).validate(), Error);
  EXPECT_THROW(small_arch(2, 3, 0, 3).validate(), Error);
  NetArch bad = img;
  bad.omega0 = 0.0f;
  EXPECT_THROW(bad.validate(), Error);
}

TEST(InitSiren, DeterministicAndSeedSensitive) {
  NetArch a = small_arch(2, 3, 20, 4);
  EXPECT_EQ(init_siren<float>(a, 7), init_siren<float>(a, 7));
  EXPECT_NE(init_siren<float>(a, 7).params, init_siren<float>(a, 8).params);
}

TEST(InitSiren, Bounds) {
  NetArch a = small_arch(3, 1, 22, 3);
  TinyNet<double> n = init_siren<double>(a, 3);
  for (double w : n.weights(0)) EXPECT_LE(std::abs(w), 1.0 / 3.0);
  for (std::size_t l = 1; l < a.num_layers; ++l) {
    const double bound = std::sqrt(6.0 / a.layer_in(l)) / a.omega0;
    for (double w : n.weights(l)) EXPECT_LE(std::abs(w), bound);
  }
  for (std::size_t l = 0; l < a.num_layers; ++l) {
    for (double b : n.bias(l)) EXPECT_EQ(b, 0.0);
  }
}

TEST(Forward, ZeroNetIsZero) {
  TinyNet<float> n(small_arch(2, 3, 8, 4));
  for (float y : forward(n, local_coord_grid(4, 2))) EXPECT_EQ(y, 0.0f);
}

TEST(Forward, ConstantFromFinalBias) {
  TinyNet<float> n(small_arch(2, 2, 5, 2));
  n.bias(1)[0] = 0.25f;
  n.bias(1)[1] = -1.5f;
  auto y = forward(n, local_coord_grid(3, 2));
  for (std::size_t i = 0; i < y.size(); i += 2) {
    EXPECT_EQ(y[i], 0.25f);
    EXPECT_EQ(y[i + 1], -1.5f);
  }
}

TEST(Forward, ScalarClosedForm) {
  // in=1, one hidden unit: y = w1 * sin(w0 * (a x + b0)) + b1 with w0 = omega0.
  NetArch a = small_arch(1, 1, 1, 2);
  TinyNet<double> n(a);
  n.weights(0)[0] = 0.3;
  n.bias(0)[0] = -0.1;
  n.weights(1)[0] = 1.7;
  n.bias(1)[0] = 0.2;
  const double x = 0.45;
  const std::vector<double> c{x};
  const double expect = 1.7 * std::sin(30.0 * (0.3 * x - 0.1)) + 0.2;
  EXPECT_NEAR(forward(n, std::span<const double>(c))[0], expect, 1e-12);
}

TEST(Forward, OutputBound) {
  NetArch a = small_arch(2, 3, 12, 3);
  TinyNet<float> n = init_siren<float>(a, 5);
  for (auto& b : n.bias(2)) b = 0.3f;
  auto y = forward(n, local_coord_grid(8, 2));
  for (std::size_t o = 0; o < 3; ++o) {
    double bound = std::abs(n.bias(2)[o]);
    for (std::size_t i = 0; i < 12; ++i) bound += std::abs(n.weights(2)[o * 12 + i]);
    for (std::size_t p = 0; p < 64; ++p) EXPECT_LE(std::abs(y[p * 3 + o]), bound + 1e-6);
  }
}

TEST(NetBatch, BatchedMatchesPerNetBitExact) {
  NetArch a = small_arch(2, 3, 10, 4);
  std::vector<TinyNet<float>> nets{init_siren<float>(a, 1), init_siren<float>(a, 2), init_siren<float>(a, 3)};
  const auto coords = grid_coords(8, 2);
  NetBatch<float> batch(nets);
  const auto all = batch.forward_batched(coords);
  const std::size_t per = 64 * 3;
  for (std::size_t k = 0; k < 3; ++k) {
    const auto ref = forward(nets[k], std::span<const float>(coords));
    ASSERT_EQ(ref.size(), per);
    for (std::size_t i = 0; i < per; ++i) EXPECT_EQ(all[k * per + i], ref[i]);
  }
  NetBatch<float> single(std::vector<TinyNet<float>>{nets[1]});
  const auto one = single.forward_batched(coords);
  EXPECT_TRUE(std::equal(one.begin(), one.end(), all.begin() + per));
}

TEST(NetBatch, PermutationPermutesRows) {
  NetArch a = small_arch(3, 1, 6, 3);
  std::vector<TinyNet<float>> nets{init_siren<float>(a, 10), init_siren<float>(a, 11), init_siren<float>(a, 12)};
  const auto coords = grid_coords(4, 3);
  const auto fwd = NetBatch<float>(nets).forward_batched(coords);
  std::vector<TinyNet<float>> perm{nets[2], nets[0], nets[1]};
  const auto rev = NetBatch<float>(perm).forward_batched(coords);
  const std::size_t per = 64;
  const std::size_t map[] = {2, 0, 1};
  for (std::size_t k = 0; k < 3; ++k) {
    for (std::size_t i = 0; i < per; ++i) EXPECT_EQ(rev[k * per + i], fwd[map[k] * per + i]);
  }
}

TEST(NetBatch, BatchedBackwardMatchesPerNet) {
  NetArch a = small_arch(2, 3, 7, 4);
  std::vector<TinyNet<float>> nets{init_siren<float>(a, 4), init_siren<float>(a, 5)};
  const auto coords = grid_coords(4, 2);
  std::vector<float> g(2 * 16 * 3);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = std::sin(0.37f * i);

  NetBatch<float> batched(nets);
  batched.zero_grads();
  batched.forward_batched(coords);
  batched.backward(coords, g);

  NetBatch<float> loop(nets);
  loop.zero_grads();
  for (std::size_t k = 0; k < 2; ++k) {
    loop.forward_net(k, coords);
    loop.backward_net(k, coords, std::span<const float>(g).subspan(k * 48, 48));
  }
  for (std::size_t k = 0; k < 2; ++k) {
    const auto x = batched.grads(k);
    const auto y = loop.grads(k);
    ASSERT_EQ(x.size(), y.size());
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(x[i], y[i]);
  }
}

TEST(Backward, ZeroOutputGradGivesZero) {
  NetArch a = small_arch(2, 3, 6, 3);
  NetBatch<float> b(std::vector<TinyNet<float>>{init_siren<float>(a, 2)});
  const auto coords = grid_coords(4, 2);
  b.zero_grads();
  b.forward_net(0, coords);
  std::vector<float> zero(16 * 3, 0.0f);
  b.backward_net(0, coords, zero);
  for (float v : b.grads(0)) EXPECT_EQ(v, 0.0f);
}

TEST(Backward, ScalarChainRule) {
  NetArch a = small_arch(1, 1, 1, 2);
  TinyNet<double> n(a);
  const double w0 = 0.3, b0 = -0.1, w1 = 1.7, b1 = 0.2, x = 0.45, om = 30.0;
  n.weights(0)[0] = w0;
  n.bias(0)[0] = b0;
  n.weights(1)[0] = w1;
  n.bias(1)[0] = b1;
  NetBatch<double> b(std::vector<TinyNet<double>>{n});
  const std::vector<double> c{x};
  const std::vector<double> g{1.0};
  b.zero_grads();
  b.forward_net(0, c);
  b.backward_net(0, c, g);
  const double z = om * (w0 * x + b0);
  const auto gr = b.grads(0);
  // Layout: W0, b0, W1, b1.
  EXPECT_NEAR(gr[0], w1 * std::cos(z) * om * x, 1e-10);
  EXPECT_NEAR(gr[1], w1 * std::cos(z) * om, 1e-10);
  EXPECT_NEAR(gr[2], std::sin(z), 1e-12);
  EXPECT_NEAR(gr[3], 1.0, 1e-12);
}

TEST(Backward, FiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    for (bool volume : {false, true}) {
      const TinyNet<double> net = test::random_tiny_net(volume, seed * 2 + volume);
      const auto r = test::gradient_check(net, 9, seed);
      EXPECT_LT(r.max_rel_error, 1e-4) << "seed " << seed << " volume " << volume;
    }
  }
}

TEST(Backward, AccumulatesAcrossCalls) {
  NetArch a = small_arch(2, 1, 4, 3);
  NetBatch<double> b(std::vector<TinyNet<double>>{init_siren<double>(a, 9)});
  std::vector<double> c{0.1, -0.2, 0.5, 0.7};
  std::vector<double> g{1.0, -2.0};
  b.zero_grads();
  b.forward_net(0, c);
  b.backward_net(0, c, g);
  std::vector<double> once(b.grads(0).begin(), b.grads(0).end());
  b.forward_net(0, c);
  b.backward_net(0, c, g);
  for (std::size_t i = 0; i < once.size(); ++i) EXPECT_NEAR(b.grads(0)[i], 2.0 * once[i], 1e-12);
}

TEST(Backward, StaleActivations) {
  NetArch a = small_arch(2, 1, 4, 3);
  NetBatch<float> b(std::vector<TinyNet<float>>{init_siren<float>(a, 9)});
  const auto coords = grid_coords(2, 2);
  const auto other = grid_coords(4, 2);
  std::vector<float> g(4, 1.0f);
  auto expect_stale = [&](auto&& fn) {
    try {
      fn();
      FAIL() << "expected StaleActivations";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::StaleActivations);
    }
  };
  expect_stale([&] { b.backward_net(0, coords, g); });
  b.forward_net(0, other);
  expect_stale([&] { b.backward_net(0, coords, g); });
  b.forward_net(0, coords);
  b.mutable_params(0)[0] += 1.0f;
  expect_stale([&] { b.backward_net(0, coords, g); });
  b.forward_net(0, coords);
  EXPECT_NO_THROW(b.backward_net(0, coords, g));
  b.release_cache(0);
  expect_stale([&] { b.backward_net(0, coords, g); });
}
