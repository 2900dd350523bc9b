// Copyright 2026 The ptychodiff Authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <ptychodiff/phantom.hpp>
#include <ptychodiff/train.hpp>

#include "test_util.hpp"

using namespace ptycho;

namespace {

std::vector<TwoChannelImage> phantom_pool(int count, int side, uint64_t seed0) {
  std::vector<TwoChannelImage> pool;
  for (int i = 0; i < count; ++i)
    pool.push_back(to_two_channel(make_phantom(side, seed0 + uint64_t(i)).object));
  return pool;
}

}  // namespace

TEST_CASE("initial loss is about one for a zero-initialized net") {
  TinyUNet<float> net{UNetConfig{}};
  NoiseSchedule s = make_schedule(200, 1e-4, 0.02);
  auto pool = phantom_pool(4, 32, 100);
  Rng rng(1, 0xBA7C);
  auto batch = sample_batch(pool, AugmentationPolicy{}, 8, rng);
  double loss = train_step(net, batch, s, /*seed=*/5, /*step=*/1, 1e-4);
  // eps_hat == 0, so the loss is the mean of eps^2 over 8*2*32*32 elements
  CHECK(std::abs(loss - 1.0) < 0.1);
}

TEST_CASE("identical seeds give identical loss trajectories") {
  NoiseSchedule s = make_schedule(100, 1e-4, 0.02);
  auto pool = phantom_pool(3, 32, 200);
  auto run = [&]() {
    TinyUNet<float> net{UNetConfig{}};
    std::vector<double> losses;
    Rng rng(2, 0xBA7C);
    for (int step = 1; step <= 4; ++step) {
      auto batch = sample_batch(pool, AugmentationPolicy{}, 4, rng);
      losses.push_back(train_step(net, batch, s, 7, step, 1e-4));
    }
    return losses;
  };
  CHECK(run() == run());
}

TEST_CASE("a short training run halves the loss on a narrow distribution") {
  UNetConfig cfg;
  TinyUNet<float> net(cfg);
  NoiseSchedule s = make_schedule(100, 1e-4, 0.02);
  auto pool = phantom_pool(2, 16, 300);
  AugmentationPolicy policy;
  policy.patch = 16;
  Rng rng(3, 0xBA7C);
  double first = 0.0, last = 0.0;
  const int steps = 220;
  for (int step = 1; step <= steps; ++step) {
    auto batch = sample_batch(pool, policy, 8, rng);
    double loss = train_step(net, batch, s, 11, step, 3e-4);
    if (step == 1) first = loss;
    if (step == steps) last = loss;
  }
  CHECK(last < 0.5 * first);
}

TEST_CASE("identity augmentation is an exact crop") {
  auto pool = phantom_pool(1, 32, 400);
  const TwoChannelImage& src = pool[0];
  TwoChannelImage out = augment_with(src, 0.0, 1.0, 8, 4, 16);
  for (int r = 0; r < 16; ++r)
    for (int c = 0; c < 16; ++c) {
      CHECK(out.amp[r * 16 + c] == src.amp[(r + 8) * 32 + (c + 4)]);
      CHECK(out.phase[r * 16 + c] == src.phase[(r + 8) * 32 + (c + 4)]);
    }
}

TEST_CASE("rotation by 90 degrees is an exact index permutation") {
  auto pool = phantom_pool(1, 16, 500);
  const TwoChannelImage& src = pool[0];
  constexpr double kHalfPi = 1.5707963267948966;
  TwoChannelImage out = augment_with(src, kHalfPi, 1.0, 0, 0, 16);
  for (int r = 0; r < 16; ++r)
    for (int c = 0; c < 16; ++c) {
      CHECK(out.amp[r * 16 + c] == doctest::Approx(src.amp[c * 16 + (15 - r)]).epsilon(1e-12));
      CHECK(out.phase[r * 16 + c] ==
            doctest::Approx(src.phase[c * 16 + (15 - r)]).epsilon(1e-12));
    }
}

TEST_CASE("augmented patches keep both channels in range over many draws") {
  auto pool = phantom_pool(3, 48, 600);
  AugmentationPolicy policy;
  policy.patch = 32;
  Rng rng(9, 0xA06);
  for (int draw = 0; draw < 10000; ++draw) {
    const TwoChannelImage& src = pool[size_t(draw) % pool.size()];
    TwoChannelImage out = augment(src, policy, rng);
    REQUIRE(out.height == 32);
    for (double v : out.amp) {
      REQUIRE(v >= -1.0);
      REQUIRE(v <= 1.0);
    }
    for (double v : out.phase) {
      REQUIRE(v >= -1.0 - 1e-12);
      REQUIRE(v <= 1.0 + 1e-12);
    }
  }
}

TEST_CASE("augment rejects sources smaller than the patch") {
  auto pool = phantom_pool(1, 16, 700);
  AugmentationPolicy policy;
  policy.patch = 32;
  Rng rng(1);
  CHECK_THROWS_AS(augment(pool[0], policy, rng), DimensionError);
}

TEST_CASE("checkpoint resume reproduces an uninterrupted run") {
  namespace fs = std::filesystem;
  fs::path p = fs::temp_directory_path() / "train_resume.ptyn";
  NoiseSchedule s = make_schedule(100, 1e-4, 0.02);
  auto pool = phantom_pool(2, 16, 800);
  AugmentationPolicy policy;
  policy.patch = 16;

  // uninterrupted: 6 steps; batches are drawn per step from a seeded stream
  auto batch_at = [&](int step) {
    Rng rng(4, uint64_t(step) + 0x5EED);
    return sample_batch(pool, policy, 4, rng);
  };
  TinyUNet<float> full{UNetConfig{}};
  std::vector<double> full_losses;
  for (int step = 1; step <= 6; ++step)
    full_losses.push_back(train_step(full, batch_at(step), s, 13, step, 1e-4));

  TinyUNet<float> part{UNetConfig{}};
  for (int step = 1; step <= 3; ++step) train_step(part, batch_at(step), s, 13, step, 1e-4);
  save_net(part, p, /*include_opt=*/true, /*step=*/3);

  LoadedNet<float> resumed = load_net<float>(p);
  CHECK(resumed.step == 3);
  CHECK(resumed.has_opt);
  std::vector<double> tail;
  for (int step = 4; step <= 6; ++step)
    tail.push_back(train_step(resumed.net, batch_at(step), s, 13, step, 1e-4));
  CHECK(tail == std::vector<double>(full_losses.begin() + 3, full_losses.end()));
  fs::remove(p);
}
