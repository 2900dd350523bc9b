// Copyright 2026 The ptychodiff Authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <ptychodiff/field.hpp>

#include "test_util.hpp"

using namespace ptycho;

TEST_CASE("two-channel mapping of unit real value") {
  ComplexField x(1, 1);
  x.at(0, 0) = cxd(1.0, 0.0);
  TwoChannelImage t = to_two_channel(x);
  CHECK(t.amp[0] == doctest::Approx(1.0));
  CHECK(t.phase[0] == doctest::Approx(0.0));
}

TEST_CASE("two-channel mapping of 0.5 * exp(i pi/2)") {
  ComplexField x(1, 1);
  x.at(0, 0) = cxd(0.0, 0.5);
  TwoChannelImage t = to_two_channel(x);
  CHECK(t.amp[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(t.phase[0] == doctest::Approx(0.5));
}

TEST_CASE("two-channel round trip is the identity for |x| <= 1") {
  Rng rng(21);
  ComplexField x = testutil::random_unit_disk_field(8, 8, rng);
  ComplexField back = from_two_channel(to_two_channel(x));
  for (size_t i = 0; i < x.size(); ++i) CHECK(std::abs(back.data[i] - x.data[i]) < 1e-12);
}

TEST_CASE("amplitudes above one clamp and are counted") {
  ComplexField x(2, 1);
  x.at(0, 0) = cxd(1.5, 0.0);
  x.at(1, 0) = cxd(0.25, 0.0);
  ClampStats stats;
  TwoChannelImage t = to_two_channel(x, &stats);
  CHECK(stats.clamped == 1);
  CHECK(t.amp[0] == doctest::Approx(1.0));
  CHECK(t.amp[1] == doctest::Approx(-0.5));
}

TEST_CASE("shape checks throw DimensionError") {
  ComplexField a(4, 4), b(4, 8);
  CHECK_THROWS_AS(require_same_shape(a, b), DimensionError);
}
