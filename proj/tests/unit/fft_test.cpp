// Copyright 2026 The ptychodiff Authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <ptychodiff/fft.hpp>

#include "test_util.hpp"

using namespace ptycho;

namespace {

constexpr double kPi = 3.14159265358979323846;

// Independent oracle: direct O(N^4) double-loop DFT with unitary scaling.
ComplexField naive_dft2(const ComplexField& x, bool inverse) {
  ComplexField out(x.height, x.width);
  double sgn = inverse ? 1.0 : -1.0;
  for (int u = 0; u < x.height; ++u)
    for (int v = 0; v < x.width; ++v) {
      cxd s(0, 0);
      for (int r = 0; r < x.height; ++r)
        for (int c = 0; c < x.width; ++c) {
          double ang = sgn * 2.0 * kPi * (double(u) * r / x.height + double(v) * c / x.width);
          s += x.at(r, c) * cxd(std::cos(ang), std::sin(ang));
        }
      out.at(u, v) = s / std::sqrt(double(x.height) * x.width);
    }
  return out;
}

double max_abs_diff(const ComplexField& a, const ComplexField& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

}  // namespace

TEST_CASE("fft2 of a delta is a constant 1/sqrt(HW)") {
  ComplexField x(4, 4);
  x.at(0, 0) = 1.0;
  ComplexField y = fft2(x);
  for (const cxd& v : y.data) CHECK(std::abs(v - cxd(0.25, 0.0)) < 1e-15);
}

TEST_CASE("fft2 of all-ones concentrates at DC with unitary scale") {
  ComplexField x(4, 4);
  for (cxd& v : x.data) v = 1.0;
  ComplexField y = fft2(x);
  CHECK(std::abs(y.at(0, 0) - cxd(4.0, 0.0)) < 1e-14);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c)
      if (r || c) CHECK(std::abs(y.at(r, c)) < 1e-14);
}

TEST_CASE("fft2 matches the naive DFT oracle") {
  Rng rng(123);
  for (int trial = 0; trial < 5; ++trial) {
    ComplexField x = testutil::random_field(4, 4, rng);
    CHECK(max_abs_diff(fft2(x), naive_dft2(x, false)) < 1e-12);
    CHECK(max_abs_diff(ifft2(x), naive_dft2(x, true)) < 1e-12);
  }
  ComplexField x8 = testutil::random_field(8, 8, rng);
  CHECK(max_abs_diff(fft2(x8), naive_dft2(x8, false)) < 1e-12);
}

TEST_CASE("ifft2 inverts fft2") {
  Rng rng(7);
  ComplexField x = testutil::random_field(8, 8, rng);
  CHECK(max_abs_diff(ifft2(fft2(x)), x) < 1e-12);

  ComplexField spec(4, 4);
  spec.at(0, 0) = 4.0;
  ComplexField ones = ifft2(spec);
  for (const cxd& v : ones.data) CHECK(std::abs(v - cxd(1.0, 0.0)) < 1e-14);
}

TEST_CASE("fft2 is unitary") {
  Rng rng(99);
  ComplexField x = testutil::random_field(16, 16, rng);
  double nx = norm2(x);
  CHECK(std::abs(norm2(fft2(x)) - nx) <= 1e-12 * nx);
}

TEST_CASE("fft2 is linear") {
  Rng rng(5);
  ComplexField x = testutil::random_field(8, 8, rng);
  ComplexField y = testutil::random_field(8, 8, rng);
  cxd a(0.7, -1.3), b(-0.2, 0.45);
  ComplexField combo(8, 8);
  for (size_t i = 0; i < combo.size(); ++i) combo.data[i] = a * x.data[i] + b * y.data[i];
  ComplexField lhs = fft2(combo);
  ComplexField fx = fft2(x), fy = fft2(y);
  for (size_t i = 0; i < lhs.size(); ++i)
    CHECK(std::abs(lhs.data[i] - (a * fx.data[i] + b * fy.data[i])) < 1e-12);
}

TEST_CASE("fft2 rejects non-power-of-two dimensions") {
  ComplexField x(6, 4);
  CHECK_THROWS_AS(fft2(x), DimensionError);
  ComplexField y(4, 12);
  CHECK_THROWS_AS(ifft2(y), DimensionError);
}
