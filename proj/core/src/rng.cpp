// Copyright 2026 The ptychodiff Authors
// SPDX-License-Identifier: Apache-2.0
#include "ptychodiff/rng.hpp"

#include <cmath>

namespace ptycho {

namespace {

constexpr uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr uint32_t kWeyl0 = 0x9E3779B9u;
constexpr uint32_t kWeyl1 = 0xBB67AE85u;

inline void philox_round(uint32_t ctr[4], const uint32_t key[2]) {
  uint64_t p0 = uint64_t(kPhiloxM0) * ctr[0];
  uint64_t p1 = uint64_t(kPhiloxM1) * ctr[2];
  uint32_t c0 = ctr[1], c2 = ctr[3];
  ctr[0] = uint32_t(p1 >> 32) ^ c0 ^ key[0];
  ctr[1] = uint32_t(p1);
  ctr[2] = uint32_t(p0 >> 32) ^ c2 ^ key[1];
  ctr[3] = uint32_t(p0);
}

constexpr double kPi = 3.14159265358979323846;

}  // namespace

uint64_t Rng::at(uint64_t index) const {
  uint32_t ctr[4] = {uint32_t(index), uint32_t(index >> 32), uint32_t(stream_),
                     uint32_t(stream_ >> 32)};
  uint32_t key[2] = {uint32_t(seed_), uint32_t(seed_ >> 32)};
  for (int r = 0; r < 10; ++r) {
    philox_round(ctr, key);
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return (uint64_t(ctr[1]) << 32) | ctr[0];
}

double Rng::normal() {
  double u1 = uniform();
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log1p(-u1));  // u1 < 1 always
  return r * std::cos(2.0 * kPi * u2);
}

long long Rng::poisson(double lambda) {
  if (lambda <= 0.0) return 0;
  if (lambda < 30.0) {
    // Knuth: multiply uniforms until below exp(-lambda).
    double limit = std::exp(-lambda);
    double prod = 1.0;
    long long k = -1;
    do {
      prod *= uniform();
      ++k;
    } while (prod > limit);
    return k;
  }
  // Hoermann's PTRD transformed rejection.
  const double smu = std::sqrt(lambda);
  const double b = 0.931 + 2.53 * smu;
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double v_r = 0.9277 - 3.6224 / (b - 2.0);
  for (;;) {
    double u = uniform() - 0.5;
    double v = uniform();
    double us = 0.5 - std::abs(u);
    double kf = std::floor((2.0 * a / us + b) * u + lambda + 0.43);
    if (us >= 0.07 && v <= v_r) return (long long)kf;
    if (kf < 0.0 || (us < 0.013 && v > us)) continue;
    double lhs = std::log(v * inv_alpha / (a / (us * us) + b));
    double rhs = -lambda + kf * std::log(lambda) - std::lgamma(kf + 1.0);
    if (lhs <= rhs) return (long long)kf;
  }
}

}  // namespace ptycho
