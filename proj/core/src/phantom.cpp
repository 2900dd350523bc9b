// Copyright 2026 The ptychodiff Authors
// SPDX-License-Identifier: Apache-2.0
#include "ptychodiff/phantom.hpp"

#include <algorithm>
#include <cmath>

namespace ptycho {

namespace {

constexpr double kPi = 3.14159265358979323846;

double smoothstep(double t) {
  t = std::clamp(t, 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

double uniform_in(Rng& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

}  // namespace

Phantom make_phantom(int n_side, uint64_t seed, const PhantomParams& params) {
  if (n_side < 16) throw ConfigError("phantom side must be >= 16");
  Rng rng(seed, /*stream=*/0x9047u);

  std::vector<double> amp(size_t(n_side) * n_side, 0.9);
  int span = params.blobs_max - params.blobs_min + 1;
  int blobs = params.blobs_min + int(rng.next_u64() % uint64_t(span));
  for (int b = 0; b < blobs; ++b) {
    double cy = uniform_in(rng, 0.15 * n_side, 0.85 * n_side);
    double cx = uniform_in(rng, 0.15 * n_side, 0.85 * n_side);
    double ry = uniform_in(rng, 0.06 * n_side, 0.22 * n_side);
    double rx = uniform_in(rng, 0.06 * n_side, 0.22 * n_side);
    double theta = uniform_in(rng, 0.0, kPi);
    double factor = uniform_in(rng, params.factor_min, params.factor_max);
    double edge = uniform_in(rng, 0.05, 0.15) * std::min(ry, rx);
    double ct = std::cos(theta), st = std::sin(theta);
    double ew = edge / std::min(ry, rx);
    for (int r = 0; r < n_side; ++r)
      for (int c = 0; c < n_side; ++c) {
        double dy = r - cy, dx = c - cx;
        double u = (dy * ct + dx * st) / ry;
        double v = (-dy * st + dx * ct) / rx;
        double d = std::sqrt(u * u + v * v);  // ~1 at the ellipse boundary
        double inside = 1.0 - smoothstep((d - 1.0) / ew);
        amp[size_t(r) * n_side + c] *= 1.0 + (factor - 1.0) * inside;
      }
  }
  for (double& a : amp) a = std::clamp(a, 0.1, 1.0);

  // Phase tracks amplitude (correlated channels) plus two low-frequency
  // Fourier modes, wrapped into [-pi, pi].
  std::vector<double> phase(amp.size());
  for (size_t i = 0; i < amp.size(); ++i) phase[i] = params.phase_scale * (1.0 - amp[i]);
  for (int m = 0; m < 2; ++m) {
    int kx = int(rng.next_u64() % 5) - 2;
    int ky = int(rng.next_u64() % 5) - 2;
    if (kx == 0 && ky == 0) kx = 1;
    double a = uniform_in(rng, 0.2, 0.6);
    double p0 = uniform_in(rng, 0.0, 2.0 * kPi);
    for (int r = 0; r < n_side; ++r)
      for (int c = 0; c < n_side; ++c)
        phase[size_t(r) * n_side + c] +=
            a * std::cos(2.0 * kPi * (kx * c + ky * r) / n_side + p0);
  }

  Phantom ph;
  ph.seed = seed;
  ph.params = params;
  ph.object = ComplexField(n_side, n_side);
  for (size_t i = 0; i < amp.size(); ++i) {
    double w = std::remainder(phase[i], 2.0 * kPi);  // wrap to [-pi, pi]
    ph.object.data[i] = cxd(amp[i] * std::cos(w), amp[i] * std::sin(w));
  }
  return ph;
}

}  // namespace ptycho
