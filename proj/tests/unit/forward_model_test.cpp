// Copyright 2026 The ptychodiff Authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <ptychodiff/fft.hpp>
#include <ptychodiff/forward_model.hpp>

#include "test_util.hpp"

using namespace ptycho;

namespace {

constexpr double kPi = 3.14159265358979323846;

// A_i f = fft2(P .* D_i f); adjoint is D_i^T (conj(P) .* ifft2(g)).
ComplexField apply_chain(const ComplexField& f, const Probe& p, std::pair<int, int> pos) {
  ComplexField patch = extract_patch(f, pos, p.width);
  for (size_t i = 0; i < patch.size(); ++i) patch.data[i] *= p.field.data[i];
  return fft2(patch);
}

ComplexField apply_chain_adjoint(const ComplexField& g, const Probe& p, std::pair<int, int> pos,
                                 int n) {
  ComplexField back = ifft2(g);
  for (size_t i = 0; i < back.size(); ++i) back.data[i] *= std::conj(p.field.data[i]);
  ComplexField out(n, n);
  embed_patch_add(back, pos, out);
  return out;
}

}  // namespace

TEST_CASE("make_probe normalizes the peak and tapers the corners") {
  Probe p = make_probe(32);
  double peak = 0.0;
  for (const cxd& v : p.field.data) peak = std::max(peak, std::abs(v));
  CHECK(peak == doctest::Approx(1.0));
  int mid = 15;  // one of the four central pixels for even width
  CHECK(std::abs(p.field.at(mid, mid)) == doctest::Approx(1.0));
  CHECK(std::abs(p.field.at(0, 0)) < 0.05);
}

TEST_CASE("make_probe is 4-fold symmetric for even widths") {
  Probe p = make_probe(16);
  for (int r = 0; r < 16; ++r)
    for (int c = 0; c < 16; ++c) {
      CHECK(std::abs(p.field.at(r, c)) ==
            doctest::Approx(std::abs(p.field.at(15 - r, c))).epsilon(1e-12));
      CHECK(std::abs(p.field.at(r, c)) ==
            doctest::Approx(std::abs(p.field.at(c, r))).epsilon(1e-12));
    }
}

TEST_CASE("extract_patch takes the top-left block") {
  ComplexField f(4, 4);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) f.at(r, c) = cxd(r, c);
  ComplexField p = extract_patch(f, {0, 0}, 2);
  CHECK(p.at(0, 0) == cxd(0, 0));
  CHECK(p.at(0, 1) == cxd(0, 1));
  CHECK(p.at(1, 0) == cxd(1, 0));
  CHECK(p.at(1, 1) == cxd(1, 1));
  CHECK_THROWS_AS(extract_patch(f, {3, 3}, 2), IndexError);
}

TEST_CASE("embed_patch_add is the adjoint of extract_patch") {
  Rng rng(17);
  ComplexField f = testutil::random_field(8, 8, rng);
  ComplexField g = testutil::random_field(3, 3, rng);
  std::pair<int, int> pos{2, 4};
  ComplexField Df = extract_patch(f, pos, 3);
  ComplexField Dtg(8, 8);
  embed_patch_add(g, pos, Dtg);
  cxd lhs = testutil::inner(Df, g);
  cxd rhs = testutil::inner(f, Dtg);
  CHECK(std::abs(lhs - rhs) < 1e-12);
}

TEST_CASE("embed then extract at the same position is the identity") {
  Rng rng(18);
  ComplexField g = testutil::random_field(4, 4, rng);
  ComplexField big(16, 16);
  embed_patch_add(g, {5, 9}, big);
  ComplexField back = extract_patch(big, {5, 9}, 4);
  for (size_t i = 0; i < g.size(); ++i) CHECK(std::abs(back.data[i] - g.data[i]) < 1e-15);
}

TEST_CASE("forward amplitudes of the zero object vanish") {
  ComplexField f(32, 32);
  Probe p = make_probe(8);
  ScanGrid g = raster_grid(32, 8, 8);
  for (const RealImage& a : forward_amplitudes(f, p, g))
    for (double v : a.data) CHECK(v == 0.0);
}

TEST_CASE("flat probe and delta object give a constant 1/w map") {
  int w = 4, n = 8;
  Probe p;
  p.width = w;
  p.field = ComplexField(w, w);
  for (cxd& v : p.field.data) v = 1.0;
  ComplexField f(n, n);
  f.at(1, 2) = 1.0;  // inside the (0,0) patch
  ScanGrid g;
  g.probe_width = w;
  g.object_size = n;
  g.positions = {{0, 0}};
  auto amps = forward_amplitudes(f, p, g);
  for (double v : amps[0].data) CHECK(v == doctest::Approx(1.0 / w).epsilon(1e-12));
}

TEST_CASE("forward amplitudes match a hand-rolled DFT-of-product oracle") {
  Rng rng(23);
  int w = 2, n = 4;
  Probe p;
  p.width = w;
  p.field = testutil::random_field(w, w, rng);
  ComplexField f = testutil::random_field(n, n, rng);
  ScanGrid g;
  g.probe_width = w;
  g.object_size = n;
  g.positions = {{1, 1}};
  auto amps = forward_amplitudes(f, p, g);

  for (int u = 0; u < w; ++u)
    for (int v = 0; v < w; ++v) {
      cxd s(0, 0);
      for (int r = 0; r < w; ++r)
        for (int c = 0; c < w; ++c) {
          cxd prod = p.field.at(r, c) * f.at(1 + r, 1 + c);
          double ang = -2.0 * kPi * (double(u) * r + double(v) * c) / w;
          s += prod * cxd(std::cos(ang), std::sin(ang));
        }
      s /= double(w);  // unitary scale: sqrt(w*w)
      CHECK(amps[0].at(u, v) == doctest::Approx(std::abs(s)).epsilon(1e-12));
    }
}

TEST_CASE("linear chain adjoint identity holds over 100 random draws") {
  Rng rng(29);
  int n = 16, w = 4;
  Probe p = make_probe(w);
  ScanGrid g = raster_grid(n, w, 3);
  for (int trial = 0; trial < 100; ++trial) {
    ComplexField f = testutil::random_field(n, n, rng);
    ComplexField gg = testutil::random_field(w, w, rng);
    auto pos = g.positions[trial % g.positions.size()];
    cxd lhs = testutil::inner(apply_chain(f, p, pos), gg);
    cxd rhs = testutil::inner(f, apply_chain_adjoint(gg, p, pos, n));
    CHECK(std::abs(lhs - rhs) < 1e-10);
  }
}

TEST_CASE("per-position energy is preserved by the unitary transform") {
  Rng rng(31);
  int n = 16, w = 8;
  Probe p = make_probe(w);
  ScanGrid g = raster_grid(n, w, 4);
  ComplexField f = testutil::random_field(n, n, rng);
  auto amps = forward_amplitudes(f, p, g);
  for (size_t i = 0; i < g.positions.size(); ++i) {
    ComplexField patch = extract_patch(f, g.positions[i], w);
    double exit_energy = 0.0;
    for (size_t k = 0; k < patch.size(); ++k)
      exit_energy += std::norm(p.field.data[k] * patch.data[k]);
    double meas_energy = 0.0;
    for (double v : amps[i].data) meas_energy += v * v;
    CHECK(meas_energy == doctest::Approx(exit_energy).epsilon(1e-10));
  }
}

TEST_CASE("noiseless measurement returns the amplitudes exactly") {
  Rng rng(37);
  int n = 16, w = 4;
  Probe p = make_probe(w);
  ScanGrid g = raster_grid(n, w, 4);
  ComplexField f = testutil::random_field(n, n, rng);
  auto amps = forward_amplitudes(f, p, g);
  MeasurementSet m = measure(amps, g, 1e5, 1, /*noiseless=*/true);
  for (size_t i = 0; i < amps.size(); ++i) CHECK(m.patterns[i].data == amps[i].data);
}

TEST_CASE("zero-amplitude pixels always measure zero") {
  ScanGrid g;
  g.probe_width = 2;
  g.object_size = 2;
  g.positions = {{0, 0}};
  RealImage a(2, 2);
  a.data = {0.0, 1.0, 0.0, 0.5};
  MeasurementSet m = measure({a}, g, 1e4, 7, false);
  CHECK(m.patterns[0].data[0] == 0.0);
  CHECK(m.patterns[0].data[2] == 0.0);
}

TEST_CASE("measured intensity is unbiased: Monte-Carlo mean within 1%") {
  // single pixel with amplitude^2 = 1 at photon_max 1e5, 1e5 draws
  ScanGrid g;
  g.probe_width = 1;
  g.object_size = 1;
  g.positions = {{0, 0}};
  RealImage a(1, 1);
  a.data = {1.0};
  double sum = 0.0;
  const int n = 100000;
  Rng rng(101, 0);
  double c = 1e5;  // photon_max / max amp^2
  for (int i = 0; i < n; ++i) {
    double y2 = double(rng.poisson(c)) / c;
    sum += y2;
  }
  CHECK(std::abs(sum / n - 1.0) < 0.01);

  // and through the public API for a handful of draws
  MeasurementSet m = measure({a}, g, 1e5, 11, false);
  CHECK(m.patterns[0].data[0] == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("all-zero amplitudes cannot be scaled to a photon budget") {
  ScanGrid g;
  g.probe_width = 2;
  g.object_size = 2;
  g.positions = {{0, 0}};
  RealImage a(2, 2);
  CHECK_THROWS_AS(measure({a}, g, 1e5, 1, false), NumericError);
}

TEST_CASE("measurement noise statistics converge to the scaled intensity") {
  // chi-square-style check: empirical mean of c*y^2 over 1e5 draws per pixel
  ScanGrid g;
  g.probe_width = 2;
  g.object_size = 2;
  g.positions = {{0, 0}};
  RealImage a(2, 2);
  a.data = {0.2, 0.7, 1.0, 0.05};
  double c = 4e4 / 1.0;  // photon_max / max amp^2
  Rng rng(55, 3);
  for (double amp : a.data) {
    double lam = c * amp * amp;
    const int n = 100000;
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += double(rng.poisson(lam));
    double mean = s / n;
    // 1% significance two-sided normal bound on the mean of Poisson draws
    double bound = 2.5758 * std::sqrt(lam / n);
    CHECK(std::abs(mean - lam) <= bound + 1e-9);
  }
}
