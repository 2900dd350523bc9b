// Copyright 2026 The ptychodiff Authors
// SPDX-License-Identifier: Apache-2.0
#include "ptychodiff/metrics.hpp"

#include <cmath>

namespace ptycho {

AlignedError nrmse_phase_aligned(const ComplexField& fh, const ComplexField& f) {
  require_same_shape(fh, f);
  double ref_norm = norm2(f);
  if (ref_norm == 0.0) throw NumericError("nrmse undefined for zero reference");

  cxd inner(0.0, 0.0);
  for (size_t i = 0; i < f.size(); ++i) inner += std::conj(fh.data[i]) * f.data[i];
  cxd cstar = std::abs(inner) > 0.0 ? inner / std::abs(inner) : cxd(1.0, 0.0);

  double err = 0.0;
  for (size_t i = 0; i < f.size(); ++i) err += std::norm(cstar * fh.data[i] - f.data[i]);
  return {std::sqrt(err) / ref_norm, std::arg(cstar)};
}

namespace {

std::vector<double> gaussian_window(int radius, double sigma) {
  int n = 2 * radius + 1;
  std::vector<double> w(size_t(n) * n);
  double sum = 0.0;
  for (int r = -radius; r <= radius; ++r)
    for (int c = -radius; c <= radius; ++c) {
      double v = std::exp(-(r * r + c * c) / (2.0 * sigma * sigma));
      w[size_t(r + radius) * n + (c + radius)] = v;
      sum += v;
    }
  for (double& v : w) v /= sum;
  return w;
}

}  // namespace

double ssim_magnitude(const ComplexField& fh, const ComplexField& f) {
  require_same_shape(fh, f);
  constexpr int kRadius = 5;  // 11x11 window
  constexpr double kSigma = 1.5;
  if (f.height < 2 * kRadius + 1 || f.width < 2 * kRadius + 1)
    throw DimensionError("image smaller than the 11x11 SSIM window");

  size_t n = f.size();
  std::vector<double> a(n), b(n);
  for (size_t i = 0; i < n; ++i) {
    a[i] = std::abs(fh.data[i]);
    b[i] = std::abs(f.data[i]);
  }
  double lo = b[0], hi = b[0];
  for (double v : b) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  double range = hi - lo;
  if (range <= 0.0) range = 1.0;  // constant reference
  const double c1 = (0.01 * range) * (0.01 * range);
  const double c2 = (0.03 * range) * (0.03 * range);

  static const std::vector<double> win = gaussian_window(kRadius, kSigma);
  const int W = f.width, H = f.height, d = 2 * kRadius + 1;

  double total = 0.0;
  long count = 0;
  for (int y = kRadius; y < H - kRadius; ++y) {
    for (int x = kRadius; x < W - kRadius; ++x) {
      double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
      for (int wy = 0; wy < d; ++wy) {
        const double* arow = a.data() + size_t(y - kRadius + wy) * W + (x - kRadius);
        const double* brow = b.data() + size_t(y - kRadius + wy) * W + (x - kRadius);
        const double* wrow = win.data() + size_t(wy) * d;
        for (int wx = 0; wx < d; ++wx) {
          double wv = wrow[wx];
          ma += wv * arow[wx];
          mb += wv * brow[wx];
          saa += wv * arow[wx] * arow[wx];
          sbb += wv * brow[wx] * brow[wx];
          sab += wv * arow[wx] * brow[wx];
        }
      }
      double va = saa - ma * ma;
      double vb = sbb - mb * mb;
      double cov = sab - ma * mb;
      double s = ((2 * ma * mb + c1) * (2 * cov + c2)) /
                 ((ma * ma + mb * mb + c1) * (va + vb + c2));
      total += s;
      ++count;
    }
  }
  return total / double(count);
}

MetricReport evaluate_set(const std::vector<ComplexField>& reconstructions,
                          const std::vector<ComplexField>& references) {
  if (reconstructions.size() != references.size())
    throw DimensionError("reconstruction and reference lists differ in length");
  if (reconstructions.empty()) throw ConfigError("evaluate_set needs at least one pair");

  MetricReport rep;
  for (size_t i = 0; i < references.size(); ++i) {
    AlignedError e = nrmse_phase_aligned(reconstructions[i], references[i]);
    rep.nrmse.push_back(e.nrmse);
    rep.phase.push_back(e.phase);
    rep.ssim.push_back(ssim_magnitude(reconstructions[i], references[i]));
  }
  auto mean_std = [](const std::vector<double>& v, double& mean, double& sd) {
    double s = 0.0;
    for (double x : v) s += x;
    mean = s / double(v.size());
    double q = 0.0;
    for (double x : v) q += (x - mean) * (x - mean);
    sd = std::sqrt(q / double(v.size()));  // population std
  };
  mean_std(rep.nrmse, rep.nrmse_mean, rep.nrmse_std);
  mean_std(rep.ssim, rep.ssim_mean, rep.ssim_std);
  return rep;
}

}  // namespace ptycho
