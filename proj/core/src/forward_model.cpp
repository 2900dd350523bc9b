// Copyright 2026 The ptychodiff Authors
// SPDX-License-Identifier: Apache-2.0
#include "ptychodiff/forward_model.hpp"

#include <cmath>
#include <string>

#include "ptychodiff/fft.hpp"
#include "ptychodiff/parallel.hpp"

namespace ptycho {

Probe make_probe(int w, double aperture_radius_frac, double taper_sigma_frac) {
  if (w < 4) throw ConfigError("probe width must be >= 4");
  double radius = aperture_radius_frac * w;
  double sigma = taper_sigma_frac * w;
  double center = (w - 1) / 2.0;

  Probe p;
  p.width = w;
  p.field = ComplexField(w, w);
  double peak = 0.0;
  for (int r = 0; r < w; ++r)
    for (int c = 0; c < w; ++c) {
      double d = std::hypot(r - center, c - center);
      double a = 0.5 * std::erfc((d - radius) / (std::sqrt(2.0) * sigma));
      p.field.at(r, c) = a;
      peak = std::max(peak, a);
    }
  if (peak <= 0.0) throw NumericError("degenerate probe: zero amplitude everywhere");
  for (cxd& v : p.field.data) v /= peak;
  return p;
}

ComplexField extract_patch(const ComplexField& f, std::pair<int, int> pos, int w) {
  auto [r0, c0] = pos;
  if (r0 < 0 || c0 < 0 || r0 + w > f.height || c0 + w > f.width)
    throw IndexError("patch (" + std::to_string(r0) + "," + std::to_string(c0) + ")+" +
                     std::to_string(w) + " outside " + std::to_string(f.height) + "x" +
                     std::to_string(f.width) + " field");
  ComplexField out(w, w);
  for (int r = 0; r < w; ++r)
    for (int c = 0; c < w; ++c) out.at(r, c) = f.at(r0 + r, c0 + c);
  return out;
}

void embed_patch_add(const ComplexField& patch, std::pair<int, int> pos, ComplexField& into) {
  auto [r0, c0] = pos;
  int w = patch.width;
  if (patch.height != w) throw DimensionError("patch must be square");
  if (r0 < 0 || c0 < 0 || r0 + w > into.height || c0 + w > into.width)
    throw IndexError("patch embed outside target field");
  for (int r = 0; r < w; ++r)
    for (int c = 0; c < w; ++c) into.at(r0 + r, c0 + c) += patch.at(r, c);
}

std::vector<RealImage> forward_amplitudes(const ComplexField& f, const Probe& probe,
                                          const ScanGrid& grid) {
  int w = probe.width;
  if (grid.probe_width != w) throw DimensionError("grid and probe widths differ");
  std::vector<RealImage> out(grid.positions.size());
  parallel_for(grid.positions.size(), [&](size_t i) {
    ComplexField exit = extract_patch(f, grid.positions[i], w);
    for (size_t k = 0; k < exit.size(); ++k) exit.data[k] *= probe.field.data[k];
    fft2_inplace(exit.data.data(), w, w, false);
    RealImage amp(w, w);
    for (size_t k = 0; k < exit.size(); ++k) amp.data[k] = std::abs(exit.data[k]);
    out[i] = std::move(amp);
  });
  return out;
}

MeasurementSet measure(const std::vector<RealImage>& amplitudes, const ScanGrid& grid,
                       double photon_max, uint64_t seed, bool noiseless) {
  if (photon_max <= 0.0) throw ConfigError("photon_max must be positive");
  if (amplitudes.size() != grid.positions.size())
    throw DimensionError("amplitude count does not match scan positions");

  MeasurementSet set;
  set.grid = grid;
  set.photon_max = photon_max;
  set.patterns.resize(amplitudes.size());

  if (noiseless) {
    set.patterns = amplitudes;
    return set;
  }

  double peak2 = 0.0;
  for (const RealImage& a : amplitudes)
    for (double v : a.data) peak2 = std::max(peak2, v * v);
  if (peak2 <= 0.0)
    throw NumericError("degenerate photon scale: all diffraction amplitudes are zero");
  double c = photon_max / peak2;

  parallel_for(amplitudes.size(), [&](size_t i) {
    Rng rng(seed, /*stream=*/i);
    RealImage y(amplitudes[i].height, amplitudes[i].width);
    for (size_t k = 0; k < y.size(); ++k) {
      double lam = c * amplitudes[i].data[k] * amplitudes[i].data[k];
      y.data[k] = std::sqrt(double(rng.poisson(lam)) / c);
    }
    set.patterns[i] = std::move(y);
  });
  return set;
}

}  // namespace ptycho
