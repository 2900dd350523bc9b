// Copyright 2026 The ptychodiff Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ptychodiff/field.hpp"
#include "ptychodiff/rng.hpp"
#include "ptychodiff/scan.hpp"

namespace ptycho {

/// Complex illumination incident on the sample at each scan position.
struct Probe {
  ComplexField field;
  int width = 0;
};

/// Tapered-disk stand-in probe: a disk of radius aperture_radius_frac * w
/// convolved with a Gaussian of sigma = taper_sigma_frac * w (radial erf
/// profile), flat phase, peak amplitude normalized to 1.
Probe make_probe(int w, double aperture_radius_frac = 0.35, double taper_sigma_frac = 0.2);

/// The patch-extraction map D_i and its adjoint D_i^T (adds into `into`).
ComplexField extract_patch(const ComplexField& f, std::pair<int, int> pos, int w);
void embed_patch_add(const ComplexField& patch, std::pair<int, int> pos, ComplexField& into);

/// Noiseless diffraction amplitudes |fft2(P .* D_i f)| for every position.
std::vector<RealImage> forward_amplitudes(const ComplexField& f, const Probe& probe,
                                          const ScanGrid& grid);

/// Scan positions plus the per-position measured amplitudes y_i.
struct MeasurementSet {
  ScanGrid grid;
  std::vector<RealImage> patterns;
  double photon_max = 0.0;
};

/// Pseudo-Poisson detection with one global gain: c = photon_max / max(a^2),
/// k_i ~ Pois(c a_i^2), y_i = sqrt(k_i / c). Per-position RNG streams keep
/// the result independent of evaluation order.
MeasurementSet measure(const std::vector<RealImage>& amplitudes, const ScanGrid& grid,
                       double photon_max, uint64_t seed, bool noiseless);

}  // namespace ptycho
