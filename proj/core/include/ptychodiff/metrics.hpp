// Copyright 2026 The ptychodiff Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ptychodiff/field.hpp"

namespace ptycho {

struct AlignedError {
  double nrmse = 0.0;
  double phase = 0.0;  // arg of the aligning factor c*
};

/// Relative l2 error after removing the global phase ambiguity:
/// c* = <fh, f> / |<fh, f>| with <fh, f> = sum conj(fh) * f, and
/// nrmse = ||c* fh - f|| / ||f||. A zero inner product keeps c* = 1.
/// Only phase is aligned; amplitude scaling is not corrected.
AlignedError nrmse_phase_aligned(const ComplexField& fh, const ComplexField& f);

/// SSIM over magnitude images. Gaussian window 11x11 sigma 1.5, K1 = 0.01,
/// K2 = 0.03, dynamic range = max|f| - min|f| of the reference (1 if the
/// reference is constant), mean over valid window positions.
double ssim_magnitude(const ComplexField& fh, const ComplexField& f);

struct MetricReport {
  std::vector<double> nrmse, ssim, phase;  // per image pair
  double nrmse_mean = 0.0, nrmse_std = 0.0;
  double ssim_mean = 0.0, ssim_std = 0.0;
};

/// Per-image metrics plus mean and population (n-divisor) std.
MetricReport evaluate_set(const std::vector<ComplexField>& reconstructions,
                          const std::vector<ComplexField>& references);

}  // namespace ptycho
