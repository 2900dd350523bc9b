// Copyright 2026 The ptychodiff Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "ptychodiff/errors.hpp"

namespace ptycho {

using cxd = std::complex<double>;

/// 2-D complex-valued image (object, probe, exit wave, spectrum).
/// Row-major, 64-bit floats for both components.
struct ComplexField {
  int height = 0;
  int width = 0;
  std::vector<cxd> data;

  ComplexField() = default;
  ComplexField(int h, int w) : height(h), width(w), data(size_t(h) * w) {}

  cxd& at(int r, int c) { return data[size_t(r) * width + c]; }
  const cxd& at(int r, int c) const { return data[size_t(r) * width + c]; }
  size_t size() const { return data.size(); }
};

/// Real-valued 2-D image (diffraction amplitudes, previews, masks).
struct RealImage {
  int height = 0;
  int width = 0;
  std::vector<double> data;

  RealImage() = default;
  RealImage(int h, int w, double fill = 0.0)
      : height(h), width(w), data(size_t(h) * w, fill) {}

  double& at(int r, int c) { return data[size_t(r) * width + c]; }
  const double& at(int r, int c) const { return data[size_t(r) * width + c]; }
  size_t size() const { return data.size(); }
};

/// Two-channel amplitude/phase representation consumed by the denoiser.
/// After normalization both channels live in [-1, 1]:
///   amp' = 2|x| - 1 (assumes |x| in [0,1]),  phase' = arg(x) / pi.
struct TwoChannelImage {
  int height = 0;
  int width = 0;
  std::vector<double> amp;
  std::vector<double> phase;

  TwoChannelImage() = default;
  TwoChannelImage(int h, int w)
      : height(h), width(w), amp(size_t(h) * w, 0.0), phase(size_t(h) * w, 0.0) {}

  size_t pixels() const { return amp.size(); }
};

/// Counts non-fatal clamps applied while mapping to the normalized range.
struct ClampStats {
  long long clamped = 0;
};

TwoChannelImage to_two_channel(const ComplexField& x, ClampStats* stats = nullptr);
ComplexField from_two_channel(const TwoChannelImage& t);

double norm2(const ComplexField& x);
double norm2(const TwoChannelImage& x);

/// Throws DimensionError unless both shapes match.
void require_same_shape(const ComplexField& a, const ComplexField& b);
void require_same_shape(const TwoChannelImage& a, const TwoChannelImage& b);

}  // namespace ptycho
