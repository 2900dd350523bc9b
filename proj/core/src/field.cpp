// Copyright 2026 The ptychodiff Authors
// SPDX-License-Identifier: Apache-2.0
#include "ptychodiff/field.hpp"

#include <cmath>

namespace ptycho {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

TwoChannelImage to_two_channel(const ComplexField& x, ClampStats* stats) {
  TwoChannelImage out(x.height, x.width);
  for (size_t i = 0; i < x.size(); ++i) {
    double a = std::abs(x.data[i]);
    if (a > 1.0) {
      a = 1.0;
      if (stats) ++stats->clamped;
    }
    out.amp[i] = 2.0 * a - 1.0;
    out.phase[i] = std::arg(x.data[i]) / kPi;
  }
  return out;
}

ComplexField from_two_channel(const TwoChannelImage& t) {
  ComplexField out(t.height, t.width);
  for (size_t i = 0; i < t.pixels(); ++i) {
    double a = 0.5 * (t.amp[i] + 1.0);
    if (a < 0.0) a = 0.0;
    double ph = kPi * t.phase[i];
    out.data[i] = cxd(a * std::cos(ph), a * std::sin(ph));
  }
  return out;
}

double norm2(const ComplexField& x) {
  double s = 0.0;
  for (const cxd& v : x.data) s += std::norm(v);
  return std::sqrt(s);
}

double norm2(const TwoChannelImage& x) {
  double s = 0.0;
  for (double v : x.amp) s += v * v;
  for (double v : x.phase) s += v * v;
  return std::sqrt(s);
}

void require_same_shape(const ComplexField& a, const ComplexField& b) {
  if (a.height != b.height || a.width != b.width)
    throw DimensionError("complex field shapes differ: " + std::to_string(a.height) + "x" +
                         std::to_string(a.width) + " vs " + std::to_string(b.height) + "x" +
                         std::to_string(b.width));
}

void require_same_shape(const TwoChannelImage& a, const TwoChannelImage& b) {
  if (a.height != b.height || a.width != b.width)
    throw DimensionError("two-channel shapes differ: " + std::to_string(a.height) + "x" +
                         std::to_string(a.width) + " vs " + std::to_string(b.height) + "x" +
                         std::to_string(b.width));
}

}  // namespace ptycho
