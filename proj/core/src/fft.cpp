// Copyright 2026 The ptychodiff Authors
// SPDX-License-Identifier: Apache-2.0
#include "ptychodiff/fft.hpp"

#include <cmath>
#include <map>
#include <vector>

namespace ptycho {

namespace {

constexpr double kPi = 3.14159265358979323846;

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

struct Plan {
  std::vector<int> rev;        // bit-reversal permutation
  std::vector<cxd> twiddle;    // forward twiddles, grouped per stage
};

const Plan& plan_for(int n) {
  thread_local std::map<int, Plan> cache;
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  Plan p;
  p.rev.resize(n);
  int lg = 0;
  while ((1 << lg) < n) ++lg;
  for (int i = 0; i < n; ++i) {
    int r = 0;
    for (int b = 0; b < lg; ++b)
      if (i & (1 << b)) r |= 1 << (lg - 1 - b);
    p.rev[i] = r;
  }
  p.twiddle.reserve(n);
  for (int len = 2; len <= n; len <<= 1)
    for (int k = 0; k < len / 2; ++k) {
      double ang = -2.0 * kPi * k / len;
      p.twiddle.emplace_back(std::cos(ang), std::sin(ang));
    }
  return cache.emplace(n, std::move(p)).first->second;
}

// Iterative radix-2, unnormalized. stride allows column transforms in place.
void fft1d(cxd* a, int n, int stride, bool inverse) {
  if (n == 1) return;
  const Plan& p = plan_for(n);
  for (int i = 0; i < n; ++i) {
    int j = p.rev[i];
    if (i < j) std::swap(a[size_t(i) * stride], a[size_t(j) * stride]);
  }
  const cxd* tw = p.twiddle.data();
  for (int len = 2; len <= n; len <<= 1) {
    int half = len / 2;
    for (int i = 0; i < n; i += len) {
      for (int k = 0; k < half; ++k) {
        cxd w = tw[k];
        if (inverse) w = std::conj(w);
        cxd& u = a[size_t(i + k) * stride];
        cxd& v = a[size_t(i + k + half) * stride];
        cxd t = v * w;
        v = u - t;
        u = u + t;
      }
    }
    tw += half;
  }
}

}  // namespace

void fft2_inplace(cxd* data, int h, int w, bool inverse) {
  if (!is_pow2(h) || !is_pow2(w))
    throw DimensionError("fft2 requires power-of-two dimensions, got " + std::to_string(h) +
                         "x" + std::to_string(w));
  for (int r = 0; r < h; ++r) fft1d(data + size_t(r) * w, w, 1, inverse);
  for (int c = 0; c < w; ++c) fft1d(data + c, h, w, inverse);
  double scale = 1.0 / std::sqrt(double(h) * double(w));
  size_t n = size_t(h) * w;
  for (size_t i = 0; i < n; ++i) data[i] *= scale;
}

ComplexField fft2(const ComplexField& x) {
  ComplexField out = x;
  fft2_inplace(out.data.data(), out.height, out.width, false);
  return out;
}

ComplexField ifft2(const ComplexField& x) {
  ComplexField out = x;
  fft2_inplace(out.data.data(), out.height, out.width, true);
  return out;
}

}  // namespace ptycho
