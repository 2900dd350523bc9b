// Copyright 2026 The ptychodiff Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ptychodiff/field.hpp"
#include "ptychodiff/rng.hpp"

namespace ptycho {

struct PhantomParams {
  int blobs_min = 3;
  int blobs_max = 8;
  double factor_min = 0.4;     // per-ellipse amplitude multiplier range
  double factor_max = 0.8;
  double phase_scale = 1.5;    // radians of phase per unit amplitude drop
};

/// Synthetic test object: 0.9 amplitude background darkened by soft-edged
/// ellipses, with phase correlated to the amplitude plus a 2-mode
/// low-frequency field, wrapped to [-pi, pi]. Amplitude is clamped to
/// [0.1, 1]. Deterministic in (seed, params).
struct Phantom {
  ComplexField object;
  uint64_t seed = 0;
  PhantomParams params;
};

Phantom make_phantom(int n_side, uint64_t seed, const PhantomParams& params = {});

}  // namespace ptycho
