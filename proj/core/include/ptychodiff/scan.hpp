// Copyright 2026 The ptychodiff Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <utility>
#include <vector>

#include "ptychodiff/errors.hpp"
#include "ptychodiff/rng.hpp"

namespace ptycho {

/// Scan positions as (row, col) top-left patch offsets into the object.
struct ScanGrid {
  std::vector<std::pair<int, int>> positions;
  int probe_width = 0;
  int object_size = 0;
  double nominal_overlap = 0.0;
  double achieved_overlap = 0.0;
};

struct StepChoice {
  int step;
  double achieved;
};

/// Linear overlap convention: overlap = 1 - step/w, step rounded to integer.
/// Requesting a positive overlap that rounds to step >= w is a configuration
/// error; overlap 0 maps to step == w (adjacent tiles).
StepChoice overlap_to_step(double overlap, int w);

/// Raster rows/cols at multiples of step; the final row/col is clamped so the
/// last patch ends exactly at the border, guaranteeing coverage.
ScanGrid raster_grid(int n_side, int w, int step);

/// Shifts each interior position uniformly in [-max_shift, max_shift]^2 and
/// clamps into bounds. Border positions stay put so coverage survives.
ScanGrid jitter_grid(const ScanGrid& grid, int max_shift, Rng& rng);

}  // namespace ptycho
