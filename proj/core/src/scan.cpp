// Copyright 2026 The ptychodiff Authors
// SPDX-License-Identifier: Apache-2.0
#include "ptychodiff/scan.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ptycho {

StepChoice overlap_to_step(double overlap, int w) {
  if (overlap < 0.0 || overlap >= 1.0)
    throw ConfigError("overlap must be in [0, 1), got " + std::to_string(overlap));
  if (w < 1) throw ConfigError("probe width must be positive");
  int step = int(std::lround((1.0 - overlap) * w));
  if (step < 1) step = 1;
  if (step >= w && overlap > 0.0)
    throw ConfigError("requested overlap " + std::to_string(overlap) +
                      " rounds to step " + std::to_string(step) + " >= probe width " +
                      std::to_string(w));
  return {step, 1.0 - double(step) / double(w)};
}

ScanGrid raster_grid(int n_side, int w, int step) {
  if (n_side < w) throw ConfigError("object side smaller than probe width");
  if (step < 1) throw ConfigError("step must be >= 1");
  std::vector<int> offs;
  for (int r = 0; r + w <= n_side; r += step) offs.push_back(r);
  if (offs.back() != n_side - w) offs.push_back(n_side - w);

  ScanGrid g;
  g.probe_width = w;
  g.object_size = n_side;
  g.achieved_overlap = 1.0 - double(step) / double(w);
  g.nominal_overlap = g.achieved_overlap;
  g.positions.reserve(offs.size() * offs.size());
  for (int r : offs)
    for (int c : offs) g.positions.emplace_back(r, c);
  return g;
}

ScanGrid jitter_grid(const ScanGrid& grid, int max_shift, Rng& rng) {
  if (max_shift < 0) throw ConfigError("max_shift must be >= 0");
  ScanGrid out = grid;
  if (max_shift == 0 || grid.positions.empty()) return out;

  int lo_r = grid.positions.front().first, hi_r = lo_r;
  int lo_c = grid.positions.front().second, hi_c = lo_c;
  for (auto [r, c] : grid.positions) {
    lo_r = std::min(lo_r, r);
    hi_r = std::max(hi_r, r);
    lo_c = std::min(lo_c, c);
    hi_c = std::max(hi_c, c);
  }
  int bound = grid.object_size - grid.probe_width;
  auto shift = [&]() {
    // uniform integer in [-max_shift, max_shift]
    return int(rng.next_u64() % uint64_t(2 * max_shift + 1)) - max_shift;
  };
  for (auto& [r, c] : out.positions) {
    bool interior = r != lo_r && r != hi_r && c != lo_c && c != hi_c;
    if (!interior) continue;
    r = std::clamp(r + shift(), 0, bound);
    c = std::clamp(c + shift(), 0, bound);
  }
  return out;
}

}  // namespace ptycho
