// Copyright 2026 The ptychodiff Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

namespace ptycho {

/// Counter-based generator (Philox4x32-10). Every draw is a pure function of
/// (seed, stream, draw index), so independent streams can be handed to
/// parallel workers and replayed bit-exactly on any platform.
class Rng {
 public:
  explicit Rng(uint64_t seed, uint64_t stream = 0) : seed_(seed), stream_(stream) {}

  /// Random access into the stream; does not advance the cursor.
  uint64_t at(uint64_t index) const;

  uint64_t next_u64() { return at(index_++); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller; consumes exactly two draws.
  double normal();

  /// Poisson sample; Knuth for small means, transformed rejection (PTRD)
  /// for large ones. Consumes a data-dependent number of draws.
  long long poisson(double lambda);

  uint64_t seed() const { return seed_; }
  uint64_t stream() const { return stream_; }
  uint64_t index() const { return index_; }
  void seek(uint64_t index) { index_ = index; }

 private:
  uint64_t seed_;
  uint64_t stream_;
  uint64_t index_ = 0;
};

}  // namespace ptycho
