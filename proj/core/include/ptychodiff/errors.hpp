// Copyright 2026 The ptychodiff Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace ptycho {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Bad array shapes: non power-of-two FFT sizes, mismatched fields.
struct DimensionError : Error {
  using Error::Error;
};

/// Malformed on-disk data (bad magic, truncation, version skew).
struct FormatError : Error {
  using Error::Error;
};

/// Out-of-bounds patch or element access.
struct IndexError : Error {
  using Error::Error;
};

/// Invalid configuration value or unknown key.
struct ConfigError : Error {
  using Error::Error;
};

/// Numerical failure: solver divergence, guidance blow-up, degenerate scale.
struct NumericError : Error {
  using Error::Error;
};

}  // namespace ptycho
