// Copyright 2026 The ptychodiff Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <exception>
#include <functional>

namespace ptycho {

/// Process-wide worker cap for parallel_for (defaults to hardware threads).
void set_max_threads(int n);
int max_threads();

/// Runs fn(i) for i in [0, n) on up to max_threads() threads. Iterations are
/// split into contiguous chunks, so writers to pre-assigned slots stay
/// deterministic regardless of thread count. Exceptions propagate to the
/// caller (first one wins).
void parallel_for(size_t n, const std::function<void(size_t)>& fn);

}  // namespace ptycho
