// Copyright 2026 The ptychodiff Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ptychodiff/field.hpp"

namespace ptycho {

/// Unitary 2-D DFT (scale 1/sqrt(H*W)). Dimensions must be powers of two.
/// With this normalization the adjoint of fft2 equals ifft2 and the l2 norm
/// is preserved, so modulus-projection and Wirtinger-gradient code never
/// carries scale factors.
ComplexField fft2(const ComplexField& x);

/// Exact inverse of fft2 (also unitary).
ComplexField ifft2(const ComplexField& x);

/// In-place variants operating on row-major buffers of h*w values.
void fft2_inplace(cxd* data, int h, int w, bool inverse);

}  // namespace ptycho
