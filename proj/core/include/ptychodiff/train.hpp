// Copyright 2026 The ptychodiff Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ptychodiff/unet.hpp"

namespace ptycho {

struct TrainConfig {
  int steps = 6000;
  int batch = 8;
  double lr = 1e-4;  // constant
  uint64_t seed = 7;
  int checkpoint_every = 1000;
};

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One denoising-score-matching step on a batch of normalized clean images:
/// per item draw t ~ U[1,N] and eps ~ N(0,I), form x_t, and take the MSE
/// (mean per element) between predicted and true noise. Items evaluate in
/// parallel with private gradient buffers reduced in item order, so a step
/// is a pure function of (net, batch, seed, step). `step` is 1-based; it
/// drives the per-item RNG streams and Adam bias correction.
/// Returns the batch loss. Throws NumericError on a non-finite loss.
template <typename T>
double train_step(TinyUNet<T>& net, const std::vector<TwoChannelImage>& batch_x0,
                  const NoiseSchedule& schedule, uint64_t seed, long long step, double lr,
                  const AdamParams& adam = {});

struct AugmentationPolicy {
  double scale_min = 0.8;
  double scale_max = 1.25;
  int patch = 32;
};

/// Deterministic core of augment(): rotate by `angle` and zoom by `scale`
/// about the image center (bilinear, edge clamp), then crop a patch at
/// (crop_r, crop_c). The phase channel is resampled as a plain real channel
/// (no rewrapping); the amplitude channel is clamped back to [-1, 1].
TwoChannelImage augment_with(const TwoChannelImage& src, double angle, double scale, int crop_r,
                             int crop_c, int patch);

/// Random rotation + scale + crop per the policy (draw order: angle, scale,
/// crop row, crop col).
TwoChannelImage augment(const TwoChannelImage& src, const AugmentationPolicy& policy, Rng& rng);

/// Batch sampler over a pool of source images: picks a source then augments.
std::vector<TwoChannelImage> sample_batch(const std::vector<TwoChannelImage>& pool,
                                          const AugmentationPolicy& policy, int batch, Rng& rng);

}  // namespace ptycho
