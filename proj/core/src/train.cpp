// Copyright 2026 The ptychodiff Authors
// SPDX-License-Identifier: Apache-2.0
#include "ptychodiff/train.hpp"

#include <algorithm>
#include <cmath>

#include "ptychodiff/parallel.hpp"

namespace ptycho {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

template <typename T>
double train_step(TinyUNet<T>& net, const std::vector<TwoChannelImage>& batch_x0,
                  const NoiseSchedule& schedule, uint64_t seed, long long step, double lr,
                  const AdamParams& adam) {
  if (batch_x0.empty()) throw ConfigError("empty training batch");
  if (step < 1) throw ConfigError("training step index is 1-based");
  const int B = int(batch_x0.size());
  const int N = schedule.steps;

  const size_t nb = size_t(B);
  std::vector<std::vector<ad::Tensor<T>>> item_grads(nb);
  std::vector<double> item_loss(nb);

  parallel_for(size_t(B), [&](size_t i) {
    Rng rng(seed, uint64_t(step) * uint64_t(B) + i);
    int t = 1 + int(rng.next_u64() % uint64_t(N));
    const TwoChannelImage& x0 = batch_x0[i];
    double ab = schedule.alpha_bar_at(t);
    double keep = std::sqrt(ab), add = std::sqrt(1.0 - ab);

    ad::Tensor<T> xt(2, x0.height, x0.width);
    ad::Tensor<T> eps(2, x0.height, x0.width);
    size_t n = x0.pixels();
    for (size_t k = 0; k < n; ++k) {
      double e = rng.normal();
      eps.v[k] = T(e);
      xt.v[k] = T(keep * x0.amp[k] + add * e);
    }
    for (size_t k = 0; k < n; ++k) {
      double e = rng.normal();
      eps.v[n + k] = T(e);
      xt.v[n + k] = T(keep * x0.phase[k] + add * e);
    }

    ad::Tape<T> tape;
    ad::Var in = tape.constant(std::move(xt));
    ad::Var pred = net.forward(tape, in, t, /*with_param_grads=*/true, &item_grads[i]);
    ad::Var loss = tape.mse_loss(pred, std::move(eps));
    item_loss[i] = double(tape.val(loss).v[0]);

    ad::Tensor<T> lseed(1, 1, 1);
    lseed.v[0] = T(1.0 / double(B));
    tape.backward(loss, lseed);
  });

  double batch_loss = 0.0;
  for (double l : item_loss) batch_loss += l;
  batch_loss /= double(B);
  if (!std::isfinite(batch_loss))
    throw NumericError("non-finite training loss at step " + std::to_string(step));

  auto& items = net.params().items;
  // reduce in item order, then one Adam update per parameter
  double bc1 = 1.0 - std::pow(adam.beta1, double(step));
  double bc2 = 1.0 - std::pow(adam.beta2, double(step));
  for (size_t p = 0; p < items.size(); ++p) {
    auto& it = items[p];
    std::fill(it.grad.v.begin(), it.grad.v.end(), T(0));
    for (int i = 0; i < B; ++i) {
      const ad::Tensor<T>& g = item_grads[size_t(i)][p];
      if (g.size() != it.grad.size()) continue;  // item never touched it
      for (size_t k = 0; k < g.size(); ++k) it.grad.v[k] += g.v[k];
    }
    for (size_t k = 0; k < it.value.size(); ++k) {
      double g = double(it.grad.v[k]);
      double m = adam.beta1 * double(it.adam_m.v[k]) + (1.0 - adam.beta1) * g;
      double v = adam.beta2 * double(it.adam_v.v[k]) + (1.0 - adam.beta2) * g * g;
      it.adam_m.v[k] = T(m);
      it.adam_v.v[k] = T(v);
      double update = lr * (m / bc1) / (std::sqrt(v / bc2) + adam.eps);
      it.value.v[k] = T(double(it.value.v[k]) - update);
    }
  }
  return batch_loss;
}

template double train_step<float>(TinyUNet<float>&, const std::vector<TwoChannelImage>&,
                                  const NoiseSchedule&, uint64_t, long long, double,
                                  const AdamParams&);
template double train_step<double>(TinyUNet<double>&, const std::vector<TwoChannelImage>&,
                                   const NoiseSchedule&, uint64_t, long long, double,
                                   const AdamParams&);

TwoChannelImage augment_with(const TwoChannelImage& src, double angle, double scale, int crop_r,
                             int crop_c, int patch) {
  if (src.height < patch || src.width < patch)
    throw DimensionError("augment source smaller than the patch size");
  if (crop_r < 0 || crop_c < 0 || crop_r + patch > src.height || crop_c + patch > src.width)
    throw IndexError("augment crop outside the source image");
  if (scale <= 0.0) throw ConfigError("augment scale must be positive");

  const double cy = (src.height - 1) / 2.0;
  const double cx = (src.width - 1) / 2.0;
  const double ca = std::cos(angle), sa = std::sin(angle);

  auto sample = [&](const std::vector<double>& chan, double y, double x) {
    // bilinear with clamp-to-edge
    y = std::clamp(y, 0.0, double(src.height - 1));
    x = std::clamp(x, 0.0, double(src.width - 1));
    int y0 = int(y), x0 = int(x);
    int y1 = std::min(y0 + 1, src.height - 1), x1 = std::min(x0 + 1, src.width - 1);
    double fy = y - y0, fx = x - x0;
    double a = chan[size_t(y0) * src.width + x0] * (1 - fx) + chan[size_t(y0) * src.width + x1] * fx;
    double b = chan[size_t(y1) * src.width + x0] * (1 - fx) + chan[size_t(y1) * src.width + x1] * fx;
    return a * (1 - fy) + b * fy;
  };

  TwoChannelImage out(patch, patch);
  for (int r = 0; r < patch; ++r)
    for (int c = 0; c < patch; ++c) {
      double dy = (crop_r + r) - cy;
      double dx = (crop_c + c) - cx;
      double sy = cy + (ca * dy + sa * dx) / scale;
      double sx = cx + (-sa * dy + ca * dx) / scale;
      size_t k = size_t(r) * patch + c;
      out.amp[k] = std::clamp(sample(src.amp, sy, sx), -1.0, 1.0);
      out.phase[k] = sample(src.phase, sy, sx);
    }
  return out;
}

TwoChannelImage augment(const TwoChannelImage& src, const AugmentationPolicy& policy, Rng& rng) {
  double angle = 2.0 * kPi * rng.uniform();
  double scale = policy.scale_min + (policy.scale_max - policy.scale_min) * rng.uniform();
  int max_r = src.height - policy.patch;
  int max_c = src.width - policy.patch;
  if (max_r < 0 || max_c < 0)
    throw DimensionError("augment source smaller than the patch size");
  int crop_r = max_r > 0 ? int(rng.next_u64() % uint64_t(max_r + 1)) : 0;
  int crop_c = max_c > 0 ? int(rng.next_u64() % uint64_t(max_c + 1)) : 0;
  return augment_with(src, angle, scale, crop_r, crop_c, policy.patch);
}

std::vector<TwoChannelImage> sample_batch(const std::vector<TwoChannelImage>& pool,
                                          const AugmentationPolicy& policy, int batch,
                                          Rng& rng) {
  if (pool.empty()) throw ConfigError("empty training pool");
  std::vector<TwoChannelImage> out;
  out.reserve(size_t(batch));
  for (int i = 0; i < batch; ++i) {
    const TwoChannelImage& src = pool[rng.next_u64() % pool.size()];
    out.push_back(augment(src, policy, rng));
  }
  return out;
}

}  // namespace ptycho
