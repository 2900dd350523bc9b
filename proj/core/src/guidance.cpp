// Copyright 2026 The ptychodiff Authors
// SPDX-License-Identifier: Apache-2.0
#include "ptychodiff/guidance.hpp"

#include <cmath>

#include "ptychodiff/fft.hpp"
#include "ptychodiff/parallel.hpp"

namespace ptycho {

namespace {

constexpr double kPi = 3.14159265358979323846;

void check_fidelity_inputs(const MeasurementSet& m, const Probe& probe,
                           const TwoChannelImage& x0) {
  if (m.patterns.size() != m.grid.positions.size())
    throw DimensionError("measurement patterns do not match scan positions");
  if (probe.width != m.grid.probe_width)
    throw DimensionError("probe width does not match measurement grid");
  if (x0.height != m.grid.object_size || x0.width != m.grid.object_size)
    throw DimensionError("x0 shape does not match the measurement object size");
}

}  // namespace

double l1_fidelity_value(const TwoChannelImage& x0, const MeasurementSet& m, const Probe& p) {
  check_fidelity_inputs(m, p, x0);
  ComplexField f = from_two_channel(x0);
  const int w = p.width;
  std::vector<double> partial(m.patterns.size());
  parallel_for(m.patterns.size(), [&](size_t i) {
    auto [r0, c0] = m.grid.positions[i];
    ComplexField spec(w, w);
    for (int r = 0; r < w; ++r)
      for (int c = 0; c < w; ++c)
        spec.at(r, c) = p.field.at(r, c) * f.at(r0 + r, c0 + c);
    fft2_inplace(spec.data.data(), w, w, false);
    double acc = 0.0;
    for (size_t k = 0; k < spec.size(); ++k)
      acc += std::abs(m.patterns[i].data[k] - std::abs(spec.data[k]));
    partial[i] = acc;
  });
  double total = 0.0;
  for (double v : partial) total += v;  // fixed reduction order
  return total;
}

TwoChannelImage l1_fidelity_grad_x0(const TwoChannelImage& x0, const MeasurementSet& m,
                                    const Probe& p) {
  check_fidelity_inputs(m, p, x0);
  ComplexField f = from_two_channel(x0);
  const int w = p.width;

  std::vector<ComplexField> patch_grads(m.patterns.size());
  parallel_for(m.patterns.size(), [&](size_t i) {
    auto [r0, c0] = m.grid.positions[i];
    ComplexField spec(w, w);
    for (int r = 0; r < w; ++r)
      for (int c = 0; c < w; ++c)
        spec.at(r, c) = p.field.at(r, c) * f.at(r0 + r, c0 + c);
    fft2_inplace(spec.data.data(), w, w, false);
    for (size_t k = 0; k < spec.size(); ++k) {
      double mag = std::abs(spec.data[k]);
      double resid = m.patterns[i].data[k] - mag;
      double sign = resid > 0.0 ? 1.0 : (resid < 0.0 ? -1.0 : 0.0);
      spec.data[k] = mag > 0.0 ? -sign * spec.data[k] / mag : cxd(0.0, 0.0);
    }
    fft2_inplace(spec.data.data(), w, w, true);
    for (size_t k = 0; k < spec.size(); ++k)
      spec.data[k] *= std::conj(p.field.data[k]);
    patch_grads[i] = std::move(spec);
  });

  ComplexField g(x0.height, x0.width);
  for (size_t i = 0; i < patch_grads.size(); ++i)
    embed_patch_add(patch_grads[i], m.grid.positions[i], g);

  // chain through the normalization: f = a e^{i phi}, a = (amp'+1)/2
  // (clamped at zero), phi = pi * phase'
  TwoChannelImage out(x0.height, x0.width);
  for (size_t k = 0; k < out.pixels(); ++k) {
    double ph = kPi * x0.phase[k];
    cxd eip(std::cos(ph), std::sin(ph));
    double damp = x0.amp[k] < -1.0 ? 0.0 : 0.5;  // clamp region has zero slope
    out.amp[k] = damp * std::real(std::conj(g.data[k]) * eip);
    out.phase[k] = kPi * std::imag(g.data[k] * std::conj(f.data[k]));
  }
  return out;
}

L1MagnitudeFidelity::L1MagnitudeFidelity(const MeasurementSet& m, const Probe& probe)
    : m_(&m), probe_(&probe) {}

double L1MagnitudeFidelity::value(const TwoChannelImage& x0) const {
  return l1_fidelity_value(x0, *m_, *probe_);
}

TwoChannelImage L1MagnitudeFidelity::grad_x0(const TwoChannelImage& x0) const {
  return l1_fidelity_grad_x0(x0, *m_, *probe_);
}

L2LinearFidelity::L2LinearFidelity(TwoChannelImage target, double noise_var)
    : y_(std::move(target)), var_(noise_var) {
  if (var_ <= 0.0) throw ConfigError("noise variance must be positive");
}

double L2LinearFidelity::value(const TwoChannelImage& x0) const {
  require_same_shape(x0, y_);
  double acc = 0.0;
  for (size_t i = 0; i < x0.pixels(); ++i) {
    double da = x0.amp[i] - y_.amp[i];
    double dp = x0.phase[i] - y_.phase[i];
    acc += da * da + dp * dp;
  }
  return 0.5 * acc / var_;
}

TwoChannelImage L2LinearFidelity::grad_x0(const TwoChannelImage& x0) const {
  require_same_shape(x0, y_);
  return tc_scale(1.0 / var_, tc_lincomb(1.0, x0, -1.0, y_));
}

GuidanceGrad guidance_grad_xt(const TwoChannelImage& x_t, int t, const ScoreModel& model,
                              const NoiseSchedule& s, const DataFidelity& fidelity,
                              GradientMode mode) {
  TwoChannelImage x0 = tweedie_x0(x_t, t, model, s);
  double ab = s.alpha_bar_at(t);
  double inv_root = 1.0 / std::sqrt(ab);

  GuidanceGrad out;
  out.fidelity = fidelity.value(x0);
  TwoChannelImage g0 = fidelity.grad_x0(x0);
  if (mode == GradientMode::surrogate) {
    out.grad = tc_scale(inv_root, g0);
    return out;
  }
  TwoChannelImage jv = model.eps_vjp(x_t, t, g0);
  out.grad = tc_lincomb(inv_root, g0, -std::sqrt(1.0 - ab) * inv_root, jv);
  return out;
}

namespace {

struct GuidedStepper {
  const DataFidelity& fidelity;
  const ScoreModel& model;
  const NoiseSchedule& s;
  const GuidanceConfig& cfg;
  Rng& rng;

  // One guided reverse step x_t -> x_{t-1}. Matches denoising_step's RNG
  // consumption exactly so the j = 0 chain is bitwise identical to the
  // plain guided chain.
  TwoChannelImage operator()(const TwoChannelImage& x, int t, double* fidelity_out) {
    TwoChannelImage next = denoising_step(x, t, model, s, rng);
    if (cfg.zeta0 == 0.0) {
      if (fidelity_out) *fidelity_out = 0.0;
      return next;
    }
    GuidanceGrad gg = guidance_grad_xt(x, t, model, s, fidelity, cfg.mode);
    double zeta;
    if (cfg.zeta == ZetaMode::residual) {
      zeta = cfg.zeta0 / (gg.fidelity + 1e-8);
    } else {
      double b = s.beta_at(t);
      zeta = cfg.zeta0 * b / std::sqrt(1.0 - b);
    }
    next = tc_lincomb(1.0, next, -zeta, gg.grad);
    for (size_t i = 0; i < next.pixels(); ++i)
      if (!std::isfinite(next.amp[i]) || !std::isfinite(next.phase[i]))
        throw NumericError("guidance blow-up at step t=" + std::to_string(t) +
                           " with zeta=" + std::to_string(zeta));
    if (fidelity_out) *fidelity_out = gg.fidelity;
    return next;
  }
};

}  // namespace

ReconResult reconstruct(const DataFidelity& fidelity, const ScoreModel& model,
                        const NoiseSchedule& s, const GuidanceConfig& cfg, int height,
                        int width, const SnapshotFn& snapshot) {
  if (cfg.travel_j < 0) throw ConfigError("time-travel depth must be >= 0");
  if (cfg.travel_stride < 1) throw ConfigError("travel stride must be >= 1");
  if (cfg.zeta0 < 0.0) throw ConfigError("zeta0 must be >= 0");

  Rng rng(cfg.seed, /*stream=*/0xD1F5u);
  TwoChannelImage x = tc_randn(height, width, rng);
  ReconResult res;
  const int N = s.steps;
  const int j = cfg.travel_j;

  for (int t = N; t >= 1; --t) {
    bool eligible = j > 0 && t + j <= N - 1 && ((N - 1 - t) % cfg.travel_stride == 0);
    if (eligible) {
      x = noising_step(x, t, j, s, rng);
      GuidedStepper step{fidelity, model, s, cfg, rng};
      for (int i = 0; i < j; ++i) {
        x = step(x, t + j - i, nullptr);
        ++res.trace.travel_guided_steps;
      }
      ++res.trace.travel_events;
    }
    GuidedStepper step{fidelity, model, s, cfg, rng};
    double val = 0.0;
    x = step(x, t, &val);
    ++res.trace.outer_steps;
    if (cfg.zeta0 != 0.0) res.trace.fidelity.push_back(val);
    if (snapshot && cfg.snapshot_every > 0 && ((N - t) % cfg.snapshot_every == 0))
      snapshot(t - 1, x);
  }

  res.trace.final_fidelity = fidelity.value(x);
  if (!std::isfinite(res.trace.final_fidelity))
    throw NumericError("non-finite final fidelity after reconstruction");
  res.x0 = std::move(x);
  res.object = from_two_channel(res.x0);
  return res;
}

ReconResult reconstruct_ptycho(const MeasurementSet& m, const Probe& probe,
                               const ScoreModel& model, const NoiseSchedule& s,
                               const GuidanceConfig& cfg, const SnapshotFn& snapshot) {
  L1MagnitudeFidelity fid(m, probe);
  return reconstruct(fid, model, s, cfg, m.grid.object_size, m.grid.object_size, snapshot);
}

}  // namespace ptycho
