// Copyright 2026 The ptychodiff Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>

#include "ptychodiff/diffusion.hpp"
#include "ptychodiff/forward_model.hpp"

namespace ptycho {

enum class GradientMode { full, surrogate };
enum class FidelityKind { l1_magnitude, l2_linear };
enum class ZetaMode { residual, ddpm };

/// Posterior-sampling reconstruction settings. zeta0 = 0 disables guidance
/// (plain ancestral sampling). travel_j / travel_stride control the
/// time-travel strategy: every travel_stride outer steps (when t + j <= N-1)
/// the state is reverted j levels and re-denoised with guidance, replacing
/// the current state before the outer step continues. travel_stride = 1 is
/// the literal every-step inner loop.
struct GuidanceConfig {
  double zeta0 = 1.0;
  int travel_j = 10;
  int travel_stride = 10;
  GradientMode mode = GradientMode::full;
  ZetaMode zeta = ZetaMode::residual;
  uint64_t seed = 0;
  int snapshot_every = 0;  // 0 = no snapshots
};

/// Measurement-consistency term evaluated at the clean-image estimate.
/// gradient_wrt_x0 is a (sub)gradient of value in the normalized
/// two-channel space.
struct DataFidelity {
  virtual ~DataFidelity() = default;
  virtual double value(const TwoChannelImage& x0) const = 0;
  virtual TwoChannelImage grad_x0(const TwoChannelImage& x0) const = 0;
};

/// sum_i sum_px | y_i - |fft2(P .* D_i f)| | with f = from_two_channel(x0).
/// Subgradient conventions: sign(0) = 0 and d|z| = 0 at z = 0.
class L1MagnitudeFidelity : public DataFidelity {
 public:
  L1MagnitudeFidelity(const MeasurementSet& m, const Probe& probe);
  double value(const TwoChannelImage& x0) const override;
  TwoChannelImage grad_x0(const TwoChannelImage& x0) const override;

 private:
  const MeasurementSet* m_;
  const Probe* probe_;
};

/// Gaussian lin-obs surrogate 0.5 ||y - x0||^2 / noise_var with the identity
/// forward operator, used by the conjugate-Gaussian sampler oracle.
class L2LinearFidelity : public DataFidelity {
 public:
  L2LinearFidelity(TwoChannelImage target, double noise_var);
  double value(const TwoChannelImage& x0) const override;
  TwoChannelImage grad_x0(const TwoChannelImage& x0) const override;

 private:
  TwoChannelImage y_;
  double var_;
};

double l1_fidelity_value(const TwoChannelImage& x0, const MeasurementSet& m, const Probe& p);
TwoChannelImage l1_fidelity_grad_x0(const TwoChannelImage& x0, const MeasurementSet& m,
                                    const Probe& p);

struct GuidanceGrad {
  TwoChannelImage grad;  // w.r.t. x_t
  double fidelity = 0.0; // value at x0_hat
};

/// Gradient of fidelity(x0_hat(x_t)) w.r.t. x_t. full mode back-propagates
/// through the Tweedie estimate and the noise predictor (the analytic
/// mixture supplies its closed-form Jacobian, the network its tape);
/// surrogate mode scales grad_x0 by 1/sqrt(alpha_bar), treating
/// d x0_hat / d x_t as (1/sqrt(alpha_bar)) I.
GuidanceGrad guidance_grad_xt(const TwoChannelImage& x_t, int t, const ScoreModel& model,
                              const NoiseSchedule& s, const DataFidelity& fidelity,
                              GradientMode mode);

struct ReconTrace {
  std::vector<double> fidelity;   // per outer step, value at x0_hat
  long outer_steps = 0;
  long travel_events = 0;
  long travel_guided_steps = 0;
  double final_fidelity = 0.0;
};

struct ReconResult {
  TwoChannelImage x0;
  ComplexField object;
  ReconTrace trace;
};

using SnapshotFn = std::function<void(int t, const TwoChannelImage&)>;

/// Posterior sampling with time travel, starting from white noise at level N
/// and returning the chain's clean state. Throws NumericError (with the step
/// index and zeta) if the state stops being finite.
ReconResult reconstruct(const DataFidelity& fidelity, const ScoreModel& model,
                        const NoiseSchedule& s, const GuidanceConfig& cfg, int height,
                        int width, const SnapshotFn& snapshot = nullptr);

/// Ptychographic entry point: l1-magnitude fidelity over the measurement set.
ReconResult reconstruct_ptycho(const MeasurementSet& m, const Probe& probe,
                               const ScoreModel& model, const NoiseSchedule& s,
                               const GuidanceConfig& cfg, const SnapshotFn& snapshot = nullptr);

}  // namespace ptycho
