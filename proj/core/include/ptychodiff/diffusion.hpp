// Copyright 2026 The ptychodiff Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>

#include "ptychodiff/field.hpp"
#include "ptychodiff/rng.hpp"

namespace ptycho {

/// DDPM discretization of the variance-preserving forward SDE.
/// Levels run 0..N: x_0 is clean data, x_N is (nearly) white noise.
/// beta, alpha_bar and sigma_tilde are defined for t = 1..N;
/// alpha_bar(0) = 1 by convention and sigma_tilde(1) = 0 so the final
/// denoising step is deterministic.
struct NoiseSchedule {
  int steps = 0;  // N
  std::vector<double> beta;         // beta[t-1]
  std::vector<double> alpha_bar;    // prod_{s<=t} (1 - beta[s])
  std::vector<double> sigma_tilde;  // posterior std for the reverse kernel

  double beta_at(int t) const { return beta[size_t(t) - 1]; }
  double alpha_bar_at(int t) const { return t == 0 ? 1.0 : alpha_bar[size_t(t) - 1]; }
  double sigma_at(int t) const { return sigma_tilde[size_t(t) - 1]; }
};

/// Linear beta ramp from beta_min to beta_max over N steps.
NoiseSchedule make_schedule(int steps, double beta_min, double beta_max);

/// CSV dump (t, beta, alpha_bar, sigma_tilde) for inspection.
void dump_schedule_csv(const std::filesystem::path& path, const NoiseSchedule& s);

/// Noise predictor interface. The score at level t is
/// (-1 / sqrt(1 - alpha_bar_t)) * predict_eps(x_t, t).
struct ScoreModel {
  virtual ~ScoreModel() = default;
  virtual TwoChannelImage predict_eps(const TwoChannelImage& x_t, int t) const = 0;

  /// Whether eps_vjp is available (needed for full-gradient guidance).
  virtual bool supports_input_grad() const { return false; }

  /// (d eps / d x_t)^T seed, for back-propagating through the predictor.
  virtual TwoChannelImage eps_vjp(const TwoChannelImage& x_t, int t,
                                  const TwoChannelImage& seed) const;
};

/// Single-shot forward jump x_t -> x_{t+j}; j = 0 returns x_t without
/// consuming a draw. Requires 0 <= t, 0 <= j, t + j <= N.
TwoChannelImage noising_step(const TwoChannelImage& x_t, int t, int j, const NoiseSchedule& s,
                             Rng& rng);

/// Ancestral reverse step x_t -> x_{t-1} (1 <= t <= N); no noise at t = 1.
TwoChannelImage denoising_step(const TwoChannelImage& x_t, int t, const ScoreModel& model,
                               const NoiseSchedule& s, Rng& rng);

/// Expected clean image given the noisy state:
/// x0_hat = (x_t - sqrt(1 - alpha_bar_t) eps_hat) / sqrt(alpha_bar_t).
TwoChannelImage tweedie_x0(const TwoChannelImage& x_t, int t, const ScoreModel& model,
                           const NoiseSchedule& s);

/// Analytic score of an isotropic Gaussian mixture pushed through the
/// forward kernel: component means scale by sqrt(alpha_bar), variances
/// become alpha_bar sigma0^2 + (1 - alpha_bar). Exact oracle for sampler
/// tests, including the closed-form Jacobian needed by guidance.
struct GaussianMixtureScore : ScoreModel {
  std::vector<TwoChannelImage> means;
  std::vector<double> weights;  // positive, sum to 1
  double sigma0 = 1.0;
  const NoiseSchedule* schedule = nullptr;

  GaussianMixtureScore(std::vector<TwoChannelImage> mu, std::vector<double> w, double sigma,
                       const NoiseSchedule& s);

  TwoChannelImage predict_eps(const TwoChannelImage& x_t, int t) const override;
  bool supports_input_grad() const override { return true; }
  TwoChannelImage eps_vjp(const TwoChannelImage& x_t, int t,
                          const TwoChannelImage& seed) const override;

  /// log p_t(x_t) up to the mixture's common normalization constant.
  double log_density(const TwoChannelImage& x_t, int t) const;

 private:
  std::vector<double> responsibilities(const TwoChannelImage& x_t, int t, double s2) const;
};

// Flat vector arithmetic over both channels.
TwoChannelImage tc_lincomb(double a, const TwoChannelImage& x, double b,
                           const TwoChannelImage& y);
TwoChannelImage tc_scale(double a, const TwoChannelImage& x);
double tc_dot(const TwoChannelImage& a, const TwoChannelImage& b);
TwoChannelImage tc_randn(int h, int w, Rng& rng);

}  // namespace ptycho
