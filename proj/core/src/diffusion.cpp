// Copyright 2026 The ptychodiff Authors
// SPDX-License-Identifier: Apache-2.0
#include "ptychodiff/diffusion.hpp"

#include <cmath>
#include <fstream>

namespace ptycho {

NoiseSchedule make_schedule(int steps, double beta_min, double beta_max) {
  if (steps < 1) throw ConfigError("schedule needs at least one step");
  if (!(beta_min > 0.0) || !(beta_min <= beta_max) || !(beta_max < 1.0))
    throw ConfigError("schedule requires 0 < beta_min <= beta_max < 1");

  NoiseSchedule s;
  s.steps = steps;
  s.beta.resize(size_t(steps));
  s.alpha_bar.resize(size_t(steps));
  s.sigma_tilde.resize(size_t(steps));
  double prod = 1.0;
  for (int t = 1; t <= steps; ++t) {
    double frac = steps == 1 ? 0.0 : double(t - 1) / double(steps - 1);
    double b = beta_min + (beta_max - beta_min) * frac;
    double abar_prev = prod;
    prod *= 1.0 - b;
    s.beta[size_t(t) - 1] = b;
    s.alpha_bar[size_t(t) - 1] = prod;
    s.sigma_tilde[size_t(t) - 1] =
        t == 1 ? 0.0 : std::sqrt((1.0 - abar_prev) / (1.0 - prod) * b);
  }
  return s;
}

void dump_schedule_csv(const std::filesystem::path& path, const NoiseSchedule& s) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError(path.string() + ": cannot open for writing");
  out << "t,beta,alpha_bar,sigma_tilde\n";
  char line[128];
  for (int t = 1; t <= s.steps; ++t) {
    std::snprintf(line, sizeof line, "%d,%.17g,%.17g,%.17g\n", t, s.beta_at(t),
                  s.alpha_bar_at(t), s.sigma_at(t));
    out << line;
  }
}

TwoChannelImage ScoreModel::eps_vjp(const TwoChannelImage&, int, const TwoChannelImage&) const {
  throw NumericError("score model does not support input gradients");
}

namespace {

void check_level(int t, int lo, int hi, const char* what) {
  if (t < lo || t > hi)
    throw IndexError(std::string(what) + ": level " + std::to_string(t) + " outside [" +
                     std::to_string(lo) + ", " + std::to_string(hi) + "]");
}

}  // namespace

TwoChannelImage noising_step(const TwoChannelImage& x_t, int t, int j, const NoiseSchedule& s,
                             Rng& rng) {
  if (j < 0) throw IndexError("noising_step: negative jump");
  check_level(t, 0, s.steps, "noising_step");
  check_level(t + j, 0, s.steps, "noising_step target");
  if (j == 0) return x_t;
  double ratio = s.alpha_bar_at(t + j) / s.alpha_bar_at(t);
  double keep = std::sqrt(ratio);
  double add = std::sqrt(1.0 - ratio);
  TwoChannelImage out(x_t.height, x_t.width);
  for (size_t i = 0; i < out.pixels(); ++i) {
    out.amp[i] = keep * x_t.amp[i] + add * rng.normal();
    out.phase[i] = keep * x_t.phase[i] + add * rng.normal();
  }
  return out;
}

TwoChannelImage denoising_step(const TwoChannelImage& x_t, int t, const ScoreModel& model,
                               const NoiseSchedule& s, Rng& rng) {
  check_level(t, 1, s.steps, "denoising_step");
  TwoChannelImage eps = model.predict_eps(x_t, t);
  require_same_shape(eps, x_t);
  double b = s.beta_at(t);
  double inv_sqrt_alpha = 1.0 / std::sqrt(1.0 - b);
  double eps_coef = b / std::sqrt(1.0 - s.alpha_bar_at(t));
  double sigma = s.sigma_at(t);
  TwoChannelImage out(x_t.height, x_t.width);
  for (size_t i = 0; i < out.pixels(); ++i) {
    out.amp[i] = inv_sqrt_alpha * (x_t.amp[i] - eps_coef * eps.amp[i]);
    out.phase[i] = inv_sqrt_alpha * (x_t.phase[i] - eps_coef * eps.phase[i]);
  }
  if (t > 1 && sigma > 0.0) {
    for (size_t i = 0; i < out.pixels(); ++i) {
      out.amp[i] += sigma * rng.normal();
      out.phase[i] += sigma * rng.normal();
    }
  }
  return out;
}

TwoChannelImage tweedie_x0(const TwoChannelImage& x_t, int t, const ScoreModel& model,
                           const NoiseSchedule& s) {
  check_level(t, 1, s.steps, "tweedie_x0");
  TwoChannelImage eps = model.predict_eps(x_t, t);
  double ab = s.alpha_bar_at(t);
  return tc_lincomb(1.0 / std::sqrt(ab), x_t, -std::sqrt(1.0 - ab) / std::sqrt(ab), eps);
}

GaussianMixtureScore::GaussianMixtureScore(std::vector<TwoChannelImage> mu,
                                           std::vector<double> w, double sigma,
                                           const NoiseSchedule& s)
    : means(std::move(mu)), weights(std::move(w)), sigma0(sigma), schedule(&s) {
  if (means.empty() || means.size() != weights.size())
    throw ConfigError("mixture needs matching means and weights");
  if (sigma0 <= 0.0) throw ConfigError("mixture sigma0 must be positive");
  double sum = 0.0;
  for (double v : weights) {
    if (v <= 0.0) throw ConfigError("mixture weights must be positive");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("mixture weights must sum to 1");
}

std::vector<double> GaussianMixtureScore::responsibilities(const TwoChannelImage& x_t, int t,
                                                           double s2) const {
  double ab = schedule->alpha_bar_at(t);
  double root_ab = std::sqrt(ab);
  std::vector<double> logp(means.size());
  double best = -1e300;
  for (size_t k = 0; k < means.size(); ++k) {
    const TwoChannelImage& mu = means[k];
    double d2 = 0.0;
    for (size_t i = 0; i < x_t.pixels(); ++i) {
      double da = x_t.amp[i] - root_ab * mu.amp[i];
      double dp = x_t.phase[i] - root_ab * mu.phase[i];
      d2 += da * da + dp * dp;
    }
    logp[k] = std::log(weights[k]) - 0.5 * d2 / s2;
    best = std::max(best, logp[k]);
  }
  double denom = 0.0;
  for (double& v : logp) {
    v = std::exp(v - best);
    denom += v;
  }
  for (double& v : logp) v /= denom;
  return logp;
}

TwoChannelImage GaussianMixtureScore::predict_eps(const TwoChannelImage& x_t, int t) const {
  check_level(t, 1, schedule->steps, "gm_predict_eps");
  double ab = schedule->alpha_bar_at(t);
  double s2 = ab * sigma0 * sigma0 + (1.0 - ab);
  double root_ab = std::sqrt(ab);
  std::vector<double> resp = responsibilities(x_t, t, s2);

  // eps = -sqrt(1 - ab) * score, score = sum_k r_k (sqrt(ab) mu_k - x) / s2
  double c = -std::sqrt(1.0 - ab) / s2;
  TwoChannelImage eps(x_t.height, x_t.width);
  for (size_t k = 0; k < means.size(); ++k) {
    double rk = resp[k];
    for (size_t i = 0; i < eps.pixels(); ++i) {
      eps.amp[i] += c * rk * (root_ab * means[k].amp[i] - x_t.amp[i]);
      eps.phase[i] += c * rk * (root_ab * means[k].phase[i] - x_t.phase[i]);
    }
  }
  return eps;
}

TwoChannelImage GaussianMixtureScore::eps_vjp(const TwoChannelImage& x_t, int t,
                                              const TwoChannelImage& seed) const {
  check_level(t, 1, schedule->steps, "gm eps_vjp");
  double ab = schedule->alpha_bar_at(t);
  double s2 = ab * sigma0 * sigma0 + (1.0 - ab);
  double root_ab = std::sqrt(ab);
  std::vector<double> resp = responsibilities(x_t, t, s2);

  // Hessian of log p_t applied to seed:
  //   H v = sum_k r_k (-v/s2 + g_k <g_k, v>) - g_bar <g_bar, v>
  // with g_k = (sqrt(ab) mu_k - x) / s2; eps Jacobian = -sqrt(1-ab) H.
  size_t n = x_t.pixels();
  TwoChannelImage gbar(x_t.height, x_t.width);
  std::vector<TwoChannelImage> g(means.size(), TwoChannelImage(x_t.height, x_t.width));
  for (size_t k = 0; k < means.size(); ++k) {
    for (size_t i = 0; i < n; ++i) {
      g[k].amp[i] = (root_ab * means[k].amp[i] - x_t.amp[i]) / s2;
      g[k].phase[i] = (root_ab * means[k].phase[i] - x_t.phase[i]) / s2;
      gbar.amp[i] += resp[k] * g[k].amp[i];
      gbar.phase[i] += resp[k] * g[k].phase[i];
    }
  }
  TwoChannelImage hv(x_t.height, x_t.width);
  double rsum = 0.0;
  for (double r : resp) rsum += r;
  for (size_t i = 0; i < n; ++i) {
    hv.amp[i] = -rsum * seed.amp[i] / s2;
    hv.phase[i] = -rsum * seed.phase[i] / s2;
  }
  for (size_t k = 0; k < means.size(); ++k) {
    double gk_dot_v = tc_dot(g[k], seed);
    for (size_t i = 0; i < n; ++i) {
      hv.amp[i] += resp[k] * g[k].amp[i] * gk_dot_v;
      hv.phase[i] += resp[k] * g[k].phase[i] * gk_dot_v;
    }
  }
  double gbar_dot_v = tc_dot(gbar, seed);
  for (size_t i = 0; i < n; ++i) {
    hv.amp[i] -= gbar.amp[i] * gbar_dot_v;
    hv.phase[i] -= gbar.phase[i] * gbar_dot_v;
  }
  return tc_scale(-std::sqrt(1.0 - ab), hv);
}

double GaussianMixtureScore::log_density(const TwoChannelImage& x_t, int t) const {
  double ab = schedule->alpha_bar_at(t);
  double s2 = ab * sigma0 * sigma0 + (1.0 - ab);
  double root_ab = std::sqrt(ab);
  double best = -1e300;
  std::vector<double> logp(means.size());
  for (size_t k = 0; k < means.size(); ++k) {
    double d2 = 0.0;
    for (size_t i = 0; i < x_t.pixels(); ++i) {
      double da = x_t.amp[i] - root_ab * means[k].amp[i];
      double dp = x_t.phase[i] - root_ab * means[k].phase[i];
      d2 += da * da + dp * dp;
    }
    logp[k] = std::log(weights[k]) - 0.5 * d2 / s2;
    best = std::max(best, logp[k]);
  }
  double sum = 0.0;
  for (double v : logp) sum += std::exp(v - best);
  return best + std::log(sum);
}

TwoChannelImage tc_lincomb(double a, const TwoChannelImage& x, double b,
                           const TwoChannelImage& y) {
  require_same_shape(x, y);
  TwoChannelImage out(x.height, x.width);
  for (size_t i = 0; i < out.pixels(); ++i) {
    out.amp[i] = a * x.amp[i] + b * y.amp[i];
    out.phase[i] = a * x.phase[i] + b * y.phase[i];
  }
  return out;
}

TwoChannelImage tc_scale(double a, const TwoChannelImage& x) {
  TwoChannelImage out = x;
  for (double& v : out.amp) v *= a;
  for (double& v : out.phase) v *= a;
  return out;
}

double tc_dot(const TwoChannelImage& a, const TwoChannelImage& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.pixels(); ++i)
    s += a.amp[i] * b.amp[i] + a.phase[i] * b.phase[i];
  return s;
}

TwoChannelImage tc_randn(int h, int w, Rng& rng) {
  TwoChannelImage out(h, w);
  for (double& v : out.amp) v = rng.normal();
  for (double& v : out.phase) v = rng.normal();
  return out;
}

}  // namespace ptycho
