// Copyright 2026 The ptychodiff Authors
// SPDX-License-Identifier: Apache-2.0
#include "ptychodiff/solvers.hpp"

#include <chrono>
#include <cmath>

#include "ptychodiff/fft.hpp"

namespace ptycho {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kEarlyStopTol = 1e-10;
constexpr int kEarlyStopWindow = 50;

ComplexField initial_object(int n, const SolverConfig& cfg) {
  ComplexField f(n, n);
  if (cfg.init == InitMode::flat) {
    for (cxd& v : f.data) v = cxd(0.9, 0.0);
  } else {
    Rng rng(cfg.seed, /*stream=*/0xF1A7u);
    for (cxd& v : f.data) {
      double ph = (2.0 * rng.uniform() - 1.0) * kPi;
      v = cxd(std::cos(ph), std::sin(ph));
    }
  }
  return f;
}

void check_inputs(const MeasurementSet& m, const Probe& probe) {
  if (m.patterns.size() != m.grid.positions.size())
    throw DimensionError("measurement patterns do not match scan positions");
  if (probe.width != m.grid.probe_width)
    throw DimensionError("probe width does not match measurement grid");
  double pmax = 0.0;
  for (const cxd& v : probe.field.data) pmax = std::max(pmax, std::abs(v));
  if (pmax <= 0.0) throw NumericError("invalid probe: zero amplitude");
}

bool early_stop(const std::vector<double>& fid, int& flat_count) {
  size_t n = fid.size();
  if (n < 2) return false;
  double prev = fid[n - 2], cur = fid[n - 1];
  double rel = std::abs(prev - cur) / std::max(std::abs(prev), 1e-300);
  flat_count = rel < kEarlyStopTol ? flat_count + 1 : 0;
  return flat_count >= kEarlyStopWindow;
}

}  // namespace

Method parse_method(const std::string& name) {
  if (name == "rpie") return Method::rpie;
  if (name == "awf") return Method::awf;
  if (name == "diffusion") return Method::diffusion;
  throw ConfigError("unknown method '" + name + "' (expected rpie | awf | diffusion)");
}

std::string method_name(Method m) {
  switch (m) {
    case Method::rpie: return "rpie";
    case Method::awf: return "awf";
    case Method::diffusion: return "diffusion";
  }
  return "?";
}

double rpie_sweep(ComplexField& f, const Probe& probe, const ScanGrid& grid,
                  const std::vector<RealImage>& y, double alpha, Rng& order_rng) {
  const int w = probe.width;
  double probe_max2 = 0.0;
  for (const cxd& v : probe.field.data) probe_max2 = std::max(probe_max2, std::norm(v));
  if (probe_max2 <= 0.0) throw NumericError("invalid probe: zero amplitude");

  std::vector<size_t> order(grid.positions.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[order_rng.next_u64() % i]);

  double fidelity = 0.0;
  ComplexField psi(w, w);
  for (size_t idx : order) {
    auto [r0, c0] = grid.positions[idx];
    const RealImage& yi = y[idx];
    for (int r = 0; r < w; ++r)
      for (int c = 0; c < w; ++c)
        psi.at(r, c) = probe.field.at(r, c) * f.at(r0 + r, c0 + c);
    ComplexField spec = psi;
    fft2_inplace(spec.data.data(), w, w, false);
    for (size_t k = 0; k < spec.size(); ++k) {
      double mag = std::abs(spec.data[k]);
      double resid = yi.data[k] - mag;
      fidelity += resid * resid;
      if (mag > 0.0) spec.data[k] *= yi.data[k] / mag;  // |Psi| = 0 keeps Psi
    }
    fft2_inplace(spec.data.data(), w, w, true);
    for (int r = 0; r < w; ++r)
      for (int c = 0; c < w; ++c) {
        size_t k = size_t(r) * w + c;
        cxd delta = spec.data[k] - psi.data[k];
        double p2 = std::norm(probe.field.data[k]);
        double denom = (1.0 - alpha) * p2 + alpha * probe_max2;
        f.at(r0 + r, c0 + c) += std::conj(probe.field.data[k]) * delta / denom;
      }
  }
  return fidelity;
}

ComplexField awf_loss_grad(const ComplexField& f, const Probe& probe, const ScanGrid& grid,
                           const std::vector<RealImage>& y, double* loss_out) {
  const int w = probe.width;
  double loss = 0.0;
  ComplexField grad(f.height, f.width);
  ComplexField z(w, w);
  for (size_t i = 0; i < grid.positions.size(); ++i) {
    auto [r0, c0] = grid.positions[i];
    for (int r = 0; r < w; ++r)
      for (int c = 0; c < w; ++c)
        z.at(r, c) = probe.field.at(r, c) * f.at(r0 + r, c0 + c);
    fft2_inplace(z.data.data(), w, w, false);
    for (size_t k = 0; k < z.size(); ++k) {
      double mag = std::abs(z.data[k]);
      double resid = mag - y[i].data[k];
      loss += resid * resid;
      cxd phase = mag > 0.0 ? z.data[k] / mag : cxd(0.0, 0.0);
      z.data[k] -= y[i].data[k] * phase;
    }
    fft2_inplace(z.data.data(), w, w, true);
    for (int r = 0; r < w; ++r)
      for (int c = 0; c < w; ++c) {
        size_t k = size_t(r) * w + c;
        grad.at(r0 + r, c0 + c) += 2.0 * std::conj(probe.field.data[k]) * z.data[k];
      }
  }
  if (loss_out) *loss_out = loss;
  return grad;
}

SolveTrace awf_solve(const MeasurementSet& m, const Probe& probe, const SolverConfig& cfg) {
  check_inputs(m, probe);
  if (cfg.iterations < 1) throw ConfigError("iterations must be >= 1");
  auto t_start = std::chrono::steady_clock::now();

  const int n = m.grid.object_size;
  ComplexField f = initial_object(n, cfg);
  ComplexField v = f;
  double tk = 1.0;
  double step = cfg.awf_step;
  double loss_prev;
  awf_loss_grad(f, probe, m.grid, m.patterns, &loss_prev);
  const double loss_initial = std::max(loss_prev, 1e-300);

  SolveTrace trace;
  trace.fidelity.reserve(size_t(cfg.iterations));
  int flat = 0;

  auto try_descend = [&](const ComplexField& from, double loss_from, const ComplexField& g,
                         ComplexField& out) {
    double s = step;
    double loss_new = loss_from;
    for (;;) {
      out = from;
      for (size_t k = 0; k < out.size(); ++k) out.data[k] -= s * g.data[k];
      awf_loss_grad(out, probe, m.grid, m.patterns, &loss_new);
      if (loss_new <= loss_from || s < 1e-16) break;
      s *= 0.5;
    }
    step = s;
    return loss_new;
  };

  ComplexField f_new(n, n);
  for (int it = 0; it < cfg.iterations; ++it) {
    double loss_v;
    ComplexField g = awf_loss_grad(v, probe, m.grid, m.patterns, &loss_v);
    double loss_new = try_descend(v, loss_v, g, f_new);
    if (loss_new > loss_prev) {
      // momentum overshoot: restart from the last accepted iterate
      tk = 1.0;
      g = awf_loss_grad(f, probe, m.grid, m.patterns, &loss_v);
      loss_new = try_descend(f, loss_v, g, f_new);
    }
    if (!std::isfinite(loss_new) || loss_new > 1e6 * loss_initial)
      throw NumericError("awf diverged at iteration " + std::to_string(it));

    if (cfg.awf_momentum) {
      double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tk * tk));
      double beta = (tk - 1.0) / t_next;
      for (size_t k = 0; k < v.size(); ++k)
        v.data[k] = f_new.data[k] + beta * (f_new.data[k] - f.data[k]);
      tk = t_next;
    } else {
      v = f_new;
    }
    f = f_new;
    loss_prev = loss_new;
    trace.fidelity.push_back(loss_new);
    step *= 1.5;  // regrow after each accepted iteration
    if (early_stop(trace.fidelity, flat)) break;
  }

  trace.final_object = std::move(f);
  trace.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return trace;
}

SolveTrace rpie_solve(const MeasurementSet& m, const Probe& probe, const SolverConfig& cfg) {
  check_inputs(m, probe);
  if (cfg.iterations < 1) throw ConfigError("iterations must be >= 1");
  if (cfg.rpie_alpha <= 0.0 || cfg.rpie_alpha > 1.0)
    throw ConfigError("rpie alpha must be in (0, 1]");
  auto t_start = std::chrono::steady_clock::now();

  ComplexField f = initial_object(m.grid.object_size, cfg);
  Rng order_rng(cfg.seed, /*stream=*/0x0D0Eu);
  SolveTrace trace;
  trace.fidelity.reserve(size_t(cfg.iterations));
  int flat = 0;
  for (int it = 0; it < cfg.iterations; ++it) {
    trace.fidelity.push_back(
        rpie_sweep(f, probe, m.grid, m.patterns, cfg.rpie_alpha, order_rng));
    if (early_stop(trace.fidelity, flat)) break;
  }
  trace.final_object = std::move(f);
  trace.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return trace;
}

SolveTrace solve(Method method, const MeasurementSet& m, const Probe& probe,
                 const SolverConfig& cfg) {
  switch (method) {
    case Method::rpie: return rpie_solve(m, probe, cfg);
    case Method::awf: return awf_solve(m, probe, cfg);
    default: throw ConfigError("solve() handles rpie and awf only");
  }
}

}  // namespace ptycho
