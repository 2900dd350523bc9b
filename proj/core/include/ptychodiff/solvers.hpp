// Copyright 2026 The ptychodiff Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ptychodiff/forward_model.hpp"

namespace ptycho {

enum class Method { rpie, awf, diffusion };
enum class InitMode { flat, random };

Method parse_method(const std::string& name);
std::string method_name(Method m);

struct SolverConfig {
  int iterations = 10000;
  double rpie_alpha = 0.1;     // relaxation in (0, 1]
  double awf_step = 1e-2;      // initial step; backtracking adapts it
  bool awf_momentum = true;    // Nesterov acceleration
  uint64_t seed = 0;
  InitMode init = InitMode::flat;
};

struct SolveTrace {
  std::vector<double> fidelity;  // per iteration: sum_i ||y_i - |A_i f|||^2
  ComplexField final_object;
  double wall_time_s = 0.0;
};

/// One rPIE sweep over all positions in a shuffled order drawn from
/// order_rng. Modulus projection keeps the spectrum where |Psi| = 0.
/// Returns the data fidelity accumulated as positions were visited.
double rpie_sweep(ComplexField& f, const Probe& probe, const ScanGrid& grid,
                  const std::vector<RealImage>& y, double alpha, Rng& order_rng);

/// Amplitude-loss Wirtinger flow: minimizes sum_i || |A_i f| - y_i ||^2 with
/// Nesterov momentum, backtracking line search (halve until decrease) and a
/// restart whenever momentum would increase the loss, which keeps the traced
/// loss non-increasing.
SolveTrace awf_solve(const MeasurementSet& m, const Probe& probe, const SolverConfig& cfg);

SolveTrace rpie_solve(const MeasurementSet& m, const Probe& probe, const SolverConfig& cfg);

/// Dispatch + initialization (flat: 0.9 + 0i, random: unit amplitude with
/// seeded random phase). Early-stops once the relative fidelity change stays
/// below 1e-10 for 50 consecutive iterations.
SolveTrace solve(Method method, const MeasurementSet& m, const Probe& probe,
                 const SolverConfig& cfg);

/// Wirtinger gradient of the AWF loss (2 sum_i A_i^H (A_i f - y_i phase(A_i f)));
/// real/imag parts are the partial derivatives w.r.t. Re(f), Im(f).
ComplexField awf_loss_grad(const ComplexField& f, const Probe& probe, const ScanGrid& grid,
                           const std::vector<RealImage>& y, double* loss_out);

}  // namespace ptycho
