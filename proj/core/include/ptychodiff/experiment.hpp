// Copyright 2026 The ptychodiff Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>

#include "ptychodiff/guidance.hpp"
#include "ptychodiff/phantom.hpp"
#include "ptychodiff/solvers.hpp"
#include "ptychodiff/train.hpp"

namespace ptycho {

/// Flat key=value experiment configuration. Unknown keys are rejected;
/// paths resolve relative to the config file; every command writes the
/// fully-resolved config next to its outputs.
struct ExperimentConfig {
  uint64_t seed = 42;
  int jobs = 0;  // 0 = hardware concurrency
  std::filesystem::path output_dir = "out";

  int object_size = 64;
  int train_count = 40;
  int test_count = 10;
  uint64_t object_seed = 1000;
  PhantomParams phantom;

  int probe_width = 16;
  double probe_radius_frac = 0.35;
  double probe_taper_frac = 0.2;

  std::vector<double> overlaps = {0.25, 0.5, 0.75};
  int jitter = 2;  // max shift (pixels) for the jittered variant

  double photon_max = 1e5;
  bool noiseless = false;

  Method method = Method::rpie;
  SolverConfig solver;

  int schedule_steps = 200;
  double beta_min = 1e-4;
  double beta_max = 0.02;

  TrainConfig train;
  int train_patch = 32;

  GuidanceConfig guidance;
  std::vector<Method> sweep_methods = {Method::rpie, Method::awf, Method::diffusion};
};

ExperimentConfig parse_config_text(const std::string& text,
                                   const std::filesystem::path& base_dir);
ExperimentConfig parse_config(const std::filesystem::path& path);
std::string render_config(const ExperimentConfig& cfg);

/// Phantoms + probe + per-(phantom, overlap) measurement sets with manifests,
/// plus a jittered variant at the lowest overlap. Fails on an existing
/// non-empty output unless force.
void cmd_simulate(const ExperimentConfig& cfg, bool force);

/// Trains the denoiser on augmented training phantoms; writes checkpoints,
/// final parameters and a step/loss/wall-time log. Resumes from the newest
/// checkpoint when one exists.
void cmd_train(const ExperimentConfig& cfg, bool force);

/// Runs cfg.method over every measurement set in the dataset; writes final
/// objects, PGM previews and fidelity traces into recon_<method>/.
void cmd_reconstruct(const ExperimentConfig& cfg, bool force);

/// Per-image and summary metrics for every reconstruction directory given,
/// grouped by method, overlap and position kind.
void cmd_evaluate(const ExperimentConfig& cfg, const std::vector<std::filesystem::path>& recon_dirs,
                  const std::filesystem::path& report_path, bool force);

/// Full pipeline: simulate, train once, reconstruct every sweep method,
/// evaluate, and emit accuracy-table and generalization-table CSVs.
void cmd_sweep(const ExperimentConfig& cfg, bool force);

// dataset access helpers (shared with tests)
struct LoadedMeasurement {
  MeasurementSet set;
  int phantom_id = 0;
  double nominal_overlap = 0.0;
  bool jittered = false;
};
LoadedMeasurement load_measurement_dir(const std::filesystem::path& dir);
std::filesystem::path dataset_dir(const ExperimentConfig& cfg);
std::filesystem::path train_dir(const ExperimentConfig& cfg);
std::filesystem::path recon_dir(const ExperimentConfig& cfg, Method m);
std::filesystem::path reports_dir(const ExperimentConfig& cfg);

}  // namespace ptycho
