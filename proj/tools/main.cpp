// Copyright 2026 The ptychodiff Authors
// SPDX-License-Identifier: Apache-2.0
//
// Experiment harness: simulate | train | reconstruct | evaluate | sweep.
#include <CLI11.hpp>
#include <cstdio>

int main(int argc, char** argv) {
  CLI::App app{"ptychographic simulation, reconstruction and evaluation"};
  app.require_subcommand(1);
  CLI11_PARSE(app, argc, argv);
  return 0;
}
