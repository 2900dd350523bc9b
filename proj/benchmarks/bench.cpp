// Copyright 2026 The ptychodiff Authors
// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <ptychodiff/fft.hpp>
#include <ptychodiff/forward_model.hpp>
#include <ptychodiff/phantom.hpp>
#include <ptychodiff/rng.hpp>

namespace {

using namespace ptycho;

void BM_fft2(benchmark::State& state) {
  int n = int(state.range(0));
  Rng rng(1);
  ComplexField x(n, n);
  for (cxd& v : x.data) v = cxd(rng.uniform(), rng.uniform());
  for (auto _ : state) {
    fft2_inplace(x.data.data(), n, n, false);
    fft2_inplace(x.data.data(), n, n, true);
    benchmark::DoNotOptimize(x.data.data());
  }
  state.SetItemsProcessed(2 * state.iterations());
}
BENCHMARK(BM_fft2)->Arg(16)->Arg(64)->Arg(256);

void BM_forward_amplitudes(benchmark::State& state) {
  Phantom ph = make_phantom(64, 7);
  Probe p = make_probe(16);
  ScanGrid g = raster_grid(64, 16, int(state.range(0)));
  for (auto _ : state) {
    auto amps = forward_amplitudes(ph.object, p, g);
    benchmark::DoNotOptimize(amps.data());
  }
  state.SetItemsProcessed(int64_t(g.positions.size()) * state.iterations());
}
BENCHMARK(BM_forward_amplitudes)->Arg(4)->Arg(12);

}  // namespace

BENCHMARK_MAIN();
