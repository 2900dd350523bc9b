// Copyright 2026 The ptychodiff Authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <functional>
#include <ptychodiff/rng.hpp>
#include <ptychodiff/tape.hpp>

using namespace ptycho;
using ad::Tensor;
using ad::Var;

namespace {

using Td = Tensor<double>;

Td randt(int c, int h, int w, Rng& rng, double scale = 1.0) {
  Td t(c, h, w);
  for (double& v : t.v) v = scale * (2.0 * rng.uniform() - 1.0);
  return t;
}

// Builds a scalar loss from freely-varied inputs; returns the loss Var and
// the Vars of the inputs (in order) so gradients can be read back.
using Builder = std::function<Var(ad::Tape<double>&, const std::vector<Td>&, std::vector<Var>&)>;

void gradcheck(const Builder& build, std::vector<Td> inputs, Rng& rng, int probes = 12,
               double tol = 1e-7) {
  ad::Tape<double> tape;
  std::vector<Var> vars;
  Var loss = build(tape, inputs, vars);
  Td seed(1, 1, 1);
  seed.v[0] = 1.0;
  tape.backward(loss, seed);

  std::vector<Td> analytic;
  for (Var v : vars) analytic.push_back(tape.grad(v));

  for (int p = 0; p < probes; ++p) {
    size_t which = rng.next_u64() % inputs.size();
    size_t coord = rng.next_u64() % inputs[which].size();
    double x0 = inputs[which].v[coord];
    double h = 1e-5 * (1.0 + std::abs(x0));

    auto eval = [&](double xv) {
      std::vector<Td> in = inputs;
      in[which].v[coord] = xv;
      ad::Tape<double> t2;
      std::vector<Var> vs;
      Var l = build(t2, in, vs);
      return t2.val(l).v[0];
    };
    double fd = (eval(x0 + h) - eval(x0 - h)) / (2.0 * h);
    double an = analytic[which].v[coord];
    double rel = std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-6});
    INFO("input ", which, " coord ", coord, " analytic ", an, " fd ", fd);
    // central differences in double bottom out near 1e-11 absolute
    bool ok = rel < tol || std::abs(an - fd) < 1e-10;
    CHECK(ok);
  }
}

Td rand_target(int c, int h, int w, Rng& rng) { return randt(c, h, w, rng); }

}  // namespace

TEST_CASE("conv3x3 gradients match finite differences") {
  Rng rng(1);
  Td x = randt(3, 6, 5, rng), w = randt(4, 3, 9, rng, 0.5), b = randt(4, 1, 1, rng, 0.2);
  Td target = rand_target(4, 6, 5, rng);
  gradcheck(
      [&](ad::Tape<double>& t, const std::vector<Td>& in, std::vector<Var>& vars) {
        Var xv = t.input(in[0]), wv = t.input(in[1]), bv = t.input(in[2]);
        vars = {xv, wv, bv};
        return t.mse_loss(t.conv3x3(xv, wv, bv), target);
      },
      {x, w, b}, rng, 18);
}

TEST_CASE("conv1x1 and linear gradients match finite differences") {
  Rng rng(2);
  Td x = randt(5, 4, 4, rng), w = randt(3, 5, 1, rng), b = randt(3, 1, 1, rng);
  Td target = rand_target(3, 4, 4, rng);
  gradcheck(
      [&](ad::Tape<double>& t, const std::vector<Td>& in, std::vector<Var>& vars) {
        Var xv = t.input(in[0]), wv = t.input(in[1]), bv = t.input(in[2]);
        vars = {xv, wv, bv};
        return t.mse_loss(t.conv1x1(xv, wv, bv), target);
      },
      {x, w, b}, rng, 12);

  Td xl = randt(7, 1, 1, rng), wl = randt(4, 7, 1, rng), bl = randt(4, 1, 1, rng);
  Td tl = rand_target(4, 1, 1, rng);
  gradcheck(
      [&](ad::Tape<double>& t, const std::vector<Td>& in, std::vector<Var>& vars) {
        Var xv = t.input(in[0]), wv = t.input(in[1]), bv = t.input(in[2]);
        vars = {xv, wv, bv};
        return t.mse_loss(t.linear(xv, wv, bv), tl);
      },
      {xl, wl, bl}, rng, 12);
}

TEST_CASE("silu gradient matches finite differences") {
  Rng rng(3);
  Td x = randt(2, 5, 5, rng, 2.0);
  Td target = rand_target(2, 5, 5, rng);
  gradcheck(
      [&](ad::Tape<double>& t, const std::vector<Td>& in, std::vector<Var>& vars) {
        Var xv = t.input(in[0]);
        vars = {xv};
        return t.mse_loss(t.silu(xv), target);
      },
      {x}, rng);
}

TEST_CASE("channel_norm gradients match finite differences") {
  Rng rng(4);
  Td x = randt(3, 4, 6, rng), g = randt(3, 1, 1, rng), b = randt(3, 1, 1, rng);
  Td target = rand_target(3, 4, 6, rng);
  gradcheck(
      [&](ad::Tape<double>& t, const std::vector<Td>& in, std::vector<Var>& vars) {
        Var xv = t.input(in[0]), gv = t.input(in[1]), bv = t.input(in[2]);
        vars = {xv, gv, bv};
        return t.mse_loss(t.channel_norm(xv, gv, bv), target);
      },
      {x, g, b}, rng, 18, 2e-7);
}

TEST_CASE("channel_norm standardizes each channel") {
  Rng rng(5);
  Td x = randt(4, 8, 8, rng, 3.0);
  for (double& v : x.v) v += 1.7;  // offset to make the mean matter
  Td gain(4, 1, 1), bias(4, 1, 1);
  for (double& v : gain.v) v = 1.0;
  ad::Tape<double> t;
  Var y = t.channel_norm(t.input(x), t.constant(gain), t.constant(bias));
  const Td& out = t.val(y);
  for (int c = 0; c < 4; ++c) {
    double m = 0, v2 = 0;
    const double* p = out.chan(c);
    for (int i = 0; i < 64; ++i) m += p[i];
    m /= 64;
    for (int i = 0; i < 64; ++i) v2 += (p[i] - m) * (p[i] - m);
    v2 /= 64;
    CHECK(std::abs(m) < 1e-6);
    CHECK(std::abs(v2 - 1.0) < 1e-4);
  }
}

TEST_CASE("scale_shift gradients match finite differences") {
  Rng rng(6);
  Td x = randt(3, 4, 4, rng), s = randt(3, 1, 1, rng, 0.5), b = randt(3, 1, 1, rng);
  Td target = rand_target(3, 4, 4, rng);
  gradcheck(
      [&](ad::Tape<double>& t, const std::vector<Td>& in, std::vector<Var>& vars) {
        Var xv = t.input(in[0]), sv = t.input(in[1]), bv = t.input(in[2]);
        vars = {xv, sv, bv};
        return t.mse_loss(t.scale_shift(xv, sv, bv), target);
      },
      {x, s, b}, rng);
}

TEST_CASE("pooling and upsampling gradients match finite differences") {
  Rng rng(7);
  Td x = randt(2, 6, 6, rng);
  Td t_pool = rand_target(2, 3, 3, rng);
  gradcheck(
      [&](ad::Tape<double>& t, const std::vector<Td>& in, std::vector<Var>& vars) {
        Var xv = t.input(in[0]);
        vars = {xv};
        return t.mse_loss(t.avg_pool2(xv), t_pool);
      },
      {x}, rng);

  Td x2 = randt(2, 3, 3, rng);
  Td t_up = rand_target(2, 6, 6, rng);
  gradcheck(
      [&](ad::Tape<double>& t, const std::vector<Td>& in, std::vector<Var>& vars) {
        Var xv = t.input(in[0]);
        vars = {xv};
        return t.mse_loss(t.upsample_nearest2(xv), t_up);
      },
      {x2}, rng);
}

TEST_CASE("lincomb, concat and slice gradients match finite differences") {
  Rng rng(8);
  Td a = randt(2, 3, 3, rng), b = randt(2, 3, 3, rng);
  Td t_lin = rand_target(2, 3, 3, rng);
  gradcheck(
      [&](ad::Tape<double>& t, const std::vector<Td>& in, std::vector<Var>& vars) {
        Var av = t.input(in[0]), bv = t.input(in[1]);
        vars = {av, bv};
        return t.mse_loss(t.lincomb(0.7, av, -1.3, bv), t_lin);
      },
      {a, b}, rng);

  Td t_cat = rand_target(3, 3, 3, rng);
  Td c1 = randt(1, 3, 3, rng), c2 = randt(2, 3, 3, rng);
  gradcheck(
      [&](ad::Tape<double>& t, const std::vector<Td>& in, std::vector<Var>& vars) {
        Var av = t.input(in[0]), bv = t.input(in[1]);
        vars = {av, bv};
        return t.mse_loss(t.concat(av, bv), t_cat);
      },
      {c1, c2}, rng);

  Td s = randt(5, 2, 2, rng);
  Td t_slice = rand_target(2, 2, 2, rng);
  gradcheck(
      [&](ad::Tape<double>& t, const std::vector<Td>& in, std::vector<Var>& vars) {
        Var xv = t.input(in[0]);
        vars = {xv};
        return t.mse_loss(t.slice_c(xv, 1, 2), t_slice);
      },
      {s}, rng);
}

TEST_CASE("attention gradients match finite differences") {
  Rng rng(9);
  Td q = randt(3, 2, 3, rng), k = randt(3, 2, 3, rng), v = randt(3, 2, 3, rng);
  Td target = rand_target(3, 2, 3, rng);
  gradcheck(
      [&](ad::Tape<double>& t, const std::vector<Td>& in, std::vector<Var>& vars) {
        Var qv = t.input(in[0]), kv = t.input(in[1]), vv = t.input(in[2]);
        vars = {qv, kv, vv};
        return t.mse_loss(t.attention(qv, kv, vv), target);
      },
      {q, k, v}, rng, 24, 2e-7);
}

TEST_CASE("attention rows are convex combinations") {
  Rng rng(10);
  Td q = randt(4, 4, 4, rng, 2.0), k = randt(4, 4, 4, rng, 2.0);
  std::vector<double> A = ad::attention_weights(q, k);
  const int n = 16;
  for (int i = 0; i < n; ++i) {
    double sum = 0.0;
    for (int j = 0; j < n; ++j) {
      CHECK(A[i * n + j] >= 0.0);
      sum += A[i * n + j];
    }
    CHECK(std::abs(sum - 1.0) < 1e-6);
  }
}

TEST_CASE("mse_loss value and gradient") {
  Rng rng(11);
  Td p = randt(2, 3, 3, rng), target = randt(2, 3, 3, rng);
  ad::Tape<double> t;
  Var pv = t.input(p);
  Var l = t.mse_loss(pv, target);
  double want = 0.0;
  for (size_t i = 0; i < p.size(); ++i) want += (p.v[i] - target.v[i]) * (p.v[i] - target.v[i]);
  want /= double(p.size());
  CHECK(t.val(l).v[0] == doctest::Approx(want).epsilon(1e-12));

  Td seed(1, 1, 1);
  seed.v[0] = 1.0;
  t.backward(l, seed);
  for (size_t i = 0; i < p.size(); ++i)
    CHECK(t.grad(pv).v[i] ==
          doctest::Approx(2.0 * (p.v[i] - target.v[i]) / double(p.size())).epsilon(1e-12));
}

TEST_CASE("parameter sinks accumulate and constants stay untracked") {
  Rng rng(12);
  Td w = randt(2, 2, 1, rng);
  Td sink(2, 2, 1);
  ad::Tape<double> t;
  Var xv = t.constant(randt(2, 2, 2, rng));
  Var wv = t.param(w, &sink);
  Var bv = t.param(Td(2, 1, 1), nullptr);
  Var y = t.conv1x1(xv, wv, bv);
  Td seed(2, 2, 2);
  for (double& v : seed.v) v = 1.0;
  t.backward(y, seed);
  double total = 0.0;
  for (double v : sink.v) total += std::abs(v);
  CHECK(total > 0.0);
  // a second backward accumulates again (same graph)
  Td snapshot = sink;
  t.backward(y, seed);
  for (size_t i = 0; i < sink.size(); ++i)
    CHECK(sink.v[i] == doctest::Approx(2.0 * snapshot.v[i]).epsilon(1e-12));
}

TEST_CASE("backward before forward and shape mismatches are rejected") {
  ad::Tape<double> t;
  Td seed(1, 1, 1);
  CHECK_THROWS_AS(t.backward(Var{}, seed), IndexError);
  Var c = t.constant(Td(1, 1, 1));
  CHECK_THROWS_AS(t.backward(c, seed), NumericError);
  Var x = t.input(Td(2, 2, 2));
  CHECK_THROWS_AS(t.backward(x, seed), DimensionError);
  Var w = t.input(Td(3, 9, 9));
  CHECK_THROWS_AS(t.conv3x3(x, w, w), DimensionError);
}
