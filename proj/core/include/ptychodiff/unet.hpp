// Copyright 2026 The ptychodiff Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>

#include "ptychodiff/diffusion.hpp"
#include "ptychodiff/rng.hpp"
#include "ptychodiff/tape.hpp"

namespace ptycho {

/// Desk-scale two-channel eps-predictor: 3 levels (widths 16/32/64), two
/// residual blocks per level on each side, 2x average-pool down and
/// nearest-neighbor up, single-head self-attention at the bottleneck,
/// sinusoidal time embedding injected per block via scale-shift. Input and
/// output are [2, H, W] with H, W divisible by 4; the network itself is
/// resolution-agnostic (a 32x32 training patch puts the bottleneck at 8x8).
struct UNetConfig {
  int in_channels = 2;
  int base_width = 16;
  int levels = 3;
  int temb_dim = 64;
  int temb_hidden = 128;
  uint64_t init_seed = 1;
  bool zero_init_out = true;  // eps identically 0 at initialization
};

template <typename T>
struct ParamStore {
  struct Item {
    std::string name;
    ad::Tensor<T> value;
    ad::Tensor<T> grad;
    ad::Tensor<T> adam_m, adam_v;
  };
  std::vector<Item> items;

  int add(std::string name, ad::Tensor<T> init) {
    Item it;
    it.name = std::move(name);
    it.grad = ad::Tensor<T>(init.c, init.h, init.w);
    it.adam_m = it.grad;
    it.adam_v = it.grad;
    it.value = std::move(init);
    items.push_back(std::move(it));
    return int(items.size()) - 1;
  }
  void zero_grad() {
    for (Item& it : items) std::fill(it.grad.v.begin(), it.grad.v.end(), T(0));
  }
  size_t scalar_count() const {
    size_t n = 0;
    for (const Item& it : items) n += it.value.size();
    return n;
  }
};

template <typename T>
class TinyUNet {
 public:
  explicit TinyUNet(const UNetConfig& cfg);

  const UNetConfig& config() const { return cfg_; }
  ParamStore<T>& params() { return store_; }
  const ParamStore<T>& params() const { return store_; }
  size_t parameter_count() const { return store_.scalar_count(); }

  /// Records the forward pass; with_param_grads controls whether parameters
  /// are registered as differentiable leaves (training) or constants
  /// (inference / input-gradient only). grad_sinks, when given, receives the
  /// parameter gradients instead of the store (one tensor per parameter, in
  /// store order) so data-parallel batch items can keep private buffers.
  ad::Var forward(ad::Tape<T>& tape, ad::Var x, int t, bool with_param_grads,
                  std::vector<ad::Tensor<T>>* grad_sinks = nullptr);

  TwoChannelImage predict(const TwoChannelImage& x, int t);
  TwoChannelImage input_vjp(const TwoChannelImage& x, int t, const TwoChannelImage& seed);

 private:
  struct Block {
    int cin = 0, cout = 0;
    int n1g, n1b, c1w, c1b, tw, tb, n2g, n2b, c2w, c2b;
    int skw = -1, skb = -1;
  };
  struct Attn {
    int ng, nb, qw, qb, kw, kb, vw, vb, ow, ob;
  };

  Block make_block(const std::string& name, int cin, int cout, Rng& rng);
  ad::Var run_block(ad::Tape<T>& t, const Block& b, ad::Var x, ad::Var temb_act,
                    bool with_param_grads, std::vector<ad::Tensor<T>>* sinks);
  ad::Var run_attn(ad::Tape<T>& t, ad::Var x, bool with_param_grads,
                   std::vector<ad::Tensor<T>>* sinks);
  ad::Var reg(ad::Tape<T>& t, int idx, bool with_param_grads,
              std::vector<ad::Tensor<T>>* sinks);

  UNetConfig cfg_;
  ParamStore<T> store_;
  int time_w1_, time_b1_, time_w2_, time_b2_;
  int stem_w_, stem_b_;
  Block e1a_, e1b_, e2a_, e2b_, e3a_, e3b_;
  Attn attn_;
  Block d2a_, d2b_, d1a_, d1b_;
  int out_ng_, out_nb_, out_w_, out_b_;
};

/// Sinusoidal embedding of an integer step (half sines, half cosines).
template <typename T>
ad::Tensor<T> sinusoidal_embedding(int t, int dim);

template <typename T>
ad::Tensor<T> to_tensor(const TwoChannelImage& x);
template <typename T>
TwoChannelImage from_tensor(const ad::Tensor<T>& t);

/// ScoreModel adapter with a 64-bit boundary around a T-precision net.
template <typename T>
class UNetScore : public ScoreModel {
 public:
  explicit UNetScore(TinyUNet<T>& net) : net_(&net) {}
  TwoChannelImage predict_eps(const TwoChannelImage& x, int t) const override {
    return net_->predict(x, t);
  }
  bool supports_input_grad() const override { return true; }
  TwoChannelImage eps_vjp(const TwoChannelImage& x, int t,
                          const TwoChannelImage& seed) const override {
    return net_->input_vjp(x, t, seed);
  }

 private:
  TinyUNet<T>* net_;
};

/// Versioned parameter container ("PTYN"). include_opt adds the Adam moments
/// and step counter so training can resume bit-exactly.
template <typename T>
void save_net(const TinyUNet<T>& net, const std::filesystem::path& path,
              bool include_opt = false, uint64_t step = 0);

template <typename T>
struct LoadedNet {
  TinyUNet<T> net;
  uint64_t step = 0;
  bool has_opt = false;
};

/// Rebuilds a net from the stored hyperparameters.
template <typename T>
LoadedNet<T> load_net(const std::filesystem::path& path);

/// Loads into an existing net; throws FormatError naming the first layer
/// whose shape or name disagrees (and on hyperparameter mismatch).
template <typename T>
uint64_t load_net_into(TinyUNet<T>& net, const std::filesystem::path& path);

}  // namespace ptycho
