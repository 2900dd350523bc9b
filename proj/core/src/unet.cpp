// Copyright 2026 The ptychodiff Authors
// SPDX-License-Identifier: Apache-2.0
#include "ptychodiff/unet.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace ptycho {

namespace {

template <typename T>
ad::Tensor<T> he_init(int c, int h, int w, int fan_in, Rng& rng) {
  ad::Tensor<T> t(c, h, w);
  double std_dev = std::sqrt(2.0 / double(fan_in));
  for (T& v : t.v) v = T(std_dev * rng.normal());
  return t;
}

template <typename T>
ad::Tensor<T> filled(int c, T value) {
  ad::Tensor<T> t(c, 1, 1);
  std::fill(t.v.begin(), t.v.end(), value);
  return t;
}

}  // namespace

template <typename T>
ad::Tensor<T> sinusoidal_embedding(int t, int dim) {
  ad::Tensor<T> emb(dim, 1, 1);
  int half = dim / 2;
  for (int i = 0; i < half; ++i) {
    double freq = std::exp(-std::log(10000.0) * double(i) / double(half - 1));
    emb.v[size_t(i)] = T(std::sin(t * freq));
    emb.v[size_t(half + i)] = T(std::cos(t * freq));
  }
  return emb;
}

template <typename T>
ad::Tensor<T> to_tensor(const TwoChannelImage& x) {
  ad::Tensor<T> t(2, x.height, x.width);
  for (size_t i = 0; i < x.pixels(); ++i) {
    t.v[i] = T(x.amp[i]);
    t.v[x.pixels() + i] = T(x.phase[i]);
  }
  return t;
}

template <typename T>
TwoChannelImage from_tensor(const ad::Tensor<T>& t) {
  if (t.c != 2) throw DimensionError("expected a two-channel tensor, got " + t.shape_str());
  TwoChannelImage x(t.h, t.w);
  for (size_t i = 0; i < x.pixels(); ++i) {
    x.amp[i] = double(t.v[i]);
    x.phase[i] = double(t.v[x.pixels() + i]);
  }
  return x;
}

template <typename T>
typename TinyUNet<T>::Block TinyUNet<T>::make_block(const std::string& name, int cin, int cout,
                                                    Rng& rng) {
  Block b;
  b.cin = cin;
  b.cout = cout;
  b.n1g = store_.add(name + ".norm1.g", filled<T>(cin, T(1)));
  b.n1b = store_.add(name + ".norm1.b", filled<T>(cin, T(0)));
  b.c1w = store_.add(name + ".conv1.w", he_init<T>(cout, cin, 9, cin * 9, rng));
  b.c1b = store_.add(name + ".conv1.b", filled<T>(cout, T(0)));
  b.tw = store_.add(name + ".temb.w", he_init<T>(2 * cout, cfg_.temb_hidden, 1, cfg_.temb_hidden, rng));
  b.tb = store_.add(name + ".temb.b", filled<T>(2 * cout, T(0)));
  b.n2g = store_.add(name + ".norm2.g", filled<T>(cout, T(1)));
  b.n2b = store_.add(name + ".norm2.b", filled<T>(cout, T(0)));
  b.c2w = store_.add(name + ".conv2.w", he_init<T>(cout, cout, 9, cout * 9, rng));
  b.c2b = store_.add(name + ".conv2.b", filled<T>(cout, T(0)));
  if (cin != cout) {
    b.skw = store_.add(name + ".skip.w", he_init<T>(cout, cin, 1, cin, rng));
    b.skb = store_.add(name + ".skip.b", filled<T>(cout, T(0)));
  }
  return b;
}

template <typename T>
TinyUNet<T>::TinyUNet(const UNetConfig& cfg) : cfg_(cfg) {
  if (cfg_.levels != 3) throw ConfigError("TinyUNet is fixed at 3 levels");
  if (cfg_.temb_dim % 2) throw ConfigError("time embedding dim must be even");
  Rng rng(cfg_.init_seed, /*stream=*/0x0217u);
  const int w1 = cfg_.base_width, w2 = 2 * w1, w3 = 4 * w1;

  time_w1_ = store_.add("time.lin1.w", he_init<T>(cfg_.temb_hidden, cfg_.temb_dim, 1, cfg_.temb_dim, rng));
  time_b1_ = store_.add("time.lin1.b", filled<T>(cfg_.temb_hidden, T(0)));
  time_w2_ = store_.add("time.lin2.w", he_init<T>(cfg_.temb_hidden, cfg_.temb_hidden, 1, cfg_.temb_hidden, rng));
  time_b2_ = store_.add("time.lin2.b", filled<T>(cfg_.temb_hidden, T(0)));

  stem_w_ = store_.add("stem.w", he_init<T>(w1, cfg_.in_channels, 9, cfg_.in_channels * 9, rng));
  stem_b_ = store_.add("stem.b", filled<T>(w1, T(0)));

  e1a_ = make_block("enc1.b1", w1, w1, rng);
  e1b_ = make_block("enc1.b2", w1, w1, rng);
  e2a_ = make_block("enc2.b1", w1, w2, rng);
  e2b_ = make_block("enc2.b2", w2, w2, rng);
  e3a_ = make_block("enc3.b1", w2, w3, rng);

  attn_.ng = store_.add("enc3.attn.norm.g", filled<T>(w3, T(1)));
  attn_.nb = store_.add("enc3.attn.norm.b", filled<T>(w3, T(0)));
  attn_.qw = store_.add("enc3.attn.q.w", he_init<T>(w3, w3, 1, w3, rng));
  attn_.qb = store_.add("enc3.attn.q.b", filled<T>(w3, T(0)));
  attn_.kw = store_.add("enc3.attn.k.w", he_init<T>(w3, w3, 1, w3, rng));
  attn_.kb = store_.add("enc3.attn.k.b", filled<T>(w3, T(0)));
  attn_.vw = store_.add("enc3.attn.v.w", he_init<T>(w3, w3, 1, w3, rng));
  attn_.vb = store_.add("enc3.attn.v.b", filled<T>(w3, T(0)));
  attn_.ow = store_.add("enc3.attn.out.w", he_init<T>(w3, w3, 1, w3, rng));
  attn_.ob = store_.add("enc3.attn.out.b", filled<T>(w3, T(0)));

  e3b_ = make_block("enc3.b2", w3, w3, rng);

  d2a_ = make_block("dec2.b1", w3 + w2, w2, rng);
  d2b_ = make_block("dec2.b2", w2, w2, rng);
  d1a_ = make_block("dec1.b1", w2 + w1, w1, rng);
  d1b_ = make_block("dec1.b2", w1, w1, rng);

  out_ng_ = store_.add("out.norm.g", filled<T>(w1, T(1)));
  out_nb_ = store_.add("out.norm.b", filled<T>(w1, T(0)));
  ad::Tensor<T> wout = cfg_.zero_init_out
                           ? ad::Tensor<T>(cfg_.in_channels, w1, 9)
                           : he_init<T>(cfg_.in_channels, w1, 9, w1 * 9, rng);
  out_w_ = store_.add("out.conv.w", std::move(wout));
  out_b_ = store_.add("out.conv.b", filled<T>(cfg_.in_channels, T(0)));
}

template <typename T>
ad::Var TinyUNet<T>::reg(ad::Tape<T>& t, int idx, bool with_param_grads,
                         std::vector<ad::Tensor<T>>* sinks) {
  auto& item = store_.items[size_t(idx)];
  if (!with_param_grads) return t.constant(item.value);
  ad::Tensor<T>* sink = sinks ? &(*sinks)[size_t(idx)] : &item.grad;
  return t.param(item.value, sink);
}

template <typename T>
ad::Var TinyUNet<T>::run_block(ad::Tape<T>& t, const Block& b, ad::Var x, ad::Var temb_act,
                               bool wg, std::vector<ad::Tensor<T>>* sinks) {
  ad::Var h = t.channel_norm(x, reg(t, b.n1g, wg, sinks), reg(t, b.n1b, wg, sinks));
  h = t.silu(h);
  h = t.conv3x3(h, reg(t, b.c1w, wg, sinks), reg(t, b.c1b, wg, sinks));
  ad::Var ss = t.linear(temb_act, reg(t, b.tw, wg, sinks), reg(t, b.tb, wg, sinks));
  ad::Var scale = t.slice_c(ss, 0, b.cout);
  ad::Var shift = t.slice_c(ss, b.cout, b.cout);
  h = t.channel_norm(h, reg(t, b.n2g, wg, sinks), reg(t, b.n2b, wg, sinks));
  h = t.scale_shift(h, scale, shift);
  h = t.silu(h);
  h = t.conv3x3(h, reg(t, b.c2w, wg, sinks), reg(t, b.c2b, wg, sinks));
  ad::Var skip = b.skw >= 0 ? t.conv1x1(x, reg(t, b.skw, wg, sinks), reg(t, b.skb, wg, sinks)) : x;
  return t.add(h, skip);
}

template <typename T>
ad::Var TinyUNet<T>::run_attn(ad::Tape<T>& t, ad::Var x, bool wg,
                              std::vector<ad::Tensor<T>>* sinks) {
  ad::Var a = t.channel_norm(x, reg(t, attn_.ng, wg, sinks), reg(t, attn_.nb, wg, sinks));
  ad::Var q = t.conv1x1(a, reg(t, attn_.qw, wg, sinks), reg(t, attn_.qb, wg, sinks));
  ad::Var k = t.conv1x1(a, reg(t, attn_.kw, wg, sinks), reg(t, attn_.kb, wg, sinks));
  ad::Var v = t.conv1x1(a, reg(t, attn_.vw, wg, sinks), reg(t, attn_.vb, wg, sinks));
  ad::Var o = t.attention(q, k, v);
  o = t.conv1x1(o, reg(t, attn_.ow, wg, sinks), reg(t, attn_.ob, wg, sinks));
  return t.add(x, o);
}

template <typename T>
ad::Var TinyUNet<T>::forward(ad::Tape<T>& tape, ad::Var x, int t, bool wg,
                             std::vector<ad::Tensor<T>>* sinks) {
  if (sinks && sinks->size() != store_.items.size())
    sinks->assign(store_.items.size(), ad::Tensor<T>());
  const ad::Tensor<T>& xin = tape.val(x);
  if (xin.c != cfg_.in_channels)
    throw DimensionError("TinyUNet expects " + std::to_string(cfg_.in_channels) +
                         " input channels, got " + xin.shape_str());
  if (xin.h % 4 || xin.w % 4)
    throw DimensionError("TinyUNet input dims must be divisible by 4, got " + xin.shape_str());

  ad::Var temb0 = tape.constant(sinusoidal_embedding<T>(t, cfg_.temb_dim));
  ad::Var temb = tape.linear(temb0, reg(tape, time_w1_, wg, sinks), reg(tape, time_b1_, wg, sinks));
  temb = tape.silu(temb);
  temb = tape.linear(temb, reg(tape, time_w2_, wg, sinks), reg(tape, time_b2_, wg, sinks));
  ad::Var temb_act = tape.silu(temb);

  ad::Var h = tape.conv3x3(x, reg(tape, stem_w_, wg, sinks), reg(tape, stem_b_, wg, sinks));
  ad::Var s1 = run_block(tape, e1b_, run_block(tape, e1a_, h, temb_act, wg, sinks), temb_act, wg, sinks);
  ad::Var s2 = run_block(tape, e2b_, run_block(tape, e2a_, tape.avg_pool2(s1), temb_act, wg, sinks),
                         temb_act, wg, sinks);
  ad::Var mid = run_block(tape, e3a_, tape.avg_pool2(s2), temb_act, wg, sinks);
  mid = run_attn(tape, mid, wg, sinks);
  mid = run_block(tape, e3b_, mid, temb_act, wg, sinks);

  ad::Var u2 = tape.concat(tape.upsample_nearest2(mid), s2);
  u2 = run_block(tape, d2b_, run_block(tape, d2a_, u2, temb_act, wg, sinks), temb_act, wg, sinks);
  ad::Var u1 = tape.concat(tape.upsample_nearest2(u2), s1);
  u1 = run_block(tape, d1b_, run_block(tape, d1a_, u1, temb_act, wg, sinks), temb_act, wg, sinks);

  ad::Var o = tape.channel_norm(u1, reg(tape, out_ng_, wg, sinks), reg(tape, out_nb_, wg, sinks));
  o = tape.silu(o);
  return tape.conv3x3(o, reg(tape, out_w_, wg, sinks), reg(tape, out_b_, wg, sinks));
}

template <typename T>
TwoChannelImage TinyUNet<T>::predict(const TwoChannelImage& x, int t) {
  ad::Tape<T> tape;
  ad::Var in = tape.constant(to_tensor<T>(x));
  ad::Var out = forward(tape, in, t, /*with_param_grads=*/false);
  return from_tensor<T>(tape.val(out));
}

template <typename T>
TwoChannelImage TinyUNet<T>::input_vjp(const TwoChannelImage& x, int t,
                                       const TwoChannelImage& seed) {
  ad::Tape<T> tape;
  ad::Var in = tape.input(to_tensor<T>(x));
  ad::Var out = forward(tape, in, t, /*with_param_grads=*/false);
  tape.backward(out, to_tensor<T>(seed));
  return from_tensor<T>(tape.grad(in));
}

// ---------------------------------------------------------------------------
// persistence

namespace {

constexpr char kNetMagic[4] = {'P', 'T', 'Y', 'N'};

template <typename V>
void put(std::string& out, V v) {
  for (size_t i = 0; i < sizeof(V); ++i) out.push_back(char((uint64_t(v) >> (8 * i)) & 0xFF));
}

void put_f64(std::string& out, double d) {
  uint64_t bits;
  std::memcpy(&bits, &d, 8);
  put(out, bits);
}

struct Reader {
  const unsigned char* p;
  size_t n, off = 0;
  std::string path;
  void need(size_t k, const char* what) {
    if (off + k > n)
      throw FormatError(path + ": truncated " + what + " at byte offset " + std::to_string(off));
  }
  template <typename V>
  V get(const char* what) {
    need(sizeof(V), what);
    uint64_t v = 0;
    for (size_t i = 0; i < sizeof(V); ++i) v |= uint64_t(p[off + i]) << (8 * i);
    off += sizeof(V);
    return V(v);
  }
  double get_f64(const char* what) {
    uint64_t bits = get<uint64_t>(what);
    double d;
    std::memcpy(&d, &bits, 8);
    return d;
  }
  std::string get_str(size_t k, const char* what) {
    need(k, what);
    std::string s(reinterpret_cast<const char*>(p + off), k);
    off += k;
    return s;
  }
};

}  // namespace

template <typename T>
void save_net(const TinyUNet<T>& net, const std::filesystem::path& path, bool include_opt,
              uint64_t step) {
  const UNetConfig& c = net.config();
  std::string bytes;
  bytes.append(kNetMagic, 4);
  put<uint16_t>(bytes, 1);                          // version
  put<uint16_t>(bytes, include_opt ? 1 : 0);        // flags
  put<uint64_t>(bytes, step);
  put<uint32_t>(bytes, uint32_t(c.in_channels));
  put<uint32_t>(bytes, uint32_t(c.base_width));
  put<uint32_t>(bytes, uint32_t(c.levels));
  put<uint32_t>(bytes, uint32_t(c.temb_dim));
  put<uint32_t>(bytes, uint32_t(c.temb_hidden));
  put<uint32_t>(bytes, uint32_t(net.params().items.size()));
  for (const auto& item : net.params().items) {
    put<uint16_t>(bytes, uint16_t(item.name.size()));
    bytes.append(item.name);
    put<uint32_t>(bytes, uint32_t(item.value.c));
    put<uint32_t>(bytes, uint32_t(item.value.h));
    put<uint32_t>(bytes, uint32_t(item.value.w));
    for (T v : item.value.v) put_f64(bytes, double(v));
  }
  if (include_opt) {
    for (const auto& item : net.params().items) {
      for (T v : item.adam_m.v) put_f64(bytes, double(v));
      for (T v : item.adam_v.v) put_f64(bytes, double(v));
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(path.string() + ": cannot open for writing");
  out.write(bytes.data(), std::streamsize(bytes.size()));
  if (!out) throw FormatError(path.string() + ": short write");
}

template <typename T>
uint64_t load_net_into(TinyUNet<T>& net, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path.string() + ": cannot open for reading");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r{reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(), 0,
           path.string()};

  r.need(4, "magic");
  if (std::memcmp(r.p, kNetMagic, 4) != 0)
    throw FormatError(path.string() + ": bad magic at byte offset 0");
  r.off = 4;
  auto version = r.get<uint16_t>("version");
  if (version != 1)
    throw FormatError(path.string() + ": unsupported version " + std::to_string(version));
  auto flags = r.get<uint16_t>("flags");
  auto step = r.get<uint64_t>("step");

  const UNetConfig& c = net.config();
  uint32_t vals[5] = {r.get<uint32_t>("in_channels"), r.get<uint32_t>("base_width"),
                      r.get<uint32_t>("levels"), r.get<uint32_t>("temb_dim"),
                      r.get<uint32_t>("temb_hidden")};
  uint32_t want[5] = {uint32_t(c.in_channels), uint32_t(c.base_width), uint32_t(c.levels),
                      uint32_t(c.temb_dim), uint32_t(c.temb_hidden)};
  const char* names[5] = {"in_channels", "base_width", "levels", "temb_dim", "temb_hidden"};
  for (int i = 0; i < 5; ++i)
    if (vals[i] != want[i])
      throw FormatError(path.string() + ": hyperparameter mismatch: " + names[i] + " stored " +
                        std::to_string(vals[i]) + ", net has " + std::to_string(want[i]));

  auto nparams = r.get<uint32_t>("param count");
  if (nparams != net.params().items.size())
    throw FormatError(path.string() + ": parameter count mismatch");
  for (auto& item : net.params().items) {
    auto len = r.get<uint16_t>("name length");
    std::string name = r.get_str(len, "name");
    uint32_t cc = r.get<uint32_t>("dims"), hh = r.get<uint32_t>("dims"),
             ww = r.get<uint32_t>("dims");
    if (name != item.name)
      throw FormatError(path.string() + ": layer order mismatch: stored '" + name +
                        "', expected '" + item.name + "'");
    if (int(cc) != item.value.c || int(hh) != item.value.h || int(ww) != item.value.w)
      throw FormatError(path.string() + ": shape mismatch for layer '" + name + "': stored [" +
                        std::to_string(cc) + "," + std::to_string(hh) + "," +
                        std::to_string(ww) + "], net has " + item.value.shape_str());
    for (T& v : item.value.v) v = T(r.get_f64("payload"));
  }
  if (flags & 1) {
    for (auto& item : net.params().items) {
      for (T& v : item.adam_m.v) v = T(r.get_f64("adam m"));
      for (T& v : item.adam_v.v) v = T(r.get_f64("adam v"));
    }
  }
  if (r.off != r.n)
    throw FormatError(path.string() + ": trailing bytes: expected " + std::to_string(r.off) +
                      ", got " + std::to_string(r.n));
  return step;
}

template <typename T>
LoadedNet<T> load_net(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path.string() + ": cannot open for reading");
  std::string head(36, '\0');
  in.read(head.data(), 36);
  if (in.gcount() < 36) throw FormatError(path.string() + ": truncated header");
  Reader r{reinterpret_cast<const unsigned char*>(head.data()), head.size(), 0, path.string()};
  if (std::memcmp(r.p, kNetMagic, 4) != 0)
    throw FormatError(path.string() + ": bad magic at byte offset 0");
  r.off = 4;
  UNetConfig cfg;
  (void)r.get<uint16_t>("version");
  auto flags = r.get<uint16_t>("flags");
  auto step = r.get<uint64_t>("step");
  cfg.in_channels = int(r.get<uint32_t>("in_channels"));
  cfg.base_width = int(r.get<uint32_t>("base_width"));
  cfg.levels = int(r.get<uint32_t>("levels"));
  cfg.temb_dim = int(r.get<uint32_t>("temb_dim"));
  cfg.temb_hidden = int(r.get<uint32_t>("temb_hidden"));

  LoadedNet<T> out{TinyUNet<T>(cfg), step, (flags & 1) != 0};
  out.step = load_net_into(out.net, path);
  return out;
}

template struct ParamStore<float>;
template struct ParamStore<double>;
template class TinyUNet<float>;
template class TinyUNet<double>;
template ad::Tensor<float> sinusoidal_embedding<float>(int, int);
template ad::Tensor<double> sinusoidal_embedding<double>(int, int);
template ad::Tensor<float> to_tensor<float>(const TwoChannelImage&);
template ad::Tensor<double> to_tensor<double>(const TwoChannelImage&);
template TwoChannelImage from_tensor<float>(const ad::Tensor<float>&);
template TwoChannelImage from_tensor<double>(const ad::Tensor<double>&);
template class UNetScore<float>;
template class UNetScore<double>;
template void save_net<float>(const TinyUNet<float>&, const std::filesystem::path&, bool,
                              uint64_t);
template void save_net<double>(const TinyUNet<double>&, const std::filesystem::path&, bool,
                               uint64_t);
template LoadedNet<float> load_net<float>(const std::filesystem::path&);
template LoadedNet<double> load_net<double>(const std::filesystem::path&);
template uint64_t load_net_into<float>(TinyUNet<float>&, const std::filesystem::path&);
template uint64_t load_net_into<double>(TinyUNet<double>&, const std::filesystem::path&);

}  // namespace ptycho
