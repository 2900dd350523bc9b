// Copyright 2026 The ptychodiff Authors
// SPDX-License-Identifier: Apache-2.0
#include "ptychodiff/container.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <type_traits>

namespace ptycho {

namespace {

constexpr char kMagic[4] = {'P', 'T', 'Y', 'F'};
constexpr size_t kHeaderBytes = 4 + 2 + 2 + 4 + 4 + 4;

template <typename T>
void put_le(std::string& out, T v) {
  static_assert(std::is_integral_v<T>);
  for (size_t i = 0; i < sizeof(T); ++i) out.push_back(char((v >> (8 * i)) & 0xFF));
}

template <typename T>
T get_le(const unsigned char* p) {
  T v = 0;
  for (size_t i = 0; i < sizeof(T); ++i) v |= T(p[i]) << (8 * i);
  return v;
}

void put_f64_le(std::string& out, double d) {
  uint64_t bits;
  std::memcpy(&bits, &d, 8);
  put_le(out, bits);
}

double get_f64_le(const unsigned char* p) {
  uint64_t bits = get_le<uint64_t>(p);
  double d;
  std::memcpy(&d, &bits, 8);
  return d;
}

[[noreturn]] void fail(const std::filesystem::path& path, const std::string& what) {
  throw FormatError(path.string() + ": " + what);
}

}  // namespace

Container read_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, "cannot open for reading");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());

  if (bytes.size() < kHeaderBytes)
    fail(path, "truncated header: expected " + std::to_string(kHeaderBytes) +
                   " bytes, got " + std::to_string(bytes.size()));
  if (std::memcmp(p, kMagic, 4) != 0) fail(path, "bad magic at byte offset 0");

  Container c;
  c.version = get_le<uint16_t>(p + 4);
  if (c.version != 1)
    fail(path, "unsupported version " + std::to_string(c.version) + " at byte offset 4");
  uint16_t dt = get_le<uint16_t>(p + 6);
  if (dt != uint16_t(Dtype::c128) && dt != uint16_t(Dtype::f64))
    fail(path, "unknown dtype tag " + std::to_string(dt) + " at byte offset 6");
  c.dtype = Dtype(dt);
  c.height = get_le<uint32_t>(p + 8);
  c.width = get_le<uint32_t>(p + 12);
  c.channels = get_le<uint32_t>(p + 16);

  size_t doubles_per_elem = c.dtype == Dtype::c128 ? 2 : 1;
  size_t n = size_t(c.height) * c.width * c.channels * doubles_per_elem;
  size_t expected = kHeaderBytes + n * 8;
  if (bytes.size() != expected)
    fail(path, "payload length mismatch: expected " + std::to_string(expected) +
                   " bytes, got " + std::to_string(bytes.size()));

  c.payload.resize(n);
  for (size_t i = 0; i < n; ++i) c.payload[i] = get_f64_le(p + kHeaderBytes + 8 * i);
  for (double v : c.payload)
    if (!std::isfinite(v)) fail(path, "non-finite value in payload");
  return c;
}

void write_container(const std::filesystem::path& path, const Container& c) {
  size_t doubles_per_elem = c.dtype == Dtype::c128 ? 2 : 1;
  if (c.payload.size() != size_t(c.height) * c.width * c.channels * doubles_per_elem)
    throw FormatError("container payload size does not match header");
  std::string bytes;
  bytes.reserve(kHeaderBytes + 8 * c.payload.size());
  bytes.append(kMagic, 4);
  put_le(bytes, c.version);
  put_le(bytes, uint16_t(c.dtype));
  put_le(bytes, c.height);
  put_le(bytes, c.width);
  put_le(bytes, c.channels);
  for (double v : c.payload) put_f64_le(bytes, v);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(path.string() + ": cannot open for writing");
  out.write(bytes.data(), std::streamsize(bytes.size()));
  if (!out) throw FormatError(path.string() + ": short write");
}

ComplexField read_complex(const std::filesystem::path& path) {
  Container c = read_container(path);
  if (c.dtype != Dtype::c128 || c.channels != 1)
    fail(path, "expected c128 single-channel field");
  ComplexField f(int(c.height), int(c.width));
  for (size_t i = 0; i < f.size(); ++i)
    f.data[i] = cxd(c.payload[2 * i], c.payload[2 * i + 1]);
  return f;
}

TwoChannelImage read_two_channel(const std::filesystem::path& path) {
  Container c = read_container(path);
  if (c.dtype != Dtype::f64 || c.channels != 2)
    fail(path, "expected f64 two-channel image");
  TwoChannelImage t(int(c.height), int(c.width));
  size_t n = t.pixels();
  std::copy_n(c.payload.begin(), n, t.amp.begin());
  std::copy_n(c.payload.begin() + n, n, t.phase.begin());
  return t;
}

RealImage read_real(const std::filesystem::path& path) {
  Container c = read_container(path);
  if (c.dtype != Dtype::f64 || c.channels != 1)
    fail(path, "expected f64 single-channel image");
  RealImage r(int(c.height), int(c.width));
  std::copy(c.payload.begin(), c.payload.end(), r.data.begin());
  return r;
}

void write_field(const std::filesystem::path& path, const ComplexField& x) {
  Container c;
  c.dtype = Dtype::c128;
  c.height = uint32_t(x.height);
  c.width = uint32_t(x.width);
  c.channels = 1;
  c.payload.resize(2 * x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    c.payload[2 * i] = x.data[i].real();
    c.payload[2 * i + 1] = x.data[i].imag();
  }
  write_container(path, c);
}

void write_field(const std::filesystem::path& path, const TwoChannelImage& x) {
  Container c;
  c.dtype = Dtype::f64;
  c.height = uint32_t(x.height);
  c.width = uint32_t(x.width);
  c.channels = 2;
  c.payload = x.amp;
  c.payload.insert(c.payload.end(), x.phase.begin(), x.phase.end());
  write_container(path, c);
}

void write_field(const std::filesystem::path& path, const RealImage& x) {
  Container c;
  c.dtype = Dtype::f64;
  c.height = uint32_t(x.height);
  c.width = uint32_t(x.width);
  c.channels = 1;
  c.payload = x.data;
  write_container(path, c);
}

void export_pgm(const std::filesystem::path& path, const RealImage& img) {
  double lo = img.data.empty() ? 0.0 : *std::min_element(img.data.begin(), img.data.end());
  double hi = img.data.empty() ? 0.0 : *std::max_element(img.data.begin(), img.data.end());
  double scale = hi > lo ? 65535.0 / (hi - lo) : 0.0;  // constant image -> zeros

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(path.string() + ": cannot open for writing");
  out << "P5\n" << img.width << " " << img.height << "\n65535\n";
  for (double v : img.data) {
    auto q = uint16_t(std::lround((v - lo) * scale));
    // PGM stores 16-bit samples most significant byte first.
    char b[2] = {char(q >> 8), char(q & 0xFF)};
    out.write(b, 2);
  }
  if (!out) throw FormatError(path.string() + ": short write");
}

}  // namespace ptycho
