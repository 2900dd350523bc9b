// Copyright 2026 The ptychodiff Authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <ptychodiff/container.hpp>
#include <unistd.h>

#include "test_util.hpp"

using namespace ptycho;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("ptyf_test_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("complex field containers round-trip bitwise") {
  TempDir tmp;
  Rng rng(3);
  ComplexField x = testutil::random_field(32, 32, rng);
  fs::path p = tmp.path / "x.ptyf";
  write_field(p, x);
  ComplexField y = read_complex(p);
  REQUIRE(y.height == x.height);
  REQUIRE(y.width == x.width);
  for (size_t i = 0; i < x.size(); ++i) {
    CHECK(x.data[i].real() == y.data[i].real());
    CHECK(x.data[i].imag() == y.data[i].imag());
  }
}

TEST_CASE("two-channel and real containers round-trip") {
  TempDir tmp;
  Rng rng(4);
  TwoChannelImage t(8, 8);
  for (size_t i = 0; i < t.pixels(); ++i) {
    t.amp[i] = 2.0 * rng.uniform() - 1.0;
    t.phase[i] = 2.0 * rng.uniform() - 1.0;
  }
  write_field(tmp.path / "t.ptyf", t);
  TwoChannelImage t2 = read_two_channel(tmp.path / "t.ptyf");
  CHECK(t2.amp == t.amp);
  CHECK(t2.phase == t.phase);

  RealImage r(5, 7);
  for (double& v : r.data) v = rng.uniform();
  write_field(tmp.path / "r.ptyf", r);
  RealImage r2 = read_real(tmp.path / "r.ptyf");
  CHECK(r2.data == r.data);
}

TEST_CASE("truncated payload reports expected vs actual byte counts") {
  TempDir tmp;
  ComplexField x(4, 4);
  fs::path p = tmp.path / "trunc.ptyf";
  write_field(p, x);
  auto full = fs::file_size(p);
  fs::resize_file(p, full - 9);
  try {
    read_complex(p);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    std::string msg = e.what();
    CHECK(msg.find(std::to_string(full)) != std::string::npos);
    CHECK(msg.find(std::to_string(full - 9)) != std::string::npos);
  }
}

TEST_CASE("bad magic and bad version are rejected with offsets") {
  TempDir tmp;
  fs::path p = tmp.path / "bad.ptyf";
  {
    std::ofstream out(p, std::ios::binary);
    out << "NOPExxxxxxxxxxxxxxxxxxxx";
  }
  CHECK_THROWS_WITH_AS(read_container(p), doctest::Contains("byte offset 0"), FormatError);

  ComplexField x(2, 2);
  write_field(p, x);
  {
    std::fstream f(p, std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(4);
    char v2[2] = {9, 0};
    f.write(v2, 2);
  }
  CHECK_THROWS_WITH_AS(read_container(p), doctest::Contains("byte offset 4"), FormatError);
}

TEST_CASE("pgm export maps a constant image to zeros") {
  TempDir tmp;
  RealImage img(4, 4, 3.25);
  fs::path p = tmp.path / "const.pgm";
  export_pgm(p, img);
  std::ifstream in(p, std::ios::binary);
  std::string header;
  std::getline(in, header);
  CHECK(header == "P5");
  std::string dims, maxv;
  std::getline(in, dims);
  std::getline(in, maxv);
  CHECK(maxv == "65535");
  std::vector<char> bytes(32);
  in.read(bytes.data(), 32);
  for (char b : bytes) CHECK(b == 0);
}

TEST_CASE("pgm export min-max scales to the full 16-bit range") {
  TempDir tmp;
  RealImage img(1, 3);
  img.data = {1.0, 2.0, 3.0};
  fs::path p = tmp.path / "ramp.pgm";
  export_pgm(p, img);
  std::ifstream in(p, std::ios::binary);
  std::string line;
  for (int i = 0; i < 3; ++i) std::getline(in, line);
  unsigned char b[6];
  in.read(reinterpret_cast<char*>(b), 6);
  auto val = [&](int i) { return (unsigned(b[2 * i]) << 8) | b[2 * i + 1]; };
  CHECK(val(0) == 0);
  CHECK(val(1) == 32768);  // round(0.5 * 65535)
  CHECK(val(2) == 65535);
}
