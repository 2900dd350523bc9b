// Copyright 2026 The ptychodiff Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>

#include "ptychodiff/field.hpp"

namespace ptycho {

// PTYF container: magic "PTYF", u16 version, u16 dtype (1 = c128, 2 = f64),
// u32 height, u32 width, u32 channels, then a little-endian f64 payload of
// height*width*channels elements (c128 stores re,im pairs per element).

enum class Dtype : uint16_t { c128 = 1, f64 = 2 };

struct Container {
  uint16_t version = 1;
  Dtype dtype = Dtype::f64;
  uint32_t height = 0;
  uint32_t width = 0;
  uint32_t channels = 0;
  std::vector<double> payload;  // c128: interleaved re,im
};

Container read_container(const std::filesystem::path& path);
void write_container(const std::filesystem::path& path, const Container& c);

ComplexField read_complex(const std::filesystem::path& path);
TwoChannelImage read_two_channel(const std::filesystem::path& path);
RealImage read_real(const std::filesystem::path& path);

void write_field(const std::filesystem::path& path, const ComplexField& x);
void write_field(const std::filesystem::path& path, const TwoChannelImage& x);
void write_field(const std::filesystem::path& path, const RealImage& x);

/// 16-bit binary PGM, min-max scaled. A constant image maps to all zeros.
void export_pgm(const std::filesystem::path& path, const RealImage& img);

}  // namespace ptycho
