// Copyright 2026 The wseg Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Planar images, label maps and binary PPM (P6) / PGM (P5) codecs.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace wseg {

// Channel-planar (C, H, W) image with values nominally in [0, 1].
struct Image {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  Image() = default;
  Image(int c, int h, int w, double fill = 0.0)
      : channels(c), height(h), width(w),
        data(static_cast<std::size_t>(c) * h * w, fill) {}

  double& at(int c, int y, int x) {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  double at(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  bool operator==(const Image&) const = default;
};

struct LabelMap {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;

  LabelMap() = default;
  LabelMap(int h, int w, std::uint8_t fill = 0)
      : height(h), width(w), data(static_cast<std::size_t>(h) * w, fill) {}

  std::uint8_t& at(int y, int x) {
    return data[static_cast<std::size_t>(y) * width + x];
  }
  std::uint8_t at(int y, int x) const {
    return data[static_cast<std::size_t>(y) * width + x];
  }
  bool operator==(const LabelMap&) const = default;
};

// Maps [0, 1] to 0..255 by rounding after clamping.
std::uint8_t quantize(double v);

// P6 with maxval 255. The image must have three channels.
std::string encode_ppm(const Image& image);
// Accepts P6 with maxval 1..255 and '#' comments in the header.
Image decode_ppm(std::string_view bytes);

// P5 with maxval 255; one byte per label.
std::string encode_pgm(const LabelMap& labels);
LabelMap decode_pgm(std::string_view bytes);

void save_ppm(const std::filesystem::path& path, const Image& image);
Image load_ppm(const std::filesystem::path& path);
void save_pgm(const std::filesystem::path& path, const LabelMap& labels);
LabelMap load_pgm(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace wseg
