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

#include "wseg/raster.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include "wseg/error.hpp"

namespace wseg {

std::uint8_t quantize(double v) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::lround(c * 255.0));
}

namespace {

struct Header {
  int width = 0;
  int height = 0;
  int maxval = 0;
  std::size_t payload = 0;  // offset of the first raster byte
};

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

class HeaderReader {
 public:
  explicit HeaderReader(std::string_view b) : b_(b) {}

  void skip_space_and_comments() {
    while (pos_ < b_.size()) {
      if (is_space(b_[pos_])) {
        ++pos_;
      } else if (b_[pos_] == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  int read_int(const char* what) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    long long v = 0;
    while (pos_ < b_.size() && b_[pos_] >= '0' && b_[pos_] <= '9') {
      v = v * 10 + (b_[pos_] - '0');
      if (v > 1'000'000) throw ParseError(std::string("header ") + what + " is too large", start);
      ++pos_;
    }
    if (pos_ == start) {
      throw ParseError(std::string("expected ") + what + " in header", start);
    }
    return static_cast<int>(v);
  }

  std::size_t pos() const { return pos_; }
  void advance(std::size_t n) { pos_ += n; }

 private:
  std::string_view b_;
  std::size_t pos_ = 0;
};

Header parse_header(std::string_view bytes, char kind) {
  if (bytes.size() < 2) throw ParseError("file too short for a magic number", bytes.size());
  if (bytes[0] != 'P' || bytes[1] != kind) {
    throw ParseError(std::string("bad magic, expected P") + kind, 0);
  }
  HeaderReader r(bytes);
  r.advance(2);
  if (r.pos() >= bytes.size() || !is_space(bytes[r.pos()])) {
    throw ParseError("expected whitespace after magic number", r.pos());
  }
  Header h;
  h.width = r.read_int("width");
  h.height = r.read_int("height");
  const std::size_t maxval_at = r.pos();
  h.maxval = r.read_int("maxval");
  if (h.width < 1 || h.height < 1) throw ParseError("image extents must be positive", maxval_at);
  if (h.maxval < 1 || h.maxval > 255) {
    throw ParseError("maxval " + std::to_string(h.maxval) + " is not in 1..255", maxval_at);
  }
  if (r.pos() >= bytes.size() || !is_space(bytes[r.pos()])) {
    throw ParseError("expected a single whitespace byte after maxval", r.pos());
  }
  h.payload = r.pos() + 1;
  return h;
}

void check_payload(std::string_view bytes, const Header& h, std::size_t need) {
  const std::size_t have = bytes.size() - h.payload;
  if (have < need) {
    throw ParseError("truncated payload: expected " + std::to_string(need) +
                         " bytes, found " + std::to_string(have),
                     bytes.size());
  }
}

std::string header_text(char kind, int w, int h) {
  return std::string("P") + kind + "\n" + std::to_string(w) + " " +
         std::to_string(h) + "\n255\n";
}

}  // namespace

std::string encode_ppm(const Image& image) {
  if (image.channels != 3) {
    throw DimensionError("encode_ppm: image has " + std::to_string(image.channels) +
                         " channels, PPM needs 3");
  }
  std::string out = header_text('6', image.width, image.height);
  const std::size_t start = out.size();
  out.resize(start + static_cast<std::size_t>(image.width) * image.height * 3);
  std::size_t k = start;
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      for (int c = 0; c < 3; ++c) out[k++] = static_cast<char>(quantize(image.at(c, y, x)));
    }
  }
  return out;
}

Image decode_ppm(std::string_view bytes) {
  const Header h = parse_header(bytes, '6');
  const std::size_t need = static_cast<std::size_t>(h.width) * h.height * 3;
  check_payload(bytes, h, need);
  Image img(3, h.height, h.width);
  std::size_t k = h.payload;
  for (int y = 0; y < h.height; ++y) {
    for (int x = 0; x < h.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        const auto v = static_cast<unsigned char>(bytes[k]);
        if (v > h.maxval) throw ParseError("sample exceeds maxval", k);
        img.at(c, y, x) = static_cast<double>(v) / h.maxval;
        ++k;
      }
    }
  }
  return img;
}

std::string encode_pgm(const LabelMap& labels) {
  std::string out = header_text('5', labels.width, labels.height);
  out.append(labels.data.begin(), labels.data.end());
  return out;
}

LabelMap decode_pgm(std::string_view bytes) {
  const Header h = parse_header(bytes, '5');
  if (h.maxval != 255) {
    throw ParseError("label maps must use maxval 255", h.payload - 1);
  }
  const std::size_t need = static_cast<std::size_t>(h.width) * h.height;
  check_payload(bytes, h, need);
  LabelMap m(h.height, h.width);
  std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(h.payload), need, m.data.begin());
  return m;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed for " + path.string());
  return bytes;
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.close();
  if (!out) throw IoError("write failed for " + path.string());
}

void save_ppm(const std::filesystem::path& path, const Image& image) {
  write_file(path, encode_ppm(image));
}

Image load_ppm(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  try {
    return decode_ppm(bytes);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.detail(), e.offset());
  }
}

void save_pgm(const std::filesystem::path& path, const LabelMap& labels) {
  write_file(path, encode_pgm(labels));
}

LabelMap load_pgm(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  try {
    return decode_pgm(bytes);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.detail(), e.offset());
  }
}

}  // namespace wseg
