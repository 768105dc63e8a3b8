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

#include "wseg/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "wseg/error.hpp"
#include "wseg/metrics.hpp"

namespace wseg {

namespace fs = std::filesystem;

void SceneSpec::validate() const {
  if (height < 1 || width < 1) throw ConfigError("scene: extents must be >= 1");
  if (num_classes < 2 || num_classes > 255) {
    throw ConfigError("scene: num_classes must be in 2..255");
  }
  if (static_cast<int>(colors.size()) != num_classes) {
    throw ConfigError("scene: need one color model per class");
  }
  if (bands.empty()) throw ConfigError("scene: at least one band is required");
  double prev = -1.0;
  for (const Band& b : bands) {
    if (b.cls < 0 || b.cls >= num_classes) throw ConfigError("scene: band class out of range");
    if (b.center < 0.0 || b.center > 1.0 || b.jitter < 0.0 || b.jitter > 1.0) {
      throw ConfigError("scene: band fractions must lie in [0, 1]");
    }
    if (b.center <= prev) throw ConfigError("scene: bands must be ordered top to bottom");
    prev = b.center;
  }
  for (const ObjectRule& o : objects) {
    if (o.cls < 0 || o.cls >= num_classes) throw ConfigError("scene: object class out of range");
    if (!(o.row_lo >= 0.0 && o.row_lo < o.row_hi && o.row_hi <= 1.0)) {
      throw ConfigError("scene: object row range must satisfy 0 <= lo < hi <= 1");
    }
    if (o.rate < 0.0) throw ConfigError("scene: object rate must be >= 0");
    if (!(o.min_h > 0 && o.min_h <= o.max_h && o.min_w > 0 && o.min_w <= o.max_w)) {
      throw ConfigError("scene: object size range is invalid");
    }
  }
}

SceneSpec scene_preset(std::string_view name, int height, int width) {
  SceneSpec s;
  s.height = height;
  s.width = width;
  if (name == "trivial") {
    s.num_classes = 3;
    s.class_names = {"sky", "building", "road"};
    s.bands = {{0, 1.0 / 6, 0.04}, {1, 0.5, 0.04}, {2, 5.0 / 6, 0.04}};
    s.colors = {{{0.55, 0.70, 0.95}, 0.04},
                {{0.55, 0.35, 0.25}, 0.04},
                {{0.22, 0.22, 0.26}, 0.04}};
  } else if (name == "ambiguous") {
    s.num_classes = 4;
    s.class_names = {"sky", "building", "sign_upper", "sign_lower"};
    s.bands = {{0, 0.125, 0.03}, {1, 0.625, 0.0}};
    const ColorModel shared{{0.85, 0.75, 0.20}, 0.04};
    s.colors = {{{0.55, 0.70, 0.95}, 0.04}, {{0.45, 0.42, 0.40}, 0.04}, shared, shared};
    s.objects = {{2, 0.28, 0.60, 2.0, 0.08, 0.16, 0.06, 0.14},
                 {3, 0.62, 0.98, 2.0, 0.08, 0.16, 0.06, 0.14}};
    s.ambiguous_pair = true;
    s.ambiguous_classes = {2, 3};
  } else if (name == "urban") {
    s.num_classes = 7;
    s.class_names = {"road", "sidewalk", "building", "vegetation", "sky", "person", "car"};
    s.bands = {{4, 0.12, 0.05}, {2, 0.40, 0.05}, {1, 0.68, 0.03}, {0, 0.88, 0.03}};
    s.colors = {{{0.30, 0.28, 0.32}, 0.04}, {{0.70, 0.62, 0.66}, 0.04},
                {{0.42, 0.42, 0.40}, 0.05}, {{0.30, 0.50, 0.18}, 0.05},
                {{0.50, 0.68, 0.88}, 0.03}, {{0.80, 0.20, 0.25}, 0.05},
                {{0.10, 0.12, 0.50}, 0.05}};
    s.objects = {{3, 0.15, 0.60, 1.5, 0.10, 0.25, 0.05, 0.15},
                 {5, 0.50, 0.85, 1.0, 0.10, 0.20, 0.02, 0.05},
                 {6, 0.70, 0.98, 1.5, 0.08, 0.15, 0.10, 0.20}};
  } else {
    throw ConfigError("unknown scene preset '" + std::string(name) +
                      "' (expected trivial, ambiguous or urban)");
  }
  s.validate();
  return s;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  // splitmix64 finaliser over the pair.
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Sample generate_scene(const SceneSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int H = spec.height;
  const int W = spec.width;

  std::vector<double> centers;
  centers.reserve(spec.bands.size());
  for (const Band& b : spec.bands) {
    const double j = b.jitter > 0 ? (2.0 * unit(rng) - 1.0) * b.jitter : 0.0;
    centers.push_back(b.center + j);
  }
  std::vector<double> bounds;
  for (std::size_t i = 0; i + 1 < centers.size(); ++i) {
    double m = 0.5 * (centers[i] + centers[i + 1]);
    if (!bounds.empty()) m = std::max(m, bounds.back());
    bounds.push_back(m);
  }

  Sample s{Image(3, H, W), LabelMap(H, W)};
  for (int y = 0; y < H; ++y) {
    const double f = (y + 0.5) / H;
    std::size_t band = 0;
    while (band < bounds.size() && f >= bounds[band]) ++band;
    const auto cls = static_cast<std::uint8_t>(spec.bands[band].cls);
    for (int x = 0; x < W; ++x) s.labels.at(y, x) = cls;
  }

  for (const ObjectRule& o : spec.objects) {
    int count = static_cast<int>(std::floor(o.rate));
    if (unit(rng) < o.rate - count) ++count;
    const int lo = static_cast<int>(std::ceil(o.row_lo * H));
    const int hi = static_cast<int>(std::floor(o.row_hi * H));
    for (int k = 0; k < count; ++k) {
      const double hf = o.min_h + (o.max_h - o.min_h) * unit(rng);
      const double wf = o.min_w + (o.max_w - o.min_w) * unit(rng);
      const double yu = unit(rng);
      const double xu = unit(rng);
      const int oh = std::clamp(static_cast<int>(std::lround(hf * H)), 1, std::max(1, hi - lo));
      const int ow = std::clamp(static_cast<int>(std::lround(wf * W)), 1, W);
      if (hi - lo < 1) continue;
      const int y0 = lo + static_cast<int>(yu * (hi - lo - oh + 1));
      const int x0 = static_cast<int>(xu * (W - ow + 1));
      for (int y = y0; y < std::min(y0 + oh, hi); ++y) {
        for (int x = x0; x < std::min(x0 + ow, W); ++x) {
          s.labels.at(y, x) = static_cast<std::uint8_t>(o.cls);
        }
      }
    }
  }

  std::normal_distribution<double> noise(0.0, 1.0);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const ColorModel& cm = spec.colors[s.labels.at(y, x)];
      for (int c = 0; c < 3; ++c) {
        s.image.at(c, y, x) = std::clamp(cm.mean[c] + cm.sigma * noise(rng), 0.0, 1.0);
      }
    }
  }
  return s;
}

void AugConfig::validate() const {
  if (!(flip_prob >= 0.0 && flip_prob <= 1.0)) throw ConfigError("aug: flip_prob must lie in [0, 1]");
  if (!(scale_lo > 0.0 && scale_lo <= scale_hi)) throw ConfigError("aug: need 0 < scale_lo <= scale_hi");
  if (crop_h < 0 || crop_w < 0) throw ConfigError("aug: crop size must be >= 0");
  if (!(blur_sigma_lo >= 0.0 && blur_sigma_lo <= blur_sigma_hi)) {
    throw ConfigError("aug: need 0 <= blur_sigma_lo <= blur_sigma_hi");
  }
  if (brightness < 0 || contrast < 0 || saturation < 0 || hue < 0) {
    throw ConfigError("aug: jitter magnitudes must be >= 0");
  }
}

Sample hflip(const Sample& sample) {
  Sample out = sample;
  const int W = sample.image.width;
  for (int c = 0; c < out.image.channels; ++c) {
    for (int y = 0; y < out.image.height; ++y) {
      for (int x = 0; x < W; ++x) out.image.at(c, y, x) = sample.image.at(c, y, W - 1 - x);
    }
  }
  for (int y = 0; y < out.labels.height; ++y) {
    for (int x = 0; x < out.labels.width; ++x) {
      out.labels.at(y, x) = sample.labels.at(y, out.labels.width - 1 - x);
    }
  }
  return out;
}

Sample hflip(const Sample& sample, double prob, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const bool flip = unit(rng) < prob;
  return flip ? hflip(sample) : sample;
}

Sample scale_crop(const Sample& sample, double scale, int crop_h, int crop_w,
                  int off_y, int off_x) {
  const int H = sample.image.height;
  const int W = sample.image.width;
  const int C = sample.image.channels;
  if (!(scale > 0.0)) throw ConfigError("scale_crop: scale must be > 0");
  if (crop_h < 1 || crop_w < 1) throw ConfigError("scale_crop: crop size must be >= 1");
  const int sh = std::max(1, static_cast<int>(std::lround(H * scale)));
  const int sw = std::max(1, static_cast<int>(std::lround(W * scale)));
  if (off_y < 0 || off_x < 0 || (sh >= crop_h && off_y > sh - crop_h) ||
      (sw >= crop_w && off_x > sw - crop_w) || (sh < crop_h && off_y != 0) ||
      (sw < crop_w && off_x != 0)) {
    throw ConfigError("scale_crop: crop window lies outside the scaled content");
  }
  const double ry = static_cast<double>(H) / sh;
  const double rx = static_cast<double>(W) / sw;

  struct Tap {
    int i0, i1, nearest;
    double f;
  };
  auto taps = [](int out, int off, int content, int in, double ratio) {
    std::vector<Tap> t(static_cast<std::size_t>(out), Tap{-1, -1, -1, 0.0});
    for (int d = 0; d < out; ++d) {
      const int u = d + off;
      if (u >= content) continue;
      double src = (u + 0.5) * ratio - 0.5;
      src = std::clamp(src, 0.0, static_cast<double>(in - 1));
      const int i0 = static_cast<int>(std::floor(src));
      const int i1 = std::min(i0 + 1, in - 1);
      const int nearest = std::min(in - 1, static_cast<int>(std::floor((u + 0.5) * ratio)));
      t[d] = Tap{i0, i1, nearest, src - i0};
    }
    return t;
  };
  const std::vector<Tap> ty = taps(crop_h, off_y, sh, H, ry);
  const std::vector<Tap> tx = taps(crop_w, off_x, sw, W, rx);

  Sample out{Image(C, crop_h, crop_w, 0.0),
             LabelMap(crop_h, crop_w, static_cast<std::uint8_t>(kIgnoreLabel))};
  for (int y = 0; y < crop_h; ++y) {
    const Tap& a = ty[y];
    if (a.i0 < 0) continue;
    for (int x = 0; x < crop_w; ++x) {
      const Tap& b = tx[x];
      if (b.i0 < 0) continue;
      for (int c = 0; c < C; ++c) {
        const double top = sample.image.at(c, a.i0, b.i0) * (1 - b.f) +
                           sample.image.at(c, a.i0, b.i1) * b.f;
        const double bot = sample.image.at(c, a.i1, b.i0) * (1 - b.f) +
                           sample.image.at(c, a.i1, b.i1) * b.f;
        out.image.at(c, y, x) = a.f == 0.0 ? top : top * (1 - a.f) + bot * a.f;
      }
      out.labels.at(y, x) = sample.labels.at(a.nearest, b.nearest);
    }
  }
  return out;
}

Sample scale_crop(const Sample& sample, const AugConfig& cfg, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double s = cfg.scale_lo + (cfg.scale_hi - cfg.scale_lo) * unit(rng);
  const int ch = cfg.crop_h > 0 ? cfg.crop_h : sample.image.height;
  const int cw = cfg.crop_w > 0 ? cfg.crop_w : sample.image.width;
  const int sh = std::max(1, static_cast<int>(std::lround(sample.image.height * s)));
  const int sw = std::max(1, static_cast<int>(std::lround(sample.image.width * s)));
  const double uy = unit(rng);
  const double ux = unit(rng);
  const int oy = sh > ch ? std::min(sh - ch, static_cast<int>(uy * (sh - ch + 1))) : 0;
  const int ox = sw > cw ? std::min(sw - cw, static_cast<int>(ux * (sw - cw + 1))) : 0;
  return scale_crop(sample, s, ch, cw, oy, ox);
}

std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma >= 0.0)) throw ConfigError("gaussian_blur: sigma must be >= 0");
  if (sigma == 0.0) return {1.0};
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * r + 1));
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) {
    k[i + r] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    sum += k[i + r];
  }
  for (double& v : k) v /= sum;
  return k;
}

namespace {

// Half-sample symmetric reflection: ... 1 0 | 0 1 2 ... n-1 | n-1 n-2 ...
int reflect(int i, int n) {
  const int period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

}  // namespace

Image gaussian_blur(const Image& image, double sigma) {
  const std::vector<double> k = gaussian_kernel(sigma);
  if (k.size() == 1) return image;
  const int r = static_cast<int>(k.size() / 2);
  const int C = image.channels;
  const int H = image.height;
  const int W = image.width;
  Image tmp(C, H, W);
  Image out(C, H, W);
  for (int c = 0; c < C; ++c) {
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        double acc = 0.0;
        for (int t = -r; t <= r; ++t) acc += k[t + r] * image.at(c, y, reflect(x + t, W));
        tmp.at(c, y, x) = acc;
      }
    }
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        double acc = 0.0;
        for (int t = -r; t <= r; ++t) acc += k[t + r] * tmp.at(c, reflect(y + t, H), x);
        out.at(c, y, x) = acc;
      }
    }
  }
  return out;
}

double luma(double r, double g, double b) { return 0.299 * r + 0.587 * g + 0.114 * b; }

namespace {

void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double d = mx - mn;
  v = mx;
  s = mx > 0.0 ? d / mx : 0.0;
  if (d == 0.0) {
    h = 0.0;
  } else if (mx == r) {
    h = (g - b) / d / 6.0;
  } else if (mx == g) {
    h = ((b - r) / d + 2.0) / 6.0;
  } else {
    h = ((r - g) / d + 4.0) / 6.0;
  }
  if (h < 0.0) h += 1.0;
}

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
  const double h6 = h * 6.0;
  const int sector = static_cast<int>(std::floor(h6)) % 6;
  const double f = h6 - std::floor(h6);
  const double p = v * (1 - s);
  const double q = v * (1 - s * f);
  const double t = v * (1 - s * (1 - f));
  switch (sector) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
  }
}

}  // namespace

Image color_jitter(const Image& image, double brightness, double contrast,
                   double saturation, double hue_shift) {
  if (image.channels != 3) throw DimensionError("color_jitter: image must have 3 channels");
  Image out = image;
  const std::size_t plane = static_cast<std::size_t>(image.height) * image.width;
  double* R = out.data.data();
  double* G = R + plane;
  double* B = G + plane;
  if (brightness != 1.0) {
    for (double& v : out.data) v *= brightness;
  }
  // Clamping happens once at the end, so a factor pair like (0.5, 2) cancels.
  if (contrast != 1.0) {
    double mean = 0.0;
    for (std::size_t i = 0; i < plane; ++i) mean += luma(R[i], G[i], B[i]);
    mean /= static_cast<double>(plane);
    for (double& v : out.data) v = mean + contrast * (v - mean);
  }
  if (saturation != 1.0) {
    for (std::size_t i = 0; i < plane; ++i) {
      const double g = luma(R[i], G[i], B[i]);
      R[i] = g + saturation * (R[i] - g);
      G[i] = g + saturation * (G[i] - g);
      B[i] = g + saturation * (B[i] - g);
    }
  }
  if (hue_shift != 0.0) {
    for (std::size_t i = 0; i < plane; ++i) {
      double h, s, v;
      rgb_to_hsv(std::clamp(R[i], 0.0, 1.0), std::clamp(G[i], 0.0, 1.0),
                 std::clamp(B[i], 0.0, 1.0), h, s, v);
      h += hue_shift;
      h -= std::floor(h);
      hsv_to_rgb(h, s, v, R[i], G[i], B[i]);
    }
  }
  for (double& v : out.data) v = std::clamp(v, 0.0, 1.0);
  return out;
}

Image color_jitter(const Image& image, const AugConfig& cfg, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  // Always draw four values so the stream position does not depend on cfg.
  const double ub = unit(rng), uc = unit(rng), us = unit(rng), uh = unit(rng);
  auto factor = [](double mag, double u) { return mag == 0.0 ? 1.0 : 1.0 + mag * (2.0 * u - 1.0); };
  const double hue = cfg.hue == 0.0 ? 0.0 : cfg.hue * (2.0 * uh - 1.0);
  return color_jitter(image, factor(cfg.brightness, ub), factor(cfg.contrast, uc),
                      factor(cfg.saturation, us), hue);
}

Sample augment(const Sample& sample, const AugConfig& cfg, std::mt19937_64& rng) {
  if (!cfg.enabled) return sample;
  Sample s = hflip(sample, cfg.flip_prob, rng);
  s = scale_crop(s, cfg, rng);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double sigma = cfg.blur_sigma_lo + (cfg.blur_sigma_hi - cfg.blur_sigma_lo) * unit(rng);
  s.image = gaussian_blur(s.image, sigma);
  s.image = color_jitter(s.image, cfg, rng);
  return s;
}

Tensor images_to_batch(std::span<const Sample* const> samples) {
  if (samples.empty()) throw UsageError("images_to_batch: empty batch");
  const Image& first = samples[0]->image;
  const Shape shape{static_cast<int>(samples.size()), first.channels, first.height, first.width};
  std::vector<double> v;
  v.reserve(shape.numel());
  for (const Sample* s : samples) {
    if (s->image.channels != first.channels || s->image.height != first.height ||
        s->image.width != first.width) {
      throw DimensionError("images_to_batch: samples differ in size");
    }
    v.insert(v.end(), s->image.data.begin(), s->image.data.end());
  }
  return Tensor::from_data(shape, std::move(v));
}

Labels labels_to_batch(std::span<const Sample* const> samples) {
  if (samples.empty()) throw UsageError("labels_to_batch: empty batch");
  Labels l;
  l.n = static_cast<int>(samples.size());
  l.h = samples[0]->labels.height;
  l.w = samples[0]->labels.width;
  l.values.reserve(static_cast<std::size_t>(l.n) * l.h * l.w);
  for (const Sample* s : samples) {
    if (s->labels.height != l.h || s->labels.width != l.w) {
      throw DimensionError("labels_to_batch: samples differ in size");
    }
    l.values.insert(l.values.end(), s->labels.data.begin(), s->labels.data.end());
  }
  return l;
}

std::string sample_id(int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%05d", index);
  return buf;
}

void write_dataset(const fs::path& root, const SceneSpec& spec, int count,
                   int val_count, std::uint64_t seed) {
  spec.validate();
  if (count < 0) throw ConfigError("gen-data: count must be >= 0");
  if (val_count < 0 || val_count > count) {
    throw ConfigError("gen-data: val_count must lie in [0, count]");
  }
  std::error_code ec;
  fs::create_directories(root / "img", ec);
  if (!ec) fs::create_directories(root / "lab", ec);
  if (ec) throw IoError("cannot create dataset directory " + root.string() + ": " + ec.message());

  std::string train_list;
  std::string val_list;
  for (int i = 0; i < count; ++i) {
    const Sample s = generate_scene(spec, derive_seed(seed, static_cast<std::uint64_t>(i)));
    const std::string id = sample_id(i);
    save_ppm(root / "img" / (id + ".ppm"), s.image);
    save_pgm(root / "lab" / (id + ".pgm"), s.labels);
    (i < count - val_count ? train_list : val_list) += id + "\n";
  }
  std::string meta = "K=" + std::to_string(spec.num_classes) + "\nH=" +
                     std::to_string(spec.height) + "\nW=" + std::to_string(spec.width) +
                     "\nclasses=";
  for (int k = 0; k < spec.num_classes; ++k) {
    if (k) meta += ",";
    meta += static_cast<std::size_t>(k) < spec.class_names.size() ? spec.class_names[k]
                                                                  : std::to_string(k);
  }
  meta += "\n";
  write_file(root / "meta.txt", meta);
  write_file(root / "train.txt", train_list);
  write_file(root / "val.txt", val_list);
}

namespace {

std::vector<std::string> read_lines(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

int meta_int(const std::map<std::string, std::string>& kv, const std::string& key,
             const fs::path& path) {
  auto it = kv.find(key);
  if (it == kv.end()) throw IoError(path.string() + ": missing key " + key);
  try {
    std::size_t used = 0;
    const int v = std::stoi(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument(key);
    return v;
  } catch (const std::exception&) {
    throw IoError(path.string() + ": key " + key + " is not an integer");
  }
}

Sample load_sample(const fs::path& root, const std::string& id, const DatasetMeta& meta) {
  Sample s;
  try {
    s.image = load_ppm(root / "img" / (id + ".ppm"));
    s.labels = load_pgm(root / "lab" / (id + ".pgm"));
  } catch (const ParseError& e) {
    throw IoError("corrupt dataset sample: " + std::string(e.what()));
  }
  if (s.image.height != meta.height || s.image.width != meta.width ||
      s.labels.height != meta.height || s.labels.width != meta.width) {
    throw IoError("dataset sample " + id + " does not match the extents in meta.txt");
  }
  for (std::uint8_t v : s.labels.data) {
    if (v != kIgnoreLabel && v >= meta.num_classes) {
      throw IoError("dataset sample " + id + " has label " + std::to_string(v) +
                    " outside [0, K)");
    }
  }
  return s;
}

}  // namespace

DatasetMeta read_meta(const fs::path& root) {
  const fs::path path = root / "meta.txt";
  std::map<std::string, std::string> kv;
  for (const std::string& line : read_lines(path)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw IoError(path.string() + ": malformed line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  DatasetMeta m;
  m.num_classes = meta_int(kv, "K", path);
  m.height = meta_int(kv, "H", path);
  m.width = meta_int(kv, "W", path);
  if (m.num_classes < 2 || m.height < 1 || m.width < 1) {
    throw IoError(path.string() + ": K, H and W must be positive (K >= 2)");
  }
  if (auto it = kv.find("classes"); it != kv.end()) {
    std::istringstream in(it->second);
    std::string name;
    while (std::getline(in, name, ',')) m.class_names.push_back(name);
  }
  return m;
}

Dataset load_dataset(const fs::path& root) {
  if (!fs::is_directory(root)) throw IoError("dataset directory " + root.string() + " does not exist");
  Dataset d;
  d.meta = read_meta(root);
  d.train_ids = read_lines(root / "train.txt");
  d.val_ids = read_lines(root / "val.txt");
  d.train.reserve(d.train_ids.size());
  for (const auto& id : d.train_ids) d.train.push_back(load_sample(root, id, d.meta));
  d.val.reserve(d.val_ids.size());
  for (const auto& id : d.val_ids) d.val.push_back(load_sample(root, id, d.meta));
  return d;
}

}  // namespace wseg
