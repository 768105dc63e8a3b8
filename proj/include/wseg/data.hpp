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

// Synthetic street scenes with a vertical class layout, augmentation, and the
// on-disk dataset layout.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wseg/ops.hpp"
#include "wseg/raster.hpp"
#include "wseg/tensor.hpp"

namespace wseg {

struct Sample {
  Image image;      // (3, H, W) in [0, 1]
  LabelMap labels;  // class ids, 255 = ignore
  bool operator==(const Sample&) const = default;
};

// Horizontal band. Rows belong to bands by nearest center; boundaries sit at
// midpoints between consecutive (jittered) centers.
struct Band {
  int cls = 0;
  double center = 0.5;  // row fraction
  double jitter = 0.0;  // center moves by U(-jitter, jitter)
};

// Small rectangles of `cls` placed entirely inside rows [row_lo, row_hi).
struct ObjectRule {
  int cls = 0;
  double row_lo = 0.0;
  double row_hi = 1.0;
  double rate = 1.0;  // expected count per image
  double min_h = 0.06, max_h = 0.15;  // fractions of H
  double min_w = 0.05, max_w = 0.15;  // fractions of W
};

struct ColorModel {
  std::array<double, 3> mean{0.5, 0.5, 0.5};
  double sigma = 0.05;
};

struct SceneSpec {
  int height = 64;
  int width = 128;
  int num_classes = 3;
  std::vector<std::string> class_names;
  std::vector<Band> bands;  // top to bottom
  std::vector<ColorModel> colors;  // one per class
  std::vector<ObjectRule> objects;
  // Set when two classes share a color model and differ only by placement.
  bool ambiguous_pair = false;
  std::array<int, 2> ambiguous_classes{-1, -1};

  void validate() const;
};

// "trivial" (3 bands, distinct colors), "ambiguous" (two identically colored
// object classes in different height ranges) or "urban".
SceneSpec scene_preset(std::string_view name, int height, int width);

Sample generate_scene(const SceneSpec& spec, std::uint64_t seed);

// Independent per-index stream derived from a master seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

struct AugConfig {
  bool enabled = true;
  double flip_prob = 0.5;
  double scale_lo = 0.75;
  double scale_hi = 1.25;
  int crop_h = 0;  // 0: keep the input size
  int crop_w = 0;
  double blur_sigma_lo = 0.0;
  double blur_sigma_hi = 1.0;
  // Factors are drawn from [1 - x, 1 + x]; the hue shift from [-hue, hue]
  // in turns (1.0 is a full rotation).
  double brightness = 0.2;
  double contrast = 0.2;
  double saturation = 0.2;
  double hue = 0.02;

  void validate() const;
};

Sample hflip(const Sample& sample, double prob, std::mt19937_64& rng);
Sample hflip(const Sample& sample);  // unconditional

// Image bilinear, labels nearest neighbour, both through the same pixel-center
// map. Content wider than the crop is windowed at (off_y, off_x); content
// smaller than the crop sits top-left and the rest is 0 / 255.
Sample scale_crop(const Sample& sample, double scale, int crop_h, int crop_w,
                  int off_y, int off_x);
Sample scale_crop(const Sample& sample, const AugConfig& cfg, std::mt19937_64& rng);

// Separable, normalised kernel of radius ceil(3 sigma), half-sample
// symmetric border. sigma == 0 is the identity.
Image gaussian_blur(const Image& image, double sigma);
std::vector<double> gaussian_kernel(double sigma);

Image color_jitter(const Image& image, double brightness, double contrast,
                   double saturation, double hue_shift);
Image color_jitter(const Image& image, const AugConfig& cfg, std::mt19937_64& rng);

double luma(double r, double g, double b);

// flip -> scale/crop -> blur -> color jitter; deterministic in rng. A disabled
// config returns the sample unchanged.
Sample augment(const Sample& sample, const AugConfig& cfg, std::mt19937_64& rng);

Tensor images_to_batch(std::span<const Sample* const> samples);
Labels labels_to_batch(std::span<const Sample* const> samples);

struct DatasetMeta {
  int num_classes = 0;
  int height = 0;
  int width = 0;
  std::vector<std::string> class_names;
};

// Writes img/<id>.ppm, lab/<id>.pgm, meta.txt, train.txt and val.txt.
// The last val_count indices form the validation split.
void write_dataset(const std::filesystem::path& root, const SceneSpec& spec,
                   int count, int val_count, std::uint64_t seed);

struct Dataset {
  DatasetMeta meta;
  std::vector<std::string> train_ids;
  std::vector<std::string> val_ids;
  std::vector<Sample> train;
  std::vector<Sample> val;
};

DatasetMeta read_meta(const std::filesystem::path& root);
// Loads every listed sample and checks it against meta.txt.
Dataset load_dataset(const std::filesystem::path& root);
std::string sample_id(int index);

}  // namespace wseg
