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

#include "wseg/config.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "wseg/error.hpp"

namespace wseg {

namespace {

using K = ValueKind;

std::vector<ConfigKey> make_registry() {
  return {
      // Run and path keys: not part of the digest.
      {"data", "data", K::text, {}, false, "dataset directory"},
      {"out", "out", K::text, {}, false, "output directory"},
      {"ckpt", "", K::text, {}, false, "checkpoint to evaluate or predict with"},
      {"resume", "", K::text, {}, false, "checkpoint to continue training from"},
      {"split", "val", K::choice, {"train", "val"}, false, "split evaluated by eval"},
      {"image", "", K::text, {}, false, "input PPM for predict"},
      {"epochs", "30", K::integer, {}, false, "training epochs"},
      {"count", "220", K::integer, {}, false, "samples written by gen-data"},
      {"val_count", "-1", K::integer, {}, false, "validation samples (-1: count/10)"},
      {"scene.preset", "trivial", K::choice, {"trivial", "ambiguous", "urban"}, false,
       "synthetic scene family for gen-data"},
      {"iters", "20", K::integer, {}, false, "timed steps per variant for bench"},
      {"bench.batch", "2", K::integer, {}, false, "batch size for bench"},
      {"eval.gt_as_pred", "false", K::boolean, {}, false,
       "debug: score ground truth against itself"},
      // Model and training identity.
      {"variant", "baseline", K::choice, {"baseline", "hanet", "hanet+wasp"}, true,
       "experiment row: neck, attention and weight decay preset"},
      {"seed", "1", K::uint64, {}, true, "master seed"},
      {"net.classes", "0", K::integer, {}, true, "class count (0: from the dataset)"},
      {"net.height", "0", K::integer, {}, true, "input height (0: from the dataset)"},
      {"net.width", "0", K::integer, {}, true, "input width (0: from the dataset)"},
      {"net.output_stride", "16", K::choice, {"8", "16"}, true, "backbone output stride"},
      {"net.stem", "16", K::integer, {}, true, "stem width"},
      {"net.widths", "16,32,64,64", K::int_list, {}, true, "stage widths"},
      {"net.low_channels", "8", K::integer, {}, true, "decoder low-level reduction width"},
      {"net.decoder_channels", "16", K::integer, {}, true, "decoder conv width"},
      {"net.aux", "true", K::boolean, {}, true, "auxiliary head on stage 3"},
      {"neck.kind", "aspp", K::choice, {"aspp", "wasp"}, true, "pooling neck"},
      {"neck.c_b", "16", K::integer, {}, true, "neck branch width"},
      {"neck.rates", "2,4,6", K::int_list, {}, true, "dilation rates r1,r2,r3"},
      {"hanet.enabled", "false", K::boolean, {}, true, "height-driven attention on the neck"},
      {"hanet.h_hat", "8", K::integer, {}, true, "coarse attention rows"},
      {"hanet.reduction", "4", K::integer, {}, true, "bottleneck reduction"},
      {"hanet.pe_base", "100", K::real, {}, true, "positional encoding base"},
      {"hanet.pe", "true", K::boolean, {}, true, "add the positional encoding"},
      {"train.lr", "0.01", K::real, {}, true, "base learning rate"},
      {"train.momentum", "0.9", K::real, {}, true, "SGD momentum"},
      {"train.weight_decay", "0.0005", K::real, {}, true, "L2 on conv weights"},
      {"train.poly_power", "0.9", K::real, {}, true, "polynomial schedule exponent"},
      {"train.aux_weight", "0.4", K::real, {}, true, "auxiliary loss weight"},
      {"train.batch", "4", K::integer, {}, true, "mini-batch size"},
      {"train.class_weights", "", K::real_list, {}, true,
       "per-class CE weights (empty: inverse log frequency)"},
      {"aug.enabled", "true", K::boolean, {}, true, "online augmentation"},
      {"aug.flip_prob", "0.5", K::real, {}, true, "horizontal flip probability"},
      {"aug.scale_lo", "0.75", K::real, {}, true, "lower scale bound"},
      {"aug.scale_hi", "1.25", K::real, {}, true, "upper scale bound"},
      {"aug.crop_h", "0", K::integer, {}, true, "crop height (0: input height)"},
      {"aug.crop_w", "0", K::integer, {}, true, "crop width (0: input width)"},
      {"aug.blur_lo", "0", K::real, {}, true, "lower blur sigma"},
      {"aug.blur_hi", "1", K::real, {}, true, "upper blur sigma"},
      {"aug.brightness", "0.2", K::real, {}, true, "brightness factor spread"},
      {"aug.contrast", "0.2", K::real, {}, true, "contrast factor spread"},
      {"aug.saturation", "0.2", K::real, {}, true, "saturation factor spread"},
      {"aug.hue", "0.02", K::real, {}, true, "hue shift spread in turns"},
  };
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto comma = s.find(',', start);
    out.push_back(trim(s.substr(start, comma == std::string_view::npos ? s.size() - start : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

[[noreturn]] void bad_value(const ConfigKey& k, std::string_view v, const char* expected) {
  throw ConfigError("key " + k.key + ": '" + std::string(v) + "' is not " + expected);
}

std::string canonical_int(const ConfigKey& k, std::string_view v) {
  long long x = 0;
  if (!parse_number(v, x) || x < -2147483648LL || x > 2147483647LL) bad_value(k, v, "an integer");
  return std::to_string(x);
}

std::string canonical_real(const ConfigKey& k, std::string_view v) {
  double x = 0;
  if (!parse_number(v, x) || !std::isfinite(x)) bad_value(k, v, "a finite number");
  return format_double(x);
}

std::string canonicalize(const ConfigKey& k, std::string_view raw) {
  const std::string v = trim(raw);
  switch (k.kind) {
    case K::integer: return canonical_int(k, v);
    case K::uint64: {
      std::uint64_t x = 0;
      if (!parse_number(std::string_view(v), x)) bad_value(k, v, "a non-negative integer");
      return std::to_string(x);
    }
    case K::real: return canonical_real(k, v);
    case K::boolean:
      if (v == "true" || v == "1" || v == "yes" || v == "on") return "true";
      if (v == "false" || v == "0" || v == "no" || v == "off") return "false";
      bad_value(k, v, "a boolean");
    case K::text: return v;
    case K::int_list:
    case K::real_list: {
      std::string out;
      for (const std::string& item : split_list(v)) {
        if (!out.empty()) out += ",";
        out += k.kind == K::int_list ? canonical_int(k, item) : canonical_real(k, item);
      }
      return out;
    }
    case K::choice:
      for (const std::string& c : k.choices) {
        if (v == c) return v;
      }
      {
        std::string list;
        for (const std::string& c : k.choices) list += (list.empty() ? "" : ", ") + c;
        throw ConfigError("key " + k.key + ": '" + v + "' is not one of " + list);
      }
  }
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, ptr);
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = make_registry();
  return keys;
}

const ConfigKey* find_config_key(std::string_view key) {
  for (const ConfigKey& k : config_keys()) {
    if (k.key == key) return &k;
  }
  return nullptr;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const ConfigKey* k = find_config_key(key);
  if (!k) throw ConfigError("unknown config key '" + key + "'");
  explicit_[key] = canonicalize(*k, value);
}

void RunConfig::merge_text(std::string_view text, std::string_view origin) {
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto nl = text.find('\n', start);
    const std::string_view raw =
        text.substr(start, nl == std::string_view::npos ? text.size() - start : nl - start);
    ++line_no;
    std::string line(raw);
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (!line.empty()) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw ConfigError(std::string(origin) + ":" + std::to_string(line_no) +
                          ": expected key=value");
      }
      try {
        set(trim(line.substr(0, eq)), line.substr(eq + 1));
      } catch (const ConfigError& e) {
        throw ConfigError(std::string(origin) + ":" + std::to_string(line_no) + ": " + e.what());
      }
    }
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
}

void RunConfig::load_file(const std::filesystem::path& path) {
  merge_text(read_file(path), path.string());
}

std::map<std::string, std::string> variant_preset(Variant v) {
  switch (v) {
    case Variant::baseline:
      return {{"neck.kind", "aspp"}, {"hanet.enabled", "false"}, {"train.weight_decay", "0.0005"}};
    case Variant::hanet:
      return {{"neck.kind", "aspp"}, {"hanet.enabled", "true"}, {"train.weight_decay", "0.001"}};
    case Variant::hanet_wasp:
      return {{"neck.kind", "wasp"}, {"hanet.enabled", "true"}, {"train.weight_decay", "0.0005"}};
  }
  return {};
}

std::string RunConfig::get(const std::string& key) const {
  const ConfigKey* k = find_config_key(key);
  if (!k) throw InternalError("lookup of unregistered key " + key);
  if (auto it = explicit_.find(key); it != explicit_.end()) return it->second;
  if (key != "variant") {
    const auto preset = variant_preset(parse_variant(get("variant")));
    if (auto it = preset.find(key); it != preset.end()) return canonicalize(*k, it->second);
  }
  return canonicalize(*k, k->default_value);
}

int RunConfig::get_int(const std::string& key) const {
  long long x = 0;
  const std::string v = get(key);
  if (!parse_number(std::string_view(v), x)) throw ConfigError("key " + key + " is not an integer");
  return static_cast<int>(x);
}

std::uint64_t RunConfig::get_u64(const std::string& key) const {
  std::uint64_t x = 0;
  const std::string v = get(key);
  if (!parse_number(std::string_view(v), x)) throw ConfigError("key " + key + " is not an integer");
  return x;
}

double RunConfig::get_double(const std::string& key) const {
  double x = 0;
  const std::string v = get(key);
  if (!parse_number(std::string_view(v), x)) throw ConfigError("key " + key + " is not a number");
  return x;
}

bool RunConfig::get_bool(const std::string& key) const { return get(key) == "true"; }

std::vector<int> RunConfig::get_ints(const std::string& key) const {
  std::vector<int> out;
  for (const std::string& s : split_list(get(key))) {
    long long x = 0;
    parse_number(std::string_view(s), x);
    out.push_back(static_cast<int>(x));
  }
  return out;
}

std::vector<double> RunConfig::get_doubles(const std::string& key) const {
  std::vector<double> out;
  for (const std::string& s : split_list(get(key))) {
    double x = 0;
    parse_number(std::string_view(s), x);
    out.push_back(x);
  }
  return out;
}

std::string RunConfig::resolved_text() const {
  std::string out;
  for (const ConfigKey& k : config_keys()) out += k.key + "=" + get(k.key) + "\n";
  return out;
}

std::uint64_t RunConfig::digest() const {
  std::string text;
  for (const ConfigKey& k : config_keys()) {
    if (k.digest) text += k.key + "=" + get(k.key) + "\n";
  }
  return fnv1a64(text);
}

NetworkConfig network_config(const RunConfig& rc) {
  NetworkConfig c;
  c.num_classes = rc.get_int("net.classes");
  c.height = rc.get_int("net.height");
  c.width = rc.get_int("net.width");
  c.output_stride = rc.get_int("net.output_stride");
  c.stem_channels = rc.get_int("net.stem");
  const std::vector<int> widths = rc.get_ints("net.widths");
  if (widths.size() != 4) throw ConfigError("key net.widths: expected 4 stage widths");
  for (std::size_t i = 0; i < 4; ++i) c.stage_channels[i] = widths[i];
  c.low_level_channels = rc.get_int("net.low_channels");
  c.decoder_channels = rc.get_int("net.decoder_channels");
  c.aux_enabled = rc.get_bool("net.aux");
  c.neck.kind = rc.get("neck.kind") == "aspp" ? NeckSpec::Kind::aspp : NeckSpec::Kind::wasp;
  c.neck.c_in = c.stage_channels[3];
  c.neck.c_b = rc.get_int("neck.c_b");
  const std::vector<int> rates = rc.get_ints("neck.rates");
  if (rates.size() != 3) throw ConfigError("key neck.rates: expected 3 rates");
  c.neck.rates = {rates[0], rates[1], rates[2]};
  if (rc.get_bool("hanet.enabled")) {
    HanetSpec h;
    h.c_l = c.stage_channels[3];
    h.c_h = c.neck.c_b;
    h.h_hat = rc.get_int("hanet.h_hat");
    h.reduction = rc.get_int("hanet.reduction");
    h.pe_base = rc.get_double("hanet.pe_base");
    h.enable_pe = rc.get_bool("hanet.pe");
    c.hanet = h;
  }
  return c;
}

AugConfig aug_config(const RunConfig& rc) {
  AugConfig a;
  a.enabled = rc.get_bool("aug.enabled");
  a.flip_prob = rc.get_double("aug.flip_prob");
  a.scale_lo = rc.get_double("aug.scale_lo");
  a.scale_hi = rc.get_double("aug.scale_hi");
  a.crop_h = rc.get_int("aug.crop_h");
  a.crop_w = rc.get_int("aug.crop_w");
  a.blur_sigma_lo = rc.get_double("aug.blur_lo");
  a.blur_sigma_hi = rc.get_double("aug.blur_hi");
  a.brightness = rc.get_double("aug.brightness");
  a.contrast = rc.get_double("aug.contrast");
  a.saturation = rc.get_double("aug.saturation");
  a.hue = rc.get_double("aug.hue");
  a.validate();
  return a;
}

TrainConfig train_config(const RunConfig& rc) {
  TrainConfig t;
  t.net = network_config(rc);
  t.aug = aug_config(rc);
  t.base_lr = rc.get_double("train.lr");
  t.momentum = rc.get_double("train.momentum");
  t.weight_decay = rc.get_double("train.weight_decay");
  t.poly_power = rc.get_double("train.poly_power");
  t.aux_weight = rc.get_double("train.aux_weight");
  t.epochs = rc.get_int("epochs");
  t.batch_size = rc.get_int("train.batch");
  t.seed = rc.get_u64("seed");
  t.class_weights = rc.get_doubles("train.class_weights");
  t.data_root = rc.get("data");
  t.out_dir = rc.get("out");
  t.resume = rc.get("resume");
  t.config_text = rc.resolved_text();
  t.config_digest = rc.digest();
  return t;
}

SceneSpec scene_config(const RunConfig& rc) {
  const int h = rc.get_int("net.height");
  const int w = rc.get_int("net.width");
  return scene_preset(rc.get("scene.preset"), h > 0 ? h : 64, w > 0 ? w : 128);
}

}  // namespace wseg
