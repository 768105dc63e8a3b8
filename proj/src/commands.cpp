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

#include "wseg/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>

#include "wseg/error.hpp"
#include "wseg/metrics.hpp"
#include "wseg/network.hpp"
#include "wseg/training.hpp"

namespace wseg {

namespace fs = std::filesystem;

const std::array<std::array<std::uint8_t, 3>, 19>& class_palette() {
  // Cityscapes train-id colors.
  static const std::array<std::array<std::uint8_t, 3>, 19> p{{
      {128, 64, 128}, {244, 35, 232}, {70, 70, 70},    {102, 102, 156}, {190, 153, 153},
      {153, 153, 153}, {250, 170, 30}, {220, 220, 0},  {107, 142, 35},  {152, 251, 152},
      {70, 130, 180},  {220, 20, 60},  {255, 0, 0},    {0, 0, 142},     {0, 0, 70},
      {0, 60, 100},    {0, 80, 100},   {0, 0, 230},    {119, 11, 32},
  }};
  return p;
}

Image colorize(const LabelMap& labels) {
  Image m(3, labels.height, labels.width);
  const auto& pal = class_palette();
  for (int y = 0; y < labels.height; ++y) {
    for (int x = 0; x < labels.width; ++x) {
      const std::uint8_t v = labels.at(y, x);
      if (v == kIgnoreLabel) continue;  // black
      const auto& rgb = pal[v % pal.size()];
      for (int c = 0; c < 3; ++c) m.at(c, y, x) = rgb[c] / 255.0;
    }
  }
  return m;
}

Image overlay(const Image& image, const Image& mask) {
  if (image.channels != mask.channels || image.height != mask.height ||
      image.width != mask.width) {
    throw DimensionError("overlay: image and mask differ in size");
  }
  Image o(image.channels, image.height, image.width);
  for (std::size_t i = 0; i < o.data.size(); ++i) {
    const double a = quantize(image.data[i]);
    const double b = quantize(mask.data[i]);
    o.data[i] = std::round(0.5 * a + 0.5 * b) / 255.0;
  }
  return o;
}

Spread median_iqr(std::vector<double> v) {
  if (v.empty()) throw UndefinedError("median of an empty sample");
  std::sort(v.begin(), v.end());
  auto q = [&](double p) {
    const double pos = p * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  return {q(0.5), q(0.75) - q(0.25)};
}

namespace {

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

void write_run_config(const RunConfig& rc, const fs::path& dir) {
  ensure_dir(dir);
  write_file(dir / "run_config.txt", rc.resolved_text());
}

// Fills net.classes / net.height / net.width from the dataset when unset.
RunConfig with_dataset_shape(const RunConfig& rc) {
  RunConfig r = rc;
  if (r.get_int("net.classes") > 0 && r.get_int("net.height") > 0 && r.get_int("net.width") > 0) {
    return r;
  }
  const DatasetMeta meta = read_meta(r.get("data"));
  if (r.get_int("net.classes") == 0) r.set("net.classes", std::to_string(meta.num_classes));
  if (r.get_int("net.height") == 0) {
    const int crop = r.get_int("aug.crop_h");
    r.set("net.height", std::to_string(crop > 0 && r.get_bool("aug.enabled") ? crop : meta.height));
  }
  if (r.get_int("net.width") == 0) {
    const int crop = r.get_int("aug.crop_w");
    r.set("net.width", std::to_string(crop > 0 && r.get_bool("aug.enabled") ? crop : meta.width));
  }
  return r;
}

struct LoadedModel {
  RunConfig rc;
  Network net;
};

// Rebuilds the network stored in a checkpoint. Explicit settings on top of
// the embedded configuration must not change its digest.
LoadedModel load_model(const RunConfig& user) {
  const std::string path = user.get("ckpt");
  if (path.empty()) throw UsageError("--ckpt is required");
  const Checkpoint ckpt = load_checkpoint(path);
  RunConfig rc;
  rc.merge_text(ckpt.config_text, path + " (embedded config)");
  if (rc.digest() != ckpt.config_digest) {
    throw ConfigError("checkpoint refused: embedded config does not match its digest");
  }
  for (const auto& [k, v] : user.explicit_values()) rc.set(k, v);
  if (rc.digest() != ckpt.config_digest) {
    throw ConfigError("checkpoint refused: config digest mismatch (the given keys change "
                      "the model or training configuration)");
  }
  LoadedModel m{rc, Network::build(network_config(rc), rc.get_u64("seed"))};
  load_parameters(m.net, ckpt);
  m.net.set_training(false);
  return m;
}

Image resize_image(const Image& img, int h, int w) {
  if (img.height == h && img.width == w) return img;
  Image out(img.channels, h, w);
  const double ry = static_cast<double>(img.height) / h;
  const double rx = static_cast<double>(img.width) / w;
  for (int y = 0; y < h; ++y) {
    const double sy = std::clamp((y + 0.5) * ry - 0.5, 0.0, img.height - 1.0);
    const int y0 = static_cast<int>(sy);
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double fy = sy - y0;
    for (int x = 0; x < w; ++x) {
      const double sx = std::clamp((x + 0.5) * rx - 0.5, 0.0, img.width - 1.0);
      const int x0 = static_cast<int>(sx);
      const int x1 = std::min(x0 + 1, img.width - 1);
      const double fx = sx - x0;
      for (int c = 0; c < img.channels; ++c) {
        const double top = img.at(c, y0, x0) * (1 - fx) + img.at(c, y0, x1) * fx;
        const double bot = img.at(c, y1, x0) * (1 - fx) + img.at(c, y1, x1) * fx;
        out.at(c, y, x) = top * (1 - fy) + bot * fy;
      }
    }
  }
  return out;
}

LabelMap resize_labels(const LabelMap& m, int h, int w) {
  if (m.height == h && m.width == w) return m;
  LabelMap out(h, w);
  for (int y = 0; y < h; ++y) {
    const int sy = std::min(m.height - 1, static_cast<int>((y + 0.5) * m.height / h));
    for (int x = 0; x < w; ++x) {
      const int sx = std::min(m.width - 1, static_cast<int>((x + 0.5) * m.width / w));
      out.at(y, x) = m.at(sy, sx);
    }
  }
  return out;
}

void csv_count_row(std::ostream& out, const std::string& neck, const std::string& block,
                   const ParamCount& c) {
  out << neck << "," << block << "," << c.conv_weights << "," << c.conv_biases << ","
      << c.norm_params << "," << c.total() << "\n";
}

ParamCount neck_counts(std::ostream& out, const NeckSpec& spec) {
  const ModuleSpec ms = neck_spec(spec, "neck");
  const std::string kind = neck_kind_name(spec.kind);
  for (const ModuleSpec& child : ms.children) {
    ModuleSpec wrapped = ModuleSpec::group("", {child});
    csv_count_row(out, kind, child.name, count_params(wrapped));
  }
  const ParamCount total = count_params(ms);
  csv_count_row(out, kind, "total", total);
  return total;
}

}  // namespace

int cmd_gen_data(const RunConfig& rc, std::ostream& out, std::ostream&) {
  const fs::path root = rc.get("out");
  const int count = rc.get_int("count");
  int val = rc.get_int("val_count");
  if (val < 0) val = count / 10;
  const SceneSpec spec = scene_config(rc);
  write_dataset(root, spec, count, val, rc.get_u64("seed"));
  write_run_config(rc, root);
  out << "wrote " << count << " samples (" << count - val << " train, " << val
      << " val) to " << root.string() << "\n";
  return 0;
}

int cmd_train(const RunConfig& user, std::ostream& out, std::ostream&) {
  const RunConfig rc = with_dataset_shape(user);
  TrainConfig cfg = train_config(rc);
  write_run_config(rc, cfg.out_dir);
  const TrainState st = train(cfg, [&](const HistoryRow& r) {
    out << "epoch " << r.epoch << " train_loss " << format_double(r.train_loss)
        << " val_miou " << format_double(r.val_miou) << std::endl;
  });
  out << "finished " << st.epoch << " epochs\n";
  return 0;
}

int cmd_eval(const RunConfig& user, std::ostream& out, std::ostream&) {
  LoadedModel m = load_model(user);
  const Dataset data = load_dataset(m.rc.get("data"));
  const NetworkConfig& nc = m.net.config();
  if (data.meta.num_classes != nc.num_classes) {
    throw ConfigError("eval: dataset has " + std::to_string(data.meta.num_classes) +
                      " classes, checkpoint has " + std::to_string(nc.num_classes));
  }
  const std::vector<Sample>& samples = m.rc.get("split") == "train" ? data.train : data.val;
  ConfusionMatrix cm(nc.num_classes);
  if (m.rc.get_bool("eval.gt_as_pred")) {
    for (const Sample& s : samples) {
      std::vector<int> gt(s.labels.data.begin(), s.labels.data.end());
      std::vector<int> pred = gt;
      for (int& v : pred) {
        if (v == kIgnoreLabel) v = 0;
      }
      cm.accumulate(pred, gt);
    }
  } else {
    cm = evaluate(m.net, samples);
  }
  const std::string report = metrics_csv(cm, data.meta.class_names);
  const fs::path dir = m.rc.get("out");
  write_run_config(m.rc, dir);
  write_file(dir / "metrics.csv", report);
  out << report;
  return 0;
}

int cmd_predict(const RunConfig& user, std::ostream& out, std::ostream&) {
  LoadedModel m = load_model(user);
  const std::string image_path = m.rc.get("image");
  if (image_path.empty()) throw UsageError("--image is required");
  const Image img = load_ppm(image_path);
  const NetworkConfig& nc = m.net.config();
  Sample s{resize_image(img, nc.height, nc.width), LabelMap()};
  const Sample* ptr = &s;
  const Labels pred = m.net.predict(images_to_batch(std::span<const Sample* const>(&ptr, 1)));
  LabelMap small(nc.height, nc.width);
  for (std::size_t i = 0; i < small.data.size(); ++i) {
    small.data[i] = static_cast<std::uint8_t>(pred.values[i]);
  }
  const LabelMap labels = resize_labels(small, img.height, img.width);
  const Image mask = colorize(labels);
  const fs::path dir = m.rc.get("out");
  write_run_config(m.rc, dir);
  save_ppm(dir / "mask.ppm", mask);
  save_ppm(dir / "overlay.ppm", overlay(img, mask));
  out << "wrote " << (dir / "mask.ppm").string() << " and " << (dir / "overlay.ppm").string()
      << "\n";
  return 0;
}

int cmd_params(const RunConfig& rc, std::ostream& out, std::ostream&) {
  NetworkConfig nc = network_config(rc);
  if (nc.num_classes == 0) nc.num_classes = 3;
  if (nc.height == 0) nc.height = 64;
  if (nc.width == 0) nc.width = 128;
  NeckSpec aspp = nc.neck;
  aspp.kind = NeckSpec::Kind::aspp;
  NeckSpec wasp = nc.neck;
  wasp.kind = NeckSpec::Kind::wasp;

  out << "neck,block,conv_weights,conv_biases,norm_params,total\n";
  const ParamCount a = neck_counts(out, aspp);
  const ParamCount w = neck_counts(out, wasp);
  const ParamCount net = count_params(network_spec(nc.resolved()));
  csv_count_row(out, "network", "total", net);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f",
                100.0 * static_cast<double>(a.conv_weights - w.conv_weights) /
                    static_cast<double>(a.conv_weights));
  out << "reduction_conv_weights_pct," << buf << "\n";
  std::snprintf(buf, sizeof buf, "%.2f",
                100.0 * static_cast<double>(a.total() - w.total()) / static_cast<double>(a.total()));
  out << "reduction_total_pct," << buf << "\n";
  out << "configured_neck," << neck_kind_name(nc.neck.kind) << "\n";
  write_run_config(rc, rc.get("out"));
  return 0;
}

int cmd_bench(const RunConfig& rc, std::ostream& out, std::ostream& err) {
  const int iters = rc.get_int("iters");
  if (iters < 5) {
    throw UsageError("bench needs --iters >= 5 for a meaningful median, got " +
                     std::to_string(iters));
  }
  const int batch = rc.get_int("bench.batch");
  if (batch < 1) throw ConfigError("bench.batch must be >= 1");
  NetworkConfig nc = network_config(rc);
  if (nc.num_classes == 0) nc.num_classes = 3;
  if (nc.height == 0) nc.height = 64;
  if (nc.width == 0) nc.width = 128;
  const std::uint64_t seed = rc.get_u64("seed");

  NetworkConfig ca = nc;
  ca.neck.kind = NeckSpec::Kind::aspp;
  NetworkConfig cw = nc;
  cw.neck.kind = NeckSpec::Kind::wasp;
  Network nets[2] = {Network::build(ca, seed), Network::build(cw, seed)};

  std::mt19937_64 rng(derive_seed(seed, 0x62656e6368ULL));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Shape shape{batch, 3, nc.height, nc.width};
  std::vector<double> pixels(shape.numel());
  for (double& v : pixels) v = unit(rng);
  const Tensor input = Tensor::from_data(shape, pixels);
  Labels labels{batch, nc.height, nc.width, {}};
  labels.values.resize(static_cast<std::size_t>(batch) * nc.height * nc.width);
  for (int& v : labels.values) v = static_cast<int>(rng() % static_cast<std::uint64_t>(nc.num_classes));
  const std::vector<double> weights(nc.num_classes, 1.0);

  auto step = [&](Network& net) {
    const auto t0 = std::chrono::steady_clock::now();
    net.params().zero_grad();
    const ForwardResult r = net.forward(input);
    backward(total_loss(r.main, r.aux, labels, weights, 0.4));
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count();
  };

  err << "# batch shape " << shape.str() << " for both variants, " << iters
      << " timed steps each\n";
  for (int w = 0; w < 2; ++w) {
    step(nets[0]);
    step(nets[1]);
  }
  std::vector<double> times[2];
  for (int i = 0; i < iters; ++i) {
    // Alternate the order so drift affects both variants alike.
    const int first = i % 2;
    times[first].push_back(step(nets[first]));
    times[1 - first].push_back(step(nets[1 - first]));
  }
  out << "variant,median_ms,iqr_ms\n";
  const char* names[2] = {"aspp", "wasp"};
  for (int v = 0; v < 2; ++v) {
    const Spread s = median_iqr(times[v]);
    char buf[96];
    std::snprintf(buf, sizeof buf, "%s,%.4f,%.4f\n", names[v], s.median, s.iqr);
    out << buf;
  }
  write_run_config(rc, rc.get("out"));
  return 0;
}

const std::vector<std::string_view>& command_names() {
  static const std::vector<std::string_view> names{"gen-data", "train",  "eval",
                                                   "predict",  "params", "bench"};
  return names;
}

int run_command(std::string_view name, const RunConfig& rc, std::ostream& out,
                std::ostream& err) {
  if (name == "gen-data") return cmd_gen_data(rc, out, err);
  if (name == "train") return cmd_train(rc, out, err);
  if (name == "eval") return cmd_eval(rc, out, err);
  if (name == "predict") return cmd_predict(rc, out, err);
  if (name == "params") return cmd_params(rc, out, err);
  if (name == "bench") return cmd_bench(rc, out, err);
  throw UsageError("unknown command '" + std::string(name) + "'");
}

}  // namespace wseg
