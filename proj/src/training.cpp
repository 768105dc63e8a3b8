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

#include "wseg/training.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <numeric>
#include <sstream>

#include "wseg/error.hpp"

namespace wseg {

namespace fs = std::filesystem;

double poly_lr(std::int64_t iter, std::int64_t max_iter, double base_lr, double power) {
  if (max_iter <= 0) throw ConfigError("poly_lr: max_iter must be > 0");
  if (iter < 0 || iter > max_iter) {
    throw ConfigError("poly_lr: iter " + std::to_string(iter) + " outside [0, " +
                      std::to_string(max_iter) + "]");
  }
  if (!(power > 0.0)) throw ConfigError("poly_lr: power must be > 0");
  const double frac = 1.0 - static_cast<double>(iter) / static_cast<double>(max_iter);
  return base_lr * std::pow(frac, power);
}

Tensor total_loss(const Tensor& main, const Tensor& aux, const Labels& labels,
                  std::span<const double> class_weights, double aux_weight,
                  int ignore_index) {
  Tensor loss = softmax_cross_entropy(main, labels, class_weights, ignore_index);
  if (!aux.defined()) return loss;
  Tensor a = softmax_cross_entropy(aux, labels, class_weights, ignore_index);
  return add(loss, scale(a, aux_weight));
}

void sgd_step(std::span<double> w, std::span<const double> g, std::span<double> v,
              double lr, double momentum, double weight_decay) {
  if (w.size() != v.size() || (!g.empty() && g.size() != w.size())) {
    throw InternalError("sgd_step: buffer lengths differ (" + std::to_string(w.size()) +
                        ", " + std::to_string(g.size()) + ", " + std::to_string(v.size()) + ")");
  }
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double gi = (g.empty() ? 0.0 : g[i]) + weight_decay * w[i];
    v[i] = momentum * v[i] + gi;
    w[i] -= lr * v[i];
  }
}

Optimizer::Optimizer(const ParameterSet& params) {
  velocity_.reserve(params.entries().size());
  for (const ParamEntry& e : params.entries()) {
    velocity_.emplace_back(is_trainable(e.role) ? e.tensor.numel() : 0, 0.0);
  }
}

void Optimizer::step(ParameterSet& params, double lr, double momentum,
                     double weight_decay) {
  auto& entries = params.entries();
  if (entries.size() != velocity_.size()) {
    throw InternalError("optimizer: parameter count changed");
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    ParamEntry& e = entries[i];
    if (!is_trainable(e.role)) continue;
    const double wd = e.role == ParamRole::conv_weight ? weight_decay : 0.0;
    std::span<const double> g = e.tensor.has_grad() ? e.tensor.grad() : std::span<const double>{};
    sgd_step(e.tensor.mutable_data(), g, velocity_[i], lr, momentum, wd);
  }
}

std::vector<double> inverse_log_frequency(std::span<const Sample> samples, int num_classes) {
  std::vector<std::int64_t> counts(num_classes, 0);
  std::int64_t total = 0;
  for (const Sample& s : samples) {
    for (std::uint8_t v : s.labels.data) {
      if (v == kIgnoreLabel) continue;
      if (v >= num_classes) throw DataError("class weights: label " + std::to_string(v) + " out of range");
      ++counts[v];
      ++total;
    }
  }
  std::vector<double> w(num_classes);
  for (int k = 0; k < num_classes; ++k) {
    const double f = total > 0 ? static_cast<double>(counts[k]) / static_cast<double>(total) : 0.0;
    w[k] = 1.0 / std::log(1.02 + f);
  }
  return w;
}

Variant parse_variant(std::string_view text) {
  if (text == "baseline") return Variant::baseline;
  if (text == "hanet") return Variant::hanet;
  if (text == "hanet+wasp") return Variant::hanet_wasp;
  throw ConfigError("unknown variant '" + std::string(text) +
                    "' (expected baseline, hanet or hanet+wasp)");
}

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::baseline: return "baseline";
    case Variant::hanet: return "hanet";
    case Variant::hanet_wasp: return "hanet+wasp";
  }
  return "?";
}

void TrainConfig::validate() const {
  if (!(base_lr > 0.0)) throw ConfigError("train: base_lr must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("train: momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("train: weight_decay must be >= 0");
  if (!(poly_power > 0.0)) throw ConfigError("train: poly_power must be > 0");
  if (!(aux_weight >= 0.0)) throw ConfigError("train: aux_weight must be >= 0");
  if (epochs < 0) throw ConfigError("train: epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("train: batch size must be >= 1");
  if (!class_weights.empty() &&
      static_cast<int>(class_weights.size()) != net.num_classes) {
    throw ConfigError("train: expected " + std::to_string(net.num_classes) +
                      " class weights, got " + std::to_string(class_weights.size()));
  }
  for (double w : class_weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("train: class weights must be finite and >= 0");
  }
  aug.validate();
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string history_csv(std::span<const HistoryRow> rows) {
  std::string out = "epoch,train_loss,val_miou\n";
  for (const HistoryRow& r : rows) {
    out += std::to_string(r.epoch) + "," + fmt_double(r.train_loss) + "," +
           fmt_double(r.val_miou) + "\n";
  }
  return out;
}

ConfusionMatrix evaluate(Network& net, std::span<const Sample> samples, int batch_size) {
  ConfusionMatrix cm(net.config().num_classes);
  for (std::size_t start = 0; start < samples.size(); start += batch_size) {
    const std::size_t end = std::min(samples.size(), start + batch_size);
    std::vector<const Sample*> batch;
    for (std::size_t i = start; i < end; ++i) batch.push_back(&samples[i]);
    const Labels pred = net.predict(images_to_batch(batch));
    const Labels gt = labels_to_batch(batch);
    cm.accumulate(pred.values, gt.values);
  }
  return cm;
}

namespace {

double val_miou(Network& net, std::span<const Sample> val) {
  if (val.empty()) return std::numeric_limits<double>::quiet_NaN();
  const ConfusionMatrix cm = evaluate(net, val);
  try {
    return iou(cm).mean;
  } catch (const UndefinedError&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

std::string rng_text(const std::mt19937_64& rng) {
  std::ostringstream out;
  out << rng;
  return out.str();
}

}  // namespace

TrainState train(const TrainConfig& cfg,
                 const std::function<void(const HistoryRow&)>& on_epoch) {
  cfg.validate();
  // Fail on a missing or corrupt dataset before any work.
  const Dataset data = load_dataset(cfg.data_root);
  const NetworkConfig netcfg = cfg.net.resolved();
  if (data.meta.num_classes != netcfg.num_classes) {
    throw ConfigError("train: dataset has " + std::to_string(data.meta.num_classes) +
                      " classes, network is configured for " + std::to_string(netcfg.num_classes));
  }
  const int crop_h = cfg.aug.crop_h > 0 ? cfg.aug.crop_h : data.meta.height;
  const int crop_w = cfg.aug.crop_w > 0 ? cfg.aug.crop_w : data.meta.width;
  const int in_h = cfg.aug.enabled ? crop_h : data.meta.height;
  const int in_w = cfg.aug.enabled ? crop_w : data.meta.width;
  if (in_h != netcfg.height || in_w != netcfg.width) {
    throw ConfigError("train: network input " + std::to_string(netcfg.height) + "x" +
                      std::to_string(netcfg.width) + " does not match training crops " +
                      std::to_string(in_h) + "x" + std::to_string(in_w));
  }
  if (!data.val.empty() &&
      (data.meta.height != netcfg.height || data.meta.width != netcfg.width)) {
    throw ConfigError("train: validation images must match the network input size");
  }
  if (data.train.empty() && cfg.epochs > 0) throw IoError("train: training split is empty");

  const std::vector<double> weights =
      cfg.class_weights.empty() ? inverse_log_frequency(data.train, netcfg.num_classes)
                                : cfg.class_weights;

  TrainState st;
  st.net = Network::build(netcfg, cfg.seed);
  st.optimizer = Optimizer(st.net.params());
  st.rng.seed(derive_seed(cfg.seed, 0x7261696eULL));
  if (!cfg.resume.empty()) {
    restore(st, load_checkpoint(cfg.resume), cfg.config_digest);
    if (st.epoch > cfg.epochs) {
      throw ConfigError("train: checkpoint is at epoch " + std::to_string(st.epoch) +
                        ", beyond the requested " + std::to_string(cfg.epochs));
    }
  }

  auto write_outputs = [&] {
    if (cfg.out_dir.empty()) return;
    write_file(cfg.out_dir / "history.csv", history_csv(st.history));
  };
  if (!cfg.out_dir.empty()) {
    std::error_code ec;
    fs::create_directories(cfg.out_dir, ec);
    if (ec) throw IoError("cannot create " + cfg.out_dir.string() + ": " + ec.message());
  }
  write_outputs();

  const auto n = static_cast<std::int64_t>(data.train.size());
  const std::int64_t iters_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  const std::int64_t max_iter = iters_per_epoch * cfg.epochs;
  std::vector<std::size_t> order(data.train.size());

  while (st.epoch < cfg.epochs) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), st.rng);
    double loss_sum = 0.0;
    for (std::int64_t it = 0; it < iters_per_epoch; ++it) {
      const std::int64_t global = st.epoch * iters_per_epoch + it;
      const std::size_t lo = static_cast<std::size_t>(it * cfg.batch_size);
      const std::size_t hi = std::min(data.train.size(), lo + cfg.batch_size);
      std::vector<Sample> augmented;
      augmented.reserve(hi - lo);
      for (std::size_t i = lo; i < hi; ++i) {
        const std::uint64_t sample_seed = st.rng();
        if (cfg.aug.enabled) {
          std::mt19937_64 local(sample_seed);
          augmented.push_back(augment(data.train[order[i]], cfg.aug, local));
        } else {
          augmented.push_back(data.train[order[i]]);
        }
      }
      std::vector<const Sample*> ptrs;
      for (const Sample& s : augmented) ptrs.push_back(&s);

      st.net.set_training(true);
      st.net.params().zero_grad();
      const ForwardResult out = st.net.forward(images_to_batch(ptrs));
      const Tensor loss = total_loss(out.main, out.aux, labels_to_batch(ptrs), weights,
                                     cfg.aux_weight);
      backward(loss);
      const double lr = poly_lr(global, max_iter, cfg.base_lr, cfg.poly_power);
      st.optimizer.step(st.net.params(), lr, cfg.momentum, cfg.weight_decay);
      loss_sum += loss.item();
    }
    ++st.epoch;
    HistoryRow row{st.epoch, loss_sum / static_cast<double>(iters_per_epoch),
                   val_miou(st.net, data.val)};
    st.net.set_training(true);
    st.history.push_back(row);
    if (!cfg.out_dir.empty()) {
      save_checkpoint(cfg.out_dir / ("ckpt_" + std::to_string(st.epoch) + ".wseg"),
                      snapshot(st, cfg.config_text, cfg.config_digest));
    }
    write_outputs();
    if (on_epoch) on_epoch(row);
  }
  return st;
}

// Checkpoint layout, all integers little-endian:
//   "WSEG1" u32 version u64 digest str config u32 epoch
//   u32 count { str name u8 role i32[4] shape f64[numel] }
//   u32 count { u64 len f64[len] }            velocity, one per parameter
//   str rng  u32 count { i32 epoch f64 loss f64 miou }
//   u64 fnv1a of everything before it
// where str is u32 length followed by bytes.

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

constexpr char kMagic[] = "WSEG1";
constexpr std::size_t kMagicLen = 5;

class Writer {
 public:
  template <typename T>
  void put(T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
      unsigned char b[sizeof(T)];
      std::memcpy(b, &v, sizeof(T));
      std::reverse(b, b + sizeof(T));
      out_.append(reinterpret_cast<const char*>(b), sizeof(T));
    } else {
      out_.append(reinterpret_cast<const char*>(&v), sizeof(T));
    }
  }
  void str(std::string_view s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    out_.append(s);
  }
  void raw(std::string_view s) { out_.append(s); }
  void doubles(std::span<const double> v) {
    for (double d : v) put(d);
  }
  std::string& bytes() { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view b) : b_(b) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    unsigned char b[sizeof(T)];
    std::memcpy(b, b_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
      std::reverse(b, b + sizeof(T));
    }
    T v;
    std::memcpy(&v, b, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string str(const char* what) {
    const auto n = get<std::uint32_t>(what);
    need(n, what);
    std::string s(b_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::vector<double> doubles(std::size_t n, const char* what) {
    if (n > (b_.size() - pos_) / sizeof(double)) fail(what);
    std::vector<double> v(n);
    for (double& d : v) d = get<double>(what);
    return v;
  }
  std::size_t pos() const { return pos_; }
  [[noreturn]] void fail(const char* what) const {
    throw ParseError(std::string("checkpoint truncated while reading ") + what, pos_);
  }

 private:
  void need(std::size_t n, const char* what) const {
    if (b_.size() - pos_ < n) fail(what);
  }
  std::string_view b_;
  std::size_t pos_ = 0;
};

}  // namespace

Checkpoint snapshot(const TrainState& state, const std::string& config_text,
                    std::uint64_t digest) {
  Checkpoint c;
  c.config_digest = digest;
  c.config_text = config_text;
  c.epoch = state.epoch;
  for (const ParamEntry& e : state.net.params().entries()) {
    c.params.push_back({e.name, e.role, e.tensor.shape(),
                        std::vector<double>(e.tensor.data().begin(), e.tensor.data().end())});
  }
  c.velocity = state.optimizer.velocity();
  c.rng_state = rng_text(state.rng);
  c.history = state.history;
  return c;
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.raw(std::string_view(kMagic, kMagicLen));
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::uint64_t>(ckpt.config_digest);
  w.str(ckpt.config_text);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ckpt.epoch));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ckpt.params.size()));
  for (const auto& p : ckpt.params) {
    w.str(p.name);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(p.role));
    w.put<std::int32_t>(p.shape.n);
    w.put<std::int32_t>(p.shape.c);
    w.put<std::int32_t>(p.shape.h);
    w.put<std::int32_t>(p.shape.w);
    w.doubles(p.values);
  }
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ckpt.velocity.size()));
  for (const auto& v : ckpt.velocity) {
    w.put<std::uint64_t>(v.size());
    w.doubles(v);
  }
  w.str(ckpt.rng_state);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ckpt.history.size()));
  for (const HistoryRow& r : ckpt.history) {
    w.put<std::int32_t>(r.epoch);
    w.put<double>(r.train_loss);
    w.put<double>(r.val_miou);
  }
  const std::uint64_t sum = fnv1a64(w.bytes());
  w.put<std::uint64_t>(sum);
  return std::move(w.bytes());
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  if (bytes.size() < kMagicLen || bytes.substr(0, kMagicLen) != std::string_view(kMagic, kMagicLen)) {
    throw ConfigError("checkpoint refused: bad magic (not a WSEG1 file)");
  }
  Reader r(bytes);
  for (std::size_t i = 0; i < kMagicLen; ++i) (void)r.get<char>("magic");
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw ConfigError("checkpoint refused: format version " + std::to_string(version) +
                      ", this build reads " + std::to_string(kCheckpointVersion));
  }
  if (bytes.size() < kMagicLen + 4 + 8) r.fail("header");
  const std::string_view body = bytes.substr(0, bytes.size() - 8);
  Reader tail(bytes.substr(bytes.size() - 8));
  if (tail.get<std::uint64_t>("checksum") != fnv1a64(body)) {
    throw ConfigError("checkpoint refused: checksum mismatch (file is corrupt or truncated)");
  }

  Checkpoint c;
  c.config_digest = r.get<std::uint64_t>("digest");
  c.config_text = r.str("config");
  c.epoch = static_cast<int>(r.get<std::uint32_t>("epoch"));
  const auto np = r.get<std::uint32_t>("parameter count");
  for (std::uint32_t i = 0; i < np; ++i) {
    Checkpoint::Blob b;
    b.name = r.str("parameter name");
    const auto role = r.get<std::uint8_t>("parameter role");
    if (role > static_cast<std::uint8_t>(ParamRole::running_var)) {
      throw ParseError("checkpoint has unknown parameter role", r.pos() - 1);
    }
    b.role = static_cast<ParamRole>(role);
    b.shape.n = r.get<std::int32_t>("shape");
    b.shape.c = r.get<std::int32_t>("shape");
    b.shape.h = r.get<std::int32_t>("shape");
    b.shape.w = r.get<std::int32_t>("shape");
    if (b.shape.n < 0 || b.shape.c < 0 || b.shape.h < 0 || b.shape.w < 0) {
      throw ParseError("checkpoint has a negative extent", r.pos());
    }
    b.values = r.doubles(b.shape.numel(), "parameter values");
    c.params.push_back(std::move(b));
  }
  const auto nv = r.get<std::uint32_t>("velocity count");
  for (std::uint32_t i = 0; i < nv; ++i) {
    const auto len = r.get<std::uint64_t>("velocity length");
    c.velocity.push_back(r.doubles(len, "velocity values"));
  }
  c.rng_state = r.str("rng state");
  const auto nh = r.get<std::uint32_t>("history count");
  for (std::uint32_t i = 0; i < nh; ++i) {
    HistoryRow h;
    h.epoch = r.get<std::int32_t>("history");
    h.train_loss = r.get<double>("history");
    h.val_miou = r.get<double>("history");
    c.history.push_back(h);
  }
  if (r.pos() != body.size()) {
    throw ParseError("checkpoint has trailing bytes", r.pos());
  }
  return c;
}

void save_checkpoint(const fs::path& path, const Checkpoint& ckpt) {
  write_file(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const fs::path& path) {
  const std::string bytes = read_file(path);
  try {
    return decode_checkpoint(bytes);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void load_parameters(Network& net, const Checkpoint& ckpt) {
  auto& entries = net.params().entries();
  if (entries.size() != ckpt.params.size()) {
    throw ConfigError("checkpoint refused: it holds " + std::to_string(ckpt.params.size()) +
                      " tensors, the network has " + std::to_string(entries.size()));
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& b = ckpt.params[i];
    if (b.name != entries[i].name || b.role != entries[i].role ||
        !(b.shape == entries[i].tensor.shape())) {
      throw ConfigError("checkpoint refused: tensor " + std::to_string(i) + " is " + b.name +
                        " " + b.shape.str() + ", the network expects " + entries[i].name +
                        " " + entries[i].tensor.shape().str());
    }
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    std::copy(ckpt.params[i].values.begin(), ckpt.params[i].values.end(),
              entries[i].tensor.mutable_data().begin());
  }
}

void restore(TrainState& state, const Checkpoint& ckpt, std::uint64_t expected_digest) {
  if (ckpt.config_digest != expected_digest) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "checkpoint refused: config digest %016llx, expected %016llx",
                  static_cast<unsigned long long>(ckpt.config_digest),
                  static_cast<unsigned long long>(expected_digest));
    throw ConfigError(buf);
  }
  load_parameters(state.net, ckpt);
  auto& vel = state.optimizer.velocity();
  if (vel.size() != ckpt.velocity.size()) {
    throw ConfigError("checkpoint refused: velocity buffer count differs");
  }
  for (std::size_t i = 0; i < vel.size(); ++i) {
    if (vel[i].size() != ckpt.velocity[i].size()) {
      throw ConfigError("checkpoint refused: velocity buffer " + std::to_string(i) + " has the wrong length");
    }
    vel[i] = ckpt.velocity[i];
  }
  std::istringstream in(ckpt.rng_state);
  in >> state.rng;
  if (!in) throw ConfigError("checkpoint refused: unreadable rng state");
  state.epoch = ckpt.epoch;
  state.history = ckpt.history;
}

}  // namespace wseg
