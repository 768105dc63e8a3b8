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

// Loss composition, SGD with momentum, the polynomial schedule, the epoch
// loop and checkpoint persistence.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "wseg/data.hpp"
#include "wseg/metrics.hpp"
#include "wseg/network.hpp"

namespace wseg {

// base_lr * (1 - iter / max_iter)^power.
double poly_lr(std::int64_t iter, std::int64_t max_iter, double base_lr, double power);

// CE_w(main) + aux_weight * CE_w(aux); the aux term is skipped when aux is
// undefined.
Tensor total_loss(const Tensor& main, const Tensor& aux, const Labels& labels,
                  std::span<const double> class_weights, double aux_weight,
                  int ignore_index = kIgnoreLabel);

// g' = g + wd * w; v = momentum * v + g'; w -= lr * v.
void sgd_step(std::span<double> w, std::span<const double> g, std::span<double> v,
              double lr, double momentum, double weight_decay);

// Momentum buffers for every trainable entry, in parameter order.
class Optimizer {
 public:
  Optimizer() = default;
  explicit Optimizer(const ParameterSet& params);

  // Weight decay applies to conv weights only. Entries without a gradient
  // step with g = 0.
  void step(ParameterSet& params, double lr, double momentum, double weight_decay);

  std::vector<std::vector<double>>& velocity() { return velocity_; }
  const std::vector<std::vector<double>>& velocity() const { return velocity_; }

 private:
  std::vector<std::vector<double>> velocity_;  // one per entry; empty for buffers
};

// w_k = 1 / ln(1.02 + f_k) with f_k the non-ignored pixel frequency of k.
std::vector<double> inverse_log_frequency(std::span<const Sample> samples, int num_classes);

enum class Variant { baseline, hanet, hanet_wasp };
Variant parse_variant(std::string_view text);
const char* variant_name(Variant v);

struct TrainConfig {
  NetworkConfig net;
  AugConfig aug;
  double base_lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 0.0005;
  double poly_power = 0.9;
  double aux_weight = 0.4;
  int epochs = 30;
  int batch_size = 4;
  std::uint64_t seed = 1;
  std::vector<double> class_weights;  // empty: inverse_log_frequency
  std::filesystem::path data_root;
  std::filesystem::path out_dir;      // empty: no files written
  std::filesystem::path resume;       // checkpoint to continue from
  // Canonical configuration text and its digest, embedded in checkpoints.
  std::string config_text;
  std::uint64_t config_digest = 0;

  void validate() const;
};

struct HistoryRow {
  int epoch = 0;
  double train_loss = 0.0;
  double val_miou = 0.0;
  bool operator==(const HistoryRow&) const = default;
};

std::string history_csv(std::span<const HistoryRow> rows);

struct TrainState {
  Network net;
  Optimizer optimizer;
  std::mt19937_64 rng;
  int epoch = 0;  // completed epochs
  std::vector<HistoryRow> history;
};

// Runs from scratch, or from cfg.resume, until cfg.epochs are complete.
// The callback runs after each epoch.
TrainState train(const TrainConfig& cfg,
                 const std::function<void(const HistoryRow&)>& on_epoch = {});

// Eval-mode confusion matrix of net over samples.
ConfusionMatrix evaluate(Network& net, std::span<const Sample> samples,
                         int batch_size = 4);

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::uint64_t config_digest = 0;
  std::string config_text;
  int epoch = 0;
  struct Blob {
    std::string name;
    ParamRole role;
    Shape shape;
    std::vector<double> values;
  };
  std::vector<Blob> params;
  std::vector<std::vector<double>> velocity;
  std::string rng_state;
  std::vector<HistoryRow> history;
};

Checkpoint snapshot(const TrainState& state, const std::string& config_text,
                    std::uint64_t digest);
std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::string_view bytes);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Copies parameters, velocity, rng, epoch and history into state. Throws
// ConfigError when the layout or the digest disagrees.
void restore(TrainState& state, const Checkpoint& ckpt, std::uint64_t expected_digest);
// Parameters and running statistics only.
void load_parameters(Network& net, const Checkpoint& ckpt);

// FNV-1a, 64-bit.
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace wseg
