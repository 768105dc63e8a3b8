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

// Confusion-matrix evaluation. Counts are exact integers; every metric is
// derived from them at report time.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace wseg {

inline constexpr int kIgnoreLabel = 255;

class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes, int ignore_index = kIgnoreLabel);

  int num_classes() const { return k_; }
  int ignore_index() const { return ignore_; }

  // counts[gt][pred] += 1 for every pixel whose gt is not the ignore value.
  void accumulate(std::span<const int> pred, std::span<const int> gt);

  std::int64_t at(int gt, int pred) const {
    return counts_[static_cast<std::size_t>(gt) * k_ + pred];
  }
  std::int64_t total() const;
  std::int64_t true_positives(int k) const { return at(k, k); }
  std::int64_t false_positives(int k) const;  // predicted k, gt differs
  std::int64_t false_negatives(int k) const;  // gt k, predicted otherwise

  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
  bool operator==(const ConfusionMatrix& other) const = default;

 private:
  int k_;
  int ignore_;
  std::vector<std::int64_t> counts_;
};

ConfusionMatrix merge(const ConfusionMatrix& a, const ConfusionMatrix& b);

struct ClassScores {
  std::vector<double> values;  // 0 for absent classes
  std::vector<bool> present;   // union TP+FP+FN > 0
  double mean = 0.0;           // over present classes only
};

ClassScores iou(const ConfusionMatrix& cm);
ClassScores dice(const ConfusionMatrix& cm);
double pixel_accuracy(const ConfusionMatrix& cm);

// "class,iou,dice" rows for present classes, then miou and pixel_acc rows.
// Classes without a name in class_names are reported by index.
std::string metrics_csv(const ConfusionMatrix& cm,
                        std::span<const std::string> class_names);

}  // namespace wseg
