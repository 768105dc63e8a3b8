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

#include "wseg/metrics.hpp"

#include <cstdio>
#include <numeric>

#include "wseg/error.hpp"

namespace wseg {

ConfusionMatrix::ConfusionMatrix(int num_classes, int ignore_index)
    : k_(num_classes), ignore_(ignore_index) {
  if (num_classes < 1) throw ConfigError("confusion matrix needs at least one class");
  counts_.assign(static_cast<std::size_t>(k_) * k_, 0);
}

void ConfusionMatrix::accumulate(std::span<const int> pred,
                                 std::span<const int> gt) {
  if (pred.size() != gt.size()) {
    throw DimensionError("accumulate: prediction has " + std::to_string(pred.size()) +
                         " pixels, ground truth has " + std::to_string(gt.size()));
  }
  // Validate first so a bad map leaves the counts untouched.
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] == ignore_) continue;
    if (gt[i] < 0 || gt[i] >= k_) {
      throw DataError("accumulate: ground-truth label " + std::to_string(gt[i]) +
                      " at pixel " + std::to_string(i) + " is out of range");
    }
    if (pred[i] < 0 || pred[i] >= k_) {
      throw DataError("accumulate: predicted label " + std::to_string(pred[i]) +
                      " at pixel " + std::to_string(i) + " is out of range");
    }
  }
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] == ignore_) continue;
    ++counts_[static_cast<std::size_t>(gt[i]) * k_ + pred[i]];
  }
}

std::int64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::int64_t{0});
}

std::int64_t ConfusionMatrix::false_positives(int k) const {
  std::int64_t s = 0;
  for (int g = 0; g < k_; ++g) {
    if (g != k) s += at(g, k);
  }
  return s;
}

std::int64_t ConfusionMatrix::false_negatives(int k) const {
  std::int64_t s = 0;
  for (int p = 0; p < k_; ++p) {
    if (p != k) s += at(k, p);
  }
  return s;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.k_ != k_) {
    throw DimensionError("merge: class counts differ (" + std::to_string(k_) +
                         " vs " + std::to_string(other.k_) + ")");
  }
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  return *this;
}

ConfusionMatrix merge(const ConfusionMatrix& a, const ConfusionMatrix& b) {
  ConfusionMatrix out = a;
  out += b;
  return out;
}

namespace {

template <typename Score>
ClassScores per_class(const ConfusionMatrix& cm, const char* what, Score score) {
  const int k = cm.num_classes();
  ClassScores out;
  out.values.assign(k, 0.0);
  out.present.assign(k, false);
  double sum = 0.0;
  int n = 0;
  for (int c = 0; c < k; ++c) {
    const std::int64_t tp = cm.true_positives(c);
    const std::int64_t fp = cm.false_positives(c);
    const std::int64_t fn = cm.false_negatives(c);
    if (tp + fp + fn == 0) continue;
    out.present[c] = true;
    out.values[c] = score(tp, fp, fn);
    sum += out.values[c];
    ++n;
  }
  if (n == 0) throw UndefinedError(std::string(what) + ": every class is absent");
  out.mean = sum / n;
  return out;
}

}  // namespace

ClassScores iou(const ConfusionMatrix& cm) {
  return per_class(cm, "iou", [](std::int64_t tp, std::int64_t fp, std::int64_t fn) {
    return static_cast<double>(tp) / static_cast<double>(tp + fp + fn);
  });
}

ClassScores dice(const ConfusionMatrix& cm) {
  return per_class(cm, "dice", [](std::int64_t tp, std::int64_t fp, std::int64_t fn) {
    return static_cast<double>(2 * tp) / static_cast<double>(2 * tp + fp + fn);
  });
}

double pixel_accuracy(const ConfusionMatrix& cm) {
  const std::int64_t total = cm.total();
  if (total == 0) throw UndefinedError("pixel_accuracy: no pixels accumulated");
  std::int64_t trace = 0;
  for (int c = 0; c < cm.num_classes(); ++c) trace += cm.at(c, c);
  return static_cast<double>(trace) / static_cast<double>(total);
}

std::string metrics_csv(const ConfusionMatrix& cm,
                        std::span<const std::string> class_names) {
  const ClassScores i = iou(cm);
  const ClassScores d = dice(cm);
  std::string out = "class,iou,dice\n";
  char buf[128];
  for (int c = 0; c < cm.num_classes(); ++c) {
    if (!i.present[c]) continue;
    const std::string name = static_cast<std::size_t>(c) < class_names.size()
                                 ? class_names[c]
                                 : std::to_string(c);
    std::snprintf(buf, sizeof buf, ",%.17g,%.17g\n", i.values[c], d.values[c]);
    out += name + buf;
  }
  std::snprintf(buf, sizeof buf, "miou,%.17g,_\n", i.mean);
  out += buf;
  std::snprintf(buf, sizeof buf, "pixel_acc,%.17g,_\n", pixel_accuracy(cm));
  out += buf;
  return out;
}

}  // namespace wseg
