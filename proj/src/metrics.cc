// Copyright 2026 The rdcseg Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#include "rdcseg/metrics.h"

#include <iomanip>
#include <numeric>
#include <ostream>

#include "rdcseg/tensor.h"

namespace rdcseg {

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes, int void_class)
    : classes_(num_classes),
      void_class_(void_class),
      counts_(num_classes * num_classes, 0),
      missed_(num_classes, 0) {
  RDC_CHECK(num_classes > 0, "confusion matrix needs at least one class");
}

std::uint64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0}) +
         std::accumulate(missed_.begin(), missed_.end(), std::uint64_t{0});
}

void ConfusionMatrix::accumulate(std::span<const int> prediction,
                                 std::span<const int> truth) {
  RDC_CHECK(prediction.size() == truth.size(),
            "accumulate: prediction has " << prediction.size()
                                          << " pixels, truth has " << truth.size());
  const auto in_range = [&](int v) {
    return v == void_class_ || (v >= 0 && static_cast<std::size_t>(v) < classes_);
  };
  // Validate first so a bad map leaves the matrix untouched.
  for (std::size_t i = 0; i < truth.size(); ++i) {
    RDC_CHECK(in_range(truth[i]), "accumulate: truth class " << truth[i]
                                                             << " out of range");
    RDC_CHECK(in_range(prediction[i]), "accumulate: predicted class "
                                           << prediction[i] << " out of range");
  }
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] == void_class_) continue;
    const auto t = static_cast<std::size_t>(truth[i]);
    if (prediction[i] == void_class_) {
      ++missed_[t];
    } else {
      ++counts_[t * classes_ + static_cast<std::size_t>(prediction[i])];
    }
  }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  RDC_CHECK(other.classes_ == classes_ && other.void_class_ == void_class_,
            "merge: incompatible confusion matrices");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  for (std::size_t i = 0; i < missed_.size(); ++i) missed_[i] += other.missed_[i];
}

std::vector<std::optional<double>> per_class_iou(const ConfusionMatrix& cm) {
  const std::size_t c = cm.num_classes();
  std::vector<std::optional<double>> out(c);
  for (std::size_t k = 0; k < c; ++k) {
    const std::uint64_t tp = cm.count(k, k);
    std::uint64_t fp = 0;
    std::uint64_t fn = cm.void_predictions(k);
    for (std::size_t j = 0; j < c; ++j) {
      if (j == k) continue;
      fp += cm.count(j, k);
      fn += cm.count(k, j);
    }
    const std::uint64_t denom = tp + fp + fn;
    if (denom > 0) out[k] = static_cast<double>(tp) / static_cast<double>(denom);
  }
  return out;
}

double mean_iou(const ConfusionMatrix& cm) {
  double sum = 0.0;
  std::size_t present = 0;
  for (const auto& iou : per_class_iou(cm)) {
    if (!iou) continue;
    sum += *iou;
    ++present;
  }
  RDC_CHECK(present > 0, "mean_iou: no class present in the confusion matrix");
  return sum / static_cast<double>(present);
}

void write_metrics_csv(std::ostream& os, const ConfusionMatrix& cm,
                       const std::vector<std::string>& class_names) {
  const auto ious = per_class_iou(cm);
  os << "class,iou\n" << std::setprecision(10);
  for (std::size_t k = 0; k < ious.size(); ++k) {
    const std::string name =
        k < class_names.size() ? class_names[k] : "class_" + std::to_string(k);
    os << name << ',';
    if (ious[k]) {
      os << *ious[k];
    } else {
      os << "nan";
    }
    os << '\n';
  }
  os << "mIoU," << mean_iou(cm) << '\n';
}

void write_confusion_csv(std::ostream& os, const ConfusionMatrix& cm) {
  const std::size_t c = cm.num_classes();
  os << "truth";
  for (std::size_t j = 0; j < c; ++j) os << ",pred_" << j;
  os << ",void\n";
  for (std::size_t k = 0; k < c; ++k) {
    os << k;
    for (std::size_t j = 0; j < c; ++j) os << ',' << cm.count(k, j);
    os << ',' << cm.void_predictions(k) << '\n';
  }
}

}  // namespace rdcseg
