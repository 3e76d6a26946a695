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

#ifndef RDCSEG_METRICS_H_
#define RDCSEG_METRICS_H_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rdcseg {

// Rows are ground truth, columns predictions. Pixels whose truth is the void
// class are skipped. A void prediction on a non-void pixel is a miss for the
// true class (a false negative) and a false positive for nobody.
class ConfusionMatrix {
 public:
  ConfusionMatrix(std::size_t num_classes, int void_class);

  std::size_t num_classes() const { return classes_; }
  int void_class() const { return void_class_; }
  std::uint64_t count(std::size_t truth, std::size_t pred) const {
    return counts_[truth * classes_ + pred];
  }
  std::uint64_t void_predictions(std::size_t truth) const { return missed_[truth]; }
  // Number of non-void ground-truth pixels accumulated.
  std::uint64_t total() const;

  void accumulate(std::span<const int> prediction, std::span<const int> truth);
  void merge(const ConfusionMatrix& other);

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::size_t classes_;
  int void_class_;
  std::vector<std::uint64_t> counts_;
  std::vector<std::uint64_t> missed_;
};

// IoU_k = TP / (TP + FP + FN); nullopt when the denominator is zero (the
// class is absent from both maps).
std::vector<std::optional<double>> per_class_iou(const ConfusionMatrix& cm);

// Mean over present classes. Throws when no class is present.
double mean_iou(const ConfusionMatrix& cm);

// "class,iou" rows (absent classes print "nan"), then "mIoU,<value>".
void write_metrics_csv(std::ostream& os, const ConfusionMatrix& cm,
                       const std::vector<std::string>& class_names = {});
// Raw counts, one row per ground-truth class, plus a trailing "void" column.
void write_confusion_csv(std::ostream& os, const ConfusionMatrix& cm);

}  // namespace rdcseg

#endif  // RDCSEG_METRICS_H_
