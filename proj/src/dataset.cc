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

#include "rdcseg/dataset.h"

#include <algorithm>
#include <numeric>
#include <ostream>

namespace rdcseg {

std::vector<Sample> load_samples(const std::filesystem::path& dir, std::ostream* warn) {
  RDC_CHECK(std::filesystem::is_directory(dir), "not a directory: " << dir);
  std::vector<std::string> stems;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".ppm") {
      stems.push_back(entry.path().stem().string());
    }
  }
  std::sort(stems.begin(), stems.end());
  std::vector<Sample> out;
  for (const std::string& stem : stems) {
    try {
      Sample s{stem, read_ppm(dir / (stem + ".ppm")), read_pgm(dir / (stem + ".pgm"))};
      RDC_CHECK(s.image.width == s.labels.width && s.image.height == s.labels.height,
                "image is " << s.image.width << "x" << s.image.height << ", labels are "
                            << s.labels.width << "x" << s.labels.height);
      out.push_back(std::move(s));
    } catch (const std::exception& e) {
      if (warn) *warn << "warning: skipping " << (dir / stem).string() << ": " << e.what() << '\n';
    }
  }
  return out;
}

Tensor images_to_tensor(const std::vector<const RgbImage*>& images) {
  RDC_CHECK(!images.empty(), "images_to_tensor: empty batch");
  const std::size_t h = images[0]->height;
  const std::size_t w = images[0]->width;
  Tensor t(Shape{images.size(), 3, h, w});
  for (std::size_t b = 0; b < images.size(); ++b) {
    const RgbImage& img = *images[b];
    RDC_CHECK(img.height == h && img.width == w, "images_to_tensor: extents differ within batch");
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const std::uint8_t* px = img.at(y, x);
        for (std::size_t c = 0; c < 3; ++c) t.at(b, c, y, x) = (px[c] - 127.5) / 63.75;
      }
    }
  }
  return t;
}

LabelMap labels_to_map(const std::vector<const GrayImage*>& labels) {
  RDC_CHECK(!labels.empty(), "labels_to_map: empty batch");
  LabelMap m(labels.size(), labels[0]->height, labels[0]->width);
  for (std::size_t b = 0; b < labels.size(); ++b) {
    RDC_CHECK(labels[b]->height == m.h && labels[b]->width == m.w,
              "labels_to_map: extents differ within batch");
    std::copy(labels[b]->pixels.begin(), labels[b]->pixels.end(),
              m.labels.begin() + static_cast<std::ptrdiff_t>(b * m.h * m.w));
  }
  return m;
}

GrayImage label_plane(const LabelMap& map, std::size_t index) {
  GrayImage g(map.w, map.h);
  for (std::size_t y = 0; y < map.h; ++y) {
    for (std::size_t x = 0; x < map.w; ++x) {
      const int v = map.at(index, y, x);
      RDC_CHECK(v >= 0 && v <= 255, "label " << v << " does not fit in 8 bits");
      g.at(y, x) = static_cast<std::uint8_t>(v);
    }
  }
  return g;
}

DomainSampler::DomainSampler(const std::vector<Sample>& samples, int domain,
                             std::optional<ZoomAugmentConfig> zoom, std::uint64_t seed)
    : samples_(samples), domain_(domain), zoom_(std::move(zoom)), rng_(seed) {
  RDC_CHECK(!samples_.empty(), "domain " << domain << " has no samples");
  order_.resize(samples_.size());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  cursor_ = order_.size();
}

DomainBatch DomainSampler::next(std::size_t batch_size) {
  RDC_CHECK(batch_size > 0, "batch size must be positive");
  std::vector<RgbImage> images;
  std::vector<GrayImage> labels;
  for (std::size_t i = 0; i < batch_size; ++i) {
    if (cursor_ == order_.size()) {
      std::shuffle(order_.begin(), order_.end(), rng_);
      cursor_ = 0;
    }
    const Sample& s = samples_[order_[cursor_++]];
    if (zoom_) {
      ZoomAugmentConfig cfg = *zoom_;
      if (cfg.output.height == 0 || cfg.output.width == 0) {
        cfg.output = Extents{s.image.height, s.image.width};
      }
      WarpedPair p = zoom_augment(s.image, s.labels, cfg, rng_);
      images.push_back(std::move(p.image));
      labels.push_back(std::move(p.labels));
    } else {
      images.push_back(s.image);
      labels.push_back(s.labels);
    }
  }
  std::vector<const RgbImage*> ip;
  std::vector<const GrayImage*> lp;
  for (std::size_t i = 0; i < batch_size; ++i) {
    ip.push_back(&images[i]);
    lp.push_back(&labels[i]);
  }
  return {domain_, images_to_tensor(ip), labels_to_map(lp)};
}

std::vector<GrayImage> predict(ToyNet& net, DomainNormBank& bank, int domain,
                               const std::vector<Sample>& samples, std::size_t batch_size) {
  RDC_CHECK(batch_size > 0, "batch size must be positive");
  std::vector<GrayImage> out;
  for (std::size_t start = 0; start < samples.size(); start += batch_size) {
    const std::size_t end = std::min(samples.size(), start + batch_size);
    std::vector<const RgbImage*> ip;
    for (std::size_t i = start; i < end; ++i) ip.push_back(&samples[i].image);
    const NetOutput o = net.forward(images_to_tensor(ip), domain, bank, NormMode::kInference);
    const LabelMap pred = argmax_channels(o.logits);
    for (std::size_t i = 0; i < pred.n; ++i) out.push_back(label_plane(pred, i));
  }
  return out;
}

ConfusionMatrix evaluate(ToyNet& net, DomainNormBank& bank, int domain,
                         const std::vector<Sample>& samples, int void_class,
                         std::size_t batch_size) {
  RDC_CHECK(domain >= 0 && static_cast<std::size_t>(domain) < net.num_domains(),
            "unknown domain " << domain);
  ConfusionMatrix cm(net.config().domain_classes[static_cast<std::size_t>(domain)], void_class);
  const std::vector<GrayImage> preds = predict(net, bank, domain, samples, batch_size);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const std::vector<int> p(preds[i].pixels.begin(), preds[i].pixels.end());
    const std::vector<int> t(samples[i].labels.pixels.begin(), samples[i].labels.pixels.end());
    cm.accumulate(p, t);
  }
  return cm;
}

}  // namespace rdcseg
