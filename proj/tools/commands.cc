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

#include "commands.h"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <random>

#include "rdcseg/dataset.h"
#include "rdcseg/fisheye.h"
#include "rdcseg/gradsuite.h"
#include "rdcseg/metrics.h"
#include "rdcseg/netpbm.h"
#include "rdcseg/training.h"

namespace rdcseg::cli {
namespace {

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

std::string scene_stem(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "scene_%05zu", i);
  return buf;
}

// Distinct, reproducible stream per task.
std::uint64_t task_seed(std::uint64_t seed, std::size_t task) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(task)};
  std::mt19937_64 rng(seq);
  return rng();
}

}  // namespace

int cmd_synth(const SynthArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    RDC_CHECK(args.count > 0, "synth: --count must be positive");
    args.spec.validate();
    std::filesystem::create_directories(args.out);
    for (std::size_t i = 0; i < args.count; ++i) {
      const Scene s = generate_scene(args.spec, i);
      const std::string stem = scene_stem(i);
      write_ppm(args.out / (stem + ".ppm"), s.image);
      write_pgm(args.out / (stem + ".pgm"), s.labels);
    }
    out << "wrote " << args.count << " scenes to " << args.out.string() << '\n';
    return 0;
  });
}

int cmd_warp(const WarpArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const bool fixed = args.focal.has_value();
    const bool ranged = args.focal_min.has_value() || args.focal_max.has_value();
    RDC_CHECK(fixed != ranged, "warp: give either --focal or both --focal-min and --focal-max");
    RDC_CHECK(fixed || (args.focal_min && args.focal_max),
              "warp: --focal-min and --focal-max must be given together");
    RDC_CHECK(args.void_class >= 0 && args.void_class <= 255, "warp: --void must fit in 8 bits");
    const std::vector<Sample> samples = load_samples(args.source, &err);
    RDC_CHECK(!samples.empty(), "warp: no readable image/label pairs in " << args.source);
    std::filesystem::create_directories(args.out);

    ZoomAugmentConfig cfg = fixed ? ZoomAugmentConfig::fixed(*args.focal, {1, 1})
                                  : ZoomAugmentConfig::random(*args.focal_min, *args.focal_max, {1, 1});
    cfg.void_class = static_cast<std::uint8_t>(args.void_class);
    cfg.validate();
    std::mt19937_64 rng(args.seed);
    // Fixed mode reuses one grid per source/target extent pair.
    std::map<std::pair<std::size_t, std::size_t>, RemapGrid> cache;
    std::ofstream manifest(args.out / kManifestName);
    RDC_CHECK(manifest.good(), "warp: cannot write manifest in " << args.out);
    manifest << std::setprecision(17);
    for (const Sample& s : samples) {
      const Extents source{s.image.height, s.image.width};
      const Extents target{args.height ? args.height : source.height,
                           args.width ? args.width : source.width};
      cfg.output = target;
      const double f = sample_focal(cfg, rng);
      const auto build = [&] {
        return build_remap_grid(ProjectionParams::centered(f, target, source), target, source);
      };
      RemapGrid grid;
      if (fixed) {
        const auto key = std::make_pair(source.height, source.width);
        auto it = cache.find(key);
        if (it == cache.end()) it = cache.emplace(key, build()).first;
        grid = it->second;
      } else {
        grid = build();
      }
      write_ppm(args.out / (s.stem + ".ppm"), warp_image(s.image, grid, cfg.fill));
      write_pgm(args.out / (s.stem + ".pgm"), warp_labels(s.labels, grid, cfg.void_class));
      manifest << s.stem << ".ppm\t" << s.stem << ".pgm\t" << f << '\n';
    }
    out << "warped " << samples.size() << " pairs into " << args.out.string() << '\n';
    return 0;
  });
}

int cmd_gradcheck(const GradcheckArgs& args, std::ostream& out, std::ostream& err) {
  const auto op = parse_grad_suite_op(args.op);
  if (!op) {
    err << "usage error: unknown operator '" << args.op
        << "' (expected dc, rdc, frdc, conv, bn, ce or bilinear)\n";
    return 2;
  }
  return guarded(err, [&] {
    GradSuiteOptions opt;
    opt.seed = args.seed;
    opt.tolerance = args.tolerance;
    opt.instances = args.instances;
    opt.inject_fault = args.inject_fault;
    const GradientCheckReport r = run_grad_suite(*op, opt);
    out << grad_suite_op_name(*op) << ": " << r.describe() << '\n';
    return r.passed ? 0 : 1;
  });
}

int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    TrainConfig config = load_train_config(args.config);
    if (args.seed) config.seed = *args.seed;
    const std::size_t tasks = static_cast<std::size_t>(config.weights.num_aux_tasks) + 1;
    RDC_CHECK(args.data.size() == tasks, "train: config has K+1 = " << tasks
                                             << " tasks but " << args.data.size()
                                             << " --data directories were given");
    std::vector<std::vector<Sample>> data;
    for (const auto& dir : args.data) {
      data.push_back(load_samples(dir, &err));
      RDC_CHECK(!data.back().empty(), "train: no readable pairs in " << dir);
    }

    ToyNet net(config.net);
    DomainNormBank bank = net.make_bank();
    std::vector<DomainSampler> samplers;
    for (std::size_t i = 0; i < tasks; ++i) {
      std::optional<ZoomAugmentConfig> zoom = config.augment[i].zoom;
      if (zoom) zoom->output = {config.zoom_height, config.zoom_width};
      samplers.emplace_back(data[i], static_cast<int>(i), zoom, task_seed(config.seed, i));
    }

    std::filesystem::create_directories(args.out);
    std::ofstream log(args.out / kTrainLogName);
    RDC_CHECK(log.good(), "train: cannot write log in " << args.out);
    write_log_header(log, config.weights.num_aux_tasks);
    Trainer trainer(net, bank, config.weights, config.schedule, config.void_class);
    const int max_iter = config.schedule.max_iter;
    const int report_every = std::max(1, max_iter / 10);
    for (int iter = 0; iter < max_iter; ++iter) {
      std::vector<DomainBatch> batches;
      for (auto& s : samplers) batches.push_back(s.next(config.schedule.batch_per_domain));
      const StepResult r = trainer.step(batches, iter);
      write_log_row(log, r);
      if ((iter + 1) % report_every == 0 || iter + 1 == max_iter) {
        out << "iter " << iter + 1 << "/" << max_iter << " loss " << r.total << '\n';
      }
    }
    save_model(args.out / kCheckpointName, net, bank, config);
    out << "saved " << (args.out / kCheckpointName).string() << '\n';
    return 0;
  });
}

int cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    RDC_CHECK(args.checkpoint.has_value() != args.pred.has_value(),
              "eval: give exactly one of --checkpoint or --pred");
    const std::vector<Sample> samples = load_samples(args.data, &err);
    RDC_CHECK(!samples.empty(), "eval: no readable pairs in " << args.data);

    std::optional<ConfusionMatrix> cm;
    if (args.checkpoint) {
      LoadedModel m = load_model(*args.checkpoint);
      RDC_CHECK(args.domain >= 0 && static_cast<std::size_t>(args.domain) < m.net.num_domains() &&
                    m.bank.has_domain(args.domain),
                "eval: unknown domain " << args.domain);
      cm = evaluate(m.net, m.bank, args.domain, samples, args.void_class);
    } else {
      RDC_CHECK(args.classes > 0, "eval: --classes is required with --pred");
      cm.emplace(args.classes, args.void_class);
      for (const Sample& s : samples) {
        const GrayImage p = read_pgm(*args.pred / (s.stem + ".pgm"));
        RDC_CHECK(p.width == s.labels.width && p.height == s.labels.height,
                  "eval: prediction " << s.stem << " has different extents");
        const std::vector<int> pv(p.pixels.begin(), p.pixels.end());
        const std::vector<int> tv(s.labels.pixels.begin(), s.labels.pixels.end());
        cm->accumulate(pv, tv);
      }
    }
    if (args.out.has_parent_path()) std::filesystem::create_directories(args.out.parent_path());
    std::ofstream csv(args.out);
    RDC_CHECK(csv.good(), "eval: cannot write " << args.out);
    write_metrics_csv(csv, *cm);
    if (args.confusion) {
      std::ofstream cc(*args.confusion);
      RDC_CHECK(cc.good(), "eval: cannot write " << *args.confusion);
      write_confusion_csv(cc, *cm);
    }
    out << "mIoU " << std::setprecision(6) << mean_iou(*cm) << " over " << samples.size()
        << " images\n";
    return 0;
  });
}

}  // namespace rdcseg::cli
