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

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "commands.h"
#include "rdcseg/training.h"

int main(int argc, char** argv) {
  using namespace rdcseg::cli;
  CLI::App app{"Deformable-convolution segmentation toolkit"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate procedural image/label scenes");
  s->add_option("--out", synth.out, "Output directory")->required();
  s->add_option("--count", synth.count, "Number of scenes")->required();
  s->add_option("--seed", synth.spec.seed, "Random seed");
  s->add_option("--height", synth.spec.extents.height, "Scene height");
  s->add_option("--width", synth.spec.extents.width, "Scene width");
  s->add_option("--classes", synth.spec.num_classes, "Class count");
  s->add_option("--bands", synth.spec.bands, "Bands per scene");
  s->add_option("--rectangles", synth.spec.rectangles, "Rectangles per scene");
  s->add_option("--discs", synth.spec.discs, "Discs per scene");

  WarpArgs warp;
  auto* w = app.add_subcommand("warp", "Warp a pinhole dataset into fisheye style");
  w->add_option("--source", warp.source, "Directory of <stem>.ppm/<stem>.pgm pairs")->required();
  w->add_option("--out", warp.out, "Output directory")->required();
  w->add_option("--focal", warp.focal, "Fixed fisheye focal length");
  w->add_option("--focal-min", warp.focal_min, "Lower bound of the random focal range");
  w->add_option("--focal-max", warp.focal_max, "Upper bound of the random focal range");
  w->add_option("--height", warp.height, "Target height (default: source height)");
  w->add_option("--width", warp.width, "Target width (default: source width)");
  w->add_option("--seed", warp.seed, "Random seed");
  w->add_option("--void", warp.void_class, "Label written for unmapped pixels");

  GradcheckArgs grad;
  auto* g = app.add_subcommand("gradcheck", "Finite-difference check of an operator");
  g->add_option("--op", grad.op, "dc | rdc | frdc | conv | bn | ce | bilinear")->required();
  g->add_option("--seed", grad.seed, "Random seed");
  g->add_option("--tolerance", grad.tolerance, "Relative error tolerance");
  g->add_option("--instances", grad.instances, "Randomized instances");
  g->add_flag("--inject-fault", grad.inject_fault, "Corrupt the analytic gradient");

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train a toy segmentation network");
  t->add_option("--config", train.config, "key=value config file")->required();
  t->add_option("--data", train.data, "Data directory per task, real domain first")
      ->required()
      ->take_all();
  t->add_option("--out", train.out, "Output directory")->required();
  t->add_option("--seed", train.seed, "Override the config seed");
  t->footer("Config keys:\n" + rdcseg::train_config_reference());

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "Per-class IoU and mIoU of a model or predictions");
  auto* ck = e->add_option("--checkpoint", eval.checkpoint, "Model directory written by train");
  auto* pr = e->add_option("--pred", eval.pred, "Directory of <stem>.pgm predictions");
  ck->excludes(pr);
  e->add_option("--classes", eval.classes, "Class count (with --pred)");
  e->add_option("--data", eval.data, "Directory of ground-truth pairs")->required();
  e->add_option("--domain", eval.domain, "Domain id whose head and statistics are used");
  e->add_option("--void", eval.void_class, "Void label");
  e->add_option("--out", eval.out, "Metrics CSV")->required();
  e->add_option("--confusion", eval.confusion, "Optional confusion-matrix CSV");

  CLI11_PARSE(app, argc, argv);

  if (s->parsed()) return cmd_synth(synth, std::cout, std::cerr);
  if (w->parsed()) return cmd_warp(warp, std::cout, std::cerr);
  if (g->parsed()) return cmd_gradcheck(grad, std::cout, std::cerr);
  if (t->parsed()) return cmd_train(train, std::cout, std::cerr);
  if (e->parsed()) return cmd_eval(eval, std::cout, std::cerr);
  return 2;
}
