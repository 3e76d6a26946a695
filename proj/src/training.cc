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

#include "rdcseg/training.h"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "rdcseg/checkpoint.h"

namespace rdcseg {

void LossWeights::validate() const {
  RDC_CHECK(alpha >= 0.0 && alpha <= 1.0, "alpha must lie in [0, 1], got " << alpha);
  RDC_CHECK(beta >= 0.0 && beta <= 1.0, "beta must lie in [0, 1], got " << beta);
  RDC_CHECK(gamma >= 0.0, "gamma must be nonnegative, got " << gamma);
  RDC_CHECK(num_aux_tasks >= 0, "K must be nonnegative, got " << num_aux_tasks);
}

double hlw_total_loss(std::span<const double> main_losses,
                      std::span<const double> aux_losses, const LossWeights& w) {
  w.validate();
  const std::size_t tasks = static_cast<std::size_t>(w.num_aux_tasks) + 1;
  RDC_CHECK(main_losses.size() == tasks,
            "hlw_total_loss: expected K+1 = " << tasks << " main losses, got "
                                              << main_losses.size());
  RDC_CHECK(aux_losses.size() == tasks,
            "hlw_total_loss: expected K+1 = " << tasks << " auxiliary losses, got "
                                              << aux_losses.size());
  if (w.num_aux_tasks == 0) return main_losses[0] + w.gamma * aux_losses[0];
  const double k = static_cast<double>(w.num_aux_tasks);
  double main_sum = 0.0;
  double aux_sum = 0.0;
  for (std::size_t i = 1; i < tasks; ++i) {
    main_sum += main_losses[i];
    aux_sum += aux_losses[i];
  }
  const double main = (1.0 - w.alpha) * main_losses[0] + w.alpha / k * main_sum;
  const double aux = (1.0 - w.beta) * aux_losses[0] + w.beta / k * aux_sum;
  return main + w.gamma * aux;
}

HlwCoefficients hlw_coefficients(const LossWeights& w) {
  w.validate();
  const std::size_t tasks = static_cast<std::size_t>(w.num_aux_tasks) + 1;
  HlwCoefficients c{std::vector<double>(tasks), std::vector<double>(tasks)};
  if (w.num_aux_tasks == 0) {
    c.main[0] = 1.0;
    c.aux[0] = w.gamma;
    return c;
  }
  const double k = static_cast<double>(w.num_aux_tasks);
  c.main[0] = 1.0 - w.alpha;
  c.aux[0] = w.gamma * (1.0 - w.beta);
  for (std::size_t i = 1; i < tasks; ++i) {
    c.main[i] = w.alpha / k;
    c.aux[i] = w.gamma * (w.beta / k);
  }
  return c;
}

void Schedule::validate() const {
  RDC_CHECK(base_lr > 0.0, "base_lr must be positive");
  RDC_CHECK(power > 0.0, "power must be positive");
  RDC_CHECK(max_iter > 0, "max_iter must be positive");
  RDC_CHECK(offset_freeze_iters >= 0, "offset_freeze_iters must be nonnegative");
  RDC_CHECK(momentum >= 0.0 && momentum < 1.0, "momentum must lie in [0, 1)");
  RDC_CHECK(weight_decay >= 0.0, "weight_decay must be nonnegative");
  RDC_CHECK(batch_per_domain > 0, "batch_per_domain must be positive");
  RDC_CHECK(loss_scale > 0.0, "loss_scale must be positive");
}

int Schedule::default_freeze_iters(int max_iter) {
  return static_cast<int>(std::lround(max_iter * 20.0 / 120.0));
}

double Schedule::offset_multiplier(int iter) const {
  if (iter < offset_freeze_iters) return 0.0;
  return phase == TrainingPhase::kEncoder ? offset_lr_multiplier_encoder
                                          : offset_lr_multiplier_joint;
}

double poly_lr(int iter, const Schedule& s) {
  RDC_CHECK(iter >= 0, "poly_lr: iteration must be nonnegative");
  RDC_CHECK(s.max_iter > 0, "poly_lr: max_iter must be positive");
  if (iter >= s.max_iter) return 0.0;
  return s.base_lr * std::pow(1.0 - static_cast<double>(iter) / s.max_iter, s.power);
}

void nag_step(std::span<double> param, std::span<const double> grad,
              std::span<double> velocity, double lr, double momentum,
              double weight_decay, double lr_multiplier) {
  RDC_CHECK(param.size() == grad.size() && param.size() == velocity.size(),
            "nag_step: parameter (" << param.size() << "), gradient (" << grad.size()
                                    << ") and velocity (" << velocity.size()
                                    << ") sizes differ");
  if (lr_multiplier == 0.0) return;
  const double step = lr * lr_multiplier;
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i] + weight_decay * param[i];
    velocity[i] = momentum * velocity[i] - step * g;
    param[i] += momentum * velocity[i] - step * g;
  }
}

Trainer::Trainer(ToyNet& net, DomainNormBank& bank, LossWeights weights,
                 Schedule schedule, int void_class)
    : net_(net),
      bank_(bank),
      weights_(weights),
      schedule_(schedule),
      void_class_(void_class) {
  weights_.validate();
  schedule_.validate();
}

StepResult Trainer::step(std::span<const DomainBatch> batches, int iter) {
  const std::size_t tasks = static_cast<std::size_t>(weights_.num_aux_tasks) + 1;
  RDC_CHECK(batches.size() == tasks, "train_step: " << tasks << " task batches required (K = "
                                                    << weights_.num_aux_tasks << "), got "
                                                    << batches.size());
  const HlwCoefficients coeff = hlw_coefficients(weights_);
  StepResult r;
  r.iter = iter;
  r.main_losses.resize(tasks);
  r.aux_losses.resize(tasks);
  net_.zero_grad();
  for (std::size_t i = 0; i < tasks; ++i) {
    const DomainBatch& b = batches[i];
    RDC_CHECK(b.images.numel() > 0, "train_step: batch for task " << i << " is empty");
    NetOutput out = net_.forward(b.images, b.domain, bank_, NormMode::kTrain);
    r.main_losses[i] = softmax_cross_entropy(out.logits, b.labels, void_class_,
                                             schedule_.loss_scale);
    r.aux_losses[i] = softmax_cross_entropy(out.aux_logits, b.labels, void_class_,
                                            schedule_.loss_scale);
    if (coeff.main[i] == 0.0 && coeff.aux[i] == 0.0) continue;
    out.logits.enable_grad();
    out.aux_logits.enable_grad();
    softmax_cross_entropy_backward(out.logits, b.labels, void_class_,
                                   schedule_.loss_scale, coeff.main[i]);
    softmax_cross_entropy_backward(out.aux_logits, b.labels, void_class_,
                                   schedule_.loss_scale, coeff.aux[i]);
    net_.backward(out.logits.grad_tensor(), out.aux_logits.grad_tensor());
  }
  r.total = hlw_total_loss(r.main_losses, r.aux_losses, weights_);
  r.lr = poly_lr(iter, schedule_);
  for (Parameter* p : net_.parameters()) {
    const double mult = p->is_offset() ? schedule_.offset_multiplier(iter) : 1.0;
    const double decay = p->decays() ? schedule_.weight_decay : 0.0;
    nag_step(p->value.data(), p->value.grad(), p->velocity.data(), r.lr,
             schedule_.momentum, decay, mult);
  }
  return r;
}

void write_log_header(std::ostream& os, int num_aux_tasks) {
  os << "iter,lr";
  for (int i = 0; i <= num_aux_tasks; ++i) os << ",L" << i;
  for (int i = 0; i <= num_aux_tasks; ++i) os << ",A" << i;
  os << ",total\n";
}

void write_log_row(std::ostream& os, const StepResult& r) {
  std::ostringstream line;
  line << std::setprecision(10) << r.iter << ',' << r.lr;
  for (double v : r.main_losses) line << ',' << v;
  for (double v : r.aux_losses) line << ',' << v;
  line << ',' << r.total << '\n';
  os << line.str();
}

// ---------------------------------------------------------------------------

namespace {

struct KeyDoc {
  const char* key;
  const char* doc;
};

constexpr KeyDoc kKeys[] = {
    {"seed", "data sampling / augmentation seed (default 1)"},
    {"void_class", "label excluded from loss and metrics (default 255)"},
    {"base_lr", "initial learning rate (default 0.05)"},
    {"power", "poly schedule exponent (default 0.9)"},
    {"max_iter", "iterations; also the poly schedule horizon (default 1000)"},
    {"offset_freeze_iters", "iterations with offset layers frozen (default round(max_iter*20/120))"},
    {"offset_lr_mult_encoder", "offset learning-rate multiplier, encoder phase (default 1.0)"},
    {"offset_lr_mult_joint", "offset learning-rate multiplier, joint phase (default 0.1)"},
    {"phase", "encoder | joint (default encoder)"},
    {"momentum", "Nesterov momentum (default 0.9)"},
    {"weight_decay", "L2 decay on convolution weights (default 0.0002)"},
    {"batch_per_domain", "images drawn per task per iteration (default 4)"},
    {"loss_scale", "softmax loss multiplier (default 2.0)"},
    {"alpha", "main-branch task weighting (default 0.5)"},
    {"beta", "auxiliary-branch task weighting (default 0.5)"},
    {"gamma", "auxiliary loss discount (default 0)"},
    {"num_aux_tasks", "K, transformed-domain tasks; must equal data dirs - 1 (default 2)"},
    {"in_channels", "input channels (default 3)"},
    {"kernel_size", "odd factorized kernel length (default 3)"},
    {"blocks", "comma list of down:<channels> | res:<regular|dc|rdc|frdc>:<dilation>"},
    {"classes", "class count, one value or one per domain (default 4)"},
    {"aux_channels", "auxiliary branch width (default 128)"},
    {"norm_momentum", "running-statistics momentum (default 0.1)"},
    {"init_seed", "weight initialization seed (default 1)"},
    {"zoom.<i>", "online augmentation for task i: none | fixed:<f> | random:<min>:<max>"},
    {"zoom_height", "zoom output height, 0 = source height (default 0)"},
    {"zoom_width", "zoom output width, 0 = source width (default 0)"},
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(trim(cur));
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream is(value);
  T v{};
  is >> v;
  RDC_CHECK(!is.fail() && is.eof(), "config key '" << key << "': cannot parse '" << value << "'");
  return v;
}

ZoomAugmentConfig parse_zoom(const std::string& key, const std::string& value) {
  const auto parts = split(value, ':');
  std::optional<ZoomAugmentConfig> z;
  if (parts.size() == 2 && parts[0] == "fixed") {
    z = ZoomAugmentConfig::fixed(parse_number<double>(key, parts[1]), {1, 1});
  } else if (parts.size() == 3 && parts[0] == "random") {
    z = ZoomAugmentConfig::random(parse_number<double>(key, parts[1]),
                                  parse_number<double>(key, parts[2]), {1, 1});
  }
  if (z) {
    try {
      z->validate();
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("config key '" + key + "': " + e.what());
    }
    z->output = {};  // resolved against the source image at sampling time
    return *z;
  }
  RDC_CHECK(false, "config key '" << key << "': expected none | fixed:<f> | random:<min>:<max>, got '"
                                  << value << "'");
  return {};
}

std::string format_zoom(const DomainAugment& a) {
  std::ostringstream os;
  os << std::setprecision(17);
  if (!a.zoom) return "none";
  if (a.zoom->mode == ZoomMode::kFixed) {
    os << "fixed:" << a.zoom->focal;
  } else {
    os << "random:" << a.zoom->focal_min << ':' << a.zoom->focal_max;
  }
  return os.str();
}

}  // namespace

std::string train_config_reference() {
  std::ostringstream os;
  for (const KeyDoc& k : kKeys) os << "  " << std::left << std::setw(24) << k.key << k.doc << '\n';
  return os.str();
}

std::vector<BlockSpec> parse_blocks(const std::string& text) {
  std::vector<BlockSpec> out;
  if (trim(text).empty()) return out;
  for (const std::string& item : split(text, ',')) {
    const auto parts = split(item, ':');
    if (parts.size() == 2 && parts[0] == "down") {
      out.push_back(BlockSpec::downsampler(parse_number<std::size_t>("blocks", parts[1])));
    } else if (parts.size() == 3 && parts[0] == "res") {
      ConvVariant variant;
      try {
        variant = parse_conv_variant(parts[1]);
      } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(std::string("config key 'blocks': ") + e.what());
      }
      out.push_back(BlockSpec::residual(variant, parse_number<int>("blocks", parts[2])));
    } else {
      RDC_CHECK(false, "config key 'blocks': cannot parse block '" << item << "'");
    }
  }
  return out;
}

std::string format_blocks(const std::vector<BlockSpec>& blocks) {
  std::ostringstream os;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (i) os << ',';
    if (blocks[i].kind == BlockKind::kDownsampler) {
      os << "down:" << blocks[i].out_channels;
    } else {
      os << "res:" << conv_variant_name(blocks[i].variant) << ':' << blocks[i].dilation;
    }
  }
  return os.str();
}

TrainConfig parse_train_config(std::istream& is) {
  TrainConfig c;
  c.net.blocks = {BlockSpec::downsampler(16), BlockSpec::residual(ConvVariant::kRegular, 1)};
  std::vector<std::size_t> classes = {4};
  int freeze = -1;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    RDC_CHECK(eq != std::string::npos,
              "config line " << line_no << ": expected key=value, got '" << line << "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    Schedule& s = c.schedule;
    if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "void_class") c.void_class = parse_number<int>(key, value);
    else if (key == "base_lr") s.base_lr = parse_number<double>(key, value);
    else if (key == "power") s.power = parse_number<double>(key, value);
    else if (key == "max_iter") s.max_iter = parse_number<int>(key, value);
    else if (key == "offset_freeze_iters") freeze = parse_number<int>(key, value);
    else if (key == "offset_lr_mult_encoder") s.offset_lr_multiplier_encoder = parse_number<double>(key, value);
    else if (key == "offset_lr_mult_joint") s.offset_lr_multiplier_joint = parse_number<double>(key, value);
    else if (key == "phase") {
      RDC_CHECK(value == "encoder" || value == "joint",
                "config key 'phase': expected encoder | joint, got '" << value << "'");
      s.phase = value == "encoder" ? TrainingPhase::kEncoder : TrainingPhase::kJoint;
    }
    else if (key == "momentum") s.momentum = parse_number<double>(key, value);
    else if (key == "weight_decay") s.weight_decay = parse_number<double>(key, value);
    else if (key == "batch_per_domain") s.batch_per_domain = parse_number<std::size_t>(key, value);
    else if (key == "loss_scale") s.loss_scale = parse_number<double>(key, value);
    else if (key == "alpha") c.weights.alpha = parse_number<double>(key, value);
    else if (key == "beta") c.weights.beta = parse_number<double>(key, value);
    else if (key == "gamma") c.weights.gamma = parse_number<double>(key, value);
    else if (key == "num_aux_tasks") c.weights.num_aux_tasks = parse_number<int>(key, value);
    else if (key == "in_channels") c.net.in_channels = parse_number<std::size_t>(key, value);
    else if (key == "kernel_size") c.net.kernel_size = parse_number<int>(key, value);
    else if (key == "blocks") c.net.blocks = parse_blocks(value);
    else if (key == "classes") {
      classes.clear();
      for (const auto& v : split(value, ',')) classes.push_back(parse_number<std::size_t>(key, v));
    }
    else if (key == "aux_channels") c.net.aux_channels = parse_number<std::size_t>(key, value);
    else if (key == "norm_momentum") c.net.norm_momentum = parse_number<double>(key, value);
    else if (key == "init_seed") c.net.init_seed = parse_number<std::uint64_t>(key, value);
    else if (key == "zoom_height") c.zoom_height = parse_number<std::size_t>(key, value);
    else if (key == "zoom_width") c.zoom_width = parse_number<std::size_t>(key, value);
    else if (key.rfind("zoom.", 0) == 0) {
      const auto idx = parse_number<std::size_t>(key, key.substr(5));
      if (c.augment.size() <= idx) c.augment.resize(idx + 1);
      c.augment[idx].zoom = value == "none" ? std::nullopt
                                            : std::optional<ZoomAugmentConfig>(parse_zoom(key, value));
    }
    else RDC_CHECK(false, "config: unknown key '" << key << "'");
  }
  try {
    c.weights.validate();
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  const std::size_t tasks = static_cast<std::size_t>(c.weights.num_aux_tasks) + 1;
  if (classes.size() == 1) classes.assign(tasks, classes[0]);
  RDC_CHECK(classes.size() == tasks, "config key 'classes': need 1 or K+1 = " << tasks
                                         << " values, got " << classes.size());
  c.net.domain_classes = classes;
  RDC_CHECK(c.augment.size() <= tasks,
            "config key 'zoom." << c.augment.size() - 1 << "': task index exceeds K");
  c.augment.resize(tasks);
  c.schedule.offset_freeze_iters =
      freeze >= 0 ? freeze : Schedule::default_freeze_iters(c.schedule.max_iter);
  try {
    c.schedule.validate();
    c.net.validate();
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  return c;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  RDC_CHECK(is.good(), "cannot open config " << path);
  return parse_train_config(is);
}

void write_train_config(std::ostream& os, const TrainConfig& c) {
  const Schedule& s = c.schedule;
  os << std::setprecision(17);
  os << "seed=" << c.seed << '\n'
     << "void_class=" << c.void_class << '\n'
     << "base_lr=" << s.base_lr << '\n'
     << "power=" << s.power << '\n'
     << "max_iter=" << s.max_iter << '\n'
     << "offset_freeze_iters=" << s.offset_freeze_iters << '\n'
     << "offset_lr_mult_encoder=" << s.offset_lr_multiplier_encoder << '\n'
     << "offset_lr_mult_joint=" << s.offset_lr_multiplier_joint << '\n'
     << "phase=" << (s.phase == TrainingPhase::kEncoder ? "encoder" : "joint") << '\n'
     << "momentum=" << s.momentum << '\n'
     << "weight_decay=" << s.weight_decay << '\n'
     << "batch_per_domain=" << s.batch_per_domain << '\n'
     << "loss_scale=" << s.loss_scale << '\n'
     << "alpha=" << c.weights.alpha << '\n'
     << "beta=" << c.weights.beta << '\n'
     << "gamma=" << c.weights.gamma << '\n'
     << "num_aux_tasks=" << c.weights.num_aux_tasks << '\n'
     << "in_channels=" << c.net.in_channels << '\n'
     << "kernel_size=" << c.net.kernel_size << '\n'
     << "blocks=" << format_blocks(c.net.blocks) << '\n'
     << "classes=";
  for (std::size_t i = 0; i < c.net.domain_classes.size(); ++i) {
    os << (i ? "," : "") << c.net.domain_classes[i];
  }
  os << '\n'
     << "aux_channels=" << c.net.aux_channels << '\n'
     << "norm_momentum=" << c.net.norm_momentum << '\n'
     << "init_seed=" << c.net.init_seed << '\n'
     << "zoom_height=" << c.zoom_height << '\n'
     << "zoom_width=" << c.zoom_width << '\n';
  for (std::size_t i = 0; i < c.augment.size(); ++i) {
    os << "zoom." << i << '=' << format_zoom(c.augment[i]) << '\n';
  }
}

// ---------------------------------------------------------------------------

void write_domain_stats(std::ostream& os, const std::vector<NormStatistics>& stats) {
  for (const NormStatistics& s : stats) {
    write_tensor(os, Tensor(Shape{1, s.channels(), 1, 1}, s.mean));
    write_tensor(os, Tensor(Shape{1, s.channels(), 1, 1}, s.var));
  }
}

std::vector<NormStatistics> read_domain_stats(std::istream& is,
                                              const std::vector<std::size_t>& layout) {
  std::vector<NormStatistics> out;
  for (std::size_t c : layout) {
    const Tensor mean = read_tensor(is);
    const Tensor var = read_tensor(is);
    RDC_CHECK(mean.numel() == c && var.numel() == c,
              "statistics file does not match the network layout");
    NormStatistics s(c);
    s.mean.assign(mean.data().begin(), mean.data().end());
    s.var.assign(var.data().begin(), var.data().end());
    out.push_back(std::move(s));
  }
  return out;
}

void save_model(const std::filesystem::path& dir, const ToyNet& net,
                const DomainNormBank& bank, const TrainConfig& config) {
  std::filesystem::create_directories(dir);
  std::vector<std::pair<std::string, const Tensor*>> tensors;
  for (const Parameter* p : net.parameters()) tensors.emplace_back(p->name, &p->value);
  save_checkpoint(dir / "params", tensors);
  for (int d : bank.domains()) {
    std::ofstream os(dir / ("domain_" + std::to_string(d) + ".stats"), std::ios::binary);
    RDC_CHECK(os.good(), "cannot write statistics for domain " << d);
    write_domain_stats(os, bank.domain(d));
  }
  std::ofstream cfg(dir / "config.txt");
  write_train_config(cfg, config);
}

LoadedModel load_model(const std::filesystem::path& dir) {
  TrainConfig config = load_train_config(dir / "config.txt");
  ToyNet net(config.net);
  for (NamedTensor& nt : load_checkpoint(dir / "params")) {
    Parameter* p = net.find_parameter(nt.name);
    RDC_CHECK(p != nullptr, "checkpoint tensor '" << nt.name << "' has no matching parameter");
    RDC_CHECK(p->value.shape() == nt.tensor.shape(),
              "checkpoint tensor '" << nt.name << "' has shape " << nt.tensor.shape().str()
                                    << ", parameter expects " << p->value.shape().str());
    std::copy(nt.tensor.data().begin(), nt.tensor.data().end(), p->value.data().begin());
  }
  DomainNormBank bank(net.norm_layout());
  for (std::size_t d = 0; d < net.num_domains(); ++d) {
    const auto path = dir / ("domain_" + std::to_string(d) + ".stats");
    if (!std::filesystem::exists(path)) continue;
    std::ifstream is(path, std::ios::binary);
    bank.register_domain(static_cast<int>(d));
    bank.domain(static_cast<int>(d)) = read_domain_stats(is, net.norm_layout());
  }
  return {std::move(config), std::move(net), std::move(bank)};
}

}  // namespace rdcseg
