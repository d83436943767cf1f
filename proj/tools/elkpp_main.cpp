/* Copyright 2026 The elkpp Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
// elkpp command-line front end.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "elkpp/checkpoint.h"
#include "elkpp/config.h"
#include "elkpp/dataset.h"
#include "elkpp/edge_loss.h"
#include "elkpp/error.h"
#include "elkpp/gradcheck.h"
#include "elkpp/netpbm.h"
#include "elkpp/reports.h"
#include "elkpp/trainer.h"

namespace fs = std::filesystem;
using namespace elkpp;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  bool deterministic = false;
  std::string precision;  // empty: command default
  std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "JSON configuration file");
  cmd->add_option("--seed", c.seed, "override the configured seed");
  cmd->add_flag("--deterministic", c.deterministic, "force deterministic mode");
  cmd->add_option("--precision", c.precision, "f32 or f64")
      ->check(CLI::IsMember({"f32", "f64"}));
  cmd->add_option("--out", c.out, "output directory");
}

TrainConfig resolve_config(const Common& c) {
  TrainConfig cfg;
  if (!c.config.empty()) {
    if (!fs::exists(c.config)) throw ConfigError("config file not found: " + c.config);
    cfg = load_train_config(c.config);
  }
  if (c.seed) cfg.seed = *c.seed;
  if (c.deterministic) cfg.deterministic = true;
  cfg.validate();
  return cfg;
}

bool use_f64(const Common& c, bool default_f64 = false) {
  if (c.precision.empty()) return default_f64;
  return c.precision == "f64";
}

fs::path require_out(const Common& c, const char* cmd) {
  if (c.out.empty()) throw ConfigError(std::string(cmd) + ": --out DIR is required");
  fs::create_directories(c.out);
  return c.out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw FormatError(path.string() + ": cannot open for writing");
  f << text;
}

void write_mask(const fs::path& path, const Footprint& fp) {
  Raster r{static_cast<std::size_t>(fp.width()), static_cast<std::size_t>(fp.height()), 1,
           fp.mask()};
  for (auto& v : r.pixels) v = v ? 255 : 0;
  write_netpbm(path, r);
}

// ---- synth-data -----------------------------------------------------------

struct SynthArgs {
  std::size_t count = 64;
  std::size_t val_count = 16;
  std::optional<int> classes;
  std::size_t size = 64;
  int void_border = 0;
  double noise = -1;
};

int cmd_synth(const Common& c, const SynthArgs& a) {
  const TrainConfig cfg = resolve_config(c);
  const fs::path out = require_out(c, "synth-data");
  SynthConfig s;
  s.height = s.width = a.size;
  s.num_classes = a.classes.value_or(cfg.model.num_classes);
  s.void_border = a.void_border;
  if (a.noise >= 0) s.noise_amplitude = a.noise;
  s.seed = cfg.seed;
  const auto train = generate_synthetic(s, a.count, 0);
  const auto val = generate_synthetic(s, a.val_count, a.count);
  for (const auto& x : train) save_dataset_sample(out, x);
  for (const auto& x : val) save_dataset_sample(out, x);
  write_split(out, "train", train);
  write_split(out, "val", val);
  std::printf("wrote %zu train + %zu val samples (%zux%zu, %d classes) to %s\n", train.size(),
              val.size(), a.size, a.size, s.num_classes, out.string().c_str());
  return 0;
}

// ---- train / eval ----------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::optional<int> iterations;
  std::string resume;
  int stop_after = -1;
  bool verbose = false;
};

template <typename T>
int run_train(const TrainConfig& cfg, const fs::path& out, const TrainArgs& a) {
  const auto train_set = load_split(a.data, "train", cfg.model.num_classes);
  std::vector<SegmentationSample> val_set;
  if (fs::exists(fs::path(a.data) / "val.txt")) {
    val_set = load_split(a.data, "val", cfg.model.num_classes);
  }
  TrainOptions opt;
  opt.out_dir = out;
  if (!a.resume.empty()) opt.resume = a.resume;
  opt.stop_after = a.stop_after;
  opt.quiet = !a.verbose;
  const TrainResult<T> r = train<T>(cfg, train_set, val_set, opt);
  std::printf("completed %d / %d iterations\n", r.iterations_done, cfg.total_iterations);
  if (!r.log.empty()) {
    const LogRow& last = r.log.back();
    std::printf("last: iter %d l_seg %.6f l_edge %.6f reg %.4f total %.6f\n", last.iter,
                last.l_seg, last.l_edge, last.reg, last.total);
  }
  if (r.final_eval) std::printf("%s", format_eval_report(*r.final_eval).c_str());
  if (r.best_iter >= 0) std::printf("best mIoU %.6f at iteration %d\n", r.best_miou, r.best_iter);
  return 0;
}

int cmd_train(const Common& c, TrainArgs a) {
  TrainConfig cfg = resolve_config(c);
  if (a.iterations) cfg.total_iterations = *a.iterations;
  cfg.validate();
  if (a.data.empty()) throw ConfigError("train: --data DIR is required");
  const fs::path out = require_out(c, "train");
  return use_f64(c) ? run_train<double>(cfg, out, a) : run_train<float>(cfg, out, a);
}

struct EvalArgs {
  std::string data;
  std::string checkpoint;
  std::string split = "val";
};

template <typename T>
int run_eval(const TrainConfig& cfg, const Common& c, const EvalArgs& a) {
  const SegNet net(cfg.model);
  ModelState<T> state = net.init<T>(cfg.seed);
  if (!fs::exists(a.checkpoint)) throw FormatError("checkpoint not found: " + a.checkpoint);
  const Checkpoint ck = read_checkpoint(a.checkpoint);
  if (ck.config_digest != config_digest(cfg)) {
    throw ConfigError(a.checkpoint + ": checkpoint was written under a different model/loss config");
  }
  unpack_checkpoint<T>(ck, state, nullptr);
  const auto samples = load_split(a.data, a.split, cfg.model.num_classes);
  const EvalResult r = evaluate(net, state, samples, 8);
  const std::string text = format_eval_report(r);
  std::printf("%s", text.c_str());
  if (!c.out.empty()) {
    fs::create_directories(c.out);
    write_text(fs::path(c.out) / "eval.txt", text);
    nlohmann::json j = eval_to_json(r);
    j["checkpoint"] = a.checkpoint;
    j["iteration"] = ck.iteration;
    j["split"] = a.split;
    write_text(fs::path(c.out) / "eval.json", j.dump(2) + "\n");
  }
  return 0;
}

int cmd_eval(const Common& c, const EvalArgs& a) {
  const TrainConfig cfg = resolve_config(c);
  if (a.data.empty()) throw ConfigError("eval: --data DIR is required");
  if (a.checkpoint.empty()) throw ConfigError("eval: --checkpoint FILE is required");
  return use_f64(c) ? run_eval<double>(cfg, c, a) : run_eval<float>(cfg, c, a);
}

// ---- gradcheck --------------------------------------------------------------

struct GradArgs {
  std::string mode = "all";
  std::vector<std::string> frozen;
};

int cmd_gradcheck(const Common& c, const GradArgs& a) {
  const TrainConfig cfg = resolve_config(c);
  if (!use_f64(c, /*default_f64=*/true)) {
    throw ConfigError("gradcheck: requires --precision f64");
  }
  GradcheckOptions o;
  o.seed = cfg.seed;
  o.loss = cfg.edge_loss;
  o.frozen = {a.frozen.begin(), a.frozen.end()};
  std::string text;
  bool ok = true;
  if (a.mode == "loss" || a.mode == "all") {
    o.tolerance = 1e-6;
    const GradcheckReport r = gradcheck_loss_only(o);
    text += "== loss-only path (logits 2x4x8x8) ==\n" + format_gradcheck(r);
    ok = ok && r.passed;
  }
  if (a.mode == "model" || a.mode == "all") {
    o.tolerance = 1e-3;
    const GradcheckReport r = gradcheck_model(o);
    std::size_t n = 0;
    for (const auto& e : r.entries) n += e.elements;
    text += "== full model (" + std::to_string(n) + " parameters) ==\n" + format_gradcheck(r);
    ok = ok && r.passed;
  }
  std::printf("%s", text.c_str());
  if (!c.out.empty()) {
    fs::create_directories(c.out);
    write_text(fs::path(c.out) / "gradcheck.txt", text);
  }
  if (!ok) {
    std::fprintf(stderr, "elkpp: error: gradient check failed\n");
    return 1;
  }
  return 0;
}

// ---- edge-extract -----------------------------------------------------------

struct EdgeArgs {
  std::string labels;
  std::string image;
  std::string checkpoint;
  std::optional<int> classes;
  std::optional<int> k;
  std::optional<double> alpha;
};

template <typename T>
Tensor<T> model_probabilities(const TrainConfig& cfg, const EdgeArgs& a) {
  const Raster img = read_netpbm(a.image);
  if (img.channels != 3) throw FormatError(a.image + ": expected P6 (RGB)");
  SegmentationSample s;
  s.id = "input";
  s.height = img.height;
  s.width = img.width;
  s.image = img.pixels;
  s.labels.assign(img.width * img.height, 0);
  const SegNet net(cfg.model);
  ModelState<T> state = net.init<T>(cfg.seed);
  const Checkpoint ck = read_checkpoint(a.checkpoint);
  if (ck.config_digest != config_digest(cfg)) {
    throw ConfigError(a.checkpoint + ": checkpoint was written under a different model/loss config");
  }
  unpack_checkpoint<T>(ck, state, nullptr);
  const std::size_t idx = 0;
  Batch<T> b = make_batch<T>(std::span<const SegmentationSample>(&s, 1),
                             std::span<const std::size_t>(&idx, 1));
  return predict_sigmoid(net, state, b.images);
}

int cmd_edge(const Common& c, const EdgeArgs& a) {
  TrainConfig cfg = resolve_config(c);
  if (a.k) cfg.edge_loss.k = *a.k;
  if (a.alpha) cfg.edge_loss.alpha = *a.alpha;
  cfg.edge_loss.validate();
  const fs::path out = require_out(c, "edge-extract");
  Tensor<double> prob;
  std::size_t h = 0, w = 0;
  if (!a.labels.empty()) {
    const Raster lab = read_netpbm(a.labels);
    if (lab.channels != 1) throw FormatError(a.labels + ": expected P5 (gray)");
    LabelBatch lb(1, lab.height, lab.width);
    lb.values = lab.pixels;
    const int classes = a.classes.value_or(cfg.model.num_classes);
    try {
      lb.validate(classes);
    } catch (const Error& e) {
      throw FormatError(a.labels + ": " + e.what());
    }
    prob = one_hot<double>(lb, classes);
    h = lab.height;
    w = lab.width;
  } else if (!a.image.empty() && !a.checkpoint.empty()) {
    prob = use_f64(c) ? model_probabilities<double>(cfg, a)
                      : model_probabilities<float>(cfg, a).cast<double>();
    h = prob.dim(2);
    w = prob.dim(3);
  } else {
    throw ConfigError("edge-extract: give --labels PGM, or --image PPM with --checkpoint FILE");
  }
  Tape<double> tape;
  const Tensor<double>& e =
      squash(gradient_map(tape.constant(prob), cfg.edge_loss.k, cfg.edge_loss.all_ones_blocks),
             cfg.edge_loss.alpha)
          .value();
  Raster r{w, h, 1, std::vector<std::uint8_t>(w * h)};
  for (std::size_t i = 0; i < w * h; ++i) {
    r.pixels[i] = static_cast<std::uint8_t>(std::lround(std::clamp(e[i], 0.0, 1.0) * 255.0));
  }
  write_netpbm(out / "edges.pgm", r);
  std::printf("wrote %s (%zux%zu, k=%d, alpha=%g)\n", (out / "edges.pgm").string().c_str(), w,
              h, cfg.edge_loss.k, cfg.edge_loss.alpha);
  return 0;
}

// ---- receptive-field reports ------------------------------------------------

int cmd_rf(const Common& c, bool ascii, const std::string& mode) {
  TrainConfig cfg = resolve_config(c);
  if (!mode.empty()) cfg.model.lkpp.mode = parse_hadc_mode(mode);
  std::printf("%s", rf_report(cfg.model.lkpp, ascii).c_str());
  if (!c.out.empty()) {
    fs::create_directories(c.out);
    const auto verdicts = lkpp_block_verdicts(cfg.model.lkpp);
    for (std::size_t i = 0; i < verdicts.size(); ++i) {
      write_mask(fs::path(c.out) / ("block" + std::to_string(i) + "_footprint.pgm"),
                 verdicts[i].footprint);
    }
    write_text(fs::path(c.out) / "rf_report.txt", rf_report(cfg.model.lkpp, ascii));
  }
  return 0;
}

int cmd_gridding(const Common& c, bool ascii) {
  resolve_config(c);
  const std::string text = gridding_report(ascii);
  std::printf("%s", text.c_str());
  const auto demo = gridding_demo();
  if (!c.out.empty()) {
    fs::create_directories(c.out);
    write_mask(fs::path(c.out) / "rates_2_2_2.pgm", demo[0].footprint);
    write_mask(fs::path(c.out) / "rates_1_2_3.pgm", demo[1].footprint);
    write_text(fs::path(c.out) / "gridding.txt", text);
  }
  if (!demo[0].gridding || demo[1].gridding) {
    std::fprintf(stderr, "elkpp: error: gridding verdicts differ from the expected pattern\n");
    return 1;
  }
  return 0;
}

int cmd_param(const Common& c, int k) {
  const TrainConfig cfg = resolve_config(c);
  const std::string text = param_report(k, cfg.model);
  std::printf("%s", text.c_str());
  if (!c.out.empty()) {
    fs::create_directories(c.out);
    write_text(fs::path(c.out) / "param_report.txt", text);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"elkpp: large-kernel pyramid pooling segmentation with an edge-aware loss"};
  app.require_subcommand(1);

  Common common;

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth-data", "generate the synthetic shapes dataset");
  add_common(synth_cmd, common);
  synth_cmd->add_option("--count", synth.count, "training samples");
  synth_cmd->add_option("--val-count", synth.val_count, "validation samples");
  synth_cmd->add_option("--classes", synth.classes, "class count (background included)");
  synth_cmd->add_option("--size", synth.size, "square canvas extent (multiple of 32)");
  synth_cmd->add_option("--void-border", synth.void_border, "void frame width in pixels");
  synth_cmd->add_option("--noise", synth.noise, "value-noise amplitude");

  TrainArgs targs;
  auto* train_cmd = app.add_subcommand("train", "train a model");
  add_common(train_cmd, common);
  train_cmd->add_option("--data", targs.data, "dataset root");
  train_cmd->add_option("--iterations", targs.iterations, "override total_iterations");
  train_cmd->add_option("--resume", targs.resume, "checkpoint to resume from");
  train_cmd->add_option("--stop-after", targs.stop_after, "stop after this many iterations");
  train_cmd->add_flag("--verbose", targs.verbose, "print progress to stderr");

  EvalArgs eargs;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(eval_cmd, common);
  eval_cmd->add_option("--data", eargs.data, "dataset root");
  eval_cmd->add_option("--checkpoint", eargs.checkpoint, "checkpoint file");
  eval_cmd->add_option("--split", eargs.split, "split name (default val)");

  GradArgs gargs;
  auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference gradient check");
  add_common(grad_cmd, common);
  grad_cmd->add_option("--mode", gargs.mode, "loss, model or all")
      ->check(CLI::IsMember({"loss", "model", "all"}));
  grad_cmd->add_option("--frozen", gargs.frozen, "parameter names to freeze");

  EdgeArgs edargs;
  auto* edge_cmd = app.add_subcommand("edge-extract", "write an edge map as PGM");
  add_common(edge_cmd, common);
  edge_cmd->add_option("--labels", edargs.labels, "label map (P5)");
  edge_cmd->add_option("--image", edargs.image, "input image (P6), used with --checkpoint");
  edge_cmd->add_option("--checkpoint", edargs.checkpoint, "model checkpoint");
  edge_cmd->add_option("--classes", edargs.classes, "class count for --labels");
  edge_cmd->add_option("--k", edargs.k, "template scale");
  edge_cmd->add_option("--alpha", edargs.alpha, "squash sensitivity");

  bool rf_ascii = false;
  std::string rf_mode;
  auto* rf_cmd = app.add_subcommand("rf-report", "receptive fields of the LKPP blocks");
  add_common(rf_cmd, common);
  rf_cmd->add_flag("--ascii", rf_ascii, "draw each footprint");
  rf_cmd->add_option("--mode", rf_mode, "override LKPP mode")
      ->check(CLI::IsMember({"cascade", "parallel"}));

  bool grid_ascii = false;
  auto* grid_cmd = app.add_subcommand("gridding-check", "stacked dilation gridding demo");
  add_common(grid_cmd, common);
  grid_cmd->add_flag("--ascii", grid_ascii, "draw each footprint");

  int param_k = 5;
  auto* param_cmd = app.add_subcommand("param-report", "factorized kernel parameter counts");
  add_common(param_cmd, common);
  param_cmd->add_option("--k", param_k, "kernel extent of the demo");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*synth_cmd) return cmd_synth(common, synth);
    if (*train_cmd) return cmd_train(common, targs);
    if (*eval_cmd) return cmd_eval(common, eargs);
    if (*grad_cmd) return cmd_gradcheck(common, gargs);
    if (*edge_cmd) return cmd_edge(common, edargs);
    if (*rf_cmd) return cmd_rf(common, rf_ascii, rf_mode);
    if (*grid_cmd) return cmd_gridding(common, grid_ascii);
    if (*param_cmd) return cmd_param(common, param_k);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "elkpp: config error: %s\n", e.what());
    return 2;
  } catch (const FormatError& e) {
    std::fprintf(stderr, "elkpp: file error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "elkpp: error: %s\n", e.what());
    return 1;
  }
  return 1;
}
