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
#include "elkpp/trainer.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "elkpp/edge_loss.h"
#include "elkpp/error.h"

namespace elkpp {

namespace {

template <typename T>
Var<T> inference_logits(const SegNet& net, Tape<T>& tape, ModelState<T>& state,
                        const Tensor<T>& images) {
  Context<T> ctx(tape, state, /*training=*/false);
  return net.forward(ctx, tape.constant(images));
}

std::string checkpoint_name(int iter) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "ckpt_%06d.elkp", iter);
  return buf;
}

void append_csv(const std::filesystem::path& path, const LogRow& r) {
  std::ofstream f(path, std::ios::app);
  if (!f) throw FormatError(path.string() + ": cannot append");
  char buf[256];
  std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.9g,%.9g,%.9g\n", r.iter, r.lr,
                r.l_seg, r.l_edge, r.reg, r.total);
  f << buf;
}

}  // namespace

template <typename T>
LabelBatch predict(const SegNet& net, ModelState<T>& state, const Tensor<T>& images) {
  Tape<T> tape;
  const Tensor<T>& z = inference_logits(net, tape, state, images).value();
  const std::size_t n = z.dim(0), c = z.dim(1), h = z.dim(2), w = z.dim(3);
  const std::size_t plane = h * w;
  LabelBatch out(n, h, w);
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t i = 0; i < plane; ++i) {
      std::size_t best = 0;
      T best_v = z[b * c * plane + i];
      for (std::size_t k = 1; k < c; ++k) {
        const T v = z[(b * c + k) * plane + i];
        if (v > best_v) {
          best_v = v;
          best = k;
        }
      }
      out.values[b * plane + i] = static_cast<std::uint8_t>(best);
    }
  }
  return out;
}

template <typename T>
Tensor<T> predict_sigmoid(const SegNet& net, ModelState<T>& state,
                          const Tensor<T>& images) {
  Tape<T> tape;
  return sigmoid(inference_logits(net, tape, state, images)).value();
}

template <typename T>
EvalResult evaluate(const SegNet& net, ModelState<T>& state,
                    std::span<const SegmentationSample> samples,
                    std::size_t batch_size) {
  if (samples.empty()) throw Error("evaluate: empty sample set");
  if (batch_size == 0) batch_size = 1;
  EvalResult r;
  r.cm = ConfusionMatrix(net.config().num_classes);
  std::size_t matched = 0, predicted = 0;
  for (std::size_t start = 0; start < samples.size(); start += batch_size) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(samples.size(), start + batch_size); ++i) {
      idx.push_back(i);
    }
    Batch<T> b = make_batch<T>(samples, idx);
    LabelBatch pred = predict(net, state, b.images);
    r.cm.update(pred, b.labels);
    const BoundaryScore bs = boundary_agreement(pred, b.labels, 2);
    matched += bs.matched;
    predicted += bs.predicted_edges;
  }
  r.boundary.matched = matched;
  r.boundary.predicted_edges = predicted;
  if (predicted > 0) r.boundary.score = static_cast<double>(matched) / predicted;
  r.pixel_acc = pixel_acc(r.cm);
  r.mean_class_acc = mean_class_acc(r.cm);
  r.miou = miou(r.cm);
  r.fwiou = fwiou(r.cm);
  r.class_iou = per_class_iou(r.cm);
  return r;
}

template <typename T>
TrainResult<T> train(const TrainConfig& cfg,
                     std::span<const SegmentationSample> train_set,
                     std::span<const SegmentationSample> val_set,
                     const TrainOptions& options) {
  cfg.validate();
  if (train_set.empty()) throw Error("train: empty training set");
  for (const auto& s : train_set) s.validate(cfg.model.num_classes);

  const SegNet net(cfg.model);
  TrainResult<T> res;
  res.state = net.template init<T>(cfg.seed);
  const std::uint64_t digest = config_digest(cfg);
  const bool files = !options.out_dir.empty();
  const std::filesystem::path csv = options.out_dir / "metrics.csv";

  int start = 0;
  if (options.resume) {
    const Checkpoint ck = read_checkpoint(*options.resume);
    if (ck.config_digest != digest) {
      throw ConfigError(options.resume->string() +
                        ": checkpoint was written under a different model/loss config");
    }
    unpack_checkpoint(ck, res.state, &res.adam);
    start = static_cast<int>(ck.iteration);
    if (start > cfg.total_iterations) throw ConfigError("resume: checkpoint is past total_iterations");
    auto it = ck.tensors.find("meta/best_miou");
    if (it != ck.tensors.end()) {
      const double v = static_cast<double>(it->second[0]) + static_cast<double>(it->second[1]);
      res.best_miou = v < 0 ? kUndefined : v;
    }
    auto bi = ck.tensors.find("meta/best_iter");
    if (bi != ck.tensors.end()) res.best_iter = static_cast<int>(bi->second[0]);
  }
  if (files) {
    std::filesystem::create_directories(options.out_dir);
    save_train_config(options.out_dir / "config.json", cfg);
    if (start == 0 || !std::filesystem::exists(csv)) {
      std::ofstream f(csv, std::ios::trunc);
      f << "iter,lr,l_seg,l_edge,reg,total\n";
    }
  }

  auto make_checkpoint = [&](int iter) {
    Checkpoint ck = pack_checkpoint(res.state, &res.adam, static_cast<std::uint64_t>(iter), digest);
    // f32 hi + lo keeps ~48 bits of the double for the best-so-far comparison.
    const double best = std::isnan(res.best_miou) ? -1.0 : res.best_miou;
    const float hi = static_cast<float>(best);
    ck.tensors["meta/best_miou"] = Tensor<float>(
        Shape{2}, std::vector<float>{hi, static_cast<float>(best - static_cast<double>(hi))});
    ck.tensors["meta/best_iter"] =
        Tensor<float>(Shape{1}, std::vector<float>{static_cast<float>(res.best_iter)});
    return ck;
  };

  auto run_eval = [&](int iter) {
    if (val_set.empty()) return;
    EvalResult ev = evaluate(net, res.state, val_set, 8);
    if (!options.quiet) {
      std::fprintf(stderr, "[eval] iter %d mIoU %.4f pixel_acc %.4f boundary %.4f\n", iter,
                   ev.miou, ev.pixel_acc, ev.boundary.score);
    }
    if (std::isnan(res.best_miou) || res.best_miou < 0 || ev.miou > res.best_miou) {
      res.best_miou = ev.miou;
      res.best_iter = iter;
      if (files) {
        write_checkpoint(options.out_dir / "best.elkp",
                         pack_checkpoint(res.state, static_cast<const AdamState<T>*>(nullptr),
                                         static_cast<std::uint64_t>(iter), digest));
        nlohmann::json j = eval_to_json(ev);
        j["iteration"] = iter;
        std::ofstream(options.out_dir / "best.json") << j.dump(2) << '\n';
      }
    }
    if (iter == cfg.total_iterations) res.final_eval = std::move(ev);
  };

  const std::size_t n = train_set.size();
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  std::uint64_t cached_epoch = ~0ULL;
  std::vector<std::size_t> perm;
  const AdamOptions adam_opts{cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon};
  const int stop = options.stop_after >= 0 ? std::min(options.stop_after, cfg.total_iterations)
                                           : cfg.total_iterations;

  for (int it = start; it < stop; ++it) {
    std::vector<std::size_t> idx(batch);
    std::vector<bool> flips(batch);
    for (std::size_t k = 0; k < batch; ++k) {
      const std::uint64_t pos = static_cast<std::uint64_t>(it) * batch + k;
      const std::uint64_t epoch = pos / n;
      if (epoch != cached_epoch) {
        perm = epoch_permutation(n, cfg.seed, epoch);
        cached_epoch = epoch;
      }
      idx[k] = perm[pos % n];
      flips[k] = flip_decision(cfg.seed, static_cast<std::uint64_t>(it), k,
                               cfg.mirror_flip_probability);
    }
    Batch<T> b = make_batch<T>(train_set, idx, flips);

    Tape<T> tape;
    Context<T> ctx(tape, res.state, /*training=*/true);
    Var<T> logits = net.forward(ctx, tape.constant(b.images));
    std::vector<Var<T>> trainable;
    for (const auto& [name, v] : tape.bound_parameters()) {
      if (v.requires_grad()) trainable.push_back(v);
    }
    EceTerms<T> terms;
    if (options.pure_ce) {
      terms.seg = ce_loss(logits, b.labels, cfg.edge_loss).value;
      terms.edge = tape.constant(Tensor<T>::scalar(T(0)));
      terms.reg = parameter_regularizer(tape, std::span<const Var<T>>(trainable),
                                        cfg.edge_loss.squared_regularizer);
      terms.total = add(terms.seg, mul(terms.reg, static_cast<T>(cfg.edge_loss.lambda2)));
    } else {
      terms = ece_loss(logits, b.labels, cfg.edge_loss, std::span<const Var<T>>(trainable));
    }
    const double total = static_cast<double>(terms.total.value().item());
    if (!std::isfinite(total)) {
      throw NonFiniteError("non-finite loss at iteration " + std::to_string(it + 1));
    }
    tape.backward(terms.total);
    res.state.params.zero_grad();
    tape.accumulate_parameter_grads(res.state.params);
    const double lr = poly_lr(it, cfg.total_iterations, cfg.base_lr, cfg.poly_power);
    adam_step(res.state.params, res.adam, lr, adam_opts);
    const int done = it + 1;
    res.iterations_done = done;

    if (done % cfg.log_interval == 0 || done == 1 || done == cfg.total_iterations) {
      LogRow row{done,
                 lr,
                 static_cast<double>(terms.seg.value().item()),
                 static_cast<double>(terms.edge.value().item()),
                 static_cast<double>(terms.reg.value().item()),
                 total};
      res.log.push_back(row);
      if (files) append_csv(csv, row);
      if (options.on_log) options.on_log(row);
      if (!options.quiet) {
        std::fprintf(stderr, "[train] iter %d lr %.3g seg %.4f edge %.4f reg %.2f total %.4f\n",
                     row.iter, row.lr, row.l_seg, row.l_edge, row.reg, row.total);
      }
    }
    if ((cfg.eval_interval > 0 && done % cfg.eval_interval == 0) ||
        done == cfg.total_iterations) {
      run_eval(done);
    }
    if (files && ((cfg.checkpoint_interval > 0 && done % cfg.checkpoint_interval == 0) ||
                  done == cfg.total_iterations || done == stop)) {
      const Checkpoint ck = make_checkpoint(done);
      if (cfg.checkpoint_interval > 0 && done % cfg.checkpoint_interval == 0) {
        write_checkpoint(options.out_dir / checkpoint_name(done), ck);
      }
      write_checkpoint(options.out_dir / "last.elkp", ck);
    }
  }
  if (start >= stop) res.iterations_done = start;
  return res;
}

std::string format_eval_report(const EvalResult& r) {
  std::ostringstream out;
  char buf[128];
  auto line = [&](const char* name, double v) {
    std::snprintf(buf, sizeof buf, "%-16s %.6f\n", name, v);
    out << buf;
  };
  line("pixel_acc", r.pixel_acc);
  line("mean_class_acc", r.mean_class_acc);
  line("miou", r.miou);
  line("fwiou", r.fwiou);
  line("boundary", r.boundary.score);
  out << "class  iou\n";
  for (std::size_t k = 0; k < r.class_iou.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%5zu  %.6f\n", k, r.class_iou[k]);
    out << buf;
  }
  return out.str();
}

nlohmann::json eval_to_json(const EvalResult& r) {
  auto num = [](double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); };
  nlohmann::json iou = nlohmann::json::array();
  for (double v : r.class_iou) iou.push_back(num(v));
  nlohmann::json cm = nlohmann::json::array();
  for (int t = 0; t < r.cm.num_classes(); ++t) {
    nlohmann::json row = nlohmann::json::array();
    for (int p = 0; p < r.cm.num_classes(); ++p) row.push_back(r.cm.count(t, p));
    cm.push_back(row);
  }
  return {{"pixel_acc", num(r.pixel_acc)},
          {"mean_class_acc", num(r.mean_class_acc)},
          {"miou", num(r.miou)},
          {"fwiou", num(r.fwiou)},
          {"boundary_agreement", num(r.boundary.score)},
          {"class_iou", iou},
          {"confusion", cm}};
}

#define ELKPP_INSTANTIATE(T)                                                    \
  template LabelBatch predict(const SegNet&, ModelState<T>&, const Tensor<T>&); \
  template Tensor<T> predict_sigmoid(const SegNet&, ModelState<T>&,             \
                                     const Tensor<T>&);                         \
  template EvalResult evaluate(const SegNet&, ModelState<T>&,                   \
                               std::span<const SegmentationSample>, std::size_t); \
  template TrainResult<T> train(const TrainConfig&,                             \
                                std::span<const SegmentationSample>,            \
                                std::span<const SegmentationSample>,            \
                                const TrainOptions&);

ELKPP_INSTANTIATE(float)
ELKPP_INSTANTIATE(double)
#undef ELKPP_INSTANTIATE

}  // namespace elkpp
