// Copyright 2026 The Pushplan Authors
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

#ifndef PUSHPLAN_CORRECTION_HPP_
#define PUSHPLAN_CORRECTION_HPP_

// Location correction: given the first-frame appearance of a tracked object
// and a crop of the newly observed image at the predicted location, regress
// the pixel residual that re-centers the crop on the object.

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "pushplan/dataset.hpp"
#include "pushplan/errors.hpp"
#include "pushplan/forward_model.hpp"
#include "pushplan/nn.hpp"
#include "pushplan/object_repr.hpp"

namespace pushplan {

struct CorrectionConfig {
  int window = 16;
  int hidden = 64;
  double jitter = 4.0;  // j, pixels
  std::uint64_t seed = 1;
};

// Network input: [template patch, observed patch, sub-pixel offset of the
// query location from the crop center].
inline int correction_input_width(int window) { return 2 * window * window * 3 + 2; }

inline Vec2 subpixel_offset(const Vec2& b) {
  return {b.x - std::floor(b.x + 0.5), b.y - std::floor(b.y + 0.5)};
}

template <typename T>
class CorrectionModel {
 public:
  CorrectionConfig cfg;
  ParameterSet<T> params;
  Mlp mlp;

  static CorrectionModel create(const CorrectionConfig& cfg) {
    CorrectionModel m;
    m.cfg = cfg;
    Rng rng = make_rng(cfg.seed, {0x636f7272});
    m.mlp = Mlp::create(m.params, "correction",
                        {correction_input_width(cfg.window), cfg.hidden, cfg.hidden, 2}, rng,
                        /*zero_last=*/true);
    return m;
  }

  // Parameters that make every residual zero (the "w/o C" ablation).
  static CorrectionModel disabled(const CorrectionConfig& cfg) {
    CorrectionModel m = create(cfg);
    for (auto& p : m.params) p.value.fill(T(0));
    return m;
  }

  template <typename U>
  CorrectionModel<U> cast() const {
    CorrectionModel<U> m;
    m.cfg = cfg;
    m.params = params.template cast<U>();
    m.mlp = mlp;
    return m;
  }

  // inputs [n, correction_input_width] -> residuals [n, 2] in pixels
  Var operator()(Tape<T>& tape, Var inputs) { return mlp(tape, params, inputs); }

  static void fill_input(Tensor<T>& out, int row, const Patch& initial, const Patch& observed,
                         const Vec2& query) {
    const int w = static_cast<int>(initial.pixels.size());
    for (int k = 0; k < w; ++k) {
      out(row, k) = static_cast<T>(initial.pixels[static_cast<std::size_t>(k)]);
      out(row, w + k) = static_cast<T>(observed.pixels[static_cast<std::size_t>(k)]);
    }
    const Vec2 off = subpixel_offset(query);
    out(row, 2 * w) = static_cast<T>(off.x);
    out(row, 2 * w + 1) = static_cast<T>(off.y);
  }

  std::vector<Vec2> residuals(const std::vector<Patch>& initial, const Raster& observed,
                              const std::vector<Vec2>& predicted) {
    if (predicted.empty()) return {};
    Tensor<T> in(static_cast<int>(predicted.size()), correction_input_width(cfg.window));
    for (std::size_t i = 0; i < predicted.size(); ++i) {
      fill_input(in, static_cast<int>(i), initial[i], crop(observed, predicted[i], cfg.window),
                 predicted[i]);
    }
    Tape<T> tape(false);
    const Tensor<T>& out = tape.value((*this)(tape, tape.constant(std::move(in))));
    std::vector<Vec2> res;
    for (int i = 0; i < out.rows(); ++i) {
      res.push_back({static_cast<double>(out(i, 0)), static_cast<double>(out(i, 1))});
    }
    return res;
  }

  // predicted + residual, clamped to the raster.
  std::vector<Vec2> correct(const std::vector<Patch>& initial, const Raster& observed,
                            const std::vector<Vec2>& predicted) {
    const auto res = residuals(initial, observed, predicted);
    std::vector<Vec2> out;
    const double g = observed.size();
    for (std::size_t i = 0; i < predicted.size(); ++i) {
      const Vec2 c = predicted[i] + res[i];
      out.push_back({std::clamp(c.x, 0.0, g), std::clamp(c.y, 0.0, g)});
    }
    return out;
  }

  Vec2 correct(const Patch& initial, const Raster& observed, const Vec2& predicted) {
    return correct(std::vector<Patch>{initial}, observed, std::vector<Vec2>{predicted}).front();
  }

  Checkpoint to_checkpoint() const {
    Checkpoint ck;
    ck.add_meta("kind", "correction");
    ck.add_meta("window", std::to_string(cfg.window));
    ck.add_meta("hidden", std::to_string(cfg.hidden));
    ck.add_meta("jitter", std::to_string(cfg.jitter));
    ck.add_parameters("", params);
    return ck;
  }

  static CorrectionModel from_checkpoint(const Checkpoint& ck) {
    if (ck.meta_value("kind") != "correction") throw DataError("not a correction checkpoint");
    CorrectionConfig c;
    c.window = std::stoi(ck.meta_value("window"));
    c.hidden = std::stoi(ck.meta_value("hidden"));
    c.jitter = std::stod(ck.meta_value("jitter"));
    CorrectionModel m = create(c);
    ck.load_parameters("", m.params);
    return m;
  }
};

// Target residual for a query placed at ground truth + jitter.
inline Vec2 correction_target(const Vec2& jitter) { return jitter * -1.0; }

struct CorrectionExample {
  const PushSample* sample = nullptr;
  int object = 0;
  Vec2 jitter;
};

// First record (step 0) of every episode, used for the template crops.
inline std::map<int, const PushSample*> episode_first_frames(const Dataset& d) {
  std::map<int, const PushSample*> first;
  for (const PushSample& s : d.samples) {
    auto it = first.find(s.episode_id);
    if (it == first.end() || s.step_id < it->second->step_id) first[s.episode_id] = &s;
  }
  return first;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> correction_batch(const std::vector<CorrectionExample>& ex,
                                                 const std::map<int, const PushSample*>& first,
                                                 const PixelMap& map, int window) {
  Tensor<T> in(static_cast<int>(ex.size()), correction_input_width(window));
  Tensor<T> target(static_cast<int>(ex.size()), 2);
  const PushSample* cached = nullptr;
  Raster observed, initial_raster;
  int cached_episode = -1;
  for (std::size_t i = 0; i < ex.size(); ++i) {
    const CorrectionExample& e = ex[i];
    if (e.sample != cached) {
      observed = render(e.sample->after, map);
      cached = e.sample;
    }
    const PushSample* f0 = first.at(e.sample->episode_id);
    if (e.sample->episode_id != cached_episode) {
      initial_raster = render(f0->before, map);
      cached_episode = e.sample->episode_id;
    }
    const Vec2 truth = e.sample->locs_after[static_cast<std::size_t>(e.object)];
    const Vec2 query = truth + e.jitter;
    const Patch init = crop(initial_raster, f0->locs_before[static_cast<std::size_t>(e.object)], window);
    CorrectionModel<T>::fill_input(in, static_cast<int>(i), init, crop(observed, query, window), query);
    const Vec2 t = correction_target(e.jitter);
    target(static_cast<int>(i), 0) = static_cast<T>(t.x);
    target(static_cast<int>(i), 1) = static_cast<T>(t.y);
  }
  return {std::move(in), std::move(target)};
}

inline std::vector<CorrectionExample> jittered_examples(const Dataset& d, double jitter, Rng& rng) {
  std::vector<CorrectionExample> out;
  for (const PushSample& s : d.samples) {
    for (std::size_t n = 0; n < s.locs_after.size(); ++n) {
      out.push_back({&s, static_cast<int>(n),
                     {uniform(rng, -jitter, jitter), uniform(rng, -jitter, jitter)}});
    }
  }
  return out;
}

struct CorrectionTrainConfig {
  double lr = 1e-3;
  double lr_decay = 1.0;
  int batch_size = 64;
  int epochs = 6;
  std::uint64_t seed = 1;
};

struct CorrectionEpochLog {
  int epoch = 0;
  double train_mse = 0.0;
  double val_mse = 0.0;  // per axis, pixels^2
};

struct CorrectionTrainResult {
  CorrectionModel<float> model;
  std::vector<CorrectionEpochLog> log;
  int best_epoch = 0;
};

// Per-axis MSE of the residual against -jitter, with fixed validation jitters.
inline double evaluate_correction(CorrectionModel<float>& m, const Dataset& d,
                                  std::uint64_t seed) {
  Rng rng = make_rng(seed, {0x76616c});
  const auto ex = jittered_examples(d, m.cfg.jitter, rng);
  const auto first = episode_first_frames(d);
  double sum = 0.0;
  for (std::size_t b = 0; b < ex.size(); b += 256) {
    const std::vector<CorrectionExample> chunk(ex.begin() + static_cast<long>(b),
                                               ex.begin() + static_cast<long>(std::min(ex.size(), b + 256)));
    auto [in, target] = correction_batch<float>(chunk, first, d.pixel_map(), m.cfg.window);
    Tape<float> tape(false);
    const Var out = m(tape, tape.constant(std::move(in)));
    sum += static_cast<double>(tape.value(ad::mse(tape, out, tape.constant(std::move(target))))[0]) *
           static_cast<double>(chunk.size());
  }
  return ex.empty() ? 0.0 : sum / static_cast<double>(ex.size());
}

inline CorrectionTrainResult train_correction(const Dataset& train, const Dataset& val,
                                              const CorrectionConfig& model_cfg,
                                              const CorrectionTrainConfig& cfg,
                                              std::ostream* progress = nullptr) {
  if (train.samples.empty()) throw DataError("train_correction: empty training set");
  CorrectionModel<float> model = CorrectionModel<float>::create(model_cfg);
  const Dataset& vset = val.samples.empty() ? train : val;
  const auto first = episode_first_frames(train);
  AdamState<float> adam;
  AdamConfig adam_cfg;
  adam_cfg.lr = cfg.lr;
  CorrectionTrainResult res{model, {}, 0};
  double best = evaluate_correction(model, vset, cfg.seed);
  res.log.push_back({0, best, best});
  if (progress) *progress << "epoch 0 val_mse " << best << "\n";
  Rng rng = make_rng(cfg.seed, {0x74726e63});
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    auto ex = jittered_examples(train, model_cfg.jitter, rng);
    std::shuffle(ex.begin(), ex.end(), rng);
    double sum = 0.0;
    for (std::size_t b = 0, batch_index = 0; b < ex.size(); b += bs, ++batch_index) {
      const std::vector<CorrectionExample> chunk(ex.begin() + static_cast<long>(b),
                                                 ex.begin() + static_cast<long>(std::min(ex.size(), b + bs)));
      auto [in, target] = correction_batch<float>(chunk, first, train.pixel_map(), model_cfg.window);
      model.params.zero_grad();
      Tape<float> tape;
      const Var loss = ad::mse(tape, model(tape, tape.constant(std::move(in))),
                               tape.constant(std::move(target)));
      const double l = tape.value(loss)[0];
      if (!std::isfinite(l)) {
        std::ostringstream msg;
        msg << "non-finite correction loss at epoch " << epoch << " batch " << batch_index
            << ": mse=" << l;
        throw NumericalError(msg.str());
      }
      tape.backward(loss);
      adam_step(model.params, adam, adam_cfg);
      sum += l * static_cast<double>(chunk.size());
    }
    const double vm = evaluate_correction(model, vset, cfg.seed);
    res.log.push_back({epoch, sum / static_cast<double>(ex.size()), vm});
    if (progress) {
      *progress << "epoch " << epoch << " train_mse " << sum / static_cast<double>(ex.size())
                << " val_mse " << vm << "\n";
      progress->flush();
    }
    if (vm < best) {
      best = vm;
      res.best_epoch = epoch;
      res.model = model;
    }
    adam_cfg.lr *= cfg.lr_decay;
  }
  return res;
}

enum class Tracking {
  kCorrected,  // predict, then correct against the new observation
  kOpenLoop,   // keep the predicted locations
  kOracle,     // ground-truth locations from the simulator
};

// Updates descriptors after an executed action. Locations come from the
// forward prediction refined by the correction model (or from `oracle` when
// given); features are re-extracted from the observation at those locations.
template <typename T>
Descriptors closed_loop_update(const Descriptors& prev, const PushAction& action,
                               const Raster& observed, const std::vector<Patch>& initial_patches,
                               ForwardModel<T>& fwd, CorrectionModel<T>& corr,
                               const std::vector<Vec2>* oracle = nullptr) {
  std::vector<Vec2> locs;
  if (oracle != nullptr) {
    locs = *oracle;
  } else {
    const Descriptors pred = fwd.predict_step(prev, action, observed.map);
    for (const auto& x : pred) locs.push_back(x.b);
    locs = corr.correct(initial_patches, observed, locs);
  }
  return fwd.describe(observed, locs);
}

}  // namespace pushplan

#endif  // PUSHPLAN_CORRECTION_HPP_
