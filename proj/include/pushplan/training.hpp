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

#ifndef PUSHPLAN_TRAINING_HPP_
#define PUSHPLAN_TRAINING_HPP_

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>
#include <vector>

#include "pushplan/dataset.hpp"
#include "pushplan/errors.hpp"
#include "pushplan/forward_model.hpp"
#include "pushplan/nn.hpp"

namespace pushplan {

struct TrainConfig {
  double lr = 1e-3;
  double lr_decay = 1.0;  // multiplied into lr after every epoch
  int batch_size = 32;
  int epochs = 8;
  LossWeights weights;
  std::uint64_t seed = 1;
};

struct EpochLog {
  int epoch = 0;  // 0 is the untrained model
  double train_loss = 0.0;
  double val_loss = 0.0;
  LossTerms val_terms;
};

struct ForwardTrainResult {
  ForwardModel<float> model;  // best validation epoch
  std::vector<EpochLog> log;
  int best_epoch = 0;
};

inline std::vector<const PushSample*> batch_pointers(const Dataset& d, const std::vector<std::size_t>& order,
                                              std::size_t begin, std::size_t end) {
  std::vector<const PushSample*> out;
  for (std::size_t i = begin; i < end; ++i) out.push_back(&d.samples[order[i]]);
  return out;
}

// Mean loss terms over a dataset, weighted per record.
inline std::pair<double, LossTerms> evaluate_forward(ForwardModel<float>& m, const Dataset& d,
                                                     const LossWeights& w, int batch = 64) {
  std::vector<std::size_t> order(d.samples.size());
  std::iota(order.begin(), order.end(), 0);
  double total = 0.0;
  LossTerms sum;
  for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(batch)) {
    const std::size_t e = std::min(order.size(), b + static_cast<std::size_t>(batch));
    const auto ptrs = batch_pointers(d, order, b, e);
    const auto lb = make_loss_batch<float>(ptrs, d.pixel_map(), m.cfg.repr.window);
    Tape<float> tape(false);
    const LossVars v = forward_losses(tape, m, lb, w);
    const double n = static_cast<double>(e - b);
    total += n * tape.value(v.total)[0];
    sum.recon += n * tape.value(v.recon)[0];
    sum.pred_pixel += n * tape.value(v.pred_pixel)[0];
    sum.pred_location += n * tape.value(v.pred_location)[0];
    sum.pred_feature += n * tape.value(v.pred_feature)[0];
  }
  const double n = std::max<double>(1.0, static_cast<double>(order.size()));
  sum.recon /= n;
  sum.pred_pixel /= n;
  sum.pred_location /= n;
  sum.pred_feature /= n;
  return {total / n, sum};
}

// Adam on mean(L_recon + L_pred) over shuffled minibatches; keeps the
// parameters of the best validation epoch.
inline ForwardTrainResult train_forward(const Dataset& train, const Dataset& val,
                                        const ForwardConfig& model_cfg, const TrainConfig& cfg,
                                        std::ostream* progress = nullptr) {
  if (train.samples.empty()) throw DataError("train_forward: empty training set");
  ForwardModel<float> model = ForwardModel<float>::create(model_cfg);
  AdamState<float> adam;
  AdamConfig adam_cfg;
  adam_cfg.lr = cfg.lr;
  ForwardTrainResult res{model, {}, 0};
  const Dataset& vset = val.samples.empty() ? train : val;

  auto [v0, t0] = evaluate_forward(model, vset, cfg.weights);
  res.log.push_back({0, v0, v0, t0});
  double best = v0;
  if (progress) *progress << "epoch 0 val " << v0 << "\n";

  std::vector<std::size_t> order(train.samples.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_rng(cfg.seed, {0x74726e66});
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double train_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t b = 0, batch_index = 0; b < order.size(); b += bs, ++batch_index) {
      const std::size_t e = std::min(order.size(), b + bs);
      const auto lb = make_loss_batch<float>(batch_pointers(train, order, b, e),
                                             train.pixel_map(), model_cfg.repr.window);
      model.params.zero_grad();
      Tape<float> tape;
      const LossVars v = forward_losses(tape, model, lb, cfg.weights);
      const double loss = tape.value(v.total)[0];
      if (!std::isfinite(loss)) {
        std::ostringstream msg;
        msg << "non-finite forward loss at epoch " << epoch << " batch " << batch_index
            << ": recon=" << tape.value(v.recon)[0] << " pred_pixel=" << tape.value(v.pred_pixel)[0]
            << " pred_location=" << tape.value(v.pred_location)[0]
            << " pred_feature=" << tape.value(v.pred_feature)[0];
        throw NumericalError(msg.str());
      }
      tape.backward(v.total);
      adam_step(model.params, adam, adam_cfg);
      train_sum += loss * static_cast<double>(e - b);
      seen += e - b;
    }
    if (!model.params.all_finite()) {
      throw NumericalError("non-finite parameters after epoch " + std::to_string(epoch));
    }
    auto [vl, vt] = evaluate_forward(model, vset, cfg.weights);
    res.log.push_back({epoch, train_sum / static_cast<double>(seen), vl, vt});
    if (progress) {
      *progress << "epoch " << epoch << " train " << train_sum / static_cast<double>(seen)
                << " val " << vl << " (recon " << vt.recon << ", pixel " << vt.pred_pixel
                << ", location " << vt.pred_location << ", feature " << vt.pred_feature << ")\n";
      progress->flush();
    }
    if (vl < best) {
      best = vl;
      res.best_epoch = epoch;
      res.model = model;
    }
    adam_cfg.lr *= cfg.lr_decay;
  }
  return res;
}

}  // namespace pushplan

#endif  // PUSHPLAN_TRAINING_HPP_
