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

#ifndef PUSHPLAN_GRADIENT_SUITES_HPP_
#define PUSHPLAN_GRADIENT_SUITES_HPP_

// Finite-difference checks of every trainable network, run in double.

#include <string>
#include <vector>

#include "pushplan/correction.hpp"
#include "pushplan/dataset.hpp"
#include "pushplan/forward_model.hpp"
#include "pushplan/gradcheck.hpp"
#include "pushplan/object_repr.hpp"

namespace pushplan {

struct GradientSuiteResult {
  std::string suite;
  std::uint64_t seed = 0;
  GradCheckResult check;
  std::string worst_param;
};

struct GradientSuiteConfig {
  double eps = 1e-6;
  int probes = 60;
  double tolerance = 1e-3;
};

namespace suites_detail {

// Moves every parameter off its initializer so zero-initialized heads and
// biases carry gradient to the layers below.
template <typename T>
void jitter_parameters(ParameterSet<T>& ps, Rng& rng, double amount) {
  for (auto& p : ps) {
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      p.value[k] += static_cast<T>(uniform(rng, -amount, amount));
    }
  }
}

template <typename T>
Tensor<T> random_tensor(int rows, int cols, Rng& rng, double lo, double hi) {
  Tensor<T> t(rows, cols);
  for (std::size_t k = 0; k < t.size(); ++k) t[k] = static_cast<T>(uniform(rng, lo, hi));
  return t;
}

inline GradientSuiteResult finish(const std::string& suite, std::uint64_t seed,
                                  const GradCheckResult& r, const ParameterSet<double>& ps) {
  return {suite, seed, r, r.param >= 0 ? ps[r.param].name : std::string()};
}

inline std::vector<PushSample> synthetic_samples(std::uint64_t seed, int count) {
  DataConfig data;
  data.episode_length = count;
  SimConfig sim;
  return collect_episode(0, 2, seed, data, sim);
}

}  // namespace suites_detail

inline GradientSuiteResult check_encoder(std::uint64_t seed, const GradientSuiteConfig& gc = {}) {
  using namespace suites_detail;
  Rng rng = make_rng(seed, {0x656e63});
  ReprConfig rc;
  ParameterSet<double> ps;
  const Encoder enc = Encoder::create(ps, rc, rng);
  jitter_parameters(ps, rng, 0.05);
  const Tensor<double> x = random_tensor<double>(4, rc.window * rc.window * 3, rng, 0.0, 1.0);
  const Tensor<double> target = random_tensor<double>(4, rc.feature_dim, rng, -1.0, 1.0);
  LossFn<double> fn = [&](Tape<double>& tape) {
    return ad::mse(tape, enc(tape, ps, tape.constant(x)), tape.constant(target));
  };
  return finish("encoder", seed, gradient_check(ps, fn, gc.eps, gc.probes, seed), ps);
}

// Decoder followed by the compositing renderer, with patches that hang over
// the canvas edge and overlap each other.
inline GradientSuiteResult check_decoder(std::uint64_t seed, const GradientSuiteConfig& gc = {}) {
  using namespace suites_detail;
  Rng rng = make_rng(seed, {0x646563});
  ReprConfig rc;
  const int g = 24;
  ParameterSet<double> ps;
  const Decoder dec = Decoder::create(ps, rc, rng);
  jitter_parameters(ps, rng, 0.05);
  const Tensor<double> f = random_tensor<double>(3, rc.feature_dim, rng, -1.0, 1.0);
  const std::vector<Placement> where{place(0, {3.0, 5.0}, rc.window),
                                     place(0, {9.0, 12.0}, rc.window),
                                     place(1, {20.0, 18.0}, rc.window)};
  const Tensor<double> target = random_tensor<double>(2, g * g * 3, rng, 0.0, 1.0);
  LossFn<double> fn = [&](Tape<double>& tape) {
    const Var rgba = dec(tape, ps, tape.constant(f));
    return ad::mse(tape, ad::composite(tape, rgba, where, 2, g, rc.window), tape.constant(target));
  };
  return finish("decoder", seed, gradient_check(ps, fn, gc.eps, gc.probes, seed), ps);
}

// Full training objective through encoder, message passing and decoder;
// probes are restricted to the dynamics parameters.
inline GradientSuiteResult check_dynamics(bool interaction, std::uint64_t seed,
                                          const GradientSuiteConfig& gc = {}) {
  using namespace suites_detail;
  ForwardConfig fc;
  fc.interaction = interaction;
  fc.seed = seed;
  ForwardModel<double> m = ForwardModel<double>::create(fc);
  Rng rng = make_rng(seed, {0x64796e});
  jitter_parameters(m.params, rng, 0.05);
  const auto samples = synthetic_samples(seed, 3);
  std::vector<const PushSample*> ptrs;
  for (const auto& s : samples) ptrs.push_back(&s);
  const PixelMap map = PixelMap::for_table(Bounds{}, 64);
  const LossBatch<double> lb = make_loss_batch<double>(ptrs, map, fc.repr.window);
  LossFn<double> fn = [&](Tape<double>& tape) { return forward_losses(tape, m, lb).total; };
  return finish(interaction ? "interaction" : "no-interaction", seed,
                gradient_check(m.params, fn, gc.eps, gc.probes, seed, "dynamics."), m.params);
}

inline GradientSuiteResult check_correction(std::uint64_t seed, const GradientSuiteConfig& gc = {}) {
  using namespace suites_detail;
  CorrectionConfig cc;
  cc.seed = seed;
  CorrectionModel<double> m = CorrectionModel<double>::create(cc);
  Rng rng = make_rng(seed, {0x636f72});
  jitter_parameters(m.params, rng, 0.05);
  Dataset d;
  d.header.raster_size = 64;
  d.samples = synthetic_samples(seed, 3);
  const auto ex = jittered_examples(d, cc.jitter, rng);
  const auto [in, target] =
      correction_batch<double>(ex, episode_first_frames(d), d.pixel_map(), cc.window);
  LossFn<double> fn = [&](Tape<double>& tape) {
    return ad::mse(tape, m(tape, tape.constant(in)), tape.constant(target));
  };
  return finish("correction", seed, gradient_check(m.params, fn, gc.eps, gc.probes, seed), m.params);
}

inline std::vector<GradientSuiteResult> run_gradient_suites(const std::vector<std::uint64_t>& seeds,
                                                            const GradientSuiteConfig& gc = {}) {
  std::vector<GradientSuiteResult> out;
  for (std::uint64_t s : seeds) {
    out.push_back(check_encoder(s, gc));
    out.push_back(check_decoder(s, gc));
    out.push_back(check_dynamics(true, s, gc));
    out.push_back(check_dynamics(false, s, gc));
    out.push_back(check_correction(s, gc));
  }
  return out;
}

}  // namespace pushplan

#endif  // PUSHPLAN_GRADIENT_SUITES_HPP_
