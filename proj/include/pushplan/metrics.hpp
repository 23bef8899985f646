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

#ifndef PUSHPLAN_METRICS_HPP_
#define PUSHPLAN_METRICS_HPP_

// Evaluation: prediction and tracking errors on held-out episodes, batched
// MPC runs, CSV emission.

#include <algorithm>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "pushplan/correction.hpp"
#include "pushplan/dataset.hpp"
#include "pushplan/forward_model.hpp"
#include "pushplan/mpc.hpp"

namespace pushplan {

using EpisodeSamples = std::vector<const PushSample*>;

// Samples grouped by episode, ordered by step.
inline std::vector<EpisodeSamples> group_episodes(const Dataset& d) {
  std::map<int, EpisodeSamples> by_id;
  for (const PushSample& s : d.samples) by_id[s.episode_id].push_back(&s);
  std::vector<EpisodeSamples> out;
  for (auto& [id, ss] : by_id) {
    std::sort(ss.begin(), ss.end(),
              [](const PushSample* a, const PushSample* b) { return a->step_id < b->step_id; });
    out.push_back(std::move(ss));
  }
  return out;
}

struct OneStepStats {
  double model_mse = 0.0;        // squared pixels, per object
  double persistence_mse = 0.0;  // predicting "nothing moves"
  long count = 0;
};

// One-step location error on pushes where the gripper touched an object.
inline OneStepStats one_step_contact(ForwardModel<float>& m, const Dataset& d, const SimConfig& sim) {
  OneStepStats st;
  const PixelMap map = d.pixel_map();
  for (const PushSample& s : d.samples) {
    if (!step_push_traced(s.before, s.action, sim).contact) continue;
    const Descriptors xs = m.describe(render(s.before, map), s.locs_before);
    const Descriptors ys = m.predict_step(xs, s.action, map);
    for (std::size_t i = 0; i < ys.size(); ++i) {
      st.model_mse += (ys[i].b - s.locs_after[i]).squared_norm();
      st.persistence_mse += (s.locs_before[i] - s.locs_after[i]).squared_norm();
      ++st.count;
    }
  }
  if (st.count > 0) {
    st.model_mse /= static_cast<double>(st.count);
    st.persistence_mse /= static_cast<double>(st.count);
  }
  return st;
}

// Mean world-space location error after h unrolled steps without any
// observation, for each h in `horizons`. Rollouts start every `stride` steps.
inline std::vector<double> open_loop_errors(ForwardModel<float>& m,
                                            const std::vector<EpisodeSamples>& episodes,
                                            const PixelMap& map, const std::vector<int>& horizons,
                                            int stride = 10) {
  const int hmax = horizons.empty() ? 0 : *std::max_element(horizons.begin(), horizons.end());
  std::vector<double> sum(horizons.size(), 0.0);
  std::vector<long> n(horizons.size(), 0);
  for (const auto& ep : episodes) {
    for (int t0 = 0; t0 + hmax <= static_cast<int>(ep.size()); t0 += stride) {
      const PushSample& s0 = *ep[static_cast<std::size_t>(t0)];
      Descriptors xs = m.describe(render(s0.before, map), s0.locs_before);
      for (int h = 1; h <= hmax; ++h) {
        const PushSample& s = *ep[static_cast<std::size_t>(t0 + h - 1)];
        xs = m.predict_step(xs, s.action, map);
        for (std::size_t k = 0; k < horizons.size(); ++k) {
          if (horizons[k] != h) continue;
          for (std::size_t i = 0; i < xs.size(); ++i) {
            sum[k] += distance(xs[i].b, s.locs_after[i]) / map.pixels_per_unit;
            ++n[k];
          }
        }
      }
    }
  }
  for (std::size_t k = 0; k < sum.size(); ++k) sum[k] = n[k] ? sum[k] / static_cast<double>(n[k]) : 0.0;
  return sum;
}

// Mean world-space location error over the first `steps` pushes of each
// episode, tracking from the initial frame with the given correction model
// (all-zero for the open-loop variant).
inline double tracking_error(ForwardModel<float>& m, CorrectionModel<float>& corr,
                             const std::vector<EpisodeSamples>& episodes, const PixelMap& map,
                             int steps) {
  double sum = 0.0;
  long n = 0;
  const int window = m.cfg.repr.window;
  for (const auto& ep : episodes) {
    if (ep.empty()) continue;
    const PushSample& s0 = *ep.front();
    const Raster first = render(s0.before, map);
    std::vector<Patch> initial;
    for (const Vec2& b : s0.locs_before) initial.push_back(crop(first, b, window));
    Descriptors xs = m.describe(first, s0.locs_before);
    const int len = std::min(steps, static_cast<int>(ep.size()));
    for (int t = 0; t < len; ++t) {
      const PushSample& s = *ep[static_cast<std::size_t>(t)];
      xs = closed_loop_update(xs, s.action, render(s.after, map), initial, m, corr);
      for (std::size_t i = 0; i < xs.size(); ++i) {
        sum += distance(xs[i].b, s.locs_after[i]) / map.pixels_per_unit;
        ++n;
      }
    }
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

// Runs one episode per seed; episodes fan out over `threads` workers and
// land in seed order.
inline std::vector<Episode> run_episodes(SceneKind kind, Mode mode, Models& models,
                                         const MpcConfig& mpc, const SceneConfig& scene,
                                         const SimConfig& sim, int raster_size,
                                         const std::vector<std::uint64_t>& seeds, int threads) {
  std::vector<Episode> out(seeds.size());
  auto run = [&](std::size_t i) {
    const Scenario sc = make_scene(kind, seeds[i], scene, sim);
    out[i] = mpc_episode(sc, mode, models, mpc, sim, raster_size, seeds[i]);
  };
  if (threads <= 1) {
    for (std::size_t i = 0; i < seeds.size(); ++i) run(i);
    return out;
  }
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::mutex mu;
  const std::size_t t = std::min<std::size_t>(static_cast<std::size_t>(threads), seeds.size());
  for (std::size_t w = 0; w < t; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < seeds.size(); i += t) {
        try {
          run(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

inline std::vector<std::uint64_t> seed_range(std::uint64_t first, int count) {
  std::vector<std::uint64_t> s;
  for (int i = 0; i < count; ++i) s.push_back(first + static_cast<std::uint64_t>(i));
  return s;
}

inline void write_distance_header(std::ostream& out) {
  out << "episode,step,object,distance,mode,seed\n";
}

inline void write_distance_rows(std::ostream& out, const std::vector<Episode>& eps,
                                const std::string& mode) {
  out.precision(17);
  for (std::size_t e = 0; e < eps.size(); ++e) {
    const Episode& ep = eps[e];
    for (std::size_t t = 0; t <= ep.steps.size(); ++t) {
      const auto& d = t == 0 ? ep.initial_distance : ep.steps[t - 1].distance;
      for (std::size_t n = 0; n < d.size(); ++n) {
        out << e << "," << t << "," << n << "," << d[n] << "," << mode << "," << ep.seed << "\n";
      }
    }
  }
}

inline void write_curve_header(std::ostream& out) { out << "mode,step,mean_distance,episodes\n"; }

inline void write_curve_rows(std::ostream& out, const std::vector<Episode>& eps,
                             const std::string& mode) {
  out.precision(17);
  const auto c = mean_curve(eps);
  for (std::size_t t = 0; t < c.size(); ++t) {
    out << mode << "," << t << "," << c[t] << "," << eps.size() << "\n";
  }
}

}  // namespace pushplan

#endif  // PUSHPLAN_METRICS_HPP_
