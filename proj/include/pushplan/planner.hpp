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

#ifndef PUSHPLAN_PLANNER_HPP_
#define PUSHPLAN_PLANNER_HPP_

// Cross-entropy method over push sequences, scored by rolling a forward model
// to the horizon and measuring distance to the goal descriptors.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <span>
#include <thread>
#include <vector>

#include "pushplan/errors.hpp"
#include "pushplan/forward_model.hpp"
#include "pushplan/object_repr.hpp"
#include "pushplan/rng.hpp"
#include "pushplan/sim.hpp"

namespace pushplan {

struct CemConfig {
  int samples = 200;    // S
  int elites = 10;      // K
  int horizon = 5;      // H
  int iterations = 3;   // tau
  double lambda = 100.0;
  double max_push = 0.05;  // bound on the per-step displacement
  double sigma_start = 0.2;
  double sigma_disp = 0.03;
  double sigma_floor = 1e-4;
  // Samples are scored in fixed chunks; the partition never depends on the
  // thread count, so results are bit-identical serial or parallel.
  int chunk = 50;
  int threads = 1;
  bool record_samples = false;
};

using ActionSequence = std::vector<PushAction>;

// Summed squared location distance (normalized coordinates) plus lambda times
// squared feature distance, over objects matched by index.
inline double cost(const Descriptors& state, const Descriptors& goal, double lambda,
                   const PixelMap& map) {
  if (state.size() != goal.size()) {
    throw ShapeError("cost: state has " + std::to_string(state.size()) + " objects, goal has " +
                     std::to_string(goal.size()));
  }
  double c = 0.0;
  for (std::size_t n = 0; n < state.size(); ++n) {
    c += (map.normalize(state[n].b) - map.normalize(goal[n].b)).squared_norm();
    if (state[n].f.size() != goal[n].f.size()) throw ShapeError("cost: feature size mismatch");
    double fd = 0.0;
    for (std::size_t k = 0; k < state[n].f.size(); ++k) {
      const double d = static_cast<double>(state[n].f[k]) - goal[n].f[k];
      fd += d * d;
    }
    c += lambda * fd;
  }
  return c;
}

// Independent Gaussian over H steps x (start.x, start.y, disp.x, disp.y).
struct GaussianPolicy {
  int horizon = 0;
  std::vector<double> mean;
  std::vector<double> stddev;

  static GaussianPolicy initial(const CemConfig& cfg, const Vec2& start_center) {
    GaussianPolicy p;
    p.horizon = cfg.horizon;
    for (int h = 0; h < cfg.horizon; ++h) {
      p.mean.insert(p.mean.end(), {start_center.x, start_center.y, 0.0, 0.0});
      p.stddev.insert(p.stddev.end(),
                      {cfg.sigma_start, cfg.sigma_start, cfg.sigma_disp, cfg.sigma_disp});
    }
    return p;
  }

  // Warm start for the next control step: drop the executed step, repeat the
  // last one, reset the spread.
  GaussianPolicy shifted(const CemConfig& cfg) const {
    GaussianPolicy p = initial(cfg, {0.0, 0.0});
    for (int h = 0; h < horizon; ++h) {
      const int src = std::min(h + 1, horizon - 1);
      for (int k = 0; k < 4; ++k) p.mean[static_cast<std::size_t>(h * 4 + k)] = mean[static_cast<std::size_t>(src * 4 + k)];
    }
    return p;
  }
};

struct PlanResult {
  ActionSequence best;
  double best_cost = 0.0;
  std::vector<std::vector<double>> iteration_costs;  // [iteration][sample]
  std::vector<double> best_cost_history;             // best-ever after each iteration
  std::vector<std::vector<ActionSequence>> iteration_samples;  // when recorded
  GaussianPolicy policy;                             // after the last refit
};

// Scores sequences; may rewrite them in place (feasibility repair).
using SequenceEvaluator = std::function<void(std::span<ActionSequence>, std::span<double>)>;

// Start on the table; displacement norm capped at max_push; end on the table.
inline PushAction clip_sampled(const Vec2& start, const Vec2& disp, const Bounds& table,
                               double max_push) {
  return clip_push({start, start + disp}, table, max_push);
}

inline void evaluate_chunks(std::span<ActionSequence> seqs, std::span<double> costs,
                            const SequenceEvaluator& eval, int chunk, int threads) {
  const std::size_t n = seqs.size();
  const std::size_t step = static_cast<std::size_t>(std::max(1, chunk));
  const std::size_t n_chunks = (n + step - 1) / step;
  auto run = [&](std::size_t c) {
    const std::size_t b = c * step;
    const std::size_t e = std::min(n, b + step);
    eval(seqs.subspan(b, e - b), costs.subspan(b, e - b));
  };
  if (threads <= 1 || n_chunks <= 1) {
    for (std::size_t c = 0; c < n_chunks; ++c) run(c);
    return;
  }
  std::vector<std::thread> pool;
  const std::size_t t = std::min<std::size_t>(static_cast<std::size_t>(threads), n_chunks);
  for (std::size_t w = 0; w < t; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t c = w; c < n_chunks; c += t) run(c);
    });
  }
  for (auto& th : pool) th.join();
}

inline PlanResult cem_plan(GaussianPolicy policy, const CemConfig& cfg, const Bounds& table,
                           const SequenceEvaluator& eval, Rng& rng) {
  if (cfg.elites > cfg.samples || cfg.elites < 1 || cfg.horizon < 1 || cfg.iterations < 1) {
    throw UsageError("cem_plan: need 1 <= K <= S, H >= 1, tau >= 1");
  }
  PlanResult res;
  res.best_cost = std::numeric_limits<double>::infinity();
  const int H = cfg.horizon;
  for (int it = 0; it < cfg.iterations; ++it) {
    std::vector<ActionSequence> seqs(static_cast<std::size_t>(cfg.samples));
    for (auto& seq : seqs) {
      for (int h = 0; h < H; ++h) {
        double v[4];
        for (int k = 0; k < 4; ++k) {
          const std::size_t i = static_cast<std::size_t>(h * 4 + k);
          v[k] = normal(rng, 0.0, 1.0) * policy.stddev[i] + policy.mean[i];
        }
        seq.push_back(clip_sampled({v[0], v[1]}, {v[2], v[3]}, table, cfg.max_push));
      }
    }
    std::vector<double> costs(seqs.size(), 0.0);
    evaluate_chunks(seqs, costs, eval, cfg.chunk, cfg.threads);

    std::vector<std::size_t> order(seqs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return costs[a] < costs[b]; });
    if (costs[order[0]] < res.best_cost) {
      res.best_cost = costs[order[0]];
      res.best = seqs[order[0]];
    }
    // refit on the K elites
    for (int h = 0; h < H; ++h) {
      for (int k = 0; k < 4; ++k) {
        double sum = 0.0, sq = 0.0;
        for (int e = 0; e < cfg.elites; ++e) {
          const PushAction& a = seqs[order[static_cast<std::size_t>(e)]][static_cast<std::size_t>(h)];
          const double v = k == 0 ? a.start.x : k == 1 ? a.start.y : k == 2 ? a.delta().x : a.delta().y;
          sum += v;
          sq += v * v;
        }
        const double m = sum / cfg.elites;
        const double var = std::max(0.0, sq / cfg.elites - m * m);
        const std::size_t i = static_cast<std::size_t>(h * 4 + k);
        policy.mean[i] = m;
        policy.stddev[i] = std::max(std::sqrt(var), cfg.sigma_floor);
      }
    }
    res.best_cost_history.push_back(res.best_cost);
    res.iteration_costs.push_back(std::move(costs));
    if (cfg.record_samples) res.iteration_samples.push_back(std::move(seqs));
  }
  res.policy = policy;
  return res;
}

// Moves push starts that begin inside (dilated) objects onto the contact
// circle, then re-derives the end point.
inline PushAction repair_start(PushAction a, const std::vector<Vec2>& centers, double contact,
                               const Bounds& table, double max_push) {
  const Vec2 disp = a.delta();
  for (int pass = 0; pass < 2; ++pass) {
    for (const Vec2& c : centers) {
      const Vec2 d = a.start - c;
      const double dist = d.norm();
      if (dist < contact) {
        const Vec2 dir = dist > 0.0 ? d / dist : (disp.norm() > 0 ? disp / -disp.norm() : Vec2{-1, 0});
        a.start = c + dir * contact;
      }
    }
  }
  return clip_push({a.start, a.start + disp}, table, max_push);
}

struct LearnedEvaluatorConfig {
  double lambda = 100.0;
  double contact = 0.08;  // object radius + gripper radius, world units
  double max_push = 0.05;
};

// Batched rollouts of the forward model for every sequence in the span.
template <typename T>
SequenceEvaluator learned_evaluator(ForwardModel<T>& model, const Descriptors& current,
                                    const Descriptors& goal, const PixelMap& map,
                                    const Bounds& table, const LearnedEvaluatorConfig& ecfg) {
  if (current.size() != goal.size()) throw ShapeError("learned_evaluator: goal size mismatch");
  return [&model, current, goal, map, table, ecfg](std::span<ActionSequence> seqs,
                                                   std::span<double> costs) {
    const int n_seq = static_cast<int>(seqs.size());
    const int N = static_cast<int>(current.size());
    const int d = model.cfg.repr.feature_dim;
    if (N == 0) {
      std::fill(costs.begin(), costs.end(), 0.0);
      return;
    }
    const GraphLayout layout = GraphLayout::uniform(n_seq, N);
    Tensor<T> b(n_seq * N, 2), f(n_seq * N, d);
    for (int s = 0; s < n_seq; ++s) {
      for (int n = 0; n < N; ++n) {
        const Vec2 nb = map.normalize(current[static_cast<std::size_t>(n)].b);
        b(s * N + n, 0) = static_cast<T>(nb.x);
        b(s * N + n, 1) = static_cast<T>(nb.y);
        for (int k = 0; k < d; ++k) f(s * N + n, k) = static_cast<T>(current[static_cast<std::size_t>(n)].f[static_cast<std::size_t>(k)]);
      }
    }
    const int H = seqs.empty() ? 0 : static_cast<int>(seqs[0].size());
    for (int h = 0; h < H; ++h) {
      Tensor<T> act(n_seq, 4);
      for (int s = 0; s < n_seq; ++s) {
        std::vector<Vec2> centers;
        for (int n = 0; n < N; ++n) {
          centers.push_back(map.to_world(map.denormalize(
              {static_cast<double>(b(s * N + n, 0)), static_cast<double>(b(s * N + n, 1))})));
        }
        PushAction& a = seqs[static_cast<std::size_t>(s)][static_cast<std::size_t>(h)];
        a = repair_start(a, centers, ecfg.contact, table, ecfg.max_push);
        const auto na = normalized_action(a, map);
        for (int k = 0; k < 4; ++k) act(s, k) = static_cast<T>(na[static_cast<std::size_t>(k)]);
      }
      Tape<T> tape(false);
      const auto [b1, f1] = model.step(tape, tape.constant(std::move(b)), tape.constant(std::move(f)),
                                       tape.constant(std::move(act)), layout);
      b = tape.value(b1);
      f = tape.value(f1);
    }
    for (int s = 0; s < n_seq; ++s) {
      double c = 0.0;
      for (int n = 0; n < N; ++n) {
        const auto& g = goal[static_cast<std::size_t>(n)];
        const Vec2 gb = map.normalize(g.b);
        const double dx = static_cast<double>(b(s * N + n, 0)) - gb.x;
        const double dy = static_cast<double>(b(s * N + n, 1)) - gb.y;
        double fd = 0.0;
        for (int k = 0; k < d; ++k) {
          const double df = static_cast<double>(f(s * N + n, k)) - g.f[static_cast<std::size_t>(k)];
          fd += df * df;
        }
        c += dx * dx + dy * dy + ecfg.lambda * fd;
      }
      costs[static_cast<std::size_t>(s)] = c;
    }
  };
}

struct AnalyticStep {
  PushAction action;
  std::vector<Vec2> predicted;  // world coordinates
  int object = -1;
};

// Greedy baseline: push the object farthest from its goal straight toward it
// by min(max_push, remaining distance), starting from the contact point
// behind it. Assumes the object moves exactly with the gripper.
inline AnalyticStep analytic_step(const std::vector<Vec2>& current, const std::vector<Vec2>& goal,
                                  double contact, double max_push, const Bounds& table) {
  if (current.size() != goal.size()) throw ShapeError("analytic_step: goal size mismatch");
  AnalyticStep out;
  out.predicted = current;
  if (current.empty()) return out;
  std::size_t far = 0;
  for (std::size_t n = 1; n < current.size(); ++n) {
    if (distance(current[n], goal[n]) > distance(current[far], goal[far])) far = n;
  }
  out.object = static_cast<int>(far);
  const Vec2 to_goal = goal[far] - current[far];
  const double remaining = to_goal.norm();
  if (remaining == 0.0) {
    // no-op: park the gripper on the contact circle, on the table side
    const Vec2 c = current[far];
    const Vec2 side{c.x < (table.lo.x + table.hi.x) / 2 ? 1.0 : -1.0, 0.0};
    const Vec2 p = table.clamp(c + side * contact);
    out.action = {p, p};
    return out;
  }
  const Vec2 dir = to_goal / remaining;
  const double len = std::min(max_push, remaining);
  const Vec2 start = table.clamp(current[far] - dir * contact);
  out.action = clip_push({start, start + dir * len}, table, max_push);
  out.predicted[far] = current[far] + out.action.delta();
  return out;
}

}  // namespace pushplan

#endif  // PUSHPLAN_PLANNER_HPP_
