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

#ifndef PUSHPLAN_MPC_HPP_
#define PUSHPLAN_MPC_HPP_

// Receding-horizon control: plan, execute the first push, observe, update the
// object descriptors, repeat.

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pushplan/correction.hpp"
#include "pushplan/errors.hpp"
#include "pushplan/forward_model.hpp"
#include "pushplan/planner.hpp"
#include "pushplan/raster.hpp"
#include "pushplan/rng.hpp"
#include "pushplan/sim.hpp"

namespace pushplan {

enum class Mode {
  kFull,           // interaction model + correction
  kNoInteraction,  // object edges dropped, + correction
  kNoCorrection,   // interaction model, open-loop location tracking
  kOracle,         // analytic planner on simulator locations (ceiling)
  kAnalytic,       // analytic planner, open-loop location tracking
};

inline std::string mode_name(Mode m) {
  switch (m) {
    case Mode::kFull: return "full";
    case Mode::kNoInteraction: return "no-interaction";
    case Mode::kNoCorrection: return "no-correction";
    case Mode::kOracle: return "oracle";
    case Mode::kAnalytic: return "analytic";
  }
  return "?";
}

inline Mode parse_mode(const std::string& s) {
  for (Mode m : {Mode::kFull, Mode::kNoInteraction, Mode::kNoCorrection, Mode::kOracle,
                 Mode::kAnalytic}) {
    if (mode_name(m) == s) return m;
  }
  throw UsageError("unknown mode '" + s +
                   "' (expected full, no-interaction, no-correction, oracle, analytic)");
}

inline bool is_analytic(Mode m) { return m == Mode::kOracle || m == Mode::kAnalytic; }

enum class SceneKind { kFree1, kFree2, kHard };

inline std::string scene_name(SceneKind k) {
  switch (k) {
    case SceneKind::kFree1: return "free-1obj";
    case SceneKind::kFree2: return "free-2obj";
    case SceneKind::kHard: return "hard";
  }
  return "?";
}

inline SceneKind parse_scene(const std::string& s) {
  for (SceneKind k : {SceneKind::kFree1, SceneKind::kFree2, SceneKind::kHard}) {
    if (scene_name(k) == s) return k;
  }
  throw UsageError("unknown scene '" + s + "' (expected free-1obj, free-2obj, hard)");
}

struct SceneConfig {
  double distance = 0.75;  // initial object-to-goal distance, 15 pushes
  double margin = 0.1;     // keep centers this far from the table edge
  double blocker_lo = 0.4;  // blocker position along the goal segment
  double blocker_hi = 0.6;
  int max_tries = 10000;
};

struct Scenario {
  SceneKind kind = SceneKind::kFree1;
  WorldState start;
  WorldState goal;
};

inline std::vector<Vec2> centers(const WorldState& w) {
  std::vector<Vec2> out;
  for (const Object& o : w.objects) out.push_back(o.center);
  return out;
}

inline std::vector<double> goal_distances(const WorldState& w, const WorldState& goal) {
  std::vector<double> out;
  for (std::size_t n = 0; n < w.objects.size(); ++n) {
    out.push_back(distance(w.objects[n].center, goal.objects[n].center));
  }
  return out;
}

inline Scenario make_scene(SceneKind kind, std::uint64_t seed, const SceneConfig& sc,
                           const SimConfig& sim) {
  Rng rng = make_rng(seed, {0x5ce7e, static_cast<std::uint64_t>(kind)});
  const Bounds box = sim.table.shrunk(sc.margin);
  const double r = sim.object_radius;
  auto draw_pair = [&](Vec2& p, Vec2& q) {
    for (int t = 0; t < sc.max_tries; ++t) {
      p = {uniform(rng, box.lo.x, box.hi.x), uniform(rng, box.lo.y, box.hi.y)};
      const double th = uniform(rng, 0.0, 2.0 * M_PI);
      q = p + Vec2{std::cos(th), std::sin(th)} * sc.distance;
      if (box.contains(q)) return;
    }
    throw PlacementError("could not place a start/goal pair at distance " +
                         std::to_string(sc.distance));
  };
  Scenario s;
  s.kind = kind;
  s.start.table = s.goal.table = sim.table;
  const int n = kind == SceneKind::kFree1 ? 1 : 2;
  for (int t = 0; t < sc.max_tries; ++t) {
    s.start.objects.clear();
    s.goal.objects.clear();
    Vec2 p, q;
    draw_pair(p, q);
    s.start.objects.push_back({p, r, 0});
    s.goal.objects.push_back({q, r, 0});
    if (n == 1) return s;
    Vec2 p2, q2;
    if (kind == SceneKind::kHard) {
      p2 = p + (q - p) * uniform(rng, sc.blocker_lo, sc.blocker_hi);
      q2 = p2;
    } else {
      draw_pair(p2, q2);
    }
    s.start.objects.push_back({p2, r, 1});
    s.goal.objects.push_back({q2, r, 1});
    if (distance(p, p2) >= 2 * r + 0.02 && distance(q, q2) >= 2 * r + 0.02) return s;
  }
  throw PlacementError("could not place scene " + scene_name(kind));
}

struct MpcConfig {
  CemConfig cem;
  int steps = 60;              // T_max
  bool warm_start = true;
  bool oracle_locations = false;  // learned modes: track with simulator locations
  bool keep_plans = false;
};

struct Models {
  ForwardModel<float>* full = nullptr;
  ForwardModel<float>* no_interaction = nullptr;
  CorrectionModel<float>* correction = nullptr;
};

struct StepLog {
  int step = 0;
  PushAction action;
  std::vector<Vec2> truth;     // world
  std::vector<Vec2> estimate;  // world
  std::vector<double> distance;
  double plan_cost = 0.0;
};

struct Episode {
  Scenario scene;
  Mode mode = Mode::kFull;
  std::uint64_t seed = 0;
  std::vector<double> initial_distance;
  std::vector<StepLog> steps;
  std::vector<PlanResult> plans;

  double mean_distance(std::size_t step) const {
    const auto& d = step == 0 ? initial_distance : steps[step - 1].distance;
    double s = 0.0;
    for (double v : d) s += v;
    return d.empty() ? 0.0 : s / static_cast<double>(d.size());
  }
  double final_mean_distance() const { return mean_distance(steps.size()); }
};

// Called after every executed push with the observed raster.
using StepObserver = std::function<void(const StepLog&, const Raster& observed)>;

inline Vec2 mean_point(const std::vector<Vec2>& ps) {
  Vec2 m{0.0, 0.0};
  for (const Vec2& p : ps) m = m + p;
  return ps.empty() ? Vec2{0.5, 0.5} : m / static_cast<double>(ps.size());
}

inline Episode mpc_episode(const Scenario& scene, Mode mode, Models& models,
                           const MpcConfig& cfg, const SimConfig& sim, int raster_size,
                           std::uint64_t seed, const StepObserver& observer = {}) {
  Episode ep;
  ep.scene = scene;
  ep.mode = mode;
  ep.seed = seed;
  const PixelMap map = PixelMap::for_table(sim.table, raster_size);
  const double contact = sim.object_radius + sim.gripper_radius;
  WorldState world = scene.start;
  ep.initial_distance = goal_distances(world, scene.goal);
  Rng rng = make_rng(seed, {0xc0de});

  if (is_analytic(mode)) {
    const std::vector<Vec2> goal = centers(scene.goal);
    std::vector<Vec2> est = centers(world);
    for (int t = 1; t <= cfg.steps; ++t) {
      const AnalyticStep st = analytic_step(est, goal, contact, sim.max_push, sim.table);
      world = step_push(world, st.action, sim);
      est = (mode == Mode::kOracle || cfg.oracle_locations) ? centers(world) : st.predicted;
      StepLog log{t, st.action, centers(world), est, goal_distances(world, scene.goal), 0.0};
      if (observer) observer(log, render(world, map));
      ep.steps.push_back(std::move(log));
    }
    return ep;
  }

  ForwardModel<float>* fwd = mode == Mode::kNoInteraction ? models.no_interaction : models.full;
  if (fwd == nullptr) throw UsageError("mode " + mode_name(mode) + " needs a forward model");
  CorrectionModel<float> disabled = CorrectionModel<float>::disabled(CorrectionConfig{});
  CorrectionModel<float>* corr = &disabled;
  if (mode != Mode::kNoCorrection && !cfg.oracle_locations) {
    if (models.correction == nullptr) throw UsageError("mode " + mode_name(mode) + " needs a correction model");
    corr = models.correction;
  }
  const int window = fwd->cfg.repr.window;

  const Raster first = render(world, map);
  const std::vector<Vec2> first_locs = object_locations(world, map);
  std::vector<Patch> initial_patches;
  for (const Vec2& b : first_locs) initial_patches.push_back(crop(first, b, window));
  Descriptors xs = fwd->describe(first, first_locs);
  const Descriptors goal = fwd->describe(render(scene.goal, map), object_locations(scene.goal, map));

  LearnedEvaluatorConfig ecfg{cfg.cem.lambda, contact, cfg.cem.max_push};
  std::optional<GaussianPolicy> warm;
  for (int t = 1; t <= cfg.steps; ++t) {
    std::vector<Vec2> est_world;
    for (const auto& x : xs) est_world.push_back(map.to_world(x.b));
    GaussianPolicy init = warm && cfg.warm_start ? warm->shifted(cfg.cem)
                                                 : GaussianPolicy::initial(cfg.cem, mean_point(est_world));
    PlanResult plan = cem_plan(init, cfg.cem, sim.table,
                               learned_evaluator(*fwd, xs, goal, map, sim.table, ecfg), rng);
    const PushAction action = plan.best.front();
    warm = plan.policy;
    world = step_push(world, action, sim);
    const Raster observed = render(world, map);
    const bool oracle = cfg.oracle_locations;
    const std::vector<Vec2> truth_px = object_locations(world, map);
    xs = closed_loop_update(xs, action, observed, initial_patches, *fwd, *corr,
                            oracle ? &truth_px : nullptr);
    StepLog log;
    log.step = t;
    log.action = action;
    log.truth = centers(world);
    for (const auto& x : xs) log.estimate.push_back(map.to_world(x.b));
    log.distance = goal_distances(world, scene.goal);
    log.plan_cost = plan.best_cost;
    if (observer) observer(log, observed);
    ep.steps.push_back(std::move(log));
    if (cfg.keep_plans) ep.plans.push_back(std::move(plan));
  }
  return ep;
}

// Least-squares slope of y against 0..n-1.
inline double trend_slope(const std::vector<double>& y) {
  const double n = static_cast<double>(y.size());
  if (y.size() < 2) return 0.0;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double x = static_cast<double>(i);
    sx += x;
    sy += y[i];
    sxx += x * x;
    sxy += x * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// Mean-over-episodes of the per-step mean object distance, steps 0..T.
inline std::vector<double> mean_curve(const std::vector<Episode>& eps) {
  if (eps.empty()) return {};
  std::vector<double> c(eps.front().steps.size() + 1, 0.0);
  for (const Episode& e : eps) {
    for (std::size_t t = 0; t < c.size(); ++t) c[t] += e.mean_distance(t);
  }
  for (double& v : c) v /= static_cast<double>(eps.size());
  return c;
}

}  // namespace pushplan

#endif  // PUSHPLAN_MPC_HPP_
