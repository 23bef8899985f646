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

#ifndef PUSHPLAN_SIM_HPP_
#define PUSHPLAN_SIM_HPP_

// Quasi-static 2D pushing world: disc objects on a rectangular table, swept
// by a disc gripper along straight-line pushes.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "pushplan/errors.hpp"
#include "pushplan/rng.hpp"

namespace pushplan {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  Vec2 operator/(double s) const { return {x / s, y / s}; }
  Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
  Vec2& operator-=(const Vec2& o) { x -= o.x; y -= o.y; return *this; }
  bool operator==(const Vec2&) const = default;

  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double norm() const { return std::hypot(x, y); }
  double squared_norm() const { return x * x + y * y; }
};

inline double distance(const Vec2& a, const Vec2& b) { return (a - b).norm(); }

struct Bounds {
  Vec2 lo{0.0, 0.0};
  Vec2 hi{1.0, 1.0};

  bool contains(const Vec2& p) const {
    return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y;
  }
  Bounds shrunk(double margin) const {
    return {{lo.x + margin, lo.y + margin}, {hi.x - margin, hi.y - margin}};
  }
  Vec2 clamp(const Vec2& p) const {
    return {std::clamp(p.x, lo.x, hi.x), std::clamp(p.y, lo.y, hi.y)};
  }
  double width() const { return hi.x - lo.x; }
  double height() const { return hi.y - lo.y; }
  bool operator==(const Bounds&) const = default;
};

struct Object {
  Vec2 center;
  double radius = 0.06;
  int color_index = 0;
  bool operator==(const Object&) const = default;
};

// Ground-truth simulator state. Values are immutable in spirit: every
// operation returns a new state.
struct WorldState {
  std::vector<Object> objects;
  Bounds table;

  std::size_t n_objects() const { return objects.size(); }
  bool operator==(const WorldState&) const = default;
};

struct PushAction {
  Vec2 start;
  Vec2 end;

  Vec2 delta() const { return end - start; }
  double length() const { return delta().norm(); }
  bool operator==(const PushAction&) const = default;
};

struct SimConfig {
  Bounds table;
  double object_radius = 0.06;
  double gripper_radius = 0.02;
  double max_push = 0.05;  // L_max
  int substeps = 20;
  int overlap_iterations = 10;
  int max_placement_tries = 1000;
  // random push sampler
  double mid_noise = 0.03;
  double ring_inner = 0.05;  // half-sizes of the square ring around the mid-point
  double ring_outer = 0.12;
  int max_start_tries = 100;
};

inline constexpr double kOverlapEpsilon = 1e-9;

// Returns a description of the first violated WorldState invariant, if any.
inline std::optional<std::string> check_invariants(const WorldState& w,
                                                   double eps = kOverlapEpsilon) {
  for (std::size_t i = 0; i < w.objects.size(); ++i) {
    const Object& o = w.objects[i];
    if (!w.table.shrunk(o.radius - eps).contains(o.center)) {
      return "object " + std::to_string(i) + " outside table";
    }
    for (std::size_t j = i + 1; j < w.objects.size(); ++j) {
      const Object& p = w.objects[j];
      if (distance(o.center, p.center) < o.radius + p.radius - eps) {
        return "objects " + std::to_string(i) + "," + std::to_string(j) + " overlap";
      }
      if (o.color_index == p.color_index) {
        return "objects " + std::to_string(i) + "," + std::to_string(j) +
               " share a color";
      }
    }
  }
  return std::nullopt;
}

inline WorldState sample_scene(Rng& rng, int n_objects, const SimConfig& cfg) {
  WorldState w;
  w.table = cfg.table;
  const Bounds inner = cfg.table.shrunk(cfg.object_radius);
  if (n_objects == 0) return w;
  if (inner.width() < 0 || inner.height() < 0) {
    throw PlacementError("object radius too large for table");
  }
  for (int attempt = 0; attempt < cfg.max_placement_tries; ++attempt) {
    w.objects.clear();
    bool ok = true;
    for (int n = 0; n < n_objects && ok; ++n) {
      Object o{{uniform(rng, inner.lo.x, inner.hi.x), uniform(rng, inner.lo.y, inner.hi.y)},
               cfg.object_radius, n};
      for (const Object& p : w.objects) {
        if (distance(o.center, p.center) < o.radius + p.radius) ok = false;
      }
      w.objects.push_back(o);
    }
    if (ok) return w;
  }
  throw PlacementError("could not place " + std::to_string(n_objects) +
                       " objects after " + std::to_string(cfg.max_placement_tries) +
                       " tries");
}

struct PushOutcome {
  WorldState world;
  bool contact = false;  // the gripper touched at least one object
  bool clamped = false;  // a table-bound clamp changed some center
};

namespace internal {

inline bool clamp_object(Object& o, const Bounds& table) {
  const Vec2 c = table.shrunk(o.radius).clamp(o.center);
  const bool changed = !(c == o.center);
  o.center = c;
  return changed;
}

// Pairwise separation along the center line. A partner that is pinned by the
// table edge gets the remaining overlap pushed onto the other object.
inline bool separate_pair(Object& a, Object& b, const Bounds& table) {
  bool clamped = false;
  const double need = a.radius + b.radius;
  // pass 0 splits the overlap; passes 1 and 2 hand what is left to one side
  for (int pass = 0; pass < 3; ++pass) {
    const Vec2 d = b.center - a.center;
    const double dist = d.norm();
    if (dist >= need) break;
    const Vec2 dir = dist > 0.0 ? d / dist : Vec2{1.0, 0.0};
    const double overlap = need - dist;
    if (pass == 0) {
      a.center -= dir * (overlap / 2);
      b.center += dir * (overlap / 2);
    } else if (pass == 1) {
      b.center += dir * overlap;
    } else {
      a.center -= dir * overlap;
    }
    clamped |= clamp_object(a, table);
    clamped |= clamp_object(b, table);
  }
  return clamped;
}

}  // namespace internal

inline PushOutcome step_push_traced(const WorldState& world, const PushAction& action,
                                    const SimConfig& cfg) {
  PushOutcome out{world, false, false};
  std::vector<Object>& objs = out.world.objects;
  const Vec2 delta = action.delta();
  const double len = delta.norm();
  const Vec2 push_dir = len > 0.0 ? delta / len : Vec2{1.0, 0.0};
  for (int k = 1; k <= cfg.substeps; ++k) {
    const Vec2 g = action.start + delta * (static_cast<double>(k) / cfg.substeps);
    // (a) gripper contact projection
    for (Object& o : objs) {
      const double reach = o.radius + cfg.gripper_radius;
      const Vec2 d = o.center - g;
      const double dist = d.norm();
      if (dist < reach) {
        out.contact = true;
        o.center = g + (dist > 0.0 ? d / dist : push_dir) * reach;
        // pin to the table now so (b) separates against the final position
        out.clamped |= internal::clamp_object(o, world.table);
      }
    }
    // (b) object-object overlap resolution
    for (int it = 0; it < cfg.overlap_iterations; ++it) {
      bool any = false;
      for (std::size_t i = 0; i < objs.size(); ++i) {
        for (std::size_t j = i + 1; j < objs.size(); ++j) {
          if (distance(objs[i].center, objs[j].center) < objs[i].radius + objs[j].radius) {
            any = true;
            out.clamped |= internal::separate_pair(objs[i], objs[j], world.table);
          }
        }
      }
      if (!any) break;
    }
    // (c) table bounds
    for (Object& o : objs) out.clamped |= internal::clamp_object(o, world.table);
  }
  return out;
}

inline WorldState step_push(const WorldState& world, const PushAction& action,
                            const SimConfig& cfg) {
  return step_push_traced(world, action, cfg).world;
}

// Caps the push length at max_push and keeps both endpoints on the table.
inline PushAction clip_push(PushAction a, const Bounds& table, double max_push) {
  a.start = table.clamp(a.start);
  const Vec2 d = a.delta();
  const double len = d.norm();
  if (len > max_push) a.end = a.start + d * (max_push / len);
  a.end = table.clamp(a.end);
  return a;
}

inline bool inside_any_object(const WorldState& w, const Vec2& p, double dilation) {
  for (const Object& o : w.objects) {
    if (distance(o.center, p) <= o.radius + dilation) return true;
  }
  return false;
}

// Uniform start away from every object, uniform direction, full length.
inline PushAction sample_free_push(const WorldState& world, Rng& rng, const SimConfig& cfg) {
  Vec2 start;
  for (int tries = 0; tries < 10000; ++tries) {
    start = {uniform(rng, world.table.lo.x, world.table.hi.x),
             uniform(rng, world.table.lo.y, world.table.hi.y)};
    if (!inside_any_object(world, start, cfg.gripper_radius)) break;
  }
  const double angle = uniform(rng, 0.0, 2.0 * M_PI);
  const PushAction a{start, start + Vec2{std::cos(angle), std::sin(angle)} * cfg.max_push};
  return clip_push(a, world.table, cfg.max_push);
}

struct RandomPush {
  PushAction action;
  int object_index = -1;  // -1 when the fallback sampler was used
  Vec2 mid;
};

inline RandomPush sample_random_push_traced(const WorldState& world, Rng& rng,
                                            const SimConfig& cfg) {
  if (world.objects.empty()) throw UsageError("sample_random_push needs an object");
  const int k = uniform_int(rng, 0, static_cast<int>(world.objects.size()) - 1);
  const Vec2 mid = world.objects[k].center +
                   Vec2{normal(rng, 0.0, cfg.mid_noise), normal(rng, 0.0, cfg.mid_noise)};
  for (int tries = 0; tries < cfg.max_start_tries; ++tries) {
    const Vec2 off{uniform(rng, -cfg.ring_outer, cfg.ring_outer),
                   uniform(rng, -cfg.ring_outer, cfg.ring_outer)};
    if (std::max(std::abs(off.x), std::abs(off.y)) < cfg.ring_inner) continue;
    const Vec2 start = mid + off;
    if (!world.table.contains(start)) continue;
    if (inside_any_object(world, start, cfg.gripper_radius)) continue;
    const PushAction a{start, start + (mid - start) * 2.0};
    return {clip_push(a, world.table, cfg.max_push), k, mid};
  }
  return {sample_free_push(world, rng, cfg), -1, mid};
}

inline PushAction sample_random_push(const WorldState& world, Rng& rng, const SimConfig& cfg) {
  return sample_random_push_traced(world, rng, cfg).action;
}

// Reflection about the table's vertical center line.
inline Vec2 mirror_x(const Vec2& p, const Bounds& table) {
  return {table.lo.x + table.hi.x - p.x, p.y};
}

inline WorldState mirror_x(WorldState w) {
  for (Object& o : w.objects) o.center = mirror_x(o.center, w.table);
  return w;
}

inline PushAction mirror_x(const PushAction& a, const Bounds& table) {
  return {mirror_x(a.start, table), mirror_x(a.end, table)};
}

}  // namespace pushplan

#endif  // PUSHPLAN_SIM_HPP_
