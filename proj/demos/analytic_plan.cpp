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

// Closed-loop analytic planner on a hard scene, with simulator locations.
// Usage: analytic_plan [seed]

#include <cstdio>
#include <cstdlib>

#include "pushplan/mpc.hpp"

using namespace pushplan;

int main(int argc, char** argv) {
  const std::uint64_t seed = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 1;
  const SimConfig sim;
  const Scenario scene = make_scene(SceneKind::kHard, seed, SceneConfig{}, sim);

  MpcConfig cfg;
  cfg.steps = 40;
  Models none;
  const Episode ep = mpc_episode(scene, Mode::kOracle, none, cfg, sim, 64, seed);

  for (std::size_t t = 0; t <= ep.steps.size(); t += 5) {
    std::printf("step %2zu  mean distance %.4f\n", t, ep.mean_distance(t));
  }
  return 0;
}
