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

// Pushes a disc into a second disc and prints where both end up.

#include <cstdio>

#include "pushplan/sim.hpp"

using namespace pushplan;

int main() {
  const SimConfig cfg;
  WorldState w;
  w.objects.push_back({{0.40, 0.50}, cfg.object_radius, 0});
  w.objects.push_back({{0.53, 0.52}, cfg.object_radius, 1});

  const PushAction push{{0.32, 0.50}, {0.37, 0.50}};
  const PushOutcome out = step_push_traced(w, push, cfg);

  std::printf("contact %s\n", out.contact ? "yes" : "no");
  for (std::size_t i = 0; i < w.objects.size(); ++i) {
    const Vec2 a = w.objects[i].center;
    const Vec2 b = out.world.objects[i].center;
    std::printf("object %zu: (%.4f, %.4f) -> (%.4f, %.4f)\n", i, a.x, a.y, b.x, b.y);
  }
  return 0;
}
