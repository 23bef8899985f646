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

#ifndef PUSHPLAN_GRADCHECK_HPP_
#define PUSHPLAN_GRADCHECK_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "pushplan/autodiff.hpp"
#include "pushplan/nn.hpp"
#include "pushplan/rng.hpp"

namespace pushplan {

template <typename T>
using LossFn = std::function<Var(Tape<T>&)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  int probes = 0;
  // worst probe, for diagnostics
  int param = -1;
  std::size_t element = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

// Compares backward() against central differences on up to `max_probes`
// elements (all of them when there are fewer). Relative error uses the
// denominator max(|a|, |n|, 1e-6). Only parameters whose name starts with
// `prefix` are probed.
template <typename T>
GradCheckResult gradient_check(ParameterSet<T>& ps, const LossFn<T>& fn, double eps = 1e-3,
                               int max_probes = 100, std::uint64_t seed = 0,
                               const std::string& prefix = "") {
  ps.zero_grad();
  {
    Tape<T> tape;
    tape.backward(fn(tape));
  }
  std::vector<std::pair<int, std::size_t>> probes;
  std::vector<int> eligible;
  std::size_t total = 0;
  for (int i = 0; i < ps.size(); ++i) {
    if (ps[i].name.rfind(prefix, 0) == 0) {
      eligible.push_back(i);
      total += ps[i].value.size();
    }
  }
  if (total <= static_cast<std::size_t>(max_probes)) {
    for (int i : eligible) {
      for (std::size_t k = 0; k < ps[i].value.size(); ++k) probes.emplace_back(i, k);
    }
  } else {
    Rng rng = make_rng(seed, {0x67636b});
    for (int n = 0; n < max_probes; ++n) {
      auto flat = static_cast<std::size_t>(uniform(rng, 0.0, static_cast<double>(total)));
      flat = std::min(flat, total - 1);
      std::size_t j = 0;
      while (flat >= ps[eligible[j]].value.size()) flat -= ps[eligible[j++]].value.size();
      probes.emplace_back(eligible[j], flat);
    }
  }
  auto eval = [&]() {
    Tape<T> tape(false);
    return static_cast<double>(tape.value(fn(tape))[0]);
  };
  GradCheckResult res;
  res.probes = static_cast<int>(probes.size());
  for (const auto& [i, k] : probes) {
    T& w = ps[i].value[k];
    const T saved = w;
    w = static_cast<T>(saved + eps);
    const double up = eval();
    w = static_cast<T>(saved - eps);
    const double down = eval();
    w = saved;
    const double numeric = (up - down) / (2.0 * eps);
    const double analytic = static_cast<double>(ps[i].grad[k]);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    const double rel = std::abs(analytic - numeric) / denom;
    if (rel > res.max_relative_error || res.param < 0) {
      res.max_relative_error = rel;
      res.param = i;
      res.element = k;
      res.analytic = analytic;
      res.numeric = numeric;
    }
  }
  return res;
}

}  // namespace pushplan

#endif  // PUSHPLAN_GRADCHECK_HPP_
