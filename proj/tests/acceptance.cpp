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

// Acceptance harness. Drives the CLI on the artifacts built by the ctest
// fixture and prints one PASS/FAIL line per criterion.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "pushplan/gradient_suites.hpp"
#include "pushplan/mpc.hpp"
#include "pushplan/planner.hpp"

namespace fs = std::filesystem;
using namespace pushplan;

namespace {

// Tolerances and budgets.
constexpr double kGradTol = 1e-3;
constexpr double kSymmetryTol = 1e-9;
constexpr double kMinuteSeconds = 60.0;
constexpr double kTrainBudgetSeconds = 30.0 * 60.0;
constexpr double kCeilingDistance = 0.01;
constexpr int kCeilingSeeds = 20;
constexpr int kCeilingRequired = 19;
constexpr int kFuzzPushes = 10000;
constexpr int kSymmetryTrials = 2000;
constexpr double kToyTol = 0.01;
constexpr double kSuccessFraction = 0.3;
constexpr int kPaired = 20;

struct Harness {
  std::string cli;
  std::string config;
  fs::path dir;
  int failures = 0;

  std::string paths(const fs::path& data, const fs::path& models) const {
    return " --config '" + config + "' --paths.data_dir=" + data.string() +
           " --paths.forward=" + (models / "forward.ckpt").string() +
           " --paths.no_interaction=" + (models / "no_interaction.ckpt").string() +
           " --paths.correction=" + (models / "correction.ckpt").string();
  }
  std::string base() const { return paths(dir / "data", dir / "models"); }

  // Runs the CLI, output to logs/<name>.log; returns the exit code.
  int run(const std::string& name, const std::string& args) const {
    fs::create_directories(dir / "logs");
    const fs::path log = dir / "logs" / (name + ".log");
    const std::string cmd = "'" + cli + "' " + args + " > '" + log.string() + "' 2>&1";
    const int status = std::system(cmd.c_str());
    const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    if (code != 0) std::cerr << "command failed (" << code << "): " << cmd << "\n";
    return code;
  }

  fs::path out(const std::string& name) const { return dir / "accept" / name; }
  std::string out_arg(const std::string& name) const { return " --paths.output=" + out(name).string(); }

  void report(int id, bool pass, const std::string& detail) {
    failures += !pass;
    std::cout << (pass ? "PASS" : "FAIL") << " criterion " << id << ": " << detail << std::endl;
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return {};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(p));
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

std::map<std::string, double> read_metrics(const fs::path& p) {
  std::map<std::string, double> m;
  for (const auto& r : read_csv(p)) {
    if (r.size() == 2) m[r[0]] = std::stod(r[1]);
  }
  return m;
}

struct Summary {
  double initial = NAN, final_distance = NAN, slope = NAN;
};

std::map<std::string, Summary> read_summary(const fs::path& p) {
  std::map<std::string, Summary> m;
  for (const auto& r : read_csv(p)) {
    if (r.size() >= 5) m[r[0]] = {std::stod(r[2]), std::stod(r[3]), std::stod(r[4])};
  }
  return m;
}

// Mean over objects at the last step, per episode.
std::vector<double> final_distances(const fs::path& p) {
  std::map<int, std::pair<int, std::vector<double>>> last;
  for (const auto& r : read_csv(p)) {
    const int ep = std::stoi(r[0]);
    const int step = std::stoi(r[1]);
    auto& [s, d] = last[ep];
    if (d.empty() || step > s) {
      s = step;
      d.clear();
    }
    if (step == s) d.push_back(std::stod(r[3]));
  }
  std::vector<double> out;
  for (const auto& [ep, sd] : last) {
    double sum = 0.0;
    for (double v : sd.second) sum += v;
    out.push_back(sum / static_cast<double>(sd.second.size()));
  }
  return out;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double read_train_seconds(const fs::path& p) {
  std::istringstream in(slurp(p));
  std::string key;
  double v = NAN;
  in >> key >> v;
  return key == "train_seconds" ? v : NAN;
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

void gradients(Harness& h) {
  const auto t0 = std::chrono::steady_clock::now();
  GradientSuiteConfig gc;
  gc.tolerance = kGradTol;
  double worst = 0.0;
  std::string worst_suite;
  std::set<std::string> suites;
  for (const auto& r : run_gradient_suites({1, 2, 3, 4, 5}, gc)) {
    suites.insert(r.suite);
    if (!(r.check.max_relative_error <= worst)) {
      worst = r.check.max_relative_error;
      worst_suite = r.suite + "/" + std::to_string(r.seed);
    }
  }
  const double secs = seconds_since(t0);
  h.report(1, suites.size() == 5 && worst < kGradTol && secs < kMinuteSeconds,
           std::to_string(suites.size()) + " suites x 5 seeds, max rel error " + fmt(worst) + " (" +
               worst_suite + ") < " + fmt(kGradTol) + ", " + fmt(secs) + " s");
}

void physics(Harness& h) {
  const auto t0 = std::chrono::steady_clock::now();
  const SimConfig cfg;
  Rng rng = make_rng(2024);
  int violations = 0, pushes = 0;
  for (int ep = 0; pushes < kFuzzPushes; ++ep) {
    WorldState w = sample_scene(rng, 1 + ep % 2, cfg);
    for (int t = 0; t < 100 && pushes < kFuzzPushes; ++t, ++pushes) {
      const PushAction a = t % 5 == 0 ? sample_free_push(w, rng, cfg) : sample_random_push(w, rng, cfg);
      w = step_push(w, a, cfg);
      violations += check_invariants(w).has_value();
    }
  }
  double trans_err = 0.0, mirror_err = 0.0;
  int trans_checked = 0, mirror_checked = 0;
  for (int trial = 0; trial < kSymmetryTrials; ++trial) {
    const WorldState w = sample_scene(rng, 1 + trial % 2, cfg);
    const PushAction a = sample_random_push(w, rng, cfg);
    const auto base = step_push_traced(w, a, cfg);
    if (base.clamped) continue;
    const WorldState m = step_push(mirror_x(w), mirror_x(a, w.table), cfg);
    const WorldState want = mirror_x(base.world);
    for (std::size_t i = 0; i < w.objects.size(); ++i) {
      mirror_err = std::max(mirror_err, distance(m.objects[i].center, want.objects[i].center));
    }
    ++mirror_checked;

    const Vec2 off{uniform(rng, -0.05, 0.05), uniform(rng, -0.05, 0.05)};
    WorldState ws = w;
    for (Object& o : ws.objects) o.center += off;
    const PushAction as{a.start + off, a.end + off};
    if (check_invariants(ws).has_value() || !w.table.contains(as.start) || !w.table.contains(as.end)) continue;
    const auto shifted = step_push_traced(ws, as, cfg);
    if (shifted.clamped) continue;
    for (std::size_t i = 0; i < w.objects.size(); ++i) {
      trans_err = std::max(trans_err, distance(shifted.world.objects[i].center, base.world.objects[i].center + off));
    }
    ++trans_checked;
  }
  const double secs = seconds_since(t0);
  const bool pass = violations == 0 && trans_err <= kSymmetryTol && mirror_err <= kSymmetryTol &&
                    trans_checked > 0 && mirror_checked > 0 && secs < kMinuteSeconds;
  h.report(2, pass,
           std::to_string(pushes) + " pushes, " + std::to_string(violations) + " violations; translation err " +
               fmt(trans_err) + " over " + std::to_string(trans_checked) + ", mirror err " + fmt(mirror_err) +
               " over " + std::to_string(mirror_checked) + " (tol " + fmt(kSymmetryTol) + "), " + fmt(secs) + " s");
}

void ceiling(Harness& h) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::string args = "evaluate" + h.base() + h.out_arg("ceiling") +
                           " --eval.modes=oracle --eval.scene=free-1obj --mpc.steps=60 --eval.seeds=" +
                           std::to_string(kCeilingSeeds);
  const int code = h.run("ceiling", args);
  const double secs = seconds_since(t0);
  const auto finals = final_distances(h.out("ceiling") / "distances.csv");
  int reached = 0;
  for (double d : finals) reached += d < kCeilingDistance;
  h.report(3, code == 0 && static_cast<int>(finals.size()) == kCeilingSeeds && reached >= kCeilingRequired &&
                  secs < kMinuteSeconds,
           std::to_string(reached) + "/" + std::to_string(finals.size()) + " oracle episodes end < " +
               fmt(kCeilingDistance) + " (need " + std::to_string(kCeilingRequired) + "), " + fmt(secs) + " s");
}

void forward_quality(Harness& h, const std::map<std::string, double>& m) {
  const double model = m.count("one_step_contact_mse_px2") ? m.at("one_step_contact_mse_px2") : NAN;
  const double persist =
      m.count("one_step_contact_persistence_mse_px2") ? m.at("one_step_contact_persistence_mse_px2") : NAN;
  const double h1 = m.count("open_loop_error_h1") ? m.at("open_loop_error_h1") : NAN;
  const double h5 = m.count("open_loop_error_h5") ? m.at("open_loop_error_h5") : NAN;
  const double h10 = m.count("open_loop_error_h10") ? m.at("open_loop_error_h10") : NAN;
  double train = 0.0;
  for (const char* f : {"forward.ckpt.timing.txt", "no_interaction.ckpt.timing.txt", "correction.ckpt.timing.txt"}) {
    const double t = read_train_seconds(h.dir / "models" / f);
    train = std::isnan(t) ? NAN : std::max(train, t);
  }
  const bool pass = model < persist && h1 <= h5 && h5 <= h10 && train < kTrainBudgetSeconds;
  h.report(4, pass,
           "contact one-step MSE " + fmt(model) + " px^2 < persistence " + fmt(persist) + "; open-loop error h1 " +
               fmt(h1) + " <= h5 " + fmt(h5) + " <= h10 " + fmt(h10) + " world units; longest training " + fmt(train) +
               " s < " + fmt(kTrainBudgetSeconds));
}

void correction(Harness& h, const std::map<std::string, double>& m, const std::map<std::string, Summary>& s) {
  const double with_c = m.count("tracking_error_corrected") ? m.at("tracking_error_corrected") : NAN;
  const double without_c = m.count("tracking_error_uncorrected") ? m.at("tracking_error_uncorrected") : NAN;
  const double tracked = m.count("tracking_episodes") ? m.at("tracking_episodes") : 0.0;
  const double full = s.count("full") ? s.at("full").final_distance : NAN;
  const double noc = s.count("no-correction") ? s.at("no-correction").final_distance : NAN;
  h.report(5, with_c < without_c && tracked >= kPaired && full < noc,
           "10-step tracking error " + fmt(with_c) + " < uncorrected " + fmt(without_c) + " over " +
               fmt(tracked) + " episodes; MPC final distance full " + fmt(full) + " < no-correction " + fmt(noc));
}

void interaction(Harness& h, int code) {
  const auto s = read_summary(h.out("hard") / "summary.csv");
  const double full = s.count("full") ? s.at("full").final_distance : NAN;
  const double noint = s.count("no-interaction") ? s.at("no-interaction").final_distance : NAN;
  const double analytic = s.count("analytic") ? s.at("analytic").final_distance : NAN;
  h.report(6, code == 0 && full < noint && full < analytic,
           "hard scenes, distance at T=60: full " + fmt(full) + " < no-interaction " + fmt(noint) +
               " and < analytic " + fmt(analytic));
}

// Best-ever must equal the running minimum of every sampled cost.
bool cem_log_consistent(const fs::path& csv, int& plans, std::string& why) {
  std::map<int, std::map<int, std::pair<double, double>>> per;  // step -> iteration -> (min cost, best_ever)
  for (const auto& r : read_csv(csv)) {
    const int step = std::stoi(r[0]);
    const int it = std::stoi(r[1]);
    const double c = std::stod(r[3]);
    const double best = std::stod(r[4]);
    auto [pos, fresh] = per[step].try_emplace(it, c, best);
    if (!fresh) {
      pos->second.first = std::min(pos->second.first, c);
      if (pos->second.second != best) {
        why = "best_ever differs within an iteration";
        return false;
      }
    }
  }
  for (const auto& [step, its] : per) {
    double running = INFINITY, prev = INFINITY;
    for (const auto& [it, mb] : its) {
      running = std::min(running, mb.first);
      if (mb.second > prev) {
        why = "best_ever increased at step " + std::to_string(step);
        return false;
      }
      if (mb.second != running) {
        why = "best_ever is not the running minimum at step " + std::to_string(step);
        return false;
      }
      prev = mb.second;
    }
    ++plans;
  }
  return plans > 0;
}

void cem(Harness& h, const std::vector<std::string>& logs, std::size_t expected_logs) {
  int plans = 0;
  bool logs_ok = logs.size() == expected_logs;
  std::string why = logs_ok ? "" : "a plan command failed";
  for (const auto& name : logs) logs_ok = logs_ok && cem_log_consistent(h.out(name) / "cem.csv", plans, why);

  // toy: cost depends on the first displacement only, optimum inside the bound
  const Vec2 target{0.02, -0.01};
  CemConfig cfg;
  cfg.iterations = 10;
  const Bounds table{};
  double toy = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng = make_rng(seed);
    const auto res = cem_plan(
        GaussianPolicy::initial(cfg, {0.5, 0.5}), cfg, table,
        [&](std::span<ActionSequence> seqs, std::span<double> costs) {
          for (std::size_t i = 0; i < seqs.size(); ++i) costs[i] = (seqs[i][0].delta() - target).squared_norm();
        },
        rng);
    toy = std::max(toy, distance({res.policy.mean[2], res.policy.mean[3]}, target));
  }
  h.report(7, logs_ok && toy < kToyTol,
           std::to_string(plans) + " logged plans with exact best-ever bookkeeping" +
               (logs_ok ? std::string() : " (" + why + ")") + "; toy quadratic max error " + fmt(toy) + " < " +
               fmt(kToyTol));
}

void end_to_end(Harness& h, const std::map<std::string, Summary>& s) {
  const Summary f = s.count("full") ? s.at("full") : Summary{};
  h.report(8, f.slope < 0.0 && f.final_distance < kSuccessFraction * f.initial,
           "free single-object scenes, full model: slope " + fmt(f.slope) + " < 0, final " +
               fmt(f.final_distance) + " < " + fmt(kSuccessFraction) + " x initial " + fmt(f.initial));
}

void determinism(Harness& h) {
  std::vector<std::string> diffs;
  auto same = [&](const fs::path& a, const fs::path& b) {
    const std::string x = slurp(a);
    if (x.empty() || x != slurp(b)) diffs.push_back(b.filename().string() + " (" + b.parent_path().string() + ")");
  };
  const fs::path rep = h.dir / "repeat";
  fs::remove_all(rep);

  // generate and train again from scratch; artifacts must match the fixture's
  const std::string rbase = h.paths(rep / "data", rep / "models");
  int code = h.run("repeat_generate", "generate" + rbase);
  for (const char* f : {"train.pds", "val.pds", "test-1obj.pds", "test-2obj.pds"}) {
    same(h.dir / "data" / f, rep / "data" / f);
  }
  code |= h.run("repeat_train_forward", "train-forward" + rbase);
  code |= h.run("repeat_train_no_interaction", "train-forward --no-interaction" + rbase);
  code |= h.run("repeat_train_correction", "train-correction" + rbase);
  for (const char* f : {"forward.ckpt", "no_interaction.ckpt", "correction.ckpt", "forward.ckpt.log.csv",
                        "no_interaction.ckpt.log.csv", "correction.ckpt.log.csv"}) {
    same(h.dir / "models" / f, rep / "models" / f);
  }

  // plan, evaluate and ablate with parallel evaluation against the serial runs
  code |= h.run("repeat_plan", "plan" + h.base() + " --paths.output=" + (rep / "plan").string() +
                                   " --eval.scene=hard --cem.threads=4");
  for (const char* f : {"steps.csv", "cem.csv", "distances.csv"}) same(h.out("plan_hard") / f, rep / "plan" / f);
  code |= h.run("repeat_evaluate", "evaluate" + h.base() + " --paths.output=" + (rep / "hard").string() +
                                       " --eval.scene=hard --eval.modes=full,no-interaction,analytic"
                                       " --eval.threads=2 --cem.threads=2");
  for (const char* f : {"distances.csv", "curves.csv", "summary.csv"}) same(h.out("hard") / f, rep / "hard" / f);
  const std::string small = " --eval.seeds=3 --eval.modes=full,no-correction --eval.lambda_sweep=1";
  code |= h.run("ablate_serial", "ablate --sweep-lambda" + h.base() + small +
                                     " --paths.output=" + (rep / "ablate_a").string());
  code |= h.run("ablate_parallel", "ablate --sweep-lambda" + h.base() + small +
                                       " --paths.output=" + (rep / "ablate_b").string() +
                                       " --eval.threads=3 --cem.threads=2");
  for (const char* f : {"metrics.csv", "paired.csv", "lambda_sweep.csv", "distances.csv", "summary.csv"}) {
    same(rep / "ablate_a" / f, rep / "ablate_b" / f);
  }
  code |= h.run("gradcheck_a", "gradcheck --seeds 2");
  code |= h.run("gradcheck_b", "gradcheck --seeds 2");
  same(h.dir / "logs" / "gradcheck_a.log", h.dir / "logs" / "gradcheck_b.log");

  std::string detail = "generate, train-forward (both variants), train-correction, plan, evaluate, ablate, gradcheck";
  detail += diffs.empty() ? " bit-identical on rerun and with threads > 1" : "; differing: ";
  for (std::size_t i = 0; i < diffs.size(); ++i) detail += (i ? ", " : "") + diffs[i];
  if (code != 0) detail += "; a command failed";
  h.report(9, code == 0 && diffs.empty(), detail);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pushplan acceptance harness"};
  Harness h;
  std::string dir;
  app.add_option("--cli", h.cli, "pushplan executable")->required();
  app.add_option("--config", h.config, "acceptance config")->required();
  app.add_option("--dir", dir, "fixture directory holding data/ and models/")->required();
  CLI11_PARSE(app, argc, argv);
  h.dir = dir;
  fs::remove_all(h.dir / "accept");

  gradients(h);
  physics(h);
  ceiling(h);

  // free single-object scenes: correction ablation, tracking and prediction metrics
  const int ablate = h.run("ablate", "ablate" + h.base() + h.out_arg("ablate") +
                                         " --eval.scene=free-1obj --eval.modes=full,no-correction --eval.seeds=" +
                                         std::to_string(kPaired));
  const auto metrics = read_metrics(h.out("ablate") / "metrics.csv");
  const auto free_summary = read_summary(h.out("ablate") / "summary.csv");
  if (ablate != 0) std::cout << "ablate exited with " << ablate << "\n";
  forward_quality(h, metrics);
  correction(h, metrics, free_summary);

  const int hard = h.run("hard", "evaluate" + h.base() + h.out_arg("hard") +
                                     " --eval.scene=hard --eval.modes=full,no-interaction,analytic --eval.seeds=" +
                                     std::to_string(kPaired));
  interaction(h, hard);

  std::vector<std::string> plans;
  for (const char* scene : {"hard", "free-2obj", "free-1obj"}) {
    const std::string name = std::string("plan_") + scene;
    if (h.run(name, "plan --no-frames" + h.base() + h.out_arg(name) + " --eval.scene=" + scene) == 0) {
      plans.push_back(name);
    }
  }
  cem(h, plans, 3);
  end_to_end(h, free_summary);
  determinism(h);

  std::cout << (h.failures == 0 ? "all criteria passed" : std::to_string(h.failures) + " criteria failed")
            << std::endl;
  return h.failures == 0 ? 0 : 1;
}
