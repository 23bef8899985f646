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

// pushplan command-line tool.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "pushplan/config.hpp"
#include "pushplan/correction.hpp"
#include "pushplan/dataset.hpp"
#include "pushplan/gradient_suites.hpp"
#include "pushplan/metrics.hpp"
#include "pushplan/mpc.hpp"
#include "pushplan/training.hpp"

namespace fs = std::filesystem;
using namespace pushplan;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
    if (!out) throw DataError("write failed: " + path.string());
  }
  fs::rename(tmp, path);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void write_timing(const std::string& ckpt, double seconds) {
  std::ostringstream t;
  t << "train_seconds " << seconds << "\n";
  write_text(fs::path(ckpt + ".timing.txt"), t.str());
}

void echo_config(const ConfigStore& store, const fs::path& dir) {
  write_text(dir / "config.txt", store.echo());
}

fs::path parent_or_dot(const std::string& file) {
  const fs::path p(file);
  return p.has_parent_path() ? p.parent_path() : fs::path(".");
}

struct LoadedModels {
  std::optional<ForwardModel<float>> full;
  std::optional<ForwardModel<float>> no_interaction;
  std::optional<CorrectionModel<float>> correction;

  Models view() {
    return {full ? &*full : nullptr, no_interaction ? &*no_interaction : nullptr,
            correction ? &*correction : nullptr};
  }
};

LoadedModels load_models(const ExperimentConfig& c, const std::vector<Mode>& modes) {
  LoadedModels m;
  const bool oracle_loc = c.mpc.oracle_locations;
  for (Mode mode : modes) {
    if ((mode == Mode::kFull || mode == Mode::kNoCorrection) && !m.full) {
      m.full = ForwardModel<float>::from_checkpoint(load_checkpoint(c.paths.forward));
    }
    if (mode == Mode::kNoInteraction && !m.no_interaction) {
      m.no_interaction = ForwardModel<float>::from_checkpoint(load_checkpoint(c.paths.no_interaction));
    }
    if ((mode == Mode::kFull || mode == Mode::kNoInteraction) && !oracle_loc && !m.correction) {
      m.correction = CorrectionModel<float>::from_checkpoint(load_checkpoint(c.paths.correction));
    }
  }
  return m;
}

int cmd_generate(ConfigStore& store) {
  const auto& c = store.config();
  generate_splits(c.paths.data_dir, c.data, c.sim);
  echo_config(store, c.paths.data_dir);
  const SplitPaths p = SplitPaths::in_dir(c.paths.data_dir);
  for (const auto& f : {p.train, p.val, p.test_one, p.test_two}) std::cout << "wrote " << f << "\n";
  return 0;
}

int cmd_train_forward(ConfigStore& store, bool no_interaction) {
  const auto& c = store.config();
  const SplitPaths p = SplitPaths::in_dir(c.paths.data_dir);
  const Dataset train = load_dataset(p.train);
  const Dataset val = load_dataset(p.val);
  const std::string ckpt = no_interaction ? c.paths.no_interaction : c.paths.forward;
  const auto t0 = std::chrono::steady_clock::now();
  const ForwardTrainResult r = train_forward(train, val, c.forward_config(!no_interaction), c.train, &std::cout);
  const fs::path dir = parent_or_dot(ckpt);
  fs::create_directories(dir);
  save_checkpoint(ckpt, r.model.to_checkpoint());
  std::ostringstream log;
  log.precision(10);
  log << "epoch,train_loss,val_loss,val_recon,val_pred_pixel,val_pred_location,val_pred_feature\n";
  for (const EpochLog& e : r.log) {
    log << e.epoch << "," << e.train_loss << "," << e.val_loss << "," << e.val_terms.recon << ","
        << e.val_terms.pred_pixel << "," << e.val_terms.pred_location << ","
        << e.val_terms.pred_feature << "\n";
  }
  write_text(fs::path(ckpt + ".log.csv"), log.str());
  write_timing(ckpt, seconds_since(t0));
  echo_config(store, dir);
  std::cout << "best epoch " << r.best_epoch << ", wrote " << ckpt << "\n";
  return 0;
}

int cmd_train_correction(ConfigStore& store) {
  const auto& c = store.config();
  const SplitPaths p = SplitPaths::in_dir(c.paths.data_dir);
  const Dataset train = load_dataset(p.train);
  const Dataset val = load_dataset(p.val);
  const auto t0 = std::chrono::steady_clock::now();
  const CorrectionTrainResult r = train_correction(train, val, c.correction, c.correction_train, &std::cout);
  const fs::path dir = parent_or_dot(c.paths.correction);
  fs::create_directories(dir);
  save_checkpoint(c.paths.correction, r.model.to_checkpoint());
  std::ostringstream log;
  log.precision(10);
  log << "epoch,train_mse,val_mse\n";
  for (const auto& e : r.log) log << e.epoch << "," << e.train_mse << "," << e.val_mse << "\n";
  write_text(fs::path(c.paths.correction + ".log.csv"), log.str());
  write_timing(c.paths.correction, seconds_since(t0));
  echo_config(store, dir);
  std::cout << "best epoch " << r.best_epoch << ", wrote " << c.paths.correction << "\n";
  return 0;
}

int cmd_plan(ConfigStore& store, bool frames) {
  auto& c = store.config();
  const fs::path out(c.paths.output);
  fs::create_directories(out);
  LoadedModels lm = load_models(c, {c.eval.mode});
  Models models = lm.view();
  MpcConfig mpc = c.mpc;
  mpc.keep_plans = true;
  const std::uint64_t seed = c.eval.first_seed;
  const Scenario scene = make_scene(c.eval.scene, seed, c.scene, c.sim);
  const PixelMap map = PixelMap::for_table(c.sim.table, c.data.raster_size);
  if (frames) {
    fs::create_directories(out / "frames");
    write_ppm((out / "frames" / "start.ppm").string(), render(scene.start, map));
    write_ppm((out / "frames" / "goal.ppm").string(), render(scene.goal, map));
  }
  const Episode ep = mpc_episode(scene, c.eval.mode, models, mpc, c.sim, c.data.raster_size, seed,
                                 [&](const StepLog& log, const Raster& observed) {
                                   if (!frames) return;
                                   char name[32];
                                   std::snprintf(name, sizeof name, "step_%03d.ppm", log.step);
                                   write_ppm((out / "frames" / name).string(), observed);
                                 });
  std::ostringstream steps;
  steps.precision(17);
  steps << "step,start_x,start_y,end_x,end_y,object,true_x,true_y,est_x,est_y,distance,plan_cost\n";
  for (const StepLog& s : ep.steps) {
    for (std::size_t n = 0; n < s.truth.size(); ++n) {
      steps << s.step << "," << s.action.start.x << "," << s.action.start.y << "," << s.action.end.x
            << "," << s.action.end.y << "," << n << "," << s.truth[n].x << "," << s.truth[n].y << ","
            << s.estimate[n].x << "," << s.estimate[n].y << "," << s.distance[n] << ","
            << s.plan_cost << "\n";
    }
  }
  write_text(out / "steps.csv", steps.str());
  std::ostringstream dist;
  write_distance_header(dist);
  write_distance_rows(dist, {ep}, mode_name(c.eval.mode));
  write_text(out / "distances.csv", dist.str());
  if (!ep.plans.empty()) {
    std::ostringstream cem;
    cem.precision(17);
    cem << "step,iteration,sample,cost,best_ever\n";
    for (std::size_t t = 0; t < ep.plans.size(); ++t) {
      const PlanResult& p = ep.plans[t];
      for (std::size_t it = 0; it < p.iteration_costs.size(); ++it) {
        for (std::size_t s = 0; s < p.iteration_costs[it].size(); ++s) {
          cem << t + 1 << "," << it << "," << s << "," << p.iteration_costs[it][s] << ","
              << p.best_cost_history[it] << "\n";
        }
      }
    }
    write_text(out / "cem.csv", cem.str());
  }
  echo_config(store, out);
  std::cout << "mode " << mode_name(c.eval.mode) << " scene " << scene_name(c.eval.scene)
            << " seed " << seed << "\n";
  std::cout << "initial_mean_distance " << ep.mean_distance(0) << "\n";
  std::cout << "final_mean_distance " << ep.final_mean_distance() << "\n";
  return 0;
}

struct ModeRun {
  Mode mode;
  std::vector<Episode> episodes;
};

std::vector<ModeRun> run_modes(const ExperimentConfig& c, const MpcConfig& mpc,
                               const std::vector<Mode>& modes) {
  LoadedModels lm = load_models(c, modes);
  Models models = lm.view();
  const auto seeds = seed_range(c.eval.first_seed, c.eval.seeds);
  std::vector<ModeRun> runs;
  for (Mode m : modes) {
    runs.push_back({m, run_episodes(c.eval.scene, m, models, mpc, c.scene, c.sim, c.data.raster_size,
                                    seeds, c.eval.threads)});
    std::cout << mode_name(m) << " final_mean_distance "
              << mean_curve(runs.back().episodes).back() << "\n";
  }
  return runs;
}

void write_runs(const fs::path& out, const std::vector<ModeRun>& runs) {
  std::ostringstream dist, curves, summary;
  write_distance_header(dist);
  write_curve_header(curves);
  summary.precision(17);
  summary << "mode,episodes,initial_mean_distance,final_mean_distance,slope,success_rate\n";
  for (const ModeRun& r : runs) {
    write_distance_rows(dist, r.episodes, mode_name(r.mode));
    write_curve_rows(curves, r.episodes, mode_name(r.mode));
    const auto curve = mean_curve(r.episodes);
    int success = 0;
    for (const Episode& e : r.episodes) success += e.final_mean_distance() < 0.05;
    summary << mode_name(r.mode) << "," << r.episodes.size() << "," << curve.front() << ","
            << curve.back() << "," << trend_slope(curve) << ","
            << static_cast<double>(success) / static_cast<double>(r.episodes.size()) << "\n";
  }
  write_text(out / "distances.csv", dist.str());
  write_text(out / "curves.csv", curves.str());
  write_text(out / "summary.csv", summary.str());
}

int cmd_evaluate(ConfigStore& store) {
  const auto& c = store.config();
  const fs::path out(c.paths.output);
  fs::create_directories(out);
  write_runs(out, run_modes(c, c.mpc, c.eval.modes));
  echo_config(store, out);
  return 0;
}

int cmd_ablate(ConfigStore& store, bool sweep_lambda) {
  const auto& c = store.config();
  const fs::path out(c.paths.output);
  fs::create_directories(out);
  const auto runs = run_modes(c, c.mpc, c.eval.modes);
  write_runs(out, runs);

  std::ostringstream paired;
  paired.precision(17);
  paired << "seed";
  for (const auto& r : runs) paired << "," << mode_name(r.mode);
  paired << "\n";
  for (int i = 0; i < c.eval.seeds; ++i) {
    paired << c.eval.first_seed + static_cast<std::uint64_t>(i);
    for (const auto& r : runs) paired << "," << r.episodes[static_cast<std::size_t>(i)].final_mean_distance();
    paired << "\n";
  }
  write_text(out / "paired.csv", paired.str());

  // prediction and tracking metrics on the held-out episodes
  const SplitPaths p = SplitPaths::in_dir(c.paths.data_dir);
  const Dataset t1 = load_dataset(p.test_one);
  const Dataset t2 = load_dataset(p.test_two);
  auto full = ForwardModel<float>::from_checkpoint(load_checkpoint(c.paths.forward));
  auto corr = CorrectionModel<float>::from_checkpoint(load_checkpoint(c.paths.correction));
  auto none = CorrectionModel<float>::disabled(corr.cfg);
  Dataset all = t1;
  all.samples.insert(all.samples.end(), t2.samples.begin(), t2.samples.end());
  // episode ids restart in every file, so group each file separately
  const std::vector<EpisodeSamples> e1 = group_episodes(t1);
  const std::vector<EpisodeSamples> e2 = group_episodes(t2);
  std::vector<EpisodeSamples> eps = e1;
  eps.insert(eps.end(), e2.begin(), e2.end());
  // tracking alternates one- and two-object episodes
  std::vector<EpisodeSamples> tracked;
  for (std::size_t i = 0; static_cast<int>(tracked.size()) < c.eval.tracking_episodes; ++i) {
    if (i >= e1.size() && i >= e2.size()) break;
    if (i < e1.size()) tracked.push_back(e1[i]);
    if (i < e2.size() && static_cast<int>(tracked.size()) < c.eval.tracking_episodes) tracked.push_back(e2[i]);
  }
  const PixelMap map = t1.pixel_map();
  const OneStepStats one = one_step_contact(full, all, c.sim);
  const auto open = open_loop_errors(full, eps, map, c.eval.horizons);
  const double with_c = tracking_error(full, corr, tracked, map, c.eval.tracking_steps);
  const double without_c = tracking_error(full, none, tracked, map, c.eval.tracking_steps);
  std::ostringstream metrics;
  metrics.precision(17);
  metrics << "metric,value\n";
  metrics << "one_step_contact_count," << one.count << "\n";
  metrics << "one_step_contact_mse_px2," << one.model_mse << "\n";
  metrics << "one_step_contact_persistence_mse_px2," << one.persistence_mse << "\n";
  for (std::size_t k = 0; k < open.size(); ++k) {
    metrics << "open_loop_error_h" << c.eval.horizons[k] << "," << open[k] << "\n";
  }
  metrics << "tracking_episodes," << tracked.size() << "\n";
  metrics << "tracking_error_corrected," << with_c << "\n";
  metrics << "tracking_error_uncorrected," << without_c << "\n";
  write_text(out / "metrics.csv", metrics.str());
  std::cout << metrics.str();

  if (sweep_lambda) {
    std::vector<Mode> learned;
    for (Mode m : c.eval.modes) {
      if (!is_analytic(m)) learned.push_back(m);
    }
    std::ostringstream sw;
    sw.precision(17);
    sw << "lambda,mode,final_mean_distance\n";
    for (double lambda : c.eval.lambda_sweep) {
      MpcConfig mpc = c.mpc;
      mpc.cem.lambda = lambda;
      std::cout << "lambda " << lambda << "\n";
      for (const ModeRun& r : run_modes(c, mpc, learned)) {
        sw << lambda << "," << mode_name(r.mode) << "," << mean_curve(r.episodes).back() << "\n";
      }
    }
    write_text(out / "lambda_sweep.csv", sw.str());
  }
  echo_config(store, out);
  return 0;
}

int cmd_gradcheck(int seeds) {
  GradientSuiteConfig gc;
  bool ok = true;
  std::vector<std::uint64_t> s;
  for (int i = 1; i <= seeds; ++i) s.push_back(static_cast<std::uint64_t>(i));
  for (const auto& r : run_gradient_suites(s, gc)) {
    const bool pass = r.check.max_relative_error < gc.tolerance;
    ok = ok && pass;
    std::cout << (pass ? "ok   " : "FAIL ") << r.suite << " seed " << r.seed << " max_rel_error "
              << r.check.max_relative_error << " probes " << r.check.probes << " worst "
              << r.worst_param << "\n";
  }
  if (!ok) throw NumericalError("gradient check failed");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pushplan: object-centric forward models and push planning"};
  app.allow_extras();
  app.fallthrough();
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("-c,--config", config_path, "config file (default: $PUSHPLAN_CONFIG)");
  bool print_config = false;
  app.add_flag("--print-config", print_config, "print the effective configuration and exit");
  app.footer("Any config key can be overridden as --section.key=value.");

  auto* gen = app.add_subcommand("generate", "simulate pushes and write the dataset splits");
  auto* tf = app.add_subcommand("train-forward", "train the object-centric forward model");
  bool no_interaction = false;
  tf->add_flag("--no-interaction", no_interaction, "drop object-object edges (ablation)");
  auto* tc = app.add_subcommand("train-correction", "train the location correction model");
  auto* plan = app.add_subcommand("plan", "run one closed-loop episode with frame dumps");
  bool no_frames = false;
  plan->add_flag("--no-frames", no_frames, "skip the PPM frame dumps");
  auto* eval = app.add_subcommand("evaluate", "distance curves for every mode over the seeds");
  auto* abl = app.add_subcommand("ablate", "paired mode comparison and tracking metrics");
  bool sweep = false;
  abl->add_flag("--sweep-lambda", sweep, "also sweep the feature-cost weight");
  auto* gc = app.add_subcommand("gradcheck", "finite-difference checks of every network");
  int gc_seeds = 5;
  gc->add_option("--seeds", gc_seeds, "seeds per suite")->check(CLI::PositiveNumber);
  for (auto* sub : {gen, tf, tc, plan, eval, abl, gc}) sub->allow_extras();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ExitCode::kUsage);
  }

  try {
    ConfigStore store;
    if (config_path.empty()) {
      if (const char* env = std::getenv("PUSHPLAN_CONFIG")) config_path = env;
    }
    if (!config_path.empty()) store.load_file(config_path);
    std::vector<std::string> extras = app.remaining();
    for (auto* sub : app.get_subcommands()) {
      const auto more = sub->remaining();
      extras.insert(extras.end(), more.begin(), more.end());
    }
    for (const auto& x : extras) {
      if (x.rfind("--", 0) != 0) throw UsageError("unexpected argument '" + x + "'");
      store.apply_override(x);
    }
    validate(store.config());
    if (print_config) {
      std::cout << store.dump();
      return 0;
    }
    if (gen->parsed()) return cmd_generate(store);
    if (tf->parsed()) return cmd_train_forward(store, no_interaction);
    if (tc->parsed()) return cmd_train_correction(store);
    if (plan->parsed()) return cmd_plan(store, !no_frames);
    if (eval->parsed()) return cmd_evaluate(store);
    if (abl->parsed()) return cmd_ablate(store, sweep);
    if (gc->parsed()) return cmd_gradcheck(gc_seeds);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kData);
  }
  return 0;
}
