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

#ifndef PUSHPLAN_CONFIG_HPP_
#define PUSHPLAN_CONFIG_HPP_

// Experiment configuration: `section.key = value` lines, `#` comments.
// Every field has a default; unknown keys are rejected.

#include <cstdint>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "pushplan/correction.hpp"
#include "pushplan/dataset.hpp"
#include "pushplan/errors.hpp"
#include "pushplan/forward_model.hpp"
#include "pushplan/mpc.hpp"
#include "pushplan/planner.hpp"
#include "pushplan/sim.hpp"
#include "pushplan/training.hpp"

namespace pushplan {

struct EvalConfig {
  Mode mode = Mode::kFull;
  SceneKind scene = SceneKind::kFree1;
  int seeds = 20;
  std::uint64_t first_seed = 1;
  std::vector<Mode> modes{Mode::kFull, Mode::kAnalytic, Mode::kNoInteraction,
                          Mode::kNoCorrection};
  int tracking_episodes = 20;  // held-out episodes for location tracking error
  int tracking_steps = 10;
  std::vector<int> horizons{1, 5, 10};
  std::vector<double> lambda_sweep{0.3, 1, 10, 100};
  int threads = 1;  // episodes evaluated concurrently
};

struct PathConfig {
  std::string data_dir = "data";
  std::string forward = "runs/forward.ckpt";
  std::string no_interaction = "runs/no_interaction.ckpt";
  std::string correction = "runs/correction.ckpt";
  std::string output = "runs/out";
};

struct ExperimentConfig {
  SimConfig sim;
  DataConfig data;
  ForwardConfig model;
  TrainConfig train;
  CorrectionConfig correction;
  CorrectionTrainConfig correction_train;
  MpcConfig mpc;
  SceneConfig scene;
  EvalConfig eval;
  PathConfig paths;

  ForwardConfig forward_config(bool interaction) const {
    ForwardConfig c = model;
    c.interaction = interaction;
    return c;
  }
};

namespace config_detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
T parse_number(const std::string& v) {
  std::istringstream in(v);
  T out{};
  in >> out;
  if (in.fail() || !in.eof()) throw UsageError("not a number: '" + v + "'");
  return out;
}

inline bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw UsageError("not a boolean: '" + v + "'");
}

template <typename T>
std::string show(const T& v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

template <typename T, typename F>
std::string join(const std::vector<T>& xs, F f) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + f(xs[i]);
  return out;
}

}  // namespace config_detail

struct ConfigField {
  std::string key;
  std::string doc;
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
};

inline std::vector<ConfigField> config_fields(ExperimentConfig& c) {
  using namespace config_detail;
  std::vector<ConfigField> f;
  auto num = [&f](const std::string& key, auto& ref, const std::string& doc) {
    using V = std::remove_reference_t<decltype(ref)>;
    f.push_back({key, doc, [&ref](const std::string& v) { ref = parse_number<V>(v); },
                 [&ref] { return show(ref); }});
  };
  auto flag = [&f](const std::string& key, bool& ref, const std::string& doc) {
    f.push_back({key, doc, [&ref](const std::string& v) { ref = parse_bool(v); },
                 [&ref] { return std::string(ref ? "true" : "false"); }});
  };
  auto text = [&f](const std::string& key, std::string& ref, const std::string& doc) {
    f.push_back({key, doc, [&ref](const std::string& v) { ref = v; }, [&ref] { return ref; }});
  };

  num("sim.object_radius", c.sim.object_radius, "disc radius, world units");
  num("sim.gripper_radius", c.sim.gripper_radius, "gripper disc radius");
  num("sim.max_push", c.sim.max_push, "L_max, longest push");
  num("sim.substeps", c.sim.substeps, "M, integration substeps per push");
  num("sim.overlap_iterations", c.sim.overlap_iterations, "pairwise separation sweeps");
  num("sim.max_placement_tries", c.sim.max_placement_tries, "rejection sampling budget");
  num("sim.mid_noise", c.sim.mid_noise, "random push: std of the mid-point around an object");
  num("sim.ring_inner", c.sim.ring_inner, "random push: inner half-size of the start ring");
  num("sim.ring_outer", c.sim.ring_outer, "random push: outer half-size of the start ring");
  num("sim.max_start_tries", c.sim.max_start_tries, "random push: start rejection budget");

  num("data.episodes", c.data.episodes, "episodes in train+val");
  num("data.episode_length", c.data.episode_length, "pushes per episode");
  num("data.max_objects", c.data.max_objects, "N_max");
  num("data.one_object_fraction", c.data.one_object_fraction, "share of 1-object episodes");
  num("data.free_push_fraction", c.data.free_push_fraction, "share of untargeted pushes");
  num("data.near_fraction", c.data.near_fraction, "share of multi-object episodes placed close together");
  num("data.near_gap", c.data.near_gap, "max gap between neighbours in those episodes");
  num("data.train_fraction", c.data.train_fraction, "train share of episodes");
  num("data.test_episodes", c.data.test_episodes, "episodes per test file");
  num("data.raster_size", c.data.raster_size, "G, raster side in pixels");
  num("data.seed", c.data.seed, "generation seed");

  num("model.window", c.model.repr.window, "W, patch side in pixels");
  num("model.feature_dim", c.model.repr.feature_dim, "d, feature size");
  num("model.repr_hidden", c.model.repr.hidden, "encoder/decoder hidden width");
  num("model.hidden", c.model.hidden, "interaction network width");
  num("model.rounds", c.model.rounds, "R, message-passing rounds");
  num("model.geom_scale", c.model.geom_scale, "scale of relative geometry inputs");
  num("model.seed", c.model.seed, "initialization seed");

  num("train.lr", c.train.lr, "Adam learning rate");
  num("train.lr_decay", c.train.lr_decay, "per-epoch learning-rate factor");
  num("train.batch_size", c.train.batch_size, "samples per step");
  num("train.epochs", c.train.epochs, "passes over the training split");
  num("train.seed", c.train.seed, "shuffling seed");
  num("train.recon_weight", c.train.weights.recon, "reconstruction term");
  num("train.pixel_weight", c.train.weights.pred_pixel, "predicted-frame pixel term");
  num("train.state_weight", c.train.weights.pred_state, "predicted-state term");
  num("train.location_weight", c.train.weights.location, "extra factor on the location part");

  num("correction.hidden", c.correction.hidden, "correction MLP width");
  num("correction.jitter", c.correction.jitter, "training jitter, pixels");
  num("correction.seed", c.correction.seed, "initialization seed");
  num("correction.lr", c.correction_train.lr, "Adam learning rate");
  num("correction.lr_decay", c.correction_train.lr_decay, "per-epoch learning-rate factor");
  num("correction.batch_size", c.correction_train.batch_size, "samples per step");
  num("correction.epochs", c.correction_train.epochs, "passes over the training split");
  num("correction.train_seed", c.correction_train.seed, "jitter and shuffling seed");

  num("cem.samples", c.mpc.cem.samples, "S");
  num("cem.elites", c.mpc.cem.elites, "K");
  num("cem.horizon", c.mpc.cem.horizon, "H");
  num("cem.iterations", c.mpc.cem.iterations, "tau");
  num("cem.lambda", c.mpc.cem.lambda, "feature-cost weight");
  num("cem.max_push", c.mpc.cem.max_push, "v_max, displacement bound per step");
  num("cem.sigma_start", c.mpc.cem.sigma_start, "initial std of push starts");
  num("cem.sigma_disp", c.mpc.cem.sigma_disp, "initial std of displacements");
  num("cem.sigma_floor", c.mpc.cem.sigma_floor, "lower bound on every std");
  num("cem.chunk", c.mpc.cem.chunk, "samples per evaluation chunk");
  num("cem.threads", c.mpc.cem.threads, "threads for rollout evaluation");

  num("mpc.steps", c.mpc.steps, "T_max");
  flag("mpc.warm_start", c.mpc.warm_start, "reuse the shifted previous solution");
  flag("mpc.oracle_locations", c.mpc.oracle_locations, "learned modes track simulator locations");

  num("scene.distance", c.scene.distance, "initial object-to-goal distance");
  num("scene.margin", c.scene.margin, "min distance of centers from the table edge");
  num("scene.blocker_lo", c.scene.blocker_lo, "hard scene: blocker position range start");
  num("scene.blocker_hi", c.scene.blocker_hi, "hard scene: blocker position range end");

  f.push_back({"eval.mode", "planning mode for plan",
               [&c](const std::string& v) { c.eval.mode = parse_mode(v); },
               [&c] { return mode_name(c.eval.mode); }});
  f.push_back({"eval.scene", "scene family: free-1obj, free-2obj, hard",
               [&c](const std::string& v) { c.eval.scene = parse_scene(v); },
               [&c] { return scene_name(c.eval.scene); }});
  num("eval.seeds", c.eval.seeds, "episodes per mode");
  num("eval.first_seed", c.eval.first_seed, "seeds are first_seed .. first_seed+seeds-1");
  f.push_back({"eval.modes", "comma-separated modes for evaluate/ablate",
               [&c](const std::string& v) {
                 c.eval.modes.clear();
                 for (const auto& s : split(v, ',')) c.eval.modes.push_back(parse_mode(s));
               },
               [&c] { return join(c.eval.modes, mode_name); }});
  num("eval.tracking_episodes", c.eval.tracking_episodes, "held-out episodes for tracking error");
  num("eval.tracking_steps", c.eval.tracking_steps, "closed-loop tracking length");
  f.push_back({"eval.horizons", "open-loop horizons",
               [&c](const std::string& v) {
                 c.eval.horizons.clear();
                 for (const auto& s : split(v, ',')) c.eval.horizons.push_back(parse_number<int>(s));
               },
               [&c] { return join(c.eval.horizons, [](int h) { return std::to_string(h); }); }});
  f.push_back({"eval.lambda_sweep", "feature weights for the sensitivity sweep",
               [&c](const std::string& v) {
                 c.eval.lambda_sweep.clear();
                 for (const auto& s : split(v, ',')) c.eval.lambda_sweep.push_back(parse_number<double>(s));
               },
               [&c] { return join(c.eval.lambda_sweep, show<double>); }});
  num("eval.threads", c.eval.threads, "episodes run concurrently");

  text("paths.data_dir", c.paths.data_dir, "dataset directory");
  text("paths.forward", c.paths.forward, "interaction model checkpoint");
  text("paths.no_interaction", c.paths.no_interaction, "no-interaction model checkpoint");
  text("paths.correction", c.paths.correction, "correction model checkpoint");
  text("paths.output", c.paths.output, "output directory");
  return f;
}

inline void validate(const ExperimentConfig& c) {
  const auto& cem = c.mpc.cem;
  if (cem.elites < 1 || cem.elites > cem.samples || cem.horizon < 1 || cem.iterations < 1 ||
      cem.lambda < 0 || cem.max_push <= 0 || cem.sigma_floor <= 0 || cem.chunk < 1 ||
      cem.threads < 1) {
    throw UsageError("invalid cem settings (need 1 <= elites <= samples, positive sizes)");
  }
  if (c.data.raster_size < 8 || c.model.repr.window < 2 || c.model.repr.feature_dim < 1) {
    throw UsageError("invalid raster/model sizes");
  }
  if (c.sim.max_push <= 0 || c.sim.substeps < 1 || c.mpc.steps < 1) {
    throw UsageError("invalid simulator/mpc settings");
  }
  if (c.eval.seeds < 1 || c.eval.threads < 1) throw UsageError("invalid eval settings");
}

class ConfigStore {
 public:
  ConfigStore() : fields_(config_fields(cfg_)) {}
  ConfigStore(const ConfigStore&) = delete;
  ConfigStore& operator=(const ConfigStore&) = delete;

  ExperimentConfig& config() { return cfg_; }
  const ExperimentConfig& config() const { return cfg_; }
  const std::vector<ConfigField>& fields() const { return fields_; }

  void set(const std::string& key, const std::string& value) {
    for (auto& f : fields_) {
      if (f.key == key) {
        f.set(value);
        return;
      }
    }
    throw UsageError("unknown config key '" + key + "'");
  }

  std::string get(const std::string& key) const {
    for (const auto& f : fields_) {
      if (f.key == key) return f.get();
    }
    throw UsageError("unknown config key '" + key + "'");
  }

  void parse(const std::string& text, const std::string& origin = "<config>") {
    std::istringstream in(text);
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
      ++n;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.resize(hash);
      line = config_detail::trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      const std::string where = origin + ":" + std::to_string(n) + ": ";
      if (eq == std::string::npos) throw UsageError(where + "expected key = value");
      try {
        set(config_detail::trim(line.substr(0, eq)), config_detail::trim(line.substr(eq + 1)));
      } catch (const UsageError& e) {
        throw UsageError(where + e.what());
      }
    }
    sources_.push_back({origin, text});
  }

  void load_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read config file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    parse(ss.str(), path);
  }

  // `--section.key=value`
  void apply_override(const std::string& flag) {
    std::string s = flag;
    if (s.rfind("--", 0) == 0) s = s.substr(2);
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw UsageError("override '" + flag + "' needs key=value");
    set(s.substr(0, eq), s.substr(eq + 1));
    overrides_.push_back(s);
  }

  // Every effective value, one per line; parsing this back reproduces the
  // configuration exactly.
  std::string dump() const {
    std::string out;
    std::string section;
    for (const auto& f : fields_) {
      const std::string sec = f.key.substr(0, f.key.find('.'));
      if (sec != section) {
        if (!section.empty()) out += "\n";
        section = sec;
      }
      out += f.key + " = " + f.get() + "  # " + f.doc + "\n";
    }
    return out;
  }

  // Verbatim inputs followed by the effective values.
  std::string echo() const {
    std::string out;
    for (const auto& [origin, text] : sources_) {
      out += "# source: " + origin + "\n";
      std::istringstream in(text);
      std::string line;
      while (std::getline(in, line)) out += "#| " + line + "\n";
    }
    for (const auto& o : overrides_) out += "# override: --" + o + "\n";
    out += "\n" + dump();
    return out;
  }

 private:
  ExperimentConfig cfg_;
  std::vector<ConfigField> fields_;
  std::vector<std::pair<std::string, std::string>> sources_;
  std::vector<std::string> overrides_;
};

}  // namespace pushplan

#endif  // PUSHPLAN_CONFIG_HPP_
