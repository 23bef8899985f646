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

#ifndef PUSHPLAN_NN_HPP_
#define PUSHPLAN_NN_HPP_

// Parameter containers, MLP blocks, Adam, and the checkpoint file format.
//
// Checkpoint layout:
//   pushplan-checkpoint 1
//   meta <key>=<value>            (zero or more; config echo)
//   tensor <name> <rows> <cols>   (one per tensor, payload order)
//   end_header
//   little-endian float32 payload, tensors in header order, row-major

#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "pushplan/autodiff.hpp"
#include "pushplan/errors.hpp"
#include "pushplan/rng.hpp"
#include "pushplan/tensor.hpp"

namespace pushplan {

template <typename T>
class ParameterSet {
 public:
  int add(const std::string& name, Tensor<T> init) {
    if (find(name) >= 0) throw UsageError("duplicate parameter " + name);
    params_.emplace_back(name, std::move(init));
    return static_cast<int>(params_.size()) - 1;
  }

  int find(const std::string& name) const {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      if (params_[i].name == name) return static_cast<int>(i);
    }
    return -1;
  }

  Parameter<T>& operator[](int i) { return params_[static_cast<std::size_t>(i)]; }
  const Parameter<T>& operator[](int i) const { return params_[static_cast<std::size_t>(i)]; }
  int size() const { return static_cast<int>(params_.size()); }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  std::size_t element_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
  }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  bool all_finite() const {
    for (const auto& p : params_) {
      if (!p.value.all_finite()) return false;
    }
    return true;
  }

  template <typename U>
  ParameterSet<U> cast() const {
    ParameterSet<U> out;
    for (const auto& p : params_) out.add(p.name, p.value.template cast<U>());
    return out;
  }

 private:
  std::vector<Parameter<T>> params_;
};

// Affine layer y = x W + b, W stored [in, out].
struct Linear {
  int weight = -1;
  int bias = -1;
  int in = 0;
  int out = 0;

  enum class Init { kHe, kZero };

  template <typename T>
  static Linear create(ParameterSet<T>& ps, const std::string& name, int in, int out, Rng& rng,
                       Init init = Init::kHe) {
    Tensor<T> w(in, out);
    if (init == Init::kHe) {
      const double limit = std::sqrt(6.0 / in);
      for (std::size_t i = 0; i < w.size(); ++i) w[i] = static_cast<T>(uniform(rng, -limit, limit));
    }
    Linear l;
    l.weight = ps.add(name + ".weight", std::move(w));
    l.bias = ps.add(name + ".bias", Tensor<T>(1, out));
    l.in = in;
    l.out = out;
    return l;
  }

  template <typename T>
  Var operator()(Tape<T>& tape, ParameterSet<T>& ps, Var x) const {
    return ad::linear(tape, x, tape.parameter(ps[weight]), tape.parameter(ps[bias]));
  }
};

// Linear layers with ReLU between them (none after the last).
struct Mlp {
  std::vector<Linear> layers;

  template <typename T>
  static Mlp create(ParameterSet<T>& ps, const std::string& name, std::vector<int> widths,
                    Rng& rng, bool zero_last = false) {
    Mlp m;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
      const bool last = i + 2 == widths.size();
      m.layers.push_back(Linear::create(ps, name + "." + std::to_string(i), widths[i],
                                        widths[i + 1], rng,
                                        last && zero_last ? Linear::Init::kZero
                                                          : Linear::Init::kHe));
    }
    return m;
  }

  int in() const { return layers.front().in; }
  int out() const { return layers.back().out; }

  template <typename T>
  Var operator()(Tape<T>& tape, ParameterSet<T>& ps, Var x) const {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      x = layers[i](tape, ps, x);
      if (i + 1 < layers.size()) x = ad::relu(tape, x);
    }
    return x;
  }
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  std::vector<Tensor<T>> m;
  std::vector<Tensor<T>> v;
  long step = 0;

  bool all_finite() const {
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (!m[i].all_finite() || !v[i].all_finite()) return false;
    }
    return true;
  }
};

// One bias-corrected Adam update from the gradients in `ps`.
template <typename T>
void adam_step(ParameterSet<T>& ps, AdamState<T>& state, const AdamConfig& cfg) {
  if (state.m.empty()) {
    for (const auto& p : ps) {
      state.m.emplace_back(p.value.rows(), p.value.cols());
      state.v.emplace_back(p.value.rows(), p.value.cols());
    }
  }
  if (static_cast<int>(state.m.size()) != ps.size()) {
    throw ShapeError("adam_step: state has " + std::to_string(state.m.size()) +
                     " slots for " + std::to_string(ps.size()) + " parameters");
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (int i = 0; i < ps.size(); ++i) {
    Parameter<T>& p = ps[i];
    Tensor<T>& m = state.m[static_cast<std::size_t>(i)];
    Tensor<T>& v = state.v[static_cast<std::size_t>(i)];
    require_same_shape(p.value, p.grad, "adam_step");
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const double g = p.grad[k];
      m[k] = static_cast<T>(cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g);
      v[k] = static_cast<T>(cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g * g);
      const double mhat = m[k] / c1;
      const double vhat = v[k] / c2;
      p.value[k] = static_cast<T>(p.value[k] - cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
    }
  }
}

struct Checkpoint {
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<std::pair<std::string, Tensor<float>>> tensors;

  void add_meta(const std::string& key, const std::string& value) { meta.emplace_back(key, value); }

  std::string meta_value(const std::string& key) const {
    for (const auto& [k, v] : meta) {
      if (k == key) return v;
    }
    throw DataError("checkpoint lacks meta key '" + key + "'");
  }

  template <typename T>
  void add_parameters(const std::string& prefix, const ParameterSet<T>& ps) {
    for (const auto& p : ps) tensors.emplace_back(prefix + p.name, p.value.template cast<float>());
  }

  // Copies every tensor named prefix+name into `ps`; shapes must match.
  template <typename T>
  void load_parameters(const std::string& prefix, ParameterSet<T>& ps) const {
    for (auto& p : ps) {
      const std::string name = prefix + p.name;
      const Tensor<float>* found = nullptr;
      for (const auto& [n, t] : tensors) {
        if (n == name) found = &t;
      }
      if (found == nullptr) throw DataError("checkpoint lacks tensor '" + name + "'");
      if (!found->same_shape(p.value.template cast<float>())) {
        throw DataError("checkpoint tensor '" + name + "' has shape " + found->shape_string() +
                        ", expected " + p.value.shape_string());
      }
      p.value = found->template cast<T>();
    }
  }
};

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint " + tmp);
    out << "pushplan-checkpoint 1\n";
    for (const auto& [k, v] : ck.meta) out << "meta " << k << "=" << v << "\n";
    for (const auto& [n, t] : ck.tensors) out << "tensor " << n << " " << t.rows() << " " << t.cols() << "\n";
    out << "end_header\n";
    for (const auto& [n, t] : ck.tensors) {
      for (float v : t.values()) {
        const auto bits = std::bit_cast<std::uint32_t>(v);
        char b[4];
        for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xFFu);
        out.write(b, 4);
      }
    }
    if (!out) throw DataError("failed writing checkpoint " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path);
  std::string line;
  if (!std::getline(in, line) || line != "pushplan-checkpoint 1") {
    throw DataError(path + ": not a pushplan checkpoint");
  }
  Checkpoint ck;
  std::vector<std::pair<std::string, std::pair<int, int>>> shapes;
  bool terminated = false;
  while (std::getline(in, line)) {
    if (line == "end_header") {
      terminated = true;
      break;
    }
    if (line.rfind("meta ", 0) == 0) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw DataError(path + ": bad meta line");
      ck.add_meta(line.substr(5, eq - 5), line.substr(eq + 1));
    } else if (line.rfind("tensor ", 0) == 0) {
      std::istringstream ss(line.substr(7));
      std::string name;
      int r = 0, c = 0;
      if (!(ss >> name >> r >> c) || r < 0 || c < 0) throw DataError(path + ": bad tensor line");
      shapes.push_back({name, {r, c}});
    } else {
      throw DataError(path + ": unexpected header line '" + line + "'");
    }
  }
  if (!terminated) throw DataError(path + ": header not terminated");
  for (const auto& [name, rc] : shapes) {
    Tensor<float> t(rc.first, rc.second);
    for (std::size_t i = 0; i < t.size(); ++i) {
      unsigned char b[4];
      if (!in.read(reinterpret_cast<char*>(b), 4)) {
        throw DataError(path + ": truncated payload in tensor '" + name + "'");
      }
      std::uint32_t bits = 0;
      for (int k = 0; k < 4; ++k) bits |= static_cast<std::uint32_t>(b[k]) << (8 * k);
      t[i] = std::bit_cast<float>(bits);
    }
    ck.tensors.emplace_back(name, std::move(t));
  }
  return ck;
}

}  // namespace pushplan

#endif  // PUSHPLAN_NN_HPP_
