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

#ifndef PUSHPLAN_AUTODIFF_HPP_
#define PUSHPLAN_AUTODIFF_HPP_

// Define-by-run reverse-mode differentiation. A Tape records one forward
// pass; backward() walks it in reverse and accumulates into Parameter::grad.

#include <deque>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "pushplan/errors.hpp"
#include "pushplan/tensor.hpp"

namespace pushplan {

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  Parameter() = default;
  Parameter(std::string n, Tensor<T> v)
      : name(std::move(n)), value(std::move(v)), grad(value.rows(), value.cols()) {}
  void zero_grad() { grad.fill(T(0)); }
};

struct Var {
  int id = -1;
};

template <typename T>
class Tape {
 public:
  using Backward = std::function<void(Tape&, int self)>;

  // With record_grad=false the tape only evaluates; no closures are kept.
  explicit Tape(bool record_grad = true) : record_grad_(record_grad) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor<T> v) { return push(std::move(v), false, nullptr, {}); }

  Var parameter(Parameter<T>& p) { return push(p.value, record_grad_, &p, {}); }

  const Tensor<T>& value(Var v) const { return nodes_[check(v)].value; }

  bool needs_grad(Var v) const { return nodes_[check(v)].needs_grad; }

  // Gradient buffer of a node, allocated as zeros on first access.
  Tensor<T>& grad(Var v) { return grad(v.id); }
  Tensor<T>& grad(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.size() != n.value.size()) n.grad = Tensor<T>(n.value.rows(), n.value.cols());
    return n.grad;
  }

  // Appends an op result. The closure runs only if some input needs a grad.
  Var emit(Tensor<T> value, std::initializer_list<Var> inputs, Backward backward) {
    bool needs = false;
    if (record_grad_) {
      for (Var v : inputs) needs = needs || nodes_[check(v)].needs_grad;
    }
    return push(std::move(value), needs, nullptr, needs ? std::move(backward) : Backward{});
  }
  Var emit(Tensor<T> value, const std::vector<Var>& inputs, Backward backward) {
    bool needs = false;
    if (record_grad_) {
      for (Var v : inputs) needs = needs || nodes_[check(v)].needs_grad;
    }
    return push(std::move(value), needs, nullptr, needs ? std::move(backward) : Backward{});
  }

  void backward(Var loss) {
    const Tensor<T>& lv = value(loss);
    if (lv.rows() != 1 || lv.cols() != 1) {
      throw ShapeError("backward needs a scalar loss, got " + lv.shape_string());
    }
    grad(loss).fill(T(1));
    for (int i = loss.id; i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (!n.needs_grad || n.grad.size() == 0) continue;
      if (n.backward) n.backward(*this, i);
      if (n.param != nullptr) n.param->grad.mat() += n.grad.mat();
    }
  }

  std::size_t size() const { return nodes_.size(); }
  bool recording() const { return record_grad_; }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool needs_grad = false;
    Parameter<T>* param = nullptr;
    Backward backward;
  };

  std::size_t check(Var v) const {
    if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) {
      throw ShapeError("invalid tape variable " + std::to_string(v.id));
    }
    return static_cast<std::size_t>(v.id);
  }

  Var push(Tensor<T> v, bool needs, Parameter<T>* p, Backward b) {
    nodes_.push_back(Node{std::move(v), {}, needs, p, std::move(b)});
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  bool record_grad_;
  std::deque<Node> nodes_;
};

namespace ad {

template <typename T>
Var matmul(Tape<T>& tape, Var a, Var b) {
  const Tensor<T>& av = tape.value(a);
  const Tensor<T>& bv = tape.value(b);
  if (av.cols() != bv.rows()) {
    throw ShapeError("matmul: shape mismatch " + av.shape_string() + " x " + bv.shape_string());
  }
  Tensor<T> out(av.rows(), bv.cols());
  out.mat().noalias() = av.mat() * bv.mat();
  return tape.emit(std::move(out), {a, b}, [a, b](Tape<T>& t, int self) {
    const auto g = t.grad(self).mat();
    if (t.needs_grad(a)) t.grad(a).mat().noalias() += g * t.value(b).mat().transpose();
    if (t.needs_grad(b)) t.grad(b).mat().noalias() += t.value(a).mat().transpose() * g;
  });
}

// x + bias, with bias [1, cols] broadcast over rows.
template <typename T>
Var add_row(Tape<T>& tape, Var x, Var bias) {
  const Tensor<T>& xv = tape.value(x);
  const Tensor<T>& bv = tape.value(bias);
  if (bv.rows() != 1 || bv.cols() != xv.cols()) {
    throw ShapeError("add_row: shape mismatch " + xv.shape_string() + " + " + bv.shape_string());
  }
  Tensor<T> out = xv;
  out.mat().rowwise() += bv.mat().row(0);
  return tape.emit(std::move(out), {x, bias}, [x, bias](Tape<T>& t, int self) {
    const auto g = t.grad(self).mat();
    if (t.needs_grad(x)) t.grad(x).mat() += g;
    if (t.needs_grad(bias)) t.grad(bias).mat().row(0) += g.colwise().sum();
  });
}

template <typename T>
Var linear(Tape<T>& tape, Var x, Var weight, Var bias) {
  return add_row(tape, matmul(tape, x, weight), bias);
}

template <typename T>
Var relu(Tape<T>& tape, Var x) {
  Tensor<T> out = tape.value(x);
  for (T& v : out.values()) v = v > T(0) ? v : T(0);
  return tape.emit(std::move(out), {x}, [x](Tape<T>& t, int self) {
    const Tensor<T>& xv = t.value(x);
    const Tensor<T>& g = t.grad(self);
    Tensor<T>& gx = t.grad(x);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (xv[i] > T(0)) gx[i] += g[i];
    }
  });
}

template <typename T>
Var sigmoid(Tape<T>& tape, Var x) {
  Tensor<T> out = tape.value(x);
  for (T& v : out.values()) v = T(1) / (T(1) + std::exp(-v));
  return tape.emit(std::move(out), {x}, [x](Tape<T>& t, int self) {
    const Tensor<T>& y = t.value(Var{self});
    const Tensor<T>& g = t.grad(self);
    Tensor<T>& gx = t.grad(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * y[i] * (T(1) - y[i]);
  });
}

template <typename T>
Var add(Tape<T>& tape, Var a, Var b) {
  require_same_shape(tape.value(a), tape.value(b), "add");
  Tensor<T> out = tape.value(a);
  out.mat() += tape.value(b).mat();
  return tape.emit(std::move(out), {a, b}, [a, b](Tape<T>& t, int self) {
    if (t.needs_grad(a)) t.grad(a).mat() += t.grad(self).mat();
    if (t.needs_grad(b)) t.grad(b).mat() += t.grad(self).mat();
  });
}

template <typename T>
Var sub(Tape<T>& tape, Var a, Var b) {
  require_same_shape(tape.value(a), tape.value(b), "sub");
  Tensor<T> out = tape.value(a);
  out.mat() -= tape.value(b).mat();
  return tape.emit(std::move(out), {a, b}, [a, b](Tape<T>& t, int self) {
    if (t.needs_grad(a)) t.grad(a).mat() += t.grad(self).mat();
    if (t.needs_grad(b)) t.grad(b).mat() -= t.grad(self).mat();
  });
}

template <typename T>
Var scale(Tape<T>& tape, Var x, T s) {
  Tensor<T> out = tape.value(x);
  out.mat() *= s;
  return tape.emit(std::move(out), {x}, [x, s](Tape<T>& t, int self) {
    t.grad(x).mat() += s * t.grad(self).mat();
  });
}

// Same value, no gradient flows back.
template <typename T>
Var detach(Tape<T>& tape, Var x) {
  return tape.constant(tape.value(x));
}

template <typename T>
Var concat_cols(Tape<T>& tape, const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const int rows = tape.value(parts[0]).rows();
  int cols = 0;
  for (Var p : parts) {
    const Tensor<T>& v = tape.value(p);
    if (v.rows() != rows) {
      throw ShapeError("concat_cols: row mismatch " + tape.value(parts[0]).shape_string() +
                       " vs " + v.shape_string());
    }
    cols += v.cols();
  }
  Tensor<T> out(rows, cols);
  int c0 = 0;
  for (Var p : parts) {
    const Tensor<T>& v = tape.value(p);
    out.mat().middleCols(c0, v.cols()) = v.mat();
    c0 += v.cols();
  }
  return tape.emit(std::move(out), parts, [parts](Tape<T>& t, int self) {
    int c = 0;
    for (Var p : parts) {
      const int w = t.value(p).cols();
      if (t.needs_grad(p)) t.grad(p).mat() += t.grad(self).mat().middleCols(c, w);
      c += w;
    }
  });
}

template <typename T>
Var slice_cols(Tape<T>& tape, Var x, int begin, int end) {
  const Tensor<T>& xv = tape.value(x);
  if (begin < 0 || end > xv.cols() || begin > end) {
    throw ShapeError("slice_cols: [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") out of " + xv.shape_string());
  }
  Tensor<T> out(xv.rows(), end - begin);
  out.mat() = xv.mat().middleCols(begin, end - begin);
  return tape.emit(std::move(out), {x}, [x, begin, end](Tape<T>& t, int self) {
    t.grad(x).mat().middleCols(begin, end - begin) += t.grad(self).mat();
  });
}

// out[i] = x[index[i]]
template <typename T>
Var gather_rows(Tape<T>& tape, Var x, std::vector<int> index) {
  const Tensor<T>& xv = tape.value(x);
  Tensor<T> out(static_cast<int>(index.size()), xv.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= xv.rows()) throw ShapeError("gather_rows: index out of range");
    out.mat().row(static_cast<int>(i)) = xv.mat().row(index[i]);
  }
  return tape.emit(std::move(out), {x}, [x, index = std::move(index)](Tape<T>& t, int self) {
    const auto g = t.grad(self).mat();
    auto gx = t.grad(x).mat();
    for (std::size_t i = 0; i < index.size(); ++i) gx.row(index[i]) += g.row(static_cast<int>(i));
  });
}

// Set sum: out[index[i]] += x[i]. Each output row is the sum over its set.
template <typename T>
Var scatter_add_rows(Tape<T>& tape, Var x, std::vector<int> index, int out_rows) {
  const Tensor<T>& xv = tape.value(x);
  if (static_cast<int>(index.size()) != xv.rows()) {
    throw ShapeError("scatter_add_rows: index length " + std::to_string(index.size()) +
                     " vs " + xv.shape_string());
  }
  Tensor<T> out(out_rows, xv.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= out_rows) throw ShapeError("scatter_add_rows: index out of range");
    out.mat().row(index[i]) += xv.mat().row(static_cast<int>(i));
  }
  return tape.emit(std::move(out), {x}, [x, index = std::move(index)](Tape<T>& t, int self) {
    const auto g = t.grad(self).mat();
    auto gx = t.grad(x).mat();
    for (std::size_t i = 0; i < index.size(); ++i) gx.row(static_cast<int>(i)) += g.row(index[i]);
  });
}

template <typename T>
Var sum_all(Tape<T>& tape, Var x) {
  Tensor<T> out(1, 1, tape.value(x).mat().sum());
  return tape.emit(std::move(out), {x}, [x](Tape<T>& t, int self) {
    t.grad(x).mat().array() += t.grad(self)[0];
  });
}

// mean((a - b)^2) over all elements.
template <typename T>
Var mse(Tape<T>& tape, Var a, Var b) {
  require_same_shape(tape.value(a), tape.value(b), "mse");
  const auto diff = (tape.value(a).mat() - tape.value(b).mat()).eval();
  const T n = static_cast<T>(std::max<std::size_t>(1, tape.value(a).size()));
  Tensor<T> out(1, 1, diff.squaredNorm() / n);
  return tape.emit(std::move(out), {a, b}, [a, b, n](Tape<T>& t, int self) {
    const T g = t.grad(self)[0];
    const auto diff = (t.value(a).mat() - t.value(b).mat()).eval();
    if (t.needs_grad(a)) t.grad(a).mat() += (T(2) * g / n) * diff;
    if (t.needs_grad(b)) t.grad(b).mat() -= (T(2) * g / n) * diff;
  });
}

// mean(|a - b|) over all elements; the subgradient at 0 is 0.
template <typename T>
Var l1(Tape<T>& tape, Var a, Var b) {
  require_same_shape(tape.value(a), tape.value(b), "l1");
  const T n = static_cast<T>(std::max<std::size_t>(1, tape.value(a).size()));
  Tensor<T> out(1, 1, (tape.value(a).mat() - tape.value(b).mat()).cwiseAbs().sum() / n);
  return tape.emit(std::move(out), {a, b}, [a, b, n](Tape<T>& t, int self) {
    const T g = t.grad(self)[0] / n;
    const Tensor<T>& av = t.value(a);
    const Tensor<T>& bv = t.value(b);
    Tensor<T>* ga = t.needs_grad(a) ? &t.grad(a) : nullptr;
    Tensor<T>* gb = t.needs_grad(b) ? &t.grad(b) : nullptr;
    for (std::size_t i = 0; i < av.size(); ++i) {
      const T d = av[i] - bv[i];
      const T s = d > T(0) ? g : (d < T(0) ? -g : T(0));
      if (ga) (*ga)[i] += s;
      if (gb) (*gb)[i] -= s;
    }
  });
}

}  // namespace ad
}  // namespace pushplan

#endif  // PUSHPLAN_AUTODIFF_HPP_
