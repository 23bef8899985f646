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

#ifndef PUSHPLAN_OBJECT_REPR_HPP_
#define PUSHPLAN_OBJECT_REPR_HPP_

// Object-centric scene representation: each object is a pixel location plus
// a learned feature of the window around it. The encoder reads a fixed-size
// crop; the decoder paints RGBA patches back onto a canvas.

#include <cmath>
#include <memory>
#include <vector>

#include "pushplan/autodiff.hpp"
#include "pushplan/nn.hpp"
#include "pushplan/raster.hpp"
#include "pushplan/tensor.hpp"

namespace pushplan {

struct ReprConfig {
  int window = 16;      // W
  int feature_dim = 8;  // d
  int hidden = 64;
};

struct ObjectDescriptor {
  Vec2 b;                // pixel location
  std::vector<float> f;  // implicit feature
  bool operator==(const ObjectDescriptor&) const = default;
};

using Descriptors = std::vector<ObjectDescriptor>;

// W x W x 3 window, zero outside the raster.
struct Patch {
  int size = 0;
  std::vector<float> pixels;

  float at(int x, int y, int c) const {
    return pixels[(static_cast<std::size_t>(y) * size + x) * 3 + c];
  }
};

inline int window_origin(double coord, int window) {
  return static_cast<int>(std::floor(coord + 0.5)) - window / 2;
}

inline Patch crop(const Raster& r, const Vec2& b, int window) {
  Patch p{window, std::vector<float>(static_cast<std::size_t>(window) * window * 3, 0.0f)};
  const int x0 = window_origin(b.x, window);
  const int y0 = window_origin(b.y, window);
  const int g = r.size();
  for (int y = 0; y < window; ++y) {
    const int ry = y0 + y;
    if (ry < 0 || ry >= g) continue;
    for (int x = 0; x < window; ++x) {
      const int rx = x0 + x;
      if (rx < 0 || rx >= g) continue;
      for (int c = 0; c < 3; ++c) {
        p.pixels[(static_cast<std::size_t>(y) * window + x) * 3 + c] = r.at(rx, ry, c);
      }
    }
  }
  return p;
}

// Writes the in-raster part of `p` back at the window for `b`.
inline void paste(Raster& r, const Patch& p, const Vec2& b) {
  const int x0 = window_origin(b.x, p.size);
  const int y0 = window_origin(b.y, p.size);
  for (int y = 0; y < p.size; ++y) {
    for (int x = 0; x < p.size; ++x) {
      const int rx = x0 + x, ry = y0 + y;
      if (rx < 0 || ry < 0 || rx >= r.size() || ry >= r.size()) continue;
      for (int c = 0; c < 3; ++c) r.at(rx, ry, c) = p.at(x, y, c);
    }
  }
}

template <typename T>
Tensor<T> stack_patches(const std::vector<Patch>& patches, int window) {
  const int width = window * window * 3;
  Tensor<T> out(static_cast<int>(patches.size()), width);
  for (std::size_t i = 0; i < patches.size(); ++i) {
    for (int k = 0; k < width; ++k) out(static_cast<int>(i), k) = static_cast<T>(patches[i].pixels[k]);
  }
  return out;
}

struct Encoder {
  Mlp mlp;

  template <typename T>
  static Encoder create(ParameterSet<T>& ps, const ReprConfig& cfg, Rng& rng) {
    const int in = cfg.window * cfg.window * 3;
    return {Mlp::create(ps, "encoder", {in, cfg.hidden, cfg.feature_dim}, rng)};
  }

  // patches [n, W*W*3] -> features [n, d]
  template <typename T>
  Var operator()(Tape<T>& tape, ParameterSet<T>& ps, Var patches) const {
    return mlp(tape, ps, patches);
  }
};

struct Decoder {
  Mlp mlp;

  template <typename T>
  static Decoder create(ParameterSet<T>& ps, const ReprConfig& cfg, Rng& rng) {
    const int out = cfg.window * cfg.window * 4;
    return {Mlp::create(ps, "decoder", {cfg.feature_dim, cfg.hidden, out}, rng)};
  }

  // features [n, d] -> RGBA patches [n, W*W*4] in [0, 1]
  template <typename T>
  Var operator()(Tape<T>& tape, ParameterSet<T>& ps, Var features) const {
    return ad::sigmoid(tape, mlp(tape, ps, features));
  }
};

// Where a decoded patch lands: canvas index and window origin in pixels.
struct Placement {
  int canvas = 0;
  int x0 = 0;
  int y0 = 0;
};

inline Placement place(int canvas, const Vec2& b, int window) {
  return {canvas, window_origin(b.x, window), window_origin(b.y, window)};
}

namespace ad {

// "Over" compositing of RGBA patches onto black canvases, in row order.
// rgba [n, W*W*4]  ->  canvases [n_canvas, G*G*3]
template <typename T>
Var composite(Tape<T>& tape, Var rgba, std::vector<Placement> where, int n_canvas, int g,
              int window) {
  const Tensor<T>& src = tape.value(rgba);
  if (src.rows() != static_cast<int>(where.size()) || src.cols() != window * window * 4) {
    throw ShapeError("composite: rgba " + src.shape_string() + " for " +
                     std::to_string(where.size()) + " placements of window " +
                     std::to_string(window));
  }
  Tensor<T> out(n_canvas, g * g * 3);
  // canvas values under each patch before it was painted, for backward
  auto under = std::make_shared<std::vector<T>>(where.size() * window * window * 3, T(0));
  for (std::size_t n = 0; n < where.size(); ++n) {
    const Placement& pl = where[n];
    for (int y = 0; y < window; ++y) {
      const int cy = pl.y0 + y;
      if (cy < 0 || cy >= g) continue;
      for (int x = 0; x < window; ++x) {
        const int cx = pl.x0 + x;
        if (cx < 0 || cx >= g) continue;
        const std::size_t s = (static_cast<std::size_t>(y) * window + x) * 4;
        const T a = src(static_cast<int>(n), static_cast<int>(s + 3));
        for (int c = 0; c < 3; ++c) {
          T& dst = out(pl.canvas, (cy * g + cx) * 3 + c);
          (*under)[(n * window * window + static_cast<std::size_t>(y) * window + x) * 3 + c] = dst;
          dst = a * src(static_cast<int>(n), static_cast<int>(s + c)) + (T(1) - a) * dst;
        }
      }
    }
  }
  return tape.emit(std::move(out), {rgba},
                   [rgba, where = std::move(where), under, g, window](Tape<T>& t, int self) {
    Tensor<T> gcanvas = t.grad(self);  // mutated while unwinding
    const Tensor<T>& src = t.value(rgba);
    Tensor<T>& gsrc = t.grad(rgba);
    for (std::size_t n = where.size(); n-- > 0;) {
      const Placement& pl = where[n];
      for (int y = 0; y < window; ++y) {
        const int cy = pl.y0 + y;
        if (cy < 0 || cy >= g) continue;
        for (int x = 0; x < window; ++x) {
          const int cx = pl.x0 + x;
          if (cx < 0 || cx >= g) continue;
          const std::size_t s = (static_cast<std::size_t>(y) * window + x) * 4;
          const T a = src(static_cast<int>(n), static_cast<int>(s + 3));
          T ga = T(0);
          for (int c = 0; c < 3; ++c) {
            T& gd = gcanvas(pl.canvas, (cy * g + cx) * 3 + c);
            const T below =
                (*under)[(n * window * window + static_cast<std::size_t>(y) * window + x) * 3 + c];
            gsrc(static_cast<int>(n), static_cast<int>(s + c)) += a * gd;
            ga += gd * (src(static_cast<int>(n), static_cast<int>(s + c)) - below);
            gd *= (T(1) - a);
          }
          gsrc(static_cast<int>(n), static_cast<int>(s + 3)) += ga;
        }
      }
    }
  });
}

}  // namespace ad

template <typename T>
Tensor<T> features_tensor(const Descriptors& ds, int d) {
  Tensor<T> out(static_cast<int>(ds.size()), d);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (int k = 0; k < d; ++k) out(static_cast<int>(i), k) = static_cast<T>(ds[i].f[k]);
  }
  return out;
}

// Inference helpers on a parameter snapshot.
template <typename T>
std::vector<std::vector<float>> encode_patches(const Encoder& enc, ParameterSet<T>& ps,
                                               const std::vector<Patch>& patches, int window) {
  std::vector<std::vector<float>> out;
  if (patches.empty()) return out;
  Tape<T> tape(false);
  const Tensor<T>& f = tape.value(enc(tape, ps, tape.constant(stack_patches<T>(patches, window))));
  for (int i = 0; i < f.rows(); ++i) {
    std::vector<float> row(static_cast<std::size_t>(f.cols()));
    for (int k = 0; k < f.cols(); ++k) row[static_cast<std::size_t>(k)] = static_cast<float>(f(i, k));
    out.push_back(std::move(row));
  }
  return out;
}

// Descriptors for known locations on an observed raster.
template <typename T>
Descriptors describe(const Encoder& enc, ParameterSet<T>& ps, const Raster& r,
                     const std::vector<Vec2>& locations, int window) {
  std::vector<Patch> patches;
  for (const Vec2& b : locations) patches.push_back(crop(r, b, window));
  const auto feats = encode_patches(enc, ps, patches, window);
  Descriptors out;
  for (std::size_t i = 0; i < locations.size(); ++i) out.push_back({locations[i], feats[i]});
  return out;
}

template <typename T>
Raster decode_scene(const Decoder& dec, ParameterSet<T>& ps, const Descriptors& ds,
                    const PixelMap& map, int window) {
  Raster r(map);
  if (ds.empty()) return r;
  const int d = static_cast<int>(ds.front().f.size());
  Tape<T> tape(false);
  std::vector<Placement> where;
  for (const auto& x : ds) where.push_back(place(0, x.b, window));
  const Var rgba = dec(tape, ps, tape.constant(features_tensor<T>(ds, d)));
  const Tensor<T>& canvas =
      tape.value(ad::composite(tape, rgba, std::move(where), 1, map.size, window));
  for (std::size_t i = 0; i < r.pixels.size(); ++i) r.pixels[i] = static_cast<float>(canvas[i]);
  return r;
}

}  // namespace pushplan

#endif  // PUSHPLAN_OBJECT_REPR_HPP_
