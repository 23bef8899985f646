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

#ifndef PUSHPLAN_RASTER_HPP_
#define PUSHPLAN_RASTER_HPP_

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "pushplan/errors.hpp"
#include "pushplan/sim.hpp"

namespace pushplan {

// Affine world <-> pixel map. Pixel (i, j) covers [i, i+1) x [j, j+1); pixel
// rows follow world +y.
struct PixelMap {
  int size = 64;  // G
  Vec2 origin{0.0, 0.0};
  double pixels_per_unit = 64.0;

  static PixelMap for_table(const Bounds& table, int size) {
    return {size, table.lo, size / std::max(table.width(), table.height())};
  }
  Vec2 to_pixel(const Vec2& w) const { return (w - origin) * pixels_per_unit; }
  Vec2 to_world(const Vec2& p) const { return p / pixels_per_unit + origin; }
  // Pixel coordinates scaled to [0, 1] over the raster.
  Vec2 normalize(const Vec2& p) const { return p / size; }
  Vec2 denormalize(const Vec2& n) const { return n * size; }
  bool operator==(const PixelMap&) const = default;
};

// G x G x 3 image, row-major with interleaved channels.
struct Raster {
  PixelMap map;
  std::vector<float> pixels;

  Raster() = default;
  explicit Raster(const PixelMap& m)
      : map(m), pixels(static_cast<std::size_t>(m.size) * m.size * 3, 0.0f) {}

  int size() const { return map.size; }
  float& at(int x, int y, int c) { return pixels[(static_cast<std::size_t>(y) * map.size + x) * 3 + c]; }
  float at(int x, int y, int c) const {
    return pixels[(static_cast<std::size_t>(y) * map.size + x) * 3 + c];
  }
  bool operator==(const Raster&) const = default;
};

inline const std::array<float, 3>& palette_color(int color_index) {
  static const std::array<std::array<float, 3>, 8> kPalette = {{
      {0.90f, 0.20f, 0.20f},
      {0.20f, 0.45f, 0.95f},
      {0.95f, 0.80f, 0.10f},
      {0.20f, 0.80f, 0.30f},
      {0.80f, 0.30f, 0.90f},
      {0.10f, 0.80f, 0.85f},
      {0.95f, 0.55f, 0.15f},
      {0.85f, 0.85f, 0.85f},
  }};
  return kPalette[static_cast<std::size_t>(color_index) % kPalette.size()];
}

// Filled discs over a black background with a one-pixel coverage ramp at the
// rim. Objects are painted in index order.
inline Raster render(const WorldState& world, const PixelMap& map) {
  Raster r(map);
  for (const Object& o : world.objects) {
    const Vec2 c = map.to_pixel(o.center);
    const double rad = o.radius * map.pixels_per_unit;
    const auto& color = palette_color(o.color_index);
    const int x0 = std::max(0, static_cast<int>(std::floor(c.x - rad - 1)));
    const int x1 = std::min(map.size - 1, static_cast<int>(std::ceil(c.x + rad + 1)));
    const int y0 = std::max(0, static_cast<int>(std::floor(c.y - rad - 1)));
    const int y1 = std::min(map.size - 1, static_cast<int>(std::ceil(c.y + rad + 1)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double d = std::hypot(x + 0.5 - c.x, y + 0.5 - c.y);
        const float cover = static_cast<float>(std::clamp(rad + 0.5 - d, 0.0, 1.0));
        if (cover <= 0.0f) continue;
        for (int ch = 0; ch < 3; ++ch) {
          float& p = r.at(x, y, ch);
          p = cover * color[ch] + (1.0f - cover) * p;
        }
      }
    }
  }
  return r;
}

// Ground-truth pixel locations in object-index order; the index is the
// cross-time correspondence.
inline std::vector<Vec2> object_locations(const WorldState& world, const PixelMap& map) {
  std::vector<Vec2> out;
  out.reserve(world.objects.size());
  for (const Object& o : world.objects) out.push_back(map.to_pixel(o.center));
  return out;
}

// Binary portable pixmap (P6).
inline void write_ppm(const std::string& path, const Raster& r) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << "P6\n" << r.size() << " " << r.size() << "\n255\n";
  // flip so +y is up in viewers
  for (int y = r.size() - 1; y >= 0; --y) {
    for (int x = 0; x < r.size(); ++x) {
      for (int c = 0; c < 3; ++c) {
        const float v = std::clamp(r.at(x, y, c), 0.0f, 1.0f);
        out.put(static_cast<char>(static_cast<std::uint8_t>(std::lround(v * 255.0f))));
      }
    }
  }
  if (!out) throw DataError("failed writing " + path);
}

}  // namespace pushplan

#endif  // PUSHPLAN_RASTER_HPP_
