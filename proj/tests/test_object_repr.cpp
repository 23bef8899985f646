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

#include <gtest/gtest.h>

#include "pushplan/gradient_suites.hpp"
#include "pushplan/object_repr.hpp"

using namespace pushplan;

namespace {

const PixelMap kMap = PixelMap::for_table(Bounds{}, 64);

Raster noise_raster(std::uint64_t seed) {
  Raster r(kMap);
  Rng rng = make_rng(seed);
  for (float& v : r.pixels) v = static_cast<float>(uniform(rng, 0, 1));
  return r;
}

}  // namespace

TEST(Crop, UniformRasterGivesUniformPatch) {
  Raster r(kMap);
  for (float& v : r.pixels) v = 0.25f;
  const Patch p = crop(r, {32.0, 32.0}, 16);
  for (float v : p.pixels) EXPECT_EQ(v, 0.25f);
}

TEST(Crop, CornerIsThreeQuartersPadding) {
  Raster r(kMap);
  for (float& v : r.pixels) v = 1.0f;
  const Patch p = crop(r, {0.0, 0.0}, 16);
  int lit = 0;
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) {
      const bool inside = x >= 8 && y >= 8;
      EXPECT_EQ(p.at(x, y, 0), inside ? 1.0f : 0.0f);
      lit += inside;
    }
  }
  EXPECT_EQ(lit, 64);
}

TEST(Crop, PasteRestoresWindow) {
  const Raster r = noise_raster(1);
  Raster blank(kMap);
  const Vec2 b{20.3, 41.7};
  paste(blank, crop(r, b, 16), b);
  const int x0 = window_origin(b.x, 16), y0 = window_origin(b.y, 16);
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 64; ++x) {
      const bool in = x >= x0 && x < x0 + 16 && y >= y0 && y < y0 + 16;
      for (int c = 0; c < 3; ++c) EXPECT_EQ(blank.at(x, y, c), in ? r.at(x, y, c) : 0.0f);
    }
  }
}

TEST(Crop, TranslationConsistent) {
  const Raster r = noise_raster(2);
  Raster shifted(kMap);
  const int dx = 5, dy = -3;
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 64; ++x) {
      const int sx = x - dx, sy = y - dy;
      if (sx < 0 || sy < 0 || sx >= 64 || sy >= 64) continue;
      for (int c = 0; c < 3; ++c) shifted.at(x, y, c) = r.at(sx, sy, c);
    }
  }
  const Vec2 b{30.2, 28.9};
  EXPECT_EQ(crop(r, b, 16).pixels, crop(shifted, b + Vec2{dx, dy}, 16).pixels);
}

TEST(Encoder, DeterministicAndShaped) {
  ReprConfig rc;
  ParameterSet<float> ps;
  Rng rng = make_rng(3);
  const Encoder enc = Encoder::create(ps, rc, rng);
  const Raster r = noise_raster(4);
  const auto f = encode_patches(enc, ps, {crop(r, {10, 10}, 16), crop(r, {10, 10}, 16)}, 16);
  ASSERT_EQ(f.size(), 2u);
  EXPECT_EQ(f[0].size(), 8u);
  EXPECT_EQ(f[0], f[1]);
}

TEST(DecodeScene, EmptyListIsBlack) {
  ReprConfig rc;
  ParameterSet<float> ps;
  Rng rng = make_rng(3);
  const Decoder dec = Decoder::create(ps, rc, rng);
  const Raster r = decode_scene(dec, ps, {}, kMap, 16);
  for (float v : r.pixels) EXPECT_EQ(v, 0.0f);
}

TEST(DecodeScene, TransparentPatchIsBlack) {
  ReprConfig rc;
  ParameterSet<float> ps;
  Rng rng = make_rng(3);
  const Decoder dec = Decoder::create(ps, rc, rng);
  // last layer: zero weights, alpha logits far negative, colors bright
  const Linear& last = dec.mlp.layers.back();
  ps[last.weight].value.fill(0.0f);
  for (int k = 0; k < 16 * 16 * 4; ++k) ps[last.bias].value[static_cast<std::size_t>(k)] = k % 4 == 3 ? -1e4f : 5.0f;
  const Descriptors ds{{{32.0, 32.0}, std::vector<float>(8, 0.5f)}};
  const Raster r = decode_scene(dec, ps, ds, kMap, 16);
  for (float v : r.pixels) EXPECT_EQ(v, 0.0f);
}

TEST(DecodeScene, DisjointPatchesCommute) {
  ReprConfig rc;
  ParameterSet<float> ps;
  Rng rng = make_rng(5);
  const Decoder dec = Decoder::create(ps, rc, rng);
  Descriptors ds{{{12.0, 12.0}, std::vector<float>(8, 0.3f)},
                 {{45.0, 40.0}, std::vector<float>(8, -0.7f)}};
  const Raster a = decode_scene(dec, ps, ds, kMap, 16);
  std::swap(ds[0], ds[1]);
  EXPECT_EQ(a, decode_scene(dec, ps, ds, kMap, 16));
}

TEST(DecodeScene, LaterPatchWinsOnOverlap) {
  Tape<double> tape(false);
  Tensor<double> rgba(2, 16 * 16 * 4);
  for (int k = 0; k < 16 * 16; ++k) {
    rgba(0, k * 4 + 0) = 1.0;  // red, opaque
    rgba(0, k * 4 + 3) = 1.0;
    rgba(1, k * 4 + 2) = 1.0;  // blue, opaque
    rgba(1, k * 4 + 3) = 1.0;
  }
  const std::vector<Placement> where{place(0, {20, 20}, 16), place(0, {24, 20}, 16)};
  const Tensor<double>& out = tape.value(ad::composite(tape, tape.constant(rgba), where, 1, 64, 16));
  EXPECT_EQ(out(0, (20 * 64 + 22) * 3 + 2), 1.0);
  EXPECT_EQ(out(0, (20 * 64 + 22) * 3 + 0), 0.0);
}

TEST(Gradients, EncoderAndDecoderPassCheck) {
  for (std::uint64_t seed : {1, 2}) {
    EXPECT_LT(check_encoder(seed).check.max_relative_error, 1e-3);
    EXPECT_LT(check_decoder(seed).check.max_relative_error, 1e-3);
  }
}
