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

#include "pushplan/correction.hpp"
#include "pushplan/gradient_suites.hpp"

using namespace pushplan;

namespace {

const SimConfig kSim;
const PixelMap kMap = PixelMap::for_table(kSim.table, 64);

Dataset tiny_dataset(std::uint64_t seed, int episodes) {
  DataConfig data;
  data.episode_length = 12;
  Dataset d;
  for (int e = 0; e < episodes; ++e) {
    for (auto& s : collect_episode(e, 2, seed, data, kSim)) d.samples.push_back(s);
  }
  d.header = make_header(data, kSim, "train", static_cast<long>(d.samples.size()));
  return d;
}

WorldState two_objects() {
  WorldState w;
  w.objects = {{{0.3, 0.4}, 0.06, 0}, {{0.7, 0.6}, 0.06, 1}};
  return w;
}

}  // namespace

TEST(Correction, InputWidth) {
  EXPECT_EQ(correction_input_width(16), 2 * 16 * 16 * 3 + 2);
}

TEST(Correction, SubpixelOffsetInHalfOpenUnitBox) {
  EXPECT_EQ(subpixel_offset({10.0, 10.0}), (Vec2{0.0, 0.0}));
  EXPECT_EQ(subpixel_offset({10.25, 9.75}), (Vec2{0.25, -0.25}));
  EXPECT_EQ(subpixel_offset({10.5, 3.0}), (Vec2{-0.5, 0.0}));
}

TEST(Correction, TargetUndoesJitter) {
  EXPECT_EQ(correction_target({1.5, -2.0}), (Vec2{-1.5, 2.0}));
  const Vec2 back = Vec2{3.0, 4.0} + Vec2{1.5, -2.0} + correction_target({1.5, -2.0});
  EXPECT_EQ(back, (Vec2{3.0, 4.0}));
}

TEST(Correction, ZeroInitReturnsPrediction) {
  auto m = CorrectionModel<float>::create({});
  const Raster r = render(two_objects(), kMap);
  const auto locs = object_locations(two_objects(), kMap);
  std::vector<Patch> init;
  for (const Vec2& b : locs) init.push_back(crop(r, b, 16));
  const std::vector<Vec2> query{{20.0, 25.0}, {44.3, 38.7}};
  EXPECT_EQ(m.correct(init, r, query), query);
}

TEST(Correction, DisabledIsIdentityAndClampsToRaster) {
  auto m = CorrectionModel<float>::disabled({});
  for (const auto& p : m.params) {
    for (std::size_t k = 0; k < p.value.size(); ++k) ASSERT_EQ(p.value[k], 0.0f);
  }
  const Raster r = render(two_objects(), kMap);
  const Patch init = crop(r, {19.2, 25.6}, 16);
  EXPECT_EQ(m.correct(init, r, Vec2{30.0, 12.0}), (Vec2{30.0, 12.0}));
  EXPECT_EQ(m.correct(init, r, Vec2{-3.0, 70.0}), (Vec2{0.0, 64.0}));
}

TEST(Correction, BatchTargetsAreNegatedJitter) {
  const Dataset d = tiny_dataset(3, 1);
  Rng rng = make_rng(1);
  const auto ex = jittered_examples(d, 4.0, rng);
  ASSERT_EQ(ex.size(), d.samples.size() * 2);
  const auto [in, target] = correction_batch<double>(ex, episode_first_frames(d), kMap, 16);
  ASSERT_EQ(in.rows(), static_cast<int>(ex.size()));
  ASSERT_EQ(in.cols(), correction_input_width(16));
  for (std::size_t i = 0; i < ex.size(); ++i) {
    EXPECT_LE(std::abs(ex[i].jitter.x), 4.0);
    EXPECT_LE(std::abs(ex[i].jitter.y), 4.0);
    EXPECT_DOUBLE_EQ(target(static_cast<int>(i), 0), -ex[i].jitter.x);
    EXPECT_DOUBLE_EQ(target(static_cast<int>(i), 1), -ex[i].jitter.y);
  }
}

TEST(Correction, FirstFramesArePerEpisode) {
  const Dataset d = tiny_dataset(3, 3);
  const auto first = episode_first_frames(d);
  ASSERT_EQ(first.size(), 3u);
  for (const auto& [ep, s] : first) {
    EXPECT_EQ(s->episode_id, ep);
    EXPECT_EQ(s->step_id, 0);
  }
}

TEST(Correction, GradientsMatchFiniteDifferences) {
  for (std::uint64_t seed : {1, 2}) {
    const auto r = check_correction(seed);
    EXPECT_LT(r.check.max_relative_error, 1e-3) << r.worst_param;
  }
}

TEST(Correction, TrainingReducesErrorDeterministically) {
  const Dataset train = tiny_dataset(4, 3);
  const Dataset val = tiny_dataset(5, 1);
  CorrectionConfig mc;
  mc.hidden = 32;
  CorrectionTrainConfig tc;
  tc.epochs = 3;
  tc.batch_size = 16;
  const auto a = train_correction(train, val, mc, tc);
  const auto b = train_correction(train, val, mc, tc);
  ASSERT_EQ(a.log.size(), 4u);
  // the untrained residual is zero, so the error is the jitter variance (2j)^2/12
  EXPECT_NEAR(a.log[0].val_mse, 64.0 / 12.0, 1.5);
  EXPECT_LT(a.log.back().val_mse, a.log.front().val_mse);
  for (std::size_t e = 0; e < a.log.size(); ++e) EXPECT_EQ(a.log[e].val_mse, b.log[e].val_mse);
}

TEST(Correction, CheckpointRoundTrip) {
  auto m = CorrectionModel<float>::create({});
  Rng rng = make_rng(7);
  suites_detail::jitter_parameters(m.params, rng, 0.05);
  const std::string path = ::testing::TempDir() + "/corr_roundtrip.ckpt";
  save_checkpoint(path, m.to_checkpoint());
  auto r = CorrectionModel<float>::from_checkpoint(load_checkpoint(path));
  const Raster img = render(two_objects(), kMap);
  const Patch init = crop(img, {19.2, 25.6}, 16);
  EXPECT_EQ(m.correct(init, img, Vec2{21.0, 24.0}), r.correct(init, img, Vec2{21.0, 24.0}));
  EXPECT_THROW(ForwardModel<float>::from_checkpoint(m.to_checkpoint()), DataError);
}

TEST(ClosedLoop, OracleLocationsAreUsedVerbatim) {
  auto fwd = ForwardModel<float>::create({});
  auto corr = CorrectionModel<float>::disabled({});
  const WorldState w = two_objects();
  const Raster r = render(w, kMap);
  const auto locs = object_locations(w, kMap);
  const Descriptors prev = fwd.describe(r, locs);
  std::vector<Patch> init;
  for (const Vec2& b : locs) init.push_back(crop(r, b, 16));
  const std::vector<Vec2> oracle{{10.0, 11.0}, {50.0, 40.0}};
  const Descriptors next =
      closed_loop_update(prev, {{0.1, 0.1}, {0.1, 0.15}}, r, init, fwd, corr, &oracle);
  ASSERT_EQ(next.size(), 2u);
  EXPECT_EQ(next[0].b, oracle[0]);
  EXPECT_EQ(next[1].b, oracle[1]);
}

TEST(ClosedLoop, DisabledCorrectionKeepsForwardPrediction) {
  auto fwd = ForwardModel<float>::create({});
  auto corr = CorrectionModel<float>::disabled({});
  const WorldState w = two_objects();
  const Raster r = render(w, kMap);
  const auto locs = object_locations(w, kMap);
  const Descriptors prev = fwd.describe(r, locs);
  std::vector<Patch> init;
  for (const Vec2& b : locs) init.push_back(crop(r, b, 16));
  const PushAction a{{0.1, 0.1}, {0.1, 0.15}};
  const Descriptors pred = fwd.predict_step(prev, a, kMap);
  const Descriptors next = closed_loop_update(prev, a, r, init, fwd, corr);
  for (int i = 0; i < 2; ++i) EXPECT_EQ(next[i].b, pred[i].b);
}
