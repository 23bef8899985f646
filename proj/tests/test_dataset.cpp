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

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "pushplan/dataset.hpp"

using namespace pushplan;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("pushplan_test_dataset_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

DataConfig small_config() {
  DataConfig d;
  d.episodes = 10;
  d.episode_length = 60;
  d.test_episodes = 3;
  d.seed = 4;
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Collect, RecordCountMatchesEpisodes) {
  const fs::path dir = scratch_dir("count");
  const DataConfig d = small_config();
  std::vector<int> ids(10), counts(10, 2);
  for (int i = 0; i < 10; ++i) ids[static_cast<std::size_t>(i)] = i;
  collect((dir / "a.pds").string(), "train", ids, counts, d.seed, d, SimConfig{});
  const Dataset ds = load_dataset((dir / "a.pds").string());
  EXPECT_EQ(ds.header.record_count, 600);
  EXPECT_EQ(ds.samples.size(), 600u);
  EXPECT_EQ(ds.header.format_version, 1);
  EXPECT_FALSE(fs::exists(dir / "a.pds.tmp"));
}

TEST(Collect, FullScaleArithmetic) {
  DataConfig d;
  d.episodes = 10000;
  d.episode_length = 60;
  EXPECT_EQ(static_cast<long>(d.episodes) * d.episode_length, 600000);
}

TEST(Collect, ByteIdenticalAcrossRuns) {
  const fs::path a = scratch_dir("det_a"), b = scratch_dir("det_b");
  generate_splits(a.string(), small_config(), SimConfig{});
  generate_splits(b.string(), small_config(), SimConfig{});
  for (const char* f : {"train.pds", "val.pds", "test-1obj.pds", "test-2obj.pds"}) {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
}

TEST(Load, RoundTripIsExact) {
  const fs::path dir = scratch_dir("roundtrip");
  const DataConfig d = small_config();
  const auto samples = collect_episode(0, 2, d.seed, d, SimConfig{});
  Dataset ds{make_header(d, SimConfig{}, "train", static_cast<long>(samples.size())), samples};
  write_dataset((dir / "r.pds").string(), ds);
  const Dataset back = load_dataset((dir / "r.pds").string());
  ASSERT_EQ(back.samples.size(), samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) EXPECT_EQ(back.samples[i], samples[i]);
  EXPECT_EQ(back.header.split_tag, "train");
  EXPECT_EQ(back.header.raster_size, 64);
}

TEST(Load, EmptyFileIsFine) {
  const fs::path dir = scratch_dir("empty");
  Dataset ds{make_header(small_config(), SimConfig{}, "val", 0), {}};
  write_dataset((dir / "e.pds").string(), ds);
  EXPECT_TRUE(load_dataset((dir / "e.pds").string()).samples.empty());
}

TEST(Load, TruncationNamesLastValidRecord) {
  const fs::path dir = scratch_dir("trunc");
  const DataConfig d = small_config();
  const auto samples = collect_episode(0, 2, d.seed, d, SimConfig{});
  Dataset ds{make_header(d, SimConfig{}, "train", static_cast<long>(samples.size())), samples};
  const fs::path p = dir / "t.pds";
  write_dataset(p.string(), ds);
  const auto record_bytes = static_cast<std::uintmax_t>(ds.header.record_floats() * 4);
  fs::resize_file(p, fs::file_size(p) - record_bytes * 10 - 7);
  try {
    load_dataset(p.string());
    FAIL() << "expected RecordError";
  } catch (const RecordError& e) {
    EXPECT_EQ(e.record(), 49);
    EXPECT_NE(std::string(e.what()).find("last valid record is 48"), std::string::npos);
  }
}

TEST(Load, VersionMismatchRejected) {
  const fs::path dir = scratch_dir("version");
  Dataset ds{make_header(small_config(), SimConfig{}, "val", 0), {}};
  ds.header.format_version = 2;
  write_dataset((dir / "v.pds").string(), ds);
  EXPECT_THROW(load_dataset((dir / "v.pds").string()), DataError);
}

TEST(Load, InvariantViolationNamesRecord) {
  const fs::path dir = scratch_dir("invalid");
  const DataConfig d = small_config();
  auto samples = collect_episode(0, 2, d.seed, d, SimConfig{});
  samples.resize(5);
  // overlap the two objects in record 3 (locations kept consistent)
  PushSample& s = samples[3];
  s.before.objects[1].center = s.before.objects[0].center + Vec2{0.01, 0.0};
  s.locs_before = internal::f32_locations(s.before, PixelMap::for_table(Bounds{}, 64));
  Dataset ds{make_header(d, SimConfig{}, "train", 5), samples};
  write_dataset((dir / "bad.pds").string(), ds);
  try {
    load_dataset((dir / "bad.pds").string());
    FAIL() << "expected RecordError";
  } catch (const RecordError& e) {
    EXPECT_EQ(e.record(), 3);
  }
}

TEST(Load, MissingFileIsDataError) {
  EXPECT_THROW(load_dataset("/nonexistent/pushplan.pds"), DataError);
}

TEST(Episodes, LocationsChainAcrossSteps) {
  const DataConfig d = small_config();
  const auto samples = collect_episode(3, 2, d.seed, d, SimConfig{});
  for (std::size_t t = 0; t + 1 < samples.size(); ++t) {
    EXPECT_EQ(samples[t].locs_after, samples[t + 1].locs_before);
    EXPECT_EQ(samples[t].after, samples[t + 1].before);
  }
}

TEST(Episodes, RecordsSatisfyInvariants) {
  const DataConfig d = small_config();
  const PixelMap map = PixelMap::for_table(Bounds{}, 64);
  for (const auto& s : collect_episode(1, 2, d.seed, d, SimConfig{})) {
    EXPECT_EQ(s.locs_before.size(), s.locs_after.size());
    const PushRecord r = materialize(s, map);
    EXPECT_EQ(r.raster_before.map, r.raster_after.map);
  }
}

TEST(Split, NinetyTenOnHundredEpisodes) {
  DataConfig d;
  d.episodes = 100;
  d.train_fraction = 0.9;
  const SplitAssignment s = split_episodes(d);
  EXPECT_EQ(s.train.size(), 90u);
  EXPECT_EQ(s.val.size(), 10u);
  std::set<int> seen(s.train.begin(), s.train.end());
  for (int id : s.val) EXPECT_EQ(seen.count(id), 0u);
}

TEST(Split, TestFilesHaveFixedObjectCounts) {
  const fs::path dir = scratch_dir("split");
  generate_splits(dir.string(), small_config(), SimConfig{});
  const SplitPaths p = SplitPaths::in_dir(dir.string());
  for (const auto& s : load_dataset(p.test_one).samples) EXPECT_EQ(s.before.n_objects(), 1u);
  for (const auto& s : load_dataset(p.test_two).samples) EXPECT_EQ(s.before.n_objects(), 2u);
  const Dataset train = load_dataset(p.train);
  const Dataset val = load_dataset(p.val);
  std::set<int> train_ids;
  for (const auto& s : train.samples) train_ids.insert(s.episode_id);
  for (const auto& s : val.samples) EXPECT_EQ(train_ids.count(s.episode_id), 0u);
  EXPECT_EQ(load_dataset(p.test_one).header.split_tag, "test-1obj");
}

TEST(Collect, NearPlacementKeepsNeighboursWithinGap) {
  const SimConfig sim;
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    Rng rng = make_rng(seed);
    const WorldState w = sample_scene(rng, 2, sim);
    const WorldState near = place_near(w, rng, 0.1, sim);
    ASSERT_FALSE(check_invariants(near).has_value());
    EXPECT_EQ(near.objects[0], w.objects[0]);
    const double d = distance(near.objects[0].center, near.objects[1].center);
    EXPECT_GE(d, 0.12);
    EXPECT_LE(d, 0.22 + 1e-12);
  }
}

TEST(Collect, NearFractionRaisesObjectContacts) {
  const SimConfig sim;
  DataConfig uniform_cfg;
  uniform_cfg.episode_length = 30;
  DataConfig near_cfg = uniform_cfg;
  near_cfg.near_fraction = 1.0;
  auto chained = [&](const DataConfig& cfg) {
    int n = 0;
    for (int e = 0; e < 40; ++e) {
      for (const auto& s : collect_episode(e, 2, 9, cfg, sim)) {
        n += distance(s.locs_before[0], s.locs_after[0]) > 0.05 && distance(s.locs_before[1], s.locs_after[1]) > 0.05;
      }
    }
    return n;
  };
  EXPECT_GT(chained(near_cfg), 3 * chained(uniform_cfg));
}
