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

#ifndef PUSHPLAN_DATASET_HPP_
#define PUSHPLAN_DATASET_HPP_

// Random-push training data: collection, a compact binary file format, and
// episode-level splitting.
//
// File layout (format_version 1):
//   text header, one key=value per line, terminated by "end_header\n"
//   record_count fixed-size records of little-endian float32 values:
//     episode_id, step_id, n_objects,
//     action.start.x, action.start.y, action.end.x, action.end.y,
//     N_max x (center.x, center.y, radius, color_index)   world before
//     N_max x (center.x, center.y, radius, color_index)   world after
//     N_max x (px, py)                                    locs before
//     N_max x (px, py)                                    locs after
//   Unused object slots are zero. Rasters are not stored; they are rendered
//   from the stored world states, which is deterministic.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pushplan/errors.hpp"
#include "pushplan/raster.hpp"
#include "pushplan/rng.hpp"
#include "pushplan/sim.hpp"

namespace pushplan {

inline constexpr int kDatasetFormatVersion = 1;

struct DataConfig {
  int episodes = 800;
  int episode_length = 60;
  int max_objects = 2;               // N_max
  double one_object_fraction = 0.25;  // remaining episodes use max_objects
  double free_push_fraction = 0.2;
  double near_fraction = 0.0;  // multi-object episodes that start with objects close together
  double near_gap = 0.1;       // max free gap between neighbours in those episodes
  double train_fraction = 0.9;
  int test_episodes = 40;
  int raster_size = 64;  // G
  std::uint64_t seed = 1;
};

struct DatasetHeader {
  int raster_size = 64;
  int max_objects = 2;
  long record_count = 0;
  double max_push = 0.05;
  int format_version = kDatasetFormatVersion;
  std::string split_tag = "train";
  Bounds table;

  int record_floats() const { return 7 + max_objects * 12; }
  PixelMap pixel_map() const { return PixelMap::for_table(table, raster_size); }
};

// Stored form of one push. World states and locations hold float32-exact
// values so that a write/read cycle is lossless.
struct PushSample {
  int episode_id = 0;
  int step_id = 0;
  WorldState before;
  PushAction action;
  WorldState after;
  std::vector<Vec2> locs_before;
  std::vector<Vec2> locs_after;
  bool operator==(const PushSample&) const = default;
};

// Materialized training triplet (I^t, a^{t+1}, I^{t+1}) with locations.
struct PushRecord {
  Raster raster_before;
  PushAction action;
  Raster raster_after;
  std::vector<Vec2> locs_before;
  std::vector<Vec2> locs_after;
  int episode_id = 0;
  int step_id = 0;
  bool operator==(const PushRecord&) const = default;
};

inline PushRecord materialize(const PushSample& s, const PixelMap& map) {
  return {render(s.before, map), s.action, render(s.after, map), s.locs_before,
          s.locs_after, s.episode_id, s.step_id};
}

namespace internal {

// volatile: GCC 11 at -O3 otherwise folds the round trip away
inline double f32(double v) {
  volatile float f = static_cast<float>(v);
  return static_cast<double>(f);
}
inline Vec2 f32(const Vec2& v) { return {f32(v.x), f32(v.y)}; }

inline WorldState f32(WorldState w) {
  for (Object& o : w.objects) {
    o.center = f32(o.center);
    o.radius = f32(o.radius);
  }
  return w;
}

inline std::vector<Vec2> f32_locations(const WorldState& w, const PixelMap& map) {
  std::vector<Vec2> locs = object_locations(w, map);
  for (Vec2& p : locs) p = f32(p);
  return locs;
}

inline void put_f32(std::string& buf, double v) {
  const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((bits >> (8 * i)) & 0xFFu));
}

inline double get_f32(const unsigned char* p) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return static_cast<double>(std::bit_cast<float>(bits));
}

}  // namespace internal

inline PushSample make_sample(int episode_id, int step_id, const WorldState& before,
                              const PushAction& action, const WorldState& after,
                              const PixelMap& map) {
  PushSample s;
  s.episode_id = episode_id;
  s.step_id = step_id;
  s.before = internal::f32(before);
  s.action = {internal::f32(action.start), internal::f32(action.end)};
  s.after = internal::f32(after);
  s.locs_before = internal::f32_locations(s.before, map);
  s.locs_after = internal::f32_locations(s.after, map);
  return s;
}

inline std::string encode_header(const DatasetHeader& h) {
  std::ostringstream out;
  out.precision(17);
  out << "pushplan-dataset\n"
      << "format_version=" << h.format_version << "\n"
      << "split_tag=" << h.split_tag << "\n"
      << "G=" << h.raster_size << "\n"
      << "N_max=" << h.max_objects << "\n"
      << "record_count=" << h.record_count << "\n"
      << "L_max=" << h.max_push << "\n"
      << "table=" << h.table.lo.x << " " << h.table.lo.y << " " << h.table.hi.x << " "
      << h.table.hi.y << "\n"
      << "record_floats=" << h.record_floats() << "\n"
      << "end_header\n";
  return out.str();
}

inline std::string encode_sample(const PushSample& s, int max_objects) {
  using internal::put_f32;
  std::string buf;
  buf.reserve(static_cast<std::size_t>(7 + max_objects * 12) * 4);
  put_f32(buf, s.episode_id);
  put_f32(buf, s.step_id);
  put_f32(buf, static_cast<double>(s.before.n_objects()));
  put_f32(buf, s.action.start.x);
  put_f32(buf, s.action.start.y);
  put_f32(buf, s.action.end.x);
  put_f32(buf, s.action.end.y);
  for (const WorldState* w : {&s.before, &s.after}) {
    for (int n = 0; n < max_objects; ++n) {
      const bool used = n < static_cast<int>(w->n_objects());
      const Object o = used ? w->objects[n] : Object{{0, 0}, 0, 0};
      put_f32(buf, o.center.x);
      put_f32(buf, o.center.y);
      put_f32(buf, o.radius);
      put_f32(buf, o.color_index);
    }
  }
  for (const std::vector<Vec2>* locs : {&s.locs_before, &s.locs_after}) {
    for (int n = 0; n < max_objects; ++n) {
      const Vec2 p = n < static_cast<int>(locs->size()) ? (*locs)[n] : Vec2{};
      put_f32(buf, p.x);
      put_f32(buf, p.y);
    }
  }
  return buf;
}

// Streams records to `path` through a temporary file that is renamed into
// place on close, so a failed run never leaves a partial dataset behind.
class DatasetWriter {
 public:
  DatasetWriter(const std::string& path, const DatasetHeader& header)
      : path_(path), tmp_path_(path + ".tmp"), header_(header) {
    out_.open(tmp_path_, std::ios::binary | std::ios::trunc);
    if (!out_) throw DataError("cannot open " + tmp_path_ + " for writing");
    out_ << encode_header(header_);
  }
  DatasetWriter(const DatasetWriter&) = delete;
  DatasetWriter& operator=(const DatasetWriter&) = delete;
  ~DatasetWriter() {
    if (!closed_) {
      out_.close();
      std::error_code ec;
      std::filesystem::remove(tmp_path_, ec);
    }
  }

  void write(const PushSample& s) {
    if (static_cast<int>(s.before.n_objects()) > header_.max_objects) {
      throw DataError("sample has more objects than N_max");
    }
    const std::string buf = encode_sample(s, header_.max_objects);
    out_.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out_) throw DataError("write failed for " + tmp_path_);
    ++written_;
  }

  void close() {
    if (written_ != header_.record_count) {
      throw DataError("wrote " + std::to_string(written_) + " records, header declares " +
                      std::to_string(header_.record_count));
    }
    out_.close();
    if (!out_) throw DataError("close failed for " + tmp_path_);
    std::filesystem::rename(tmp_path_, path_);
    closed_ = true;
  }

 private:
  std::string path_;
  std::string tmp_path_;
  DatasetHeader header_;
  std::ofstream out_;
  long written_ = 0;
  bool closed_ = false;
};

class DatasetReader {
 public:
  explicit DatasetReader(const std::string& path) : path_(path) {
    in_.open(path, std::ios::binary);
    if (!in_) throw DataError("cannot open dataset " + path);
    read_header();
  }

  const DatasetHeader& header() const { return header_; }

  // Next record, or nullopt after record_count records.
  std::optional<PushSample> next() {
    if (index_ >= header_.record_count) return std::nullopt;
    const std::size_t bytes = static_cast<std::size_t>(header_.record_floats()) * 4;
    buf_.resize(bytes);
    in_.read(reinterpret_cast<char*>(buf_.data()), static_cast<std::streamsize>(bytes));
    if (static_cast<std::size_t>(in_.gcount()) != bytes) {
      throw RecordError(index_, "truncated file " + path_ + "; last valid record is " +
                                    std::to_string(index_ - 1));
    }
    PushSample s = decode(buf_.data());
    validate(s);
    ++index_;
    return s;
  }

 private:
  void read_header() {
    std::string line;
    if (!std::getline(in_, line) || line != "pushplan-dataset") {
      throw DataError(path_ + ": not a pushplan dataset");
    }
    bool have_count = false;
    while (std::getline(in_, line)) {
      if (line == "end_header") {
        if (!have_count) throw DataError(path_ + ": header lacks record_count");
        if (header_.format_version != kDatasetFormatVersion) {
          throw DataError(path_ + ": unsupported format_version " +
                          std::to_string(header_.format_version));
        }
        return;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw DataError(path_ + ": bad header line '" + line + "'");
      const std::string key = line.substr(0, eq);
      std::istringstream val(line.substr(eq + 1));
      if (key == "format_version") {
        val >> header_.format_version;
      } else if (key == "split_tag") {
        val >> header_.split_tag;
      } else if (key == "G") {
        val >> header_.raster_size;
      } else if (key == "N_max") {
        val >> header_.max_objects;
      } else if (key == "record_count") {
        val >> header_.record_count;
        have_count = true;
      } else if (key == "L_max") {
        val >> header_.max_push;
      } else if (key == "table") {
        val >> header_.table.lo.x >> header_.table.lo.y >> header_.table.hi.x >>
            header_.table.hi.y;
      } else if (key == "record_floats") {
        int n = 0;
        val >> n;
        if (n != header_.record_floats()) throw DataError(path_ + ": record_floats mismatch");
      } else {
        throw DataError(path_ + ": unknown header key '" + key + "'");
      }
      if (val.fail()) throw DataError(path_ + ": bad value for '" + key + "'");
    }
    throw DataError(path_ + ": header not terminated");
  }

  PushSample decode(const unsigned char* p) const {
    using internal::get_f32;
    const int nmax = header_.max_objects;
    PushSample s;
    s.episode_id = static_cast<int>(get_f32(p));
    s.step_id = static_cast<int>(get_f32(p + 4));
    const int n = static_cast<int>(get_f32(p + 8));
    if (n < 0 || n > nmax) throw RecordError(index_, "object count out of range");
    s.action = {{get_f32(p + 12), get_f32(p + 16)}, {get_f32(p + 20), get_f32(p + 24)}};
    const unsigned char* q = p + 28;
    for (WorldState* w : {&s.before, &s.after}) {
      w->table = header_.table;
      for (int k = 0; k < nmax; ++k, q += 16) {
        if (k >= n) continue;
        w->objects.push_back({{get_f32(q), get_f32(q + 4)}, get_f32(q + 8),
                              static_cast<int>(get_f32(q + 12))});
      }
    }
    for (std::vector<Vec2>* locs : {&s.locs_before, &s.locs_after}) {
      for (int k = 0; k < nmax; ++k, q += 8) {
        if (k < n) locs->push_back({get_f32(q), get_f32(q + 4)});
      }
    }
    return s;
  }

  void validate(const PushSample& s) const {
    const PixelMap map = header_.pixel_map();
    if (s.locs_before.size() != s.locs_after.size()) {
      throw RecordError(index_, "location lists differ in length");
    }
    // float32 storage perturbs centers by ~1e-8
    for (const WorldState* w : {&s.before, &s.after}) {
      if (auto bad = check_invariants(*w, 1e-6)) throw RecordError(index_, *bad);
    }
    if (s.locs_before != internal::f32_locations(s.before, map) ||
        s.locs_after != internal::f32_locations(s.after, map)) {
      throw RecordError(index_, "locations disagree with world state");
    }
    if (s.action.length() > header_.max_push + 1e-6 ||
        !header_.table.contains(s.action.start) || !header_.table.contains(s.action.end)) {
      throw RecordError(index_, "action violates push limits");
    }
  }

  std::string path_;
  std::ifstream in_;
  DatasetHeader header_;
  std::vector<unsigned char> buf_;
  long index_ = 0;
};

struct Dataset {
  DatasetHeader header;
  std::vector<PushSample> samples;

  PixelMap pixel_map() const { return header.pixel_map(); }
};

inline Dataset load_dataset(const std::string& path) {
  DatasetReader reader(path);
  Dataset d{reader.header(), {}};
  d.samples.reserve(static_cast<std::size_t>(d.header.record_count));
  while (auto s = reader.next()) d.samples.push_back(std::move(*s));
  return d;
}

inline void write_dataset(const std::string& path, const Dataset& d) {
  DatasetHeader h = d.header;
  h.record_count = static_cast<long>(d.samples.size());
  DatasetWriter w(path, h);
  for (const PushSample& s : d.samples) w.write(s);
  w.close();
}

// One random-push episode. Per-episode streams make episodes independent of
// collection order.
// Re-places every object after the first within `gap` of touching its
// predecessor; keeps the uniform placement if that fails.
inline WorldState place_near(const WorldState& w, Rng& rng, double gap, const SimConfig& sim) {
  const Bounds inner = sim.table.shrunk(sim.object_radius);
  for (int attempt = 0; attempt < sim.max_placement_tries; ++attempt) {
    WorldState out = w;
    bool ok = true;
    for (std::size_t n = 1; n < out.objects.size() && ok; ++n) {
      const Object& prev = out.objects[n - 1];
      Object& o = out.objects[n];
      const double th = uniform(rng, 0.0, 2.0 * M_PI);
      const double d = prev.radius + o.radius + uniform(rng, 0.0, gap);
      o.center = prev.center + Vec2{std::cos(th), std::sin(th)} * d;
      ok = inner.contains(o.center);
      for (std::size_t m = 0; m < n && ok; ++m) {
        ok = distance(o.center, out.objects[m].center) >= o.radius + out.objects[m].radius;
      }
    }
    if (ok) return out;
  }
  return w;
}

inline std::vector<PushSample> collect_episode(int episode_id, int n_objects,
                                               std::uint64_t stream_seed,
                                               const DataConfig& data, const SimConfig& sim) {
  Rng rng = make_rng(stream_seed, {static_cast<std::uint64_t>(episode_id)});
  const PixelMap map = PixelMap::for_table(sim.table, data.raster_size);
  WorldState world = sample_scene(rng, n_objects, sim);
  if (n_objects > 1 && data.near_fraction > 0 && uniform(rng, 0.0, 1.0) < data.near_fraction) {
    world = place_near(world, rng, data.near_gap, sim);
  }
  std::vector<PushSample> out;
  out.reserve(static_cast<std::size_t>(data.episode_length));
  for (int t = 0; t < data.episode_length; ++t) {
    const PushAction a = uniform(rng, 0.0, 1.0) < data.free_push_fraction
                             ? sample_free_push(world, rng, sim)
                             : sample_random_push(world, rng, sim);
    const WorldState next = step_push(world, a, sim);
    out.push_back(make_sample(episode_id, t, world, a, next, map));
    world = next;
  }
  return out;
}

inline int episode_object_count(int episode_id, const DataConfig& data) {
  Rng rng = make_rng(data.seed, {0x6f626a73ULL, static_cast<std::uint64_t>(episode_id)});
  return uniform(rng, 0.0, 1.0) < data.one_object_fraction ? 1 : data.max_objects;
}

inline DatasetHeader make_header(const DataConfig& data, const SimConfig& sim,
                                 const std::string& tag, long count) {
  DatasetHeader h;
  h.raster_size = data.raster_size;
  h.max_objects = data.max_objects;
  h.record_count = count;
  h.max_push = sim.max_push;
  h.split_tag = tag;
  h.table = sim.table;
  return h;
}

// Writes `episode_ids` (with the given object counts) to one file.
inline void collect(const std::string& path, const std::string& tag,
                    const std::vector<int>& episode_ids, const std::vector<int>& object_counts,
                    std::uint64_t stream_seed, const DataConfig& data, const SimConfig& sim) {
  const long count = static_cast<long>(episode_ids.size()) * data.episode_length;
  DatasetWriter writer(path, make_header(data, sim, tag, count));
  for (std::size_t i = 0; i < episode_ids.size(); ++i) {
    for (const PushSample& s :
         collect_episode(episode_ids[i], object_counts[i], stream_seed, data, sim)) {
      writer.write(s);
    }
  }
  writer.close();
}

struct SplitAssignment {
  std::vector<int> train;
  std::vector<int> val;
};

// Deterministic episode-level split: a seeded permutation, the first
// floor(train_fraction * episodes) go to train. Each list is sorted.
inline SplitAssignment split_episodes(const DataConfig& data) {
  std::vector<int> ids(static_cast<std::size_t>(data.episodes));
  std::iota(ids.begin(), ids.end(), 0);
  Rng rng = make_rng(data.seed, {0x73706c74ULL});
  std::shuffle(ids.begin(), ids.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::floor(data.train_fraction * data.episodes));
  SplitAssignment s{{ids.begin(), ids.begin() + static_cast<long>(n_train)},
                    {ids.begin() + static_cast<long>(n_train), ids.end()}};
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.val.begin(), s.val.end());
  return s;
}

struct SplitPaths {
  std::string train, val, test_one, test_two;

  static SplitPaths in_dir(const std::string& dir) {
    return {dir + "/train.pds", dir + "/val.pds", dir + "/test-1obj.pds", dir + "/test-2obj.pds"};
  }
};

// Generates train/val from the main seed and the two test files from held-out
// streams with fixed object counts.
inline void generate_splits(const std::string& dir, const DataConfig& data, const SimConfig& sim) {
  std::filesystem::create_directories(dir);
  const SplitPaths paths = SplitPaths::in_dir(dir);
  const SplitAssignment split = split_episodes(data);
  auto counts_for = [&](const std::vector<int>& ids) {
    std::vector<int> c;
    for (int id : ids) c.push_back(episode_object_count(id, data));
    return c;
  };
  collect(paths.train, "train", split.train, counts_for(split.train), data.seed, data, sim);
  collect(paths.val, "val", split.val, counts_for(split.val), data.seed, data, sim);
  std::vector<int> test_ids(static_cast<std::size_t>(data.test_episodes));
  std::iota(test_ids.begin(), test_ids.end(), 0);
  const std::uint64_t held_out = data.seed ^ 0x9e3779b97f4a7c15ULL;
  collect(paths.test_one, "test-1obj", test_ids, std::vector<int>(test_ids.size(), 1),
          held_out + 1, data, sim);
  collect(paths.test_two, "test-2obj", test_ids,
          std::vector<int>(test_ids.size(), data.max_objects), held_out + 2, data, sim);
}

}  // namespace pushplan

#endif  // PUSHPLAN_DATASET_HPP_
