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

#ifndef PUSHPLAN_FORWARD_MODEL_HPP_
#define PUSHPLAN_FORWARD_MODEL_HPP_

// Object-centric forward model: an interaction network over object nodes plus
// one action node, sharing its encoder/decoder with the scene representation.
// Setting `interaction = false` drops the object-object edges, which gives the
// per-object ablation with otherwise identical architecture and training.

#include <string>
#include <utility>
#include <vector>

#include "pushplan/autodiff.hpp"
#include "pushplan/dataset.hpp"
#include "pushplan/nn.hpp"
#include "pushplan/object_repr.hpp"
#include "pushplan/raster.hpp"

namespace pushplan {

struct ForwardConfig {
  ReprConfig repr;
  int hidden = 64;
  int rounds = 2;  // R
  bool interaction = true;
  // Relative offsets and the location head work in units of 1/geom_scale of
  // the raster so that per-push motion is O(1) inside the network.
  double geom_scale = 10.0;
  std::uint64_t seed = 1;
};

// Batch of scenes laid out as rows. Objects of scene s are contiguous.
struct GraphLayout {
  int n_scenes = 0;
  std::vector<int> object_scene;
  std::vector<int> edge_send;
  std::vector<int> edge_recv;

  int n_objects() const { return static_cast<int>(object_scene.size()); }

  static GraphLayout from_counts(const std::vector<int>& counts) {
    GraphLayout g;
    g.n_scenes = static_cast<int>(counts.size());
    int base = 0;
    for (int s = 0; s < g.n_scenes; ++s) {
      const int n = counts[static_cast<std::size_t>(s)];
      for (int i = 0; i < n; ++i) g.object_scene.push_back(s);
      for (int r = 0; r < n; ++r) {
        for (int q = 0; q < n; ++q) {
          if (q == r) continue;
          g.edge_send.push_back(base + q);
          g.edge_recv.push_back(base + r);
        }
      }
      base += n;
    }
    return g;
  }

  static GraphLayout uniform(int n_scenes, int per_scene) {
    return from_counts(std::vector<int>(static_cast<std::size_t>(n_scenes), per_scene));
  }
};

// Action in normalized raster coordinates: start.x, start.y, end.x, end.y.
inline std::vector<double> normalized_action(const PushAction& a, const PixelMap& map) {
  const Vec2 s = map.normalize(map.to_pixel(a.start));
  const Vec2 e = map.normalize(map.to_pixel(a.end));
  return {s.x, s.y, e.x, e.y};
}

template <typename T>
class ForwardModel {
 public:
  ForwardConfig cfg;
  ParameterSet<T> params;
  Encoder encoder;
  Decoder decoder;
  Mlp node_in;
  Mlp action_embed;
  Mlp edge_object;
  Mlp edge_action;
  Mlp node_update;
  Linear head_location;
  Linear head_feature;

  static ForwardModel create(const ForwardConfig& cfg) {
    ForwardModel m;
    m.cfg = cfg;
    Rng rng = make_rng(cfg.seed, {0x66776400});
    const int h = cfg.hidden;
    const int d = cfg.repr.feature_dim;
    m.encoder = Encoder::create(m.params, cfg.repr, rng);
    m.decoder = Decoder::create(m.params, cfg.repr, rng);
    m.node_in = Mlp::create(m.params, "dynamics.node_in", {2 + d, h, h}, rng);
    m.action_embed = Mlp::create(m.params, "dynamics.action_embed", {4, h, h}, rng);
    m.edge_object = Mlp::create(m.params, "dynamics.edge_object", {2 * h + 2, h, h}, rng);
    m.edge_action = Mlp::create(m.params, "dynamics.edge_action", {2 * h + 4, h, h}, rng);
    m.node_update = Mlp::create(m.params, "dynamics.node_update", {3 * h, h, h}, rng);
    m.head_location =
        Linear::create(m.params, "dynamics.head_location", h, 2, rng, Linear::Init::kZero);
    m.head_feature =
        Linear::create(m.params, "dynamics.head_feature", h, d, rng, Linear::Init::kZero);
    return m;
  }

  template <typename U>
  ForwardModel<U> cast() const {
    ForwardModel<U> m;
    m.cfg = cfg;
    m.params = params.template cast<U>();
    m.encoder = encoder;
    m.decoder = decoder;
    m.node_in = node_in;
    m.action_embed = action_embed;
    m.edge_object = edge_object;
    m.edge_action = edge_action;
    m.node_update = node_update;
    m.head_location = head_location;
    m.head_feature = head_feature;
    return m;
  }

  // One prediction step for a batch of scenes.
  //   b       [n, 2] normalized locations
  //   f       [n, d] features
  //   actions [n_scenes, 4] normalized push endpoints
  // returns (b', f')
  std::pair<Var, Var> step(Tape<T>& tape, Var b, Var f, Var actions,
                           const GraphLayout& g) {
    const int n = g.n_objects();
    const T scale = static_cast<T>(cfg.geom_scale);
    Var h = node_in(tape, params, ad::concat_cols(tape, {b, f}));
    const Var a = action_embed(tape, params, actions);
    const Var a_obj = ad::gather_rows(tape, a, g.object_scene);
    const Var act_obj = ad::gather_rows(tape, actions, g.object_scene);
    const Var b2 = ad::concat_cols(tape, {b, b});
    const Var act_rel = ad::scale(tape, ad::sub(tape, act_obj, b2), scale);
    const bool messages = cfg.interaction && !g.edge_send.empty();
    Var rel_obj{};
    if (messages) {
      rel_obj = ad::scale(tape,
                          ad::sub(tape, ad::gather_rows(tape, b, g.edge_send),
                                  ad::gather_rows(tape, b, g.edge_recv)),
                          scale);
    }
    for (int r = 0; r < cfg.rounds; ++r) {
      Var agg;
      if (messages) {
        const Var msg = edge_object(
            tape, params,
            ad::concat_cols(tape, {ad::gather_rows(tape, h, g.edge_recv),
                                   ad::gather_rows(tape, h, g.edge_send), rel_obj}));
        agg = ad::scatter_add_rows(tape, msg, g.edge_recv, n);
      } else {
        agg = tape.constant(Tensor<T>(n, cfg.hidden));
      }
      const Var m_act = edge_action(tape, params, ad::concat_cols(tape, {h, a_obj, act_rel}));
      h = ad::add(tape, h, node_update(tape, params, ad::concat_cols(tape, {h, agg, m_act})));
    }
    const Var db = ad::scale(tape, head_location(tape, params, h), T(1) / scale);
    const Var df = head_feature(tape, params, h);
    return {ad::add(tape, b, db), ad::add(tape, f, df)};
  }

  // Single-scene inference.
  Descriptors predict_step(const Descriptors& xs, const PushAction& action, const PixelMap& map) {
    if (xs.empty()) return {};
    const int n = static_cast<int>(xs.size());
    const int d = cfg.repr.feature_dim;
    Tape<T> tape(false);
    Tensor<T> b(n, 2);
    for (int i = 0; i < n; ++i) {
      const Vec2 nb = map.normalize(xs[static_cast<std::size_t>(i)].b);
      b(i, 0) = static_cast<T>(nb.x);
      b(i, 1) = static_cast<T>(nb.y);
    }
    const auto act = normalized_action(action, map);
    Tensor<T> av(1, 4);
    for (int k = 0; k < 4; ++k) av(0, k) = static_cast<T>(act[static_cast<std::size_t>(k)]);
    const auto [b1, f1] = step(tape, tape.constant(std::move(b)),
                               tape.constant(features_tensor<T>(xs, d)),
                               tape.constant(std::move(av)), GraphLayout::uniform(1, n));
    const Tensor<T>& bv = tape.value(b1);
    const Tensor<T>& fv = tape.value(f1);
    Descriptors out(xs.size());
    for (int i = 0; i < n; ++i) {
      auto& o = out[static_cast<std::size_t>(i)];
      o.b = map.denormalize({static_cast<double>(bv(i, 0)), static_cast<double>(bv(i, 1))});
      o.f.resize(static_cast<std::size_t>(d));
      for (int k = 0; k < d; ++k) o.f[static_cast<std::size_t>(k)] = static_cast<float>(fv(i, k));
    }
    return out;
  }

  Descriptors rollout(Descriptors xs, const std::vector<PushAction>& actions, const PixelMap& map) {
    for (const PushAction& a : actions) xs = predict_step(xs, a, map);
    return xs;
  }

  Descriptors describe(const Raster& r, const std::vector<Vec2>& locations) {
    return pushplan::describe(encoder, params, r, locations, cfg.repr.window);
  }

  Checkpoint to_checkpoint() const {
    Checkpoint ck;
    ck.add_meta("kind", "forward");
    ck.add_meta("window", std::to_string(cfg.repr.window));
    ck.add_meta("feature_dim", std::to_string(cfg.repr.feature_dim));
    ck.add_meta("hidden", std::to_string(cfg.hidden));
    ck.add_meta("repr_hidden", std::to_string(cfg.repr.hidden));
    ck.add_meta("rounds", std::to_string(cfg.rounds));
    ck.add_meta("interaction", cfg.interaction ? "1" : "0");
    ck.add_meta("geom_scale", std::to_string(cfg.geom_scale));
    ck.add_parameters("", params);
    return ck;
  }

  static ForwardModel from_checkpoint(const Checkpoint& ck) {
    if (ck.meta_value("kind") != "forward") throw DataError("not a forward-model checkpoint");
    ForwardConfig c;
    c.repr.window = std::stoi(ck.meta_value("window"));
    c.repr.feature_dim = std::stoi(ck.meta_value("feature_dim"));
    c.repr.hidden = std::stoi(ck.meta_value("repr_hidden"));
    c.hidden = std::stoi(ck.meta_value("hidden"));
    c.rounds = std::stoi(ck.meta_value("rounds"));
    c.interaction = ck.meta_value("interaction") == "1";
    c.geom_scale = std::stod(ck.meta_value("geom_scale"));
    ForwardModel m = create(c);
    ck.load_parameters("", m.params);
    return m;
  }
};

// Tensors for a batch of push records, ready for the loss.
template <typename T>
struct LossBatch {
  GraphLayout layout;
  Tensor<T> patches_before;  // crops of I^t at ground-truth b^t
  Tensor<T> patches_after;   // crops of I^{t+1} at ground-truth b^{t+1}
  Tensor<T> loc_before;      // normalized
  Tensor<T> loc_after;
  Tensor<T> actions;
  Tensor<T> image_before;    // [B, G*G*3]
  Tensor<T> image_after;
  std::vector<Placement> place_before;
  int raster_size = 64;
};

template <typename T>
LossBatch<T> make_loss_batch(const std::vector<const PushSample*>& samples, const PixelMap& map,
                             int window) {
  LossBatch<T> lb;
  lb.raster_size = map.size;
  std::vector<int> counts;
  std::vector<Patch> before, after;
  std::vector<Vec2> lb_locs, la_locs;
  const int g3 = map.size * map.size * 3;
  lb.image_before = Tensor<T>(static_cast<int>(samples.size()), g3);
  lb.image_after = Tensor<T>(static_cast<int>(samples.size()), g3);
  lb.actions = Tensor<T>(static_cast<int>(samples.size()), 4);
  for (std::size_t s = 0; s < samples.size(); ++s) {
    const PushSample& ps = *samples[s];
    const Raster rb = render(ps.before, map);
    const Raster ra = render(ps.after, map);
    for (int k = 0; k < g3; ++k) {
      lb.image_before(static_cast<int>(s), k) = static_cast<T>(rb.pixels[static_cast<std::size_t>(k)]);
      lb.image_after(static_cast<int>(s), k) = static_cast<T>(ra.pixels[static_cast<std::size_t>(k)]);
    }
    const auto act = normalized_action(ps.action, map);
    for (int k = 0; k < 4; ++k) lb.actions(static_cast<int>(s), k) = static_cast<T>(act[static_cast<std::size_t>(k)]);
    counts.push_back(static_cast<int>(ps.locs_before.size()));
    for (std::size_t n = 0; n < ps.locs_before.size(); ++n) {
      before.push_back(crop(rb, ps.locs_before[n], window));
      after.push_back(crop(ra, ps.locs_after[n], window));
      lb_locs.push_back(ps.locs_before[n]);
      la_locs.push_back(ps.locs_after[n]);
      lb.place_before.push_back(place(static_cast<int>(s), ps.locs_before[n], window));
    }
  }
  lb.layout = GraphLayout::from_counts(counts);
  lb.patches_before = stack_patches<T>(before, window);
  lb.patches_after = stack_patches<T>(after, window);
  lb.loc_before = Tensor<T>(static_cast<int>(lb_locs.size()), 2);
  lb.loc_after = Tensor<T>(static_cast<int>(la_locs.size()), 2);
  for (std::size_t i = 0; i < lb_locs.size(); ++i) {
    const Vec2 p = map.normalize(lb_locs[i]);
    const Vec2 q = map.normalize(la_locs[i]);
    lb.loc_before(static_cast<int>(i), 0) = static_cast<T>(p.x);
    lb.loc_before(static_cast<int>(i), 1) = static_cast<T>(p.y);
    lb.loc_after(static_cast<int>(i), 0) = static_cast<T>(q.x);
    lb.loc_after(static_cast<int>(i), 1) = static_cast<T>(q.y);
  }
  return lb;
}

struct LossWeights {
  double recon = 1.0;
  double pred_pixel = 1.0;
  double pred_state = 1.0;
  // extra factor on the location part of the state term
  double location = 1000.0;
};

struct LossTerms {
  double recon = 0.0;          // L_recon
  double pred_pixel = 0.0;     // pixel part of L_pred
  double pred_location = 0.0;  // state part of L_pred, b components
  double pred_feature = 0.0;   // state part of L_pred, f components
  double pred_state() const { return pred_location + pred_feature; }
  double pred() const { return pred_pixel + pred_state(); }
};

struct LossVars {
  Var total;
  Var recon;
  Var pred_pixel;
  Var pred_location;
  Var pred_feature;
};

// Both training losses for a batch, averaged over records. Pixel terms are
// mean absolute error per pixel value; the state term is the squared error of
// (b', f') against (b^{t+1}, f^{t+1}) summed over objects and dimensions, with
// b in normalized coordinates. Only the total is weighted.
// Target features are encoded from I^{t+1} and treated as constants.
template <typename T>
LossVars forward_losses(Tape<T>& tape, ForwardModel<T>& m, const LossBatch<T>& lb,
                        const LossWeights& w = {}) {
  const int window = m.cfg.repr.window;
  const int n_rec = lb.layout.n_scenes;
  const int n_obj = lb.layout.n_objects();
  const int d = m.cfg.repr.feature_dim;
  const Var f_before = m.encoder(tape, m.params, tape.constant(lb.patches_before));
  const Var f_after = ad::detach(tape, m.encoder(tape, m.params, tape.constant(lb.patches_after)));
  const Var b_before = tape.constant(lb.loc_before);

  const Var recon_img = ad::composite(tape, m.decoder(tape, m.params, f_before), lb.place_before,
                                      n_rec, lb.raster_size, window);
  const Var recon = ad::l1(tape, recon_img, tape.constant(lb.image_before));

  const auto [b_pred, f_pred] = m.step(tape, b_before, f_before, tape.constant(lb.actions), lb.layout);
  std::vector<Placement> place_pred;
  const Tensor<T>& bp = tape.value(b_pred);
  for (int i = 0; i < n_obj; ++i) {
    const Vec2 px{static_cast<double>(bp(i, 0)) * lb.raster_size,
                  static_cast<double>(bp(i, 1)) * lb.raster_size};
    place_pred.push_back(place(lb.layout.object_scene[static_cast<std::size_t>(i)], px, window));
  }
  const Var pred_img = ad::composite(tape, m.decoder(tape, m.params, f_pred), std::move(place_pred),
                                     n_rec, lb.raster_size, window);
  const Var pred_pixel = ad::l1(tape, pred_img, tape.constant(lb.image_after));
  const double per_record = static_cast<double>(n_obj) / std::max(1, n_rec);
  const Var pred_location =
      ad::scale(tape, ad::mse(tape, b_pred, tape.constant(lb.loc_after)), static_cast<T>(per_record * 2));
  const Var pred_feature =
      ad::scale(tape, ad::mse(tape, f_pred, f_after), static_cast<T>(per_record * d));

  Var total = ad::add(tape, ad::scale(tape, recon, static_cast<T>(w.recon)),
                      ad::scale(tape, pred_pixel, static_cast<T>(w.pred_pixel)));
  total = ad::add(tape, total,
                  ad::scale(tape, pred_location, static_cast<T>(w.pred_state * w.location)));
  total = ad::add(tape, total, ad::scale(tape, pred_feature, static_cast<T>(w.pred_state)));
  return {total, recon, pred_pixel, pred_location, pred_feature};
}

// (L_recon, L_pred) for one record.
template <typename T>
LossTerms compute_losses(const PushSample& record, ForwardModel<T>& m, const PixelMap& map) {
  const LossBatch<T> lb = make_loss_batch<T>({&record}, map, m.cfg.repr.window);
  Tape<T> tape(false);
  const LossVars v = forward_losses(tape, m, lb);
  return {static_cast<double>(tape.value(v.recon)[0]), static_cast<double>(tape.value(v.pred_pixel)[0]),
          static_cast<double>(tape.value(v.pred_location)[0]),
          static_cast<double>(tape.value(v.pred_feature)[0])};
}

}  // namespace pushplan

#endif  // PUSHPLAN_FORWARD_MODEL_HPP_
