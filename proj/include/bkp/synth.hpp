#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "bkp/associate.hpp"
#include "bkp/core.hpp"
#include "bkp/eval_types.hpp"
#include "bkp/rng.hpp"

namespace bkp {

// ---------------------------------------------------------------------------
// Synthetic articulated scenes
// ---------------------------------------------------------------------------
// Deterministic generator used by property tests, the acceptance suite, and
// the crowding sweep. A scene is reproducible from (seed, index) alone; the
// draw order is fixed by this file and documented alongside the RNG so other
// implementations can reproduce corpora bit-identically.

/// How a part box is derived from its keypoint cluster: the cluster bounding
/// rectangle, padded to at least min_frac * person height per dimension,
/// then dilated about its center.
struct PartBoxRule {
  double dilate = 1.4;
  double min_frac = 0.12;
};

struct NoiseModel {
  double box_jitter = 0.0;   // sigma, px, applied to every box corner
  double pose_noise = 0.0;   // sigma, px, applied to labeled keypoints
  double conf_lo = 1.0;      // predicted confidences ~ U(conf_lo, conf_hi)
  double conf_hi = 1.0;
  double fp_rate = 0.0;      // per gt person: chance of spawning a fake person
  double fn_rate = 0.0;      // per gt person: chance of dropping it

  void validate() const {
    for (double p : {fp_rate, fn_rate})
      if (!(p >= 0.0 && p <= 1.0))
        throw ConfigError("NoiseModel: rates must be in [0,1]");
    if (!(box_jitter >= 0.0 && pose_noise >= 0.0))
      throw ConfigError("NoiseModel: jitter sigmas must be >= 0");
    if (!(conf_lo > 0.0 && conf_lo <= conf_hi && conf_hi <= 1.0))
      throw ConfigError("NoiseModel: need 0 < conf_lo <= conf_hi <= 1");
  }
};

struct SynthConfig {
  std::uint64_t seed = 0;
  int n_scenes = 1;
  int people_min = 1;
  int people_max = 7;
  double arena_w = 640.0;
  double arena_h = 640.0;
  double occlusion_prob = 0.0;  // per keypoint; occluded flag or unlabeled
  NoiseModel noise;

  std::map<std::string, PartBoxRule> part_rules = {
      {"head", {1.8, 0.14}},      {"face", {1.6, 0.10}},
      {"chest", {1.35, 0.17}},    {"hip", {1.35, 0.15}},
      {"left-hand", {1.0, 0.11}}, {"right-hand", {1.0, 0.11}},
      {"left-foot", {1.0, 0.10}}, {"right-foot", {1.0, 0.10}},
  };
  PartBoxRule default_rule;

  void validate() const {
    noise.validate();
    if (n_scenes < 0) throw ConfigError("SynthConfig: n_scenes must be >= 0");
    if (!(people_min >= 1 && people_max >= people_min))
      throw ConfigError("SynthConfig: invalid people range");
    if (!(arena_w > 0.0 && arena_h > 0.0))
      throw ConfigError("SynthConfig: arena must be positive");
    if (!(occlusion_prob >= 0.0 && occlusion_prob <= 1.0))
      throw ConfigError("SynthConfig: occlusion_prob must be in [0,1]");
    for (const auto& [name, rule] : part_rules)
      if (!(rule.dilate >= 1.0 && rule.min_frac > 0.0))
        throw ConfigError("SynthConfig: bad part rule for '" + name + "'");
  }

  const PartBoxRule& rule_for(const std::string& name) const {
    auto it = part_rules.find(name);
    return it != part_rules.end() ? it->second : default_rule;
  }
};

struct ScenePair {
  Scene gt;
  Scene pred;
};

namespace detail {

struct RawPerson {
  std::array<Point2, kNumKeypoints> pos;  // pre-occlusion joint positions
  double height;
};

inline Point2 limb(Point2 from, double len, double angle) {
  // angle measured from straight down, positive toward +x
  return {from.x + len * std::sin(angle), from.y + len * std::cos(angle)};
}

/// Draw order: height, px, py, lean, then left arm (2 angles), right arm
/// (2), left leg (2), right leg (2).
inline RawPerson sample_person(Rng& rng, const SynthConfig& cfg) {
  constexpr double kDeg = M_PI / 180.0;
  const double h = rng.uniform(0.25, 0.5) * cfg.arena_h;
  const double px = rng.uniform(0.55 * h, cfg.arena_w - 0.55 * h);
  const double py = rng.uniform(0.66 * h, cfg.arena_h - 0.50 * h);
  const double lean = rng.uniform(-0.03, 0.03) * h;

  const double la = rng.uniform(-80.0, 80.0) * kDeg;
  const double lf = la + rng.uniform(-70.0, 70.0) * kDeg;
  const double ra = rng.uniform(-80.0, 80.0) * kDeg;
  const double rf = ra + rng.uniform(-70.0, 70.0) * kDeg;
  const double lt = rng.uniform(-25.0, 25.0) * kDeg;
  const double ls = lt + rng.uniform(-20.0, 20.0) * kDeg;
  const double rt = rng.uniform(-25.0, 25.0) * kDeg;
  const double rs = rt + rng.uniform(-20.0, 20.0) * kDeg;

  using namespace joints;
  RawPerson p;
  p.height = h;
  const Point2 nose{px + 2.0 * lean, py - 0.47 * h};
  p.pos[kNose] = nose;
  p.pos[kLeftEye] = {nose.x + 0.021 * h, nose.y - 0.018 * h};
  p.pos[kRightEye] = {nose.x - 0.021 * h, nose.y - 0.018 * h};
  p.pos[kLeftEar] = {nose.x + 0.042 * h, nose.y - 0.006 * h};
  p.pos[kRightEar] = {nose.x - 0.042 * h, nose.y - 0.006 * h};
  const Point2 lsh{px + lean + 0.115 * h, py - 0.36 * h};
  const Point2 rsh{px + lean - 0.115 * h, py - 0.36 * h};
  p.pos[kLeftShoulder] = lsh;
  p.pos[kRightShoulder] = rsh;
  p.pos[kLeftElbow] = limb(lsh, 0.17 * h, la);
  p.pos[kRightElbow] = limb(rsh, 0.17 * h, ra);
  p.pos[kLeftWrist] = limb(p.pos[kLeftElbow], 0.16 * h, lf);
  p.pos[kRightWrist] = limb(p.pos[kRightElbow], 0.16 * h, rf);
  const Point2 lhip{px + 0.08 * h, py};
  const Point2 rhip{px - 0.08 * h, py};
  p.pos[kLeftHip] = lhip;
  p.pos[kRightHip] = rhip;
  p.pos[kLeftKnee] = limb(lhip, 0.24 * h, lt);
  p.pos[kRightKnee] = limb(rhip, 0.24 * h, rt);
  p.pos[kLeftAnkle] = limb(p.pos[kLeftKnee], 0.23 * h, ls);
  p.pos[kRightAnkle] = limb(p.pos[kRightKnee], 0.23 * h, rs);
  return p;
}

/// Two draws per keypoint (occlude?, kind) so the stream shape does not
/// depend on the outcome. Unlabeled keypoints get zeroed coordinates.
inline Skeleton apply_occlusion(const RawPerson& p, Rng& rng,
                                double occlusion_prob) {
  Skeleton s;
  for (int k = 0; k < kNumKeypoints; ++k) {
    const double u_occ = rng.unit();
    const double u_kind = rng.unit();
    Keypoint kp;
    if (u_occ < occlusion_prob) {
      kp.v = u_kind < 0.5 ? Visibility::kOccluded : Visibility::kNotLabeled;
    } else {
      kp.v = Visibility::kVisible;
    }
    if (kp.labeled()) {
      kp.x = p.pos[static_cast<size_t>(k)].x;
      kp.y = p.pos[static_cast<size_t>(k)].y;
    }
    s[k] = kp;
  }
  return s;
}

inline BoundingBox cluster_box(std::span<const Point2> pts, double height,
                               const PartBoxRule& rule) {
  double x1 = pts[0].x, x2 = pts[0].x, y1 = pts[0].y, y2 = pts[0].y;
  for (const Point2& p : pts) {
    x1 = std::min(x1, p.x);
    x2 = std::max(x2, p.x);
    y1 = std::min(y1, p.y);
    y2 = std::max(y2, p.y);
  }
  const double cx = (x1 + x2) / 2.0, cy = (y1 + y2) / 2.0;
  const double w = std::max(x2 - x1, rule.min_frac * height) * rule.dilate;
  const double h = std::max(y2 - y1, rule.min_frac * height) * rule.dilate;
  return BoundingBox(cx, cy, w, h);
}

inline PersonInstance build_gt_person(const RawPerson& raw,
                                      const Skeleton& skel,
                                      const SynthConfig& cfg,
                                      const ClassMap& cmap) {
  double x1 = raw.pos[0].x, x2 = raw.pos[0].x;
  double y1 = raw.pos[0].y, y2 = raw.pos[0].y;
  for (const Point2& p : raw.pos) {
    x1 = std::min(x1, p.x);
    x2 = std::max(x2, p.x);
    y1 = std::min(y1, p.y);
    y2 = std::max(y2, p.y);
  }
  const double pad_x = 0.07 * raw.height, pad_y = 0.05 * raw.height;
  PersonInstance person(BoundingBox::from_corners(x1 - pad_x, y1 - pad_y,
                                                  x2 + pad_x, y2 + pad_y));
  person.skeleton = skel;
  for (const PartClass& pc : cmap.parts()) {
    std::vector<Point2> pts;
    for (int k : pc.keypoint_indices) pts.push_back(raw.pos[static_cast<size_t>(k)]);
    person.parts[pc.id] = {
        cluster_box(pts, raw.height, cfg.rule_for(pc.name))};
  }
  return person;
}

// Corner jitter expressed as center/size deltas, so zero sigma reproduces
// the input box bit-for-bit.
inline BoundingBox jitter_box(const BoundingBox& box, Rng& rng, double sigma,
                              double conf) {
  const double dx1 = rng.normal(0.0, sigma);
  const double dy1 = rng.normal(0.0, sigma);
  const double dx2 = rng.normal(0.0, sigma);
  const double dy2 = rng.normal(0.0, sigma);
  return BoundingBox(box.cx() + (dx1 + dx2) / 2.0,
                     box.cy() + (dy1 + dy2) / 2.0,
                     std::max(box.w() + (dx2 - dx1), 1.0),
                     std::max(box.h() + (dy2 - dy1), 1.0), conf);
}

inline PersonInstance jitter_person(const PersonInstance& gt, Rng& rng,
                                    const NoiseModel& noise) {
  const double conf = rng.uniform(noise.conf_lo, noise.conf_hi);
  PersonInstance pred(jitter_box(gt.body, rng, noise.box_jitter, conf));
  if (gt.skeleton) {
    Skeleton s = *gt.skeleton;
    for (int k = 0; k < kNumKeypoints; ++k) {
      if (!s[k].labeled()) continue;
      s[k].x += rng.normal(0.0, noise.pose_noise);
      s[k].y += rng.normal(0.0, noise.pose_noise);
    }
    pred.skeleton = s;
  }
  for (const auto& [class_id, boxes] : gt.parts) {
    for (const BoundingBox& b : boxes) {
      const double part_conf = rng.uniform(noise.conf_lo, noise.conf_hi);
      pred.parts[class_id].push_back(
          jitter_box(b, rng, noise.box_jitter, part_conf));
    }
  }
  return pred;
}

inline void clamp_scene(Scene& scene) {
  for (PersonInstance& p : scene.people) {
    p.body = p.body.clamped(scene.width, scene.height);
    for (auto& [id, boxes] : p.parts)
      for (BoundingBox& b : boxes) b = b.clamped(scene.width, scene.height);
  }
  for (auto& [id, boxes] : scene.unassigned_parts)
    for (BoundingBox& b : boxes) b = b.clamped(scene.width, scene.height);
}

}  // namespace detail

inline std::string synth_image_id(std::uint64_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "synth-%06llu",
                static_cast<unsigned long long>(index));
  return buf;
}

/// One ground-truth scene plus its noisy prediction, deterministic in
/// (cfg.seed, index). With all noise at zero the prediction equals the
/// ground truth apart from the source tag.
inline ScenePair generate_scene(const SynthConfig& cfg, std::uint64_t index,
                                const ClassMap& cmap) {
  cfg.validate();
  Rng rng = Rng::for_index(cfg.seed, index);

  ScenePair out;
  out.gt.image_id = out.pred.image_id = synth_image_id(index);
  out.gt.width = out.pred.width = cfg.arena_w;
  out.gt.height = out.pred.height = cfg.arena_h;
  out.gt.source = SceneSource::kGt;
  out.pred.source = SceneSource::kPrediction;

  const int n_people = static_cast<int>(
      rng.uniform_int(cfg.people_min, cfg.people_max));
  std::vector<detail::RawPerson> raws;
  for (int i = 0; i < n_people; ++i) {
    detail::RawPerson raw = detail::sample_person(rng, cfg);
    Skeleton skel = detail::apply_occlusion(raw, rng, cfg.occlusion_prob);
    out.gt.people.push_back(detail::build_gt_person(raw, skel, cfg, cmap));
    raws.push_back(raw);
  }

  // predictions: drop, jitter, then fake people
  for (const PersonInstance& gt_person : out.gt.people) {
    if (rng.chance(cfg.noise.fn_rate)) continue;
    out.pred.people.push_back(
        detail::jitter_person(gt_person, rng, cfg.noise));
  }
  for (int i = 0; i < n_people; ++i) {
    if (!rng.chance(cfg.noise.fp_rate)) continue;
    detail::RawPerson raw = detail::sample_person(rng, cfg);
    Skeleton skel = detail::apply_occlusion(raw, rng, cfg.occlusion_prob);
    PersonInstance fake = detail::build_gt_person(raw, skel, cfg, cmap);
    out.pred.people.push_back(
        detail::jitter_person(fake, rng, cfg.noise));
  }

  detail::clamp_scene(out.gt);
  detail::clamp_scene(out.pred);
  return out;
}

inline std::vector<ScenePair> generate_corpus(const SynthConfig& cfg,
                                              const ClassMap& cmap) {
  std::vector<ScenePair> out;
  out.reserve(static_cast<size_t>(cfg.n_scenes));
  for (int i = 0; i < cfg.n_scenes; ++i)
    out.push_back(generate_scene(cfg, static_cast<std::uint64_t>(i), cmap));
  return out;
}

// ---------------------------------------------------------------------------
// Reference association
// ---------------------------------------------------------------------------
// Exhaustive re-statement of the association rule, kept free of any code
// from the production path: the full |P| x |B| distance table is enumerated
// and the global per-part argmin taken.

inline Association oracle_associate(std::span<const DetectedBody> bodies,
                                    std::span<const PartDetection> parts,
                                    const ClassMap& cmap) {
  Association out;
  for (const DetectedBody& b : bodies) out.people.emplace_back(b.box, b.skeleton);

  for (const PartDetection& part : parts) {
    const PartClass& pc = cmap.at(part.class_id);
    double best_d2 = std::numeric_limits<double>::infinity();
    int best_body = -1;
    for (size_t b = 0; b < bodies.size(); ++b) {
      double sx = 0.0, sy = 0.0;
      int n = 0;
      for (int k : pc.keypoint_indices) {
        const Keypoint& kp = bodies[b].skeleton[k];
        if (kp.v == Visibility::kNotLabeled) continue;
        sx += kp.x;
        sy += kp.y;
        ++n;
      }
      if (n == 0) continue;
      const double dx = part.box.cx() - sx / n;
      const double dy = part.box.cy() - sy / n;
      const double d2 = dx * dx + dy * dy;
      if (d2 < best_d2) {
        best_d2 = d2;
        best_body = static_cast<int>(b);
      }
    }
    if (best_body < 0)
      out.unassigned.push_back(part);
    else
      out.people[static_cast<size_t>(best_body)]
          .parts[part.class_id]
          .push_back(part.box);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reference evaluation
// ---------------------------------------------------------------------------
// Naive evaluator for the contract pinned in eval_types.hpp. Everything is
// recomputed per threshold with plain nested loops; precision/recall points
// are exact integer fractions. Deliberately shares no algorithm code with
// the evaluation engine.

namespace oracle_detail {

struct Frac {
  long long num = 0;
  long long den = 1;
};

inline bool frac_ge(const Frac& a, const Frac& b) {
  return static_cast<__int128>(a.num) * b.den >=
         static_cast<__int128>(b.num) * a.den;
}

inline bool frac_gt(const Frac& a, const Frac& b) {
  return static_cast<__int128>(a.num) * b.den >
         static_cast<__int128>(b.num) * a.den;
}

struct Item {
  double x1, y1, x2, y2;
  double conf = 1.0;
  double area = 0.0;           // stored-box area, the contract's banding area
  int owner = -1;              // person index within the scene
  const Skeleton* skel = nullptr;
  double person_area = 0.0;    // oks scale
  bool gt_ignore = false;
};

inline double sim_boxes(Similarity kind, const Item& pred, const Item& gt) {
  const double iw = std::min(pred.x2, gt.x2) - std::max(pred.x1, gt.x1);
  const double ih = std::min(pred.y2, gt.y2) - std::max(pred.y1, gt.y1);
  const double inter = std::max(iw, 0.0) * std::max(ih, 0.0);
  const double area_p = (pred.x2 - pred.x1) * (pred.y2 - pred.y1);
  const double area_g = (gt.x2 - gt.x1) * (gt.y2 - gt.y1);
  if (kind == Similarity::kInnerIou) return inter / area_g;
  return inter / (area_p + area_g - inter);
}

inline double sim_oks(const Item& pred, const Item& gt,
                      const std::array<double, kNumKeypoints>& sigmas) {
  if (!pred.skel || !gt.skel) return 0.0;
  double sum = 0.0;
  int n = 0;
  for (int k = 0; k < kNumKeypoints; ++k) {
    const Keypoint& g = (*gt.skel)[k];
    if (g.v == Visibility::kNotLabeled) continue;
    const Keypoint& p = (*pred.skel)[k];
    const double dx = p.x - g.x, dy = p.y - g.y;
    const double kappa = 2.0 * sigmas[static_cast<size_t>(k)];
    sum += std::exp(-(dx * dx + dy * dy) /
                    (2.0 * gt.person_area * kappa * kappa));
    ++n;
  }
  return n == 0 ? 0.0 : sum / n;
}

inline double similarity(Similarity kind, const Item& pred, const Item& gt,
                         const std::array<double, kNumKeypoints>& sigmas) {
  return kind == Similarity::kOks ? sim_oks(pred, gt, sigmas)
                                  : sim_boxes(kind, pred, gt);
}

inline Item from_box(const BoundingBox& b, int owner) {
  return {b.x1(), b.y1(), b.x2(), b.y2(), b.conf(), b.area(),
          owner,  nullptr, 0.0,    false};
}

struct ImageItems {
  std::string image_id;
  std::vector<Item> gts;
  std::vector<Item> preds;  // sorted by (-conf, enumeration order), capped
};

/// Contract item enumeration (class = person or a part class), including the
/// per-image prediction ranking and cap.
inline std::vector<ImageItems> collect(std::span<const Scene> gts,
                                       std::span<const Scene> preds,
                                       int class_id, Similarity kind,
                                       int max_dets) {
  std::vector<std::pair<const Scene*, const Scene*>> paired;
  for (const Scene& g : gts)
    for (const Scene& p : preds)
      if (g.image_id == p.image_id) paired.push_back({&g, &p});
  std::sort(paired.begin(), paired.end(),
            [](const auto& a, const auto& b) {
              return a.first->image_id < b.first->image_id;
            });

  std::vector<ImageItems> out;
  for (const auto& [g, p] : paired) {
    ImageItems items;
    items.image_id = g->image_id;

    auto extract = [&](const Scene& scene, std::vector<Item>& dst) {
      if (class_id == kPersonClassId) {
        for (size_t i = 0; i < scene.people.size(); ++i) {
          Item it = from_box(scene.people[i].body, static_cast<int>(i));
          if (kind == Similarity::kOks) {
            const auto& s = scene.people[i].skeleton;
            it.skel = s ? &*s : nullptr;
            it.person_area = scene.people[i].body.area();
          }
          dst.push_back(it);
        }
      } else {
        for (size_t i = 0; i < scene.people.size(); ++i) {
          auto found = scene.people[i].parts.find(class_id);
          if (found == scene.people[i].parts.end()) continue;
          for (const BoundingBox& b : found->second)
            dst.push_back(from_box(b, static_cast<int>(i)));
        }
        auto loose = scene.unassigned_parts.find(class_id);
        if (loose != scene.unassigned_parts.end())
          for (const BoundingBox& b : loose->second)
            dst.push_back(from_box(b, -1));
      }
    };

    extract(*g, items.gts);
    extract(*p, items.preds);

    std::stable_sort(items.preds.begin(), items.preds.end(),
                     [](const Item& a, const Item& b) { return a.conf > b.conf; });
    if (static_cast<int>(items.preds.size()) > max_dets)
      items.preds.resize(static_cast<size_t>(max_dets));
    out.push_back(std::move(items));
  }
  return out;
}

/// Contract step 6: greedy matching, preferring non-ignored gts. Returns the
/// matched gt index per prediction (-1 unmatched).
inline std::vector<int> greedy(const std::vector<std::vector<double>>& sim,
                               const std::vector<Item>& gts, double tau) {
  const size_t np = sim.size();
  std::vector<int> pred_to_gt(np, -1);
  std::vector<bool> taken(gts.size(), false);
  for (size_t p = 0; p < np; ++p) {
    int best = -1;
    double best_sim = 0.0;
    for (int pass = 0; pass < 2 && best < 0; ++pass) {
      const bool want_ignored = pass == 1;
      for (size_t g = 0; g < gts.size(); ++g) {
        if (taken[g] || gts[g].gt_ignore != want_ignored) continue;
        if (sim[p][g] >= tau && sim[p][g] > best_sim) {
          best_sim = sim[p][g];
          best = static_cast<int>(g);
        }
      }
    }
    if (best >= 0) {
      taken[static_cast<size_t>(best)] = true;
      pred_to_gt[p] = best;
    }
  }
  return pred_to_gt;
}

struct RankedFlag {
  double conf;
  std::string image_id;
  int rank;
  bool ignored;
  bool tp;
};

/// Contract steps 7-8: pooled PR curve and 101-point AP with exact
/// fractional precisions, plus the final recall.
inline std::pair<double, double> pr_metrics(std::vector<RankedFlag> flags,
                                            long n_gt) {
  std::sort(flags.begin(), flags.end(), [](const RankedFlag& a,
                                           const RankedFlag& b) {
    return std::make_tuple(-a.conf, a.image_id, a.rank) <
           std::make_tuple(-b.conf, b.image_id, b.rank);
  });
  std::vector<Frac> precision, recall;
  long long tp = 0, fp = 0;
  for (const RankedFlag& f : flags) {
    if (f.ignored) continue;
    if (f.tp) ++tp; else ++fp;
    precision.push_back({tp, tp + fp});
    recall.push_back({tp, n_gt});
  }
  long double ap_sum = 0.0L;
  for (int k = 0; k <= 100; ++k) {
    const Frac r{k, 100};
    Frac best{0, 1};
    for (size_t i = 0; i < precision.size(); ++i)
      if (frac_ge(recall[i], r) && frac_gt(precision[i], best))
        best = precision[i];
    ap_sum += static_cast<long double>(best.num) / best.den;
  }
  const double ap = static_cast<double>(ap_sum / 101.0L);
  const double final_recall =
      n_gt > 0 ? static_cast<double>(tp) / static_cast<double>(n_gt) : 0.0;
  return {ap, final_recall};
}

}  // namespace oracle_detail

/// Naive reference evaluator; see eval_types.hpp for the contract.
inline EvalReport oracle_evaluate(std::span<const Scene> gt_scenes,
                                  std::span<const Scene> pred_scenes,
                                  std::span<const MatchProtocol> protocols,
                                  const ClassMap& cmap,
                                  const std::array<double, kNumKeypoints>&
                                      oks_sigmas,
                                  const EvalOptions& opts = {}) {
  using namespace oracle_detail;
  EvalReport report;

  // id mismatch warnings
  for (const Scene& g : gt_scenes) {
    bool found = false;
    for (const Scene& p : pred_scenes) found |= p.image_id == g.image_id;
    if (!found) report.warnings.push_back("gt-only image: " + g.image_id);
  }
  for (const Scene& p : pred_scenes) {
    bool found = false;
    for (const Scene& g : gt_scenes) found |= g.image_id == p.image_id;
    if (!found) report.warnings.push_back("pred-only image: " + p.image_id);
  }

  std::vector<int> class_ids;
  std::vector<std::string> class_names;
  class_ids.push_back(kPersonClassId);
  class_names.push_back(kPersonClassName);
  for (const PartClass& pc : cmap.parts()) {
    class_ids.push_back(pc.id);
    class_names.push_back(pc.name);
  }

  for (const MatchProtocol& protocol : protocols) {
    protocol.validate();
    for (size_t ci = 0; ci < class_ids.size(); ++ci) {
      const int class_id = class_ids[ci];
      if (protocol.sim == Similarity::kOks && class_id != kPersonClassId)
        continue;  // pose protocol scores person skeletons only

      auto images = collect(gt_scenes, pred_scenes, class_id, protocol.sim,
                            opts.max_dets);

      // scoreability and ignore flags
      for (auto& img : images) {
        for (Item& g : img.gts) {
          const bool unscoreable =
              protocol.sim == Similarity::kOks &&
              (!g.skel || [&] {
                int n = 0;
                for (const Keypoint& kp : g.skel->keypoints)
                  n += kp.v != Visibility::kNotLabeled ? 1 : 0;
                return n == 0;
              }());
          const bool out_of_band =
              protocol.band != SizeBand::kAll &&
              size_band(g.area, opts.cutoffs) != protocol.band;
          g.gt_ignore = unscoreable || out_of_band;
          if (unscoreable) g.skel = nullptr;  // similarity 0 to everything
        }
      }

      if (opts.restrict_to_target) {
        std::vector<ImageItems> kept;
        for (auto& img : images) {
          bool has_target = false;
          for (const Item& g : img.gts) {
            const bool scoreable =
                protocol.sim != Similarity::kOks || g.skel != nullptr;
            if (scoreable) has_target = true;
          }
          if (has_target) kept.push_back(std::move(img));
        }
        images = std::move(kept);
      }

      long n_gt = 0, n_pred = 0;
      for (const auto& img : images) {
        for (const Item& g : img.gts) n_gt += g.gt_ignore ? 0 : 1;
        n_pred += static_cast<long>(img.preds.size());
      }

      ClassProtocolRow row;
      row.protocol = protocol;
      row.class_name = class_names[ci];
      row.class_id = class_id;
      row.n_gt = n_gt;
      row.n_pred = n_pred;

      if (n_gt > 0) {
        double ap_sum = 0.0, ar_sum = 0.0;
        for (double tau : protocol.thresholds) {
          std::vector<RankedFlag> flags;
          long tp_count = 0;
          for (const auto& img : images) {
            std::vector<std::vector<double>> sim(img.preds.size());
            for (size_t p = 0; p < img.preds.size(); ++p) {
              sim[p].resize(img.gts.size());
              for (size_t g = 0; g < img.gts.size(); ++g)
                sim[p][g] = similarity(protocol.sim, img.preds[p],
                                       img.gts[g], oks_sigmas);
            }
            const auto match = greedy(sim, img.gts, tau);
            for (size_t p = 0; p < img.preds.size(); ++p) {
              const int g = match[p];
              RankedFlag f;
              f.conf = img.preds[p].conf;
              f.image_id = img.image_id;
              f.rank = static_cast<int>(p);
              if (g >= 0 && img.gts[static_cast<size_t>(g)].gt_ignore) {
                f.ignored = true;
                f.tp = false;
              } else if (g >= 0) {
                f.ignored = false;
                f.tp = true;
                ++tp_count;
              } else {
                f.ignored =
                    protocol.band != SizeBand::kAll &&
                    size_band(img.preds[p].area, opts.cutoffs) != protocol.band;
                f.tp = false;
              }
              flags.push_back(std::move(f));
            }
          }
          long fp_count = 0;
          for (const RankedFlag& f : flags)
            if (!f.ignored && !f.tp) ++fp_count;
          const auto [ap, recall] = pr_metrics(std::move(flags), n_gt);
          ap_sum += ap;
          ar_sum += recall;
          row.ap_by_threshold.push_back(ap);
          row.ar_by_threshold.push_back(recall);
          row.tp.push_back(tp_count);
          row.fp.push_back(fp_count);
          row.fn.push_back(n_gt - tp_count);
        }
        row.ap = ap_sum / static_cast<double>(protocol.thresholds.size());
        row.ar = ar_sum / static_cast<double>(protocol.thresholds.size());
      }

      // association metrics, part classes under box protocols at band all
      if (class_id != kPersonClassId && protocol.sim != Similarity::kOks &&
          protocol.band == SizeBand::kAll && n_gt > 0) {
        constexpr double kAssocTau = 0.5;
        auto persons = collect(gt_scenes, pred_scenes, kPersonClassId,
                               Similarity::kIou, opts.max_dets);
        if (opts.restrict_to_target) {
          // keep persons for exactly the images kept above
          std::vector<ImageItems> kept;
          for (const auto& img : images)
            for (const auto& pi : persons)
              if (pi.image_id == img.image_id) {
                kept.push_back(pi);
                break;
              }
          persons = std::move(kept);
        }

        long tp_parts = 0, correct_parts = 0;
        std::vector<RankedFlag> jap_flags;
        for (const auto& img : images) {
          // person pred index -> gt person index
          const ImageItems* person_img = nullptr;
          for (const auto& pi : persons)
            if (pi.image_id == img.image_id) person_img = &pi;
          std::vector<int> person_match;
          if (person_img) {
            std::vector<std::vector<double>> psim(person_img->preds.size());
            for (size_t p = 0; p < person_img->preds.size(); ++p) {
              psim[p].resize(person_img->gts.size());
              for (size_t g = 0; g < person_img->gts.size(); ++g)
                psim[p][g] = sim_boxes(Similarity::kIou, person_img->preds[p],
                                       person_img->gts[g]);
            }
            person_match = greedy(psim, person_img->gts, kAssocTau);
          }
          auto matched_gt_person_of = [&](int scene_person_idx) -> int {
            if (!person_img || scene_person_idx < 0) return -1;
            for (size_t p = 0; p < person_img->preds.size(); ++p)
              if (person_img->preds[p].owner == scene_person_idx)
                return person_match[p] >= 0
                           ? person_img->gts[static_cast<size_t>(
                                                 person_match[p])]
                                 .owner
                           : -1;
            return -1;
          };

          std::vector<std::vector<double>> sim(img.preds.size());
          for (size_t p = 0; p < img.preds.size(); ++p) {
            sim[p].resize(img.gts.size());
            for (size_t g = 0; g < img.gts.size(); ++g)
              sim[p][g] = sim_boxes(protocol.sim, img.preds[p], img.gts[g]);
          }
          const auto match = greedy(sim, img.gts, kAssocTau);
          for (size_t p = 0; p < img.preds.size(); ++p) {
            const int g = match[p];
            RankedFlag f;
            f.conf = img.preds[p].conf;
            f.image_id = img.image_id;
            f.rank = static_cast<int>(p);
            f.ignored = false;
            bool correct = false;
            if (g >= 0) {
              ++tp_parts;
              const int gt_owner = img.gts[static_cast<size_t>(g)].owner;
              const int via_person =
                  matched_gt_person_of(img.preds[p].owner);
              correct = gt_owner >= 0 && via_person == gt_owner;
              if (correct) ++correct_parts;
            }
            f.tp = g >= 0 && correct;
            jap_flags.push_back(std::move(f));
          }
        }
        if (tp_parts > 0)
          row.ca = 100.0 * static_cast<double>(correct_parts) /
                   static_cast<double>(tp_parts);
        row.jap = pr_metrics(std::move(jap_flags), n_gt).first;
      }

      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

}  // namespace bkp
