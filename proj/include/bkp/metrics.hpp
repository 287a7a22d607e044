#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "bkp/core.hpp"
#include "bkp/eval_types.hpp"
#include "bkp/geometry.hpp"
#include "bkp/parallel.hpp"

namespace bkp {

// ---------------------------------------------------------------------------
// Matching and precision/recall primitives
// ---------------------------------------------------------------------------

struct GreedyMatch {
  std::vector<int> pred_to_gt;  // -1 = unmatched
  std::vector<int> gt_to_pred;
};

/// Greedy one-to-one matching. Predictions are rows of `sim`, already in
/// descending-confidence order; each takes the unmatched gt with the highest
/// similarity >= tau, preferring non-ignored gts, with equal similarities
/// resolving to the lowest gt index.
inline GreedyMatch match_greedy(const std::vector<std::vector<double>>& sim,
                                const std::vector<bool>& gt_ignore,
                                double tau) {
  const size_t n_gt = gt_ignore.size();
  GreedyMatch m;
  m.pred_to_gt.assign(sim.size(), -1);
  m.gt_to_pred.assign(n_gt, -1);
  for (size_t p = 0; p < sim.size(); ++p) {
    int best = -1, best_ignored = -1;
    double best_sim = 0.0, best_ignored_sim = 0.0;
    for (size_t g = 0; g < n_gt; ++g) {
      if (m.gt_to_pred[g] >= 0) continue;
      const double s = sim[p][g];
      if (s < tau) continue;  // tau > 0, so s > 0 from here on
      if (!gt_ignore[g]) {
        if (s > best_sim) {
          best_sim = s;
          best = static_cast<int>(g);
        }
      } else if (s > best_ignored_sim) {
        best_ignored_sim = s;
        best_ignored = static_cast<int>(g);
      }
    }
    const int chosen = best >= 0 ? best : best_ignored;
    if (chosen >= 0) {
      m.pred_to_gt[p] = chosen;
      m.gt_to_pred[static_cast<size_t>(chosen)] = static_cast<int>(p);
    }
  }
  return m;
}

struct RankedDetection {
  double conf;
  int image_index;  // images are pre-sorted by id, so this orders like the id
  int rank;         // per-image descending-confidence rank
  bool ignored;
  bool tp;
};

struct PrSummary {
  double ap;      // 101-point interpolated average precision
  double recall;  // final recall of the ranked list
};

/// Pool one threshold's ranked detections into the interpolated AP and the
/// final recall. n_gt counts non-ignored ground truths.
inline PrSummary average_precision(std::vector<RankedDetection> dets,
                                   long n_gt) {
  std::sort(dets.begin(), dets.end(),
            [](const RankedDetection& a, const RankedDetection& b) {
              return std::make_tuple(-a.conf, a.image_index, a.rank) <
                     std::make_tuple(-b.conf, b.image_index, b.rank);
            });
  std::vector<double> precision, recall;
  long tp = 0, fp = 0;
  for (const RankedDetection& d : dets) {
    if (d.ignored) continue;
    if (d.tp) ++tp; else ++fp;
    precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
    recall.push_back(n_gt > 0 ? static_cast<double>(tp) / static_cast<double>(n_gt)
                              : 0.0);
  }

  std::vector<double> suffix_max(precision.size());
  double running = 0.0;
  for (size_t i = precision.size(); i-- > 0;) {
    running = std::max(running, precision[i]);
    suffix_max[i] = running;
  }

  double ap_sum = 0.0;
  for (int k = 0; k <= 100; ++k) {
    const double r = static_cast<double>(k) / 100.0;
    const auto it = std::lower_bound(recall.begin(), recall.end(), r);
    if (it != recall.end())
      ap_sum += suffix_max[static_cast<size_t>(it - recall.begin())];
  }
  const double final_recall =
      n_gt > 0 ? static_cast<double>(tp) / static_cast<double>(n_gt) : 0.0;
  return {ap_sum / 101.0, final_recall};
}

// ---------------------------------------------------------------------------
// Evaluation engine
// ---------------------------------------------------------------------------
// Implements the contract documented in eval_types.hpp. Per-image similarity
// matrices are computed once per (protocol, class) and shared across the
// threshold sweep; image-level work parallelizes over opts.threads with
// index-addressed results, so reports are identical for any schedule.

namespace engine_detail {

struct PairedImage {
  std::string id;
  const Scene* gt;
  const Scene* pred;
};

inline std::vector<PairedImage> pair_images(std::span<const Scene> gts,
                                            std::span<const Scene> preds,
                                            std::vector<std::string>* warnings) {
  std::map<std::string, const Scene*> gt_by_id, pred_by_id;
  for (const Scene& s : gts) gt_by_id[s.image_id] = &s;
  for (const Scene& s : preds) pred_by_id[s.image_id] = &s;
  std::vector<PairedImage> out;
  for (const auto& [id, g] : gt_by_id) {
    auto it = pred_by_id.find(id);
    if (it == pred_by_id.end())
      warnings->push_back("gt-only image: " + id);
    else
      out.push_back({id, g, it->second});
  }
  for (const auto& [id, p] : pred_by_id)
    if (!gt_by_id.count(id)) warnings->push_back("pred-only image: " + id);
  return out;
}

struct GtEntry {
  BoundingBox box;
  const Skeleton* skel = nullptr;
  int owner = -1;
  bool scoreable = true;  // oks: has labeled keypoints
  bool ignore = false;
};

struct PredEntry {
  BoundingBox box;
  const Skeleton* skel = nullptr;
  int owner = -1;
};

struct ImageClassItems {
  std::vector<GtEntry> gts;
  std::vector<PredEntry> preds;  // conf-sorted, capped
};

inline void extract_class(const Scene& scene, int class_id, bool want_skel,
                          std::vector<BoundingBox>* boxes,
                          std::vector<const Skeleton*>* skels,
                          std::vector<int>* owners) {
  if (class_id == kPersonClassId) {
    for (size_t i = 0; i < scene.people.size(); ++i) {
      boxes->push_back(scene.people[i].body);
      skels->push_back(want_skel && scene.people[i].skeleton
                           ? &*scene.people[i].skeleton
                           : nullptr);
      owners->push_back(static_cast<int>(i));
    }
    return;
  }
  for (size_t i = 0; i < scene.people.size(); ++i) {
    auto it = scene.people[i].parts.find(class_id);
    if (it == scene.people[i].parts.end()) continue;
    for (const BoundingBox& b : it->second) {
      boxes->push_back(b);
      skels->push_back(nullptr);
      owners->push_back(static_cast<int>(i));
    }
  }
  auto loose = scene.unassigned_parts.find(class_id);
  if (loose != scene.unassigned_parts.end())
    for (const BoundingBox& b : loose->second) {
      boxes->push_back(b);
      skels->push_back(nullptr);
      owners->push_back(-1);
    }
}

inline ImageClassItems build_items(const PairedImage& img, int class_id,
                                   Similarity sim, int max_dets) {
  const bool want_skel = sim == Similarity::kOks;
  ImageClassItems items;

  std::vector<BoundingBox> boxes;
  std::vector<const Skeleton*> skels;
  std::vector<int> owners;
  extract_class(*img.gt, class_id, want_skel, &boxes, &skels, &owners);
  for (size_t i = 0; i < boxes.size(); ++i) {
    GtEntry e{boxes[i], skels[i], owners[i], true, false};
    if (want_skel) e.scoreable = e.skel && e.skel->labeled_count() > 0;
    items.gts.push_back(e);
  }

  boxes.clear(); skels.clear(); owners.clear();
  extract_class(*img.pred, class_id, want_skel, &boxes, &skels, &owners);
  std::vector<size_t> order(boxes.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return boxes[a].conf() > boxes[b].conf();
  });
  if (static_cast<int>(order.size()) > max_dets)
    order.resize(static_cast<size_t>(max_dets));
  for (size_t i : order)
    items.preds.push_back({boxes[i], skels[i], owners[i]});
  return items;
}

inline double entry_similarity(Similarity kind, const PredEntry& pred,
                               const GtEntry& gt, const OksSigmas& sigmas) {
  switch (kind) {
    case Similarity::kIou:
      return iou(pred.box, gt.box);
    case Similarity::kInnerIou:
      return inner_iou(pred.box, gt.box);
    case Similarity::kOks: {
      if (!gt.scoreable || !pred.skel) return 0.0;
      const auto v = oks_coco(*pred.skel, *gt.skel, gt.box.area(), sigmas);
      return v.value_or(0.0);
    }
  }
  return 0.0;
}

inline std::vector<std::vector<double>> sim_matrix(const ImageClassItems& items,
                                                   Similarity kind,
                                                   const OksSigmas& sigmas) {
  std::vector<std::vector<double>> sim(items.preds.size());
  for (size_t p = 0; p < items.preds.size(); ++p) {
    sim[p].resize(items.gts.size());
    for (size_t g = 0; g < items.gts.size(); ++g)
      sim[p][g] = entry_similarity(kind, items.preds[p], items.gts[g], sigmas);
  }
  return sim;
}

}  // namespace engine_detail

/// CA / JAP over paired scenes for one part class. Persons match greedily at
/// IoU 0.5; parts match at `sim` with the same fixed threshold.
struct AssociationMetrics {
  long tp = 0;
  long correct = 0;
  std::optional<double> ca;   // percent
  std::optional<double> jap;  // absent when the class has no ground truth
};

inline AssociationMetrics association_metrics(std::span<const Scene> gt_scenes,
                                              std::span<const Scene> pred_scenes,
                                              int class_id,
                                              Similarity sim = Similarity::kIou,
                                              const EvalOptions& opts = {}) {
  using namespace engine_detail;
  constexpr double kTau = 0.5;
  std::vector<std::string> sink;
  auto paired = pair_images(gt_scenes, pred_scenes, &sink);

  if (opts.restrict_to_target) {
    std::vector<PairedImage> kept;
    for (const auto& img : paired) {
      std::vector<BoundingBox> b; std::vector<const Skeleton*> s; std::vector<int> o;
      extract_class(*img.gt, class_id, false, &b, &s, &o);
      if (!b.empty()) kept.push_back(img);
    }
    paired = std::move(kept);
  }

  const OksSigmas sigmas = OksSigmas::coco();
  long n_gt = 0, tp = 0, correct = 0;
  std::vector<RankedDetection> ranked;

  for (size_t idx = 0; idx < paired.size(); ++idx) {
    const auto& img = paired[idx];
    auto persons = build_items(img, kPersonClassId, Similarity::kIou,
                               opts.max_dets);
    const std::vector<bool> person_ignore(persons.gts.size(), false);
    const auto person_match = match_greedy(
        sim_matrix(persons, Similarity::kIou, sigmas), person_ignore, kTau);

    // scene person index -> matched gt person scene index (or -1)
    std::map<int, int> person_owner_match;
    for (size_t p = 0; p < persons.preds.size(); ++p) {
      const int g = person_match.pred_to_gt[p];
      person_owner_match[persons.preds[p].owner] =
          g >= 0 ? persons.gts[static_cast<size_t>(g)].owner : -1;
    }

    auto items = build_items(img, class_id, sim, opts.max_dets);
    n_gt += static_cast<long>(items.gts.size());
    const std::vector<bool> no_ignore(items.gts.size(), false);
    const auto match =
        match_greedy(sim_matrix(items, sim, sigmas), no_ignore, kTau);

    for (size_t p = 0; p < items.preds.size(); ++p) {
      const int g = match.pred_to_gt[p];
      bool ok = false;
      if (g >= 0) {
        ++tp;
        const int gt_owner = items.gts[static_cast<size_t>(g)].owner;
        const auto it = person_owner_match.find(items.preds[p].owner);
        ok = items.preds[p].owner >= 0 && it != person_owner_match.end() &&
             gt_owner >= 0 && it->second == gt_owner;
        if (ok) ++correct;
      }
      ranked.push_back({items.preds[p].box.conf(), static_cast<int>(idx),
                        static_cast<int>(p), false, g >= 0 && ok});
    }
  }

  AssociationMetrics out;
  out.tp = tp;
  out.correct = correct;
  if (tp > 0) out.ca = 100.0 * static_cast<double>(correct) / static_cast<double>(tp);
  if (n_gt > 0) out.jap = average_precision(std::move(ranked), n_gt).ap;
  return out;
}

inline std::optional<double> conditional_accuracy(
    std::span<const Scene> gt_scenes, std::span<const Scene> pred_scenes,
    int class_id, Similarity sim = Similarity::kIou,
    const EvalOptions& opts = {}) {
  return association_metrics(gt_scenes, pred_scenes, class_id, sim, opts).ca;
}

inline std::optional<double> joint_average_precision(
    std::span<const Scene> gt_scenes, std::span<const Scene> pred_scenes,
    int class_id, Similarity sim = Similarity::kIou,
    const EvalOptions& opts = {}) {
  return association_metrics(gt_scenes, pred_scenes, class_id, sim, opts).jap;
}

/// Run every protocol over every applicable class and assemble the report.
inline EvalReport evaluate(std::span<const Scene> gt_scenes,
                           std::span<const Scene> pred_scenes,
                           std::span<const MatchProtocol> protocols,
                           const ClassMap& cmap, const OksSigmas& sigmas,
                           const EvalOptions& opts = {}) {
  using namespace engine_detail;
  opts.cutoffs.validate();
  EvalReport report;
  const auto all_paired =
      pair_images(gt_scenes, pred_scenes, &report.warnings);

  std::vector<std::pair<int, std::string>> classes;
  classes.emplace_back(kPersonClassId, kPersonClassName);
  for (const PartClass& pc : cmap.parts()) classes.emplace_back(pc.id, pc.name);

  for (const MatchProtocol& protocol : protocols) {
    protocol.validate();
    for (const auto& [class_id, class_name] : classes) {
      if (protocol.sim == Similarity::kOks && class_id != kPersonClassId)
        continue;

      auto paired = all_paired;
      if (opts.restrict_to_target) {
        std::vector<PairedImage> kept;
        for (const auto& img : paired) {
          std::vector<BoundingBox> b; std::vector<const Skeleton*> s; std::vector<int> o;
          extract_class(*img.gt, class_id,
                        protocol.sim == Similarity::kOks, &b, &s, &o);
          bool has = false;
          for (size_t i = 0; i < b.size(); ++i) {
            const bool scoreable =
                protocol.sim != Similarity::kOks ||
                (s[i] && s[i]->labeled_count() > 0);
            has |= scoreable;
          }
          if (has) kept.push_back(img);
        }
        paired = std::move(kept);
      }

      // per-image items and similarity matrices, parallel
      std::vector<ImageClassItems> items(paired.size());
      std::vector<std::vector<std::vector<double>>> sims(paired.size());
      parallel_for(paired.size(), opts.threads, [&](size_t i) {
        items[i] = build_items(paired[i], class_id, protocol.sim, opts.max_dets);
        for (auto& g : items[i].gts) {
          const bool out_of_band =
              protocol.band != SizeBand::kAll &&
              size_band(g.box, opts.cutoffs) != protocol.band;
          g.ignore = !g.scoreable || out_of_band;
        }
        sims[i] = sim_matrix(items[i], protocol.sim, sigmas);
      });

      long n_gt = 0, n_pred = 0;
      for (const auto& it : items) {
        for (const auto& g : it.gts) n_gt += g.ignore ? 0 : 1;
        n_pred += static_cast<long>(it.preds.size());
      }

      ClassProtocolRow row;
      row.protocol = protocol;
      row.class_name = class_name;
      row.class_id = class_id;
      row.n_gt = n_gt;
      row.n_pred = n_pred;

      if (n_gt > 0) {
        for (size_t ti = 0; ti < protocol.thresholds.size(); ++ti) {
          const double tau = protocol.thresholds[ti];
          std::vector<std::vector<RankedDetection>> per_image(paired.size());
          std::vector<long> tp_per_image(paired.size(), 0);
          parallel_for(paired.size(), opts.threads, [&](size_t i) {
            std::vector<bool> gt_ignore;
            for (const auto& g : items[i].gts) gt_ignore.push_back(g.ignore);
            const auto match = match_greedy(sims[i], gt_ignore, tau);
            for (size_t p = 0; p < items[i].preds.size(); ++p) {
              const int g = match.pred_to_gt[p];
              RankedDetection d{items[i].preds[p].box.conf(),
                                static_cast<int>(i), static_cast<int>(p),
                                false, false};
              if (g >= 0 && items[i].gts[static_cast<size_t>(g)].ignore) {
                d.ignored = true;
              } else if (g >= 0) {
                d.tp = true;
                ++tp_per_image[i];
              } else {
                d.ignored = protocol.band != SizeBand::kAll &&
                            size_band(items[i].preds[p].box, opts.cutoffs) !=
                                protocol.band;
              }
              per_image[i].push_back(d);
            }
          });

          std::vector<RankedDetection> ranked;
          long tp_count = 0, fp_count = 0;
          for (size_t i = 0; i < paired.size(); ++i) {
            tp_count += tp_per_image[i];
            for (const auto& d : per_image[i]) {
              if (!d.ignored && !d.tp) ++fp_count;
              ranked.push_back(d);
            }
          }

          if (opts.with_traces && ti == 0) {
            for (size_t i = 0; i < paired.size(); ++i) {
              std::vector<bool> gt_ignore;
              for (const auto& g : items[i].gts) gt_ignore.push_back(g.ignore);
              const auto match = match_greedy(sims[i], gt_ignore, tau);
              for (size_t p = 0; p < items[i].preds.size(); ++p) {
                const int g = match.pred_to_gt[p];
                row.trace.push_back(
                    {paired[i].id, static_cast<int>(p), g,
                     g >= 0 ? sims[i][p][static_cast<size_t>(g)] : 0.0});
              }
              for (size_t g = 0; g < items[i].gts.size(); ++g)
                if (!items[i].gts[g].ignore && match.gt_to_pred[g] < 0)
                  row.trace.push_back({paired[i].id, -1, static_cast<int>(g), 0.0});
            }
          }

          const PrSummary pr = average_precision(std::move(ranked), n_gt);
          row.ap_by_threshold.push_back(pr.ap);
          row.ar_by_threshold.push_back(pr.recall);
          row.tp.push_back(tp_count);
          row.fp.push_back(fp_count);
          row.fn.push_back(n_gt - tp_count);
        }
        double ap_sum = 0.0, ar_sum = 0.0;
        for (double v : row.ap_by_threshold) ap_sum += v;
        for (double v : row.ar_by_threshold) ar_sum += v;
        row.ap = ap_sum / static_cast<double>(row.ap_by_threshold.size());
        row.ar = ar_sum / static_cast<double>(row.ar_by_threshold.size());
      }

      if (class_id != kPersonClassId && protocol.sim != Similarity::kOks &&
          protocol.band == SizeBand::kAll && n_gt > 0) {
        const auto assoc = association_metrics(gt_scenes, pred_scenes,
                                               class_id, protocol.sim, opts);
        row.ca = assoc.ca;
        row.jap = assoc.jap;
      }

      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

}  // namespace bkp
