#pragma once

#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "bkp/core.hpp"

namespace bkp {

// ---------------------------------------------------------------------------
// Evaluation protocol vocabulary
// ---------------------------------------------------------------------------
// Shared by the evaluation engine and the independent reference evaluator;
// only the data shapes live here, never algorithm code.
//
// Both evaluators implement this exact matching contract:
//
//  1. Images are paired by image_id; ids present on one side only are
//     reported as warnings and skipped. Images iterate in ascending id order.
//  2. Class item enumeration order within an image is: people in scene
//     order, then for part classes each person's boxes in list order
//     followed by the unassigned boxes in list order. This order is the
//     final ranking tie-break.
//  3. Per image and class, predictions are sorted by (-conf, enumeration
//     order) and truncated to max_dets. Matching walks them in that order.
//  4. Similarities: iou(pred, gt); inner_iou(pred, gt) = intersection over
//     gt area; oks follows the COCO definition on person skeletons with the
//     gt person box area as scale. A gt person with no labeled keypoints is
//     unscoreable under oks: its similarity is 0 to every prediction and it
//     carries the ignore flag. A prediction without a skeleton has oks 0.
//  5. Ignore flags: a gt is ignored when the protocol's size band is set and
//     the gt box area falls outside it (oks bands use the person box).
//     A prediction is ignored when it matched an ignored gt, or when it is
//     unmatched and its own box area falls outside the active band.
//  6. Greedy matching per threshold t: each prediction takes the unmatched
//     gt with the highest similarity >= t, preferring non-ignored gts over
//     ignored ones; equal similarities resolve to the lowest gt index.
//     Matches are one-to-one.
//  7. Ranking pools every image's predictions sorted by (-conf, image_id,
//     per-image rank). Ignored predictions are skipped; the rest cumulate
//     tp/fp into a precision/recall sequence with recall = tp / n_gt over
//     non-ignored gts.
//  8. AP is the 101-point interpolation: mean over r in {0, 0.01, .., 1} of
//     max precision at recall >= r (0 when unreachable). AR is the final
//     recall. Both average over the protocol's threshold list.
//  9. A class with zero non-ignored gts yields absent metrics and is
//     excluded from cross-class means.
// 10. Association metrics (part classes, box protocols, band = all):
//     predicted persons match gt persons greedily at IoU 0.5 ranked by
//     confidence; part predictions match gt parts at the protocol
//     similarity, fixed threshold 0.5. A true-positive part is correctly
//     associated iff its owning predicted person is matched to the gt
//     person that owns its matched gt part; unassigned parts are never
//     correct. CA = 100 * correct / TP (absent without TPs); JAP is AP@0.5
//     with true positives restricted to correctly associated parts.
// 11. restrict_to_target drops, per class, all images whose gt has no item
//     of that class (for oks: no scoreable skeleton) before any other step.

enum class Similarity { kIou, kInnerIou, kOks };

enum class SizeBand { kAll, kTiny, kSmall, kMedium, kLarge };

/// Area cutoffs in px^2: tiny <= 20^2 < small <= 32^2 < medium <= 96^2 < large.
/// The tiny/small boundary values are provisional defaults; override via
/// config when the reference banding differs.
struct SizeCutoffs {
  double tiny = 400.0;
  double small = 1024.0;
  double medium = 9216.0;

  void validate() const {
    if (!(tiny > 0.0 && small > tiny && medium > small))
      throw ConfigError("SizeCutoffs: cutoffs must be increasing and positive");
  }
};

inline SizeBand size_band(double area, const SizeCutoffs& cutoffs = {}) {
  cutoffs.validate();
  if (area <= cutoffs.tiny) return SizeBand::kTiny;
  if (area <= cutoffs.small) return SizeBand::kSmall;
  if (area <= cutoffs.medium) return SizeBand::kMedium;
  return SizeBand::kLarge;
}

inline SizeBand size_band(const BoundingBox& gt_box,
                          const SizeCutoffs& cutoffs = {}) {
  return size_band(gt_box.area(), cutoffs);
}

inline const char* to_string(Similarity s) {
  switch (s) {
    case Similarity::kIou: return "iou";
    case Similarity::kInnerIou: return "inner_iou";
    case Similarity::kOks: return "oks";
  }
  return "?";
}

inline const char* to_string(SizeBand b) {
  switch (b) {
    case SizeBand::kAll: return "all";
    case SizeBand::kTiny: return "tiny";
    case SizeBand::kSmall: return "small";
    case SizeBand::kMedium: return "medium";
    case SizeBand::kLarge: return "large";
  }
  return "?";
}

/// One evaluation pass: a similarity kind, the matching thresholds it is
/// swept over, and an optional ground-truth size-band restriction.
struct MatchProtocol {
  Similarity sim = Similarity::kIou;
  std::vector<double> thresholds;
  SizeBand band = SizeBand::kAll;

  void validate() const {
    if (thresholds.empty())
      throw ConfigError("MatchProtocol: threshold list is empty");
    double prev = 0.0;
    for (double t : thresholds) {
      if (!(t > 0.0 && t <= 1.0))
        throw ConfigError("MatchProtocol: thresholds must lie in (0,1]");
      if (!(t > prev))
        throw ConfigError("MatchProtocol: thresholds must be strictly increasing");
      prev = t;
    }
  }

  std::string label() const {
    std::string s = to_string(sim);
    s += "[";
    char buf[32];
    for (size_t i = 0; i < thresholds.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.2f", thresholds[i]);
      if (i) s += ",";
      s += buf;
    }
    s += "]@";
    s += to_string(band);
    return s;
  }

  /// 0.50:0.05:0.95, the usual ten-threshold sweep.
  static std::vector<double> coco_thresholds() {
    std::vector<double> t;
    for (int i = 0; i < 10; ++i) t.push_back(0.5 + 0.05 * i);
    return t;
  }

  static MatchProtocol iou_coco(SizeBand band = SizeBand::kAll) {
    return {Similarity::kIou, coco_thresholds(), band};
  }
  static MatchProtocol oks_coco(SizeBand band = SizeBand::kAll) {
    return {Similarity::kOks, coco_thresholds(), band};
  }
  static MatchProtocol inner(SizeBand band = SizeBand::kAll) {
    return {Similarity::kInnerIou, {0.6, 0.75}, band};
  }
};

struct EvalOptions {
  SizeCutoffs cutoffs;
  int max_dets = 100;
  /// Evaluate each class only on images that contain at least one ground
  /// truth of it.
  bool restrict_to_target = false;
  bool with_traces = false;
  int threads = 1;
};

/// One matching decision at the first threshold of a protocol, kept when
/// traces are requested. gt_index -1 marks a false positive, pred_index -1 a
/// false negative.
struct TraceEvent {
  std::string image_id;
  int pred_index;
  int gt_index;
  double similarity;
};

/// Results for one (protocol, class) pair. Metrics are absent when the class
/// has no scoreable ground truth under the protocol (such classes are
/// excluded from means rather than counted as zero). CA is a percentage in
/// [0,100]; everything else lives in [0,1].
struct ClassProtocolRow {
  MatchProtocol protocol;
  std::string class_name;
  int class_id = 0;

  long n_gt = 0;    // non-ignored ground truths
  long n_pred = 0;  // ranked predictions (after the per-image cap)

  std::optional<double> ap;
  std::optional<double> ar;
  std::vector<double> ap_by_threshold;
  std::vector<double> ar_by_threshold;
  std::vector<long> tp, fp, fn;  // per threshold

  std::optional<double> jap;
  std::optional<double> ca;

  std::vector<TraceEvent> trace;
};

struct EvalReport {
  std::vector<ClassProtocolRow> rows;
  std::vector<std::string> warnings;

  const ClassProtocolRow* find(const std::string& protocol_label,
                               const std::string& class_name) const {
    for (const auto& r : rows)
      if (r.protocol.label() == protocol_label && r.class_name == class_name)
        return &r;
    return nullptr;
  }
};

/// Mean of present values; absent when no row contributes.
inline std::optional<double> mean_present(
    const std::vector<std::optional<double>>& values) {
  double sum = 0.0;
  int n = 0;
  for (const auto& v : values)
    if (v) {
      sum += *v;
      ++n;
    }
  if (n == 0) return std::nullopt;
  return sum / n;
}

}  // namespace bkp
