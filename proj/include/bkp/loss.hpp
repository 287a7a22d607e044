#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bkp/core.hpp"
#include "bkp/geometry.hpp"

namespace bkp {

// ---------------------------------------------------------------------------
// Forward-only loss kernels
// ---------------------------------------------------------------------------

/// Binary cross-entropy with natural log. Predictions are clamped away from
/// {0,1} by eps; targets are clamped into [0,1], which is the domain BCE is
/// defined over (box-similarity targets can dip below zero for far boxes).
inline double bce(double pred, double target) {
  constexpr double kEps = 1e-12;
  const double p = std::clamp(pred, kEps, 1.0 - kEps);
  const double t = std::clamp(target, 0.0, 1.0);
  return -(t * std::log(p) + (1.0 - t) * std::log(1.0 - p));
}

/// Minimum achievable BCE for a (possibly non-binary) target: its entropy.
inline double bce_floor(double target) {
  const double t = std::clamp(target, 0.0, 1.0);
  if (t <= 0.0 || t >= 1.0) return 0.0;
  return -(t * std::log(t) + (1.0 - t) * std::log(1.0 - t));
}

struct LossWeights {
  double box = 0.05;
  double conf = 0.7;
  double kpts = 0.10;
  double kconf = 0.5;
  double pbox = 0.05;   // same lambda as box by default
  double pconf = 0.7;   // same lambda as conf by default

  /// Defaults schema version; bump when the pinned values change.
  static constexpr int kDefaultsVersion = 1;

  void validate() const {
    for (double v : {box, conf, kpts, kconf, pbox, pconf})
      if (!(v >= 0.0) || !std::isfinite(v))
        throw ConfigError("LossWeights: lambdas must be finite and >= 0");
  }
};

struct BoxLoss {
  double loss;         // 1 - CIoU
  double conf_target;  // the CIoU value, consumed by BCE(conf, target)
};

inline BoxLoss loss_box(const BoundingBox& pred, const BoundingBox& gt) {
  const double c = ciou(pred, gt);
  return {1.0 - c, c};
}

struct KptsLoss {
  double kpts;
  double kconf;
};

/// Keypoint losses. The distance term averages 1 - OKS_k over the eta
/// labeled ground-truth keypoints (the visibility flag acts as a gate, any
/// labeled state counts); eta = 0 yields 0, not NaN. The confidence term is
/// the mean BCE of the predicted visibility confidence against the binarized
/// ground-truth flag over all 17 slots. `pred_vis_conf`, when provided, is
/// the raw sigmoid visibility confidence per keypoint; otherwise the
/// prediction's thresholded flag is used as a hard 0/1 confidence.
inline KptsLoss loss_kpts(const Skeleton& pred, const Skeleton& gt,
                          double gt_area, const OksSigmas& sigmas,
                          std::span<const double> pred_vis_conf = {},
                          OksAreaMode area_mode = OksAreaMode::kAreaSquared) {
  if (!(gt_area > 0.0)) throw InvariantError("loss_kpts: gt_area must be positive");
  if (!pred_vis_conf.empty() && pred_vis_conf.size() != kNumKeypoints)
    throw InvariantError("loss_kpts: pred_vis_conf must have 17 entries");

  const auto oks = oks_paper(pred, gt, gt_area, sigmas, area_mode);
  double sum = 0.0;
  int eta = 0;
  for (int k = 0; k < kNumKeypoints; ++k) {
    if (!oks[static_cast<size_t>(k)]) continue;
    sum += 1.0 - *oks[static_cast<size_t>(k)];
    ++eta;
  }
  const double l_kpts = eta > 0 ? sum / eta : 0.0;

  double conf_sum = 0.0;
  for (int k = 0; k < kNumKeypoints; ++k) {
    const double target = gt[k].labeled() ? 1.0 : 0.0;
    const double conf = pred_vis_conf.empty()
                            ? (pred[k].labeled() ? 1.0 : 0.0)
                            : pred_vis_conf[static_cast<size_t>(k)];
    conf_sum += bce(conf, target);
  }
  return {l_kpts, conf_sum / kNumKeypoints};
}

/// Box-overlap term used inside the part box loss; the published form reuses
/// the complete IoU, plain IoU is kept selectable.
enum class PboxIouMode { kCiou, kIou };

/// Part box loss: (1/eta) * sum over visible ground-truth parts of
/// (1 - IoU_p) + (1 - OKS_p), with OKS_p evaluated on box centers only,
/// using the per-class gamma tolerances and the person's ground-truth area.
/// Part lists are aligned by class position; a missing ground-truth slot is
/// an invisible part and contributes nothing. eta = 0 yields 0.
inline double loss_pbox(std::span<const BoundingBox> pred_parts,
                        std::span<const std::optional<BoundingBox>> gt_parts,
                        double gt_area, std::span<const double> gammas,
                        PboxIouMode iou_mode = PboxIouMode::kCiou,
                        OksAreaMode area_mode = OksAreaMode::kAreaSquared) {
  if (!(gt_area > 0.0)) throw InvariantError("loss_pbox: gt_area must be positive");
  if (pred_parts.size() != gt_parts.size() || gt_parts.size() != gammas.size())
    throw InvariantError("loss_pbox: part lists must align by class index");

  double sum = 0.0;
  int eta = 0;
  for (size_t p = 0; p < gt_parts.size(); ++p) {
    if (!gt_parts[p]) continue;
    const BoundingBox& gt = *gt_parts[p];
    const BoundingBox& pred = pred_parts[p];
    const double overlap =
        iou_mode == PboxIouMode::kCiou ? ciou(pred, gt) : iou(pred, gt);
    const double oks = oks_point(pred.cx(), pred.cy(), gt.cx(), gt.cy(),
                                 gt_area, gammas[p], area_mode);
    sum += (1.0 - overlap) + (1.0 - oks);
    ++eta;
  }
  return eta > 0 ? sum / eta : 0.0;
}

/// Part confidence loss: mean BCE of the predicted part confidences against
/// the elementwise product of ground-truth visibility and box IoU.
inline double loss_pconf(std::span<const double> conf_pred,
                         std::span<const double> v_gt,
                         std::span<const double> ious) {
  if (conf_pred.size() != v_gt.size() || v_gt.size() != ious.size())
    throw InvariantError("loss_pconf: vectors must have equal length");
  if (conf_pred.empty()) return 0.0;
  double sum = 0.0;
  for (size_t i = 0; i < conf_pred.size(); ++i)
    sum += bce(conf_pred[i], v_gt[i] * ious[i]);
  return sum / static_cast<double>(conf_pred.size());
}

struct LossComponents {
  double box = 0.0;
  double conf = 0.0;
  double kpts = 0.0;
  double kconf = 0.0;
  double pbox = 0.0;
  double pconf = 0.0;
};

inline double loss_total(const LossComponents& c, const LossWeights& w) {
  w.validate();
  const std::array<std::pair<const char*, double>, 6> named = {{
      {"box", c.box},
      {"conf", c.conf},
      {"kpts", c.kpts},
      {"kconf", c.kconf},
      {"pbox", c.pbox},
      {"pconf", c.pconf},
  }};
  for (const auto& [name, value] : named)
    if (!std::isfinite(value))
      throw InvariantError(std::string("loss_total: non-finite component '") +
                           name + "'");
  return w.box * c.box + w.conf * c.conf + w.kpts * c.kpts +
         w.kconf * c.kconf + w.pbox * c.pbox + w.pconf * c.pconf;
}

// ---------------------------------------------------------------------------
// Matched targets
// ---------------------------------------------------------------------------

/// One ground truth matched to one decoded prediction (the assignment that
/// produced the pair -- level, cell, anchor -- is upstream's concern and
/// carried only as metadata).
struct MatchedTarget {
  BoundingBox gt_box;
  std::optional<Skeleton> gt_skeleton;
  /// Aligned by class position within the active class map; empty slot =
  /// invisible part.
  std::vector<std::optional<BoundingBox>> gt_parts;

  BoundingBox pred_box;
  std::optional<Skeleton> pred_skeleton;
  /// Raw sigmoid visibility confidences; empty when unavailable.
  std::vector<double> pred_kpt_conf;
  std::vector<BoundingBox> pred_parts;

  // grid metadata, informational
  int level = 0;
  int grid_i = 0;
  int grid_j = 0;
  int anchor = 0;
};

struct LossOptions {
  PboxIouMode pbox_iou = PboxIouMode::kCiou;
  OksAreaMode area_mode = OksAreaMode::kAreaSquared;
};

/// Evaluate every component for one matched pair. The confidence targets are
/// the CIoU of the matched body box and v_gt * IoU per part, as in training.
inline LossComponents evaluate_matched(const MatchedTarget& t,
                                       const OksSigmas& sigmas,
                                       std::span<const double> gammas,
                                       const LossOptions& opts = {}) {
  if (!(t.gt_box.area() > 0.0))
    throw InvariantError("evaluate_matched: gt area must be positive");
  if (t.pred_parts.size() != t.gt_parts.size() ||
      t.gt_parts.size() != gammas.size())
    throw InvariantError("evaluate_matched: part lists must align by class");

  LossComponents c;
  const BoxLoss bl = loss_box(t.pred_box, t.gt_box);
  c.box = bl.loss;
  c.conf = bce(t.pred_box.conf(), bl.conf_target);

  if (t.gt_skeleton && t.pred_skeleton) {
    const KptsLoss kl =
        loss_kpts(*t.pred_skeleton, *t.gt_skeleton, t.gt_box.area(), sigmas,
                  t.pred_kpt_conf, opts.area_mode);
    c.kpts = kl.kpts;
    c.kconf = kl.kconf;
  }

  c.pbox = loss_pbox(t.pred_parts, t.gt_parts, t.gt_box.area(), gammas,
                     opts.pbox_iou, opts.area_mode);

  std::vector<double> conf_pred, v_gt, ious;
  for (size_t p = 0; p < t.gt_parts.size(); ++p) {
    conf_pred.push_back(t.pred_parts[p].conf());
    v_gt.push_back(t.gt_parts[p] ? 1.0 : 0.0);
    ious.push_back(t.gt_parts[p] ? iou(t.pred_parts[p], *t.gt_parts[p]) : 0.0);
  }
  c.pconf = loss_pconf(conf_pred, v_gt, ious);
  return c;
}

}  // namespace bkp
