#pragma once

#include <array>
#include <cmath>
#include <optional>

#include "bkp/core.hpp"

namespace bkp {

// ---------------------------------------------------------------------------
// Box similarities
// ---------------------------------------------------------------------------

inline double intersection_area(const BoundingBox& a, const BoundingBox& b) {
  const double iw =
      std::min(a.x2(), b.x2()) - std::max(a.x1(), b.x1());
  const double ih =
      std::min(a.y2(), b.y2()) - std::max(a.y1(), b.y1());
  return std::max(iw, 0.0) * std::max(ih, 0.0);
}

// Overlap ratios divide corner-derived areas so that identity and
// containment come out exactly 1.0: the intersection extent is then computed
// from the same corner values as the denominators (min/max select, they do
// not round), keeping the ratios in [0,1] under floating point.
inline double corner_area(const BoundingBox& b) {
  return (b.x2() - b.x1()) * (b.y2() - b.y1());
}

/// Intersection over union, in [0,1]. Symmetric.
inline double iou(const BoundingBox& a, const BoundingBox& b) {
  const double inter = intersection_area(a, b);
  return inter / (corner_area(a) + corner_area(b) - inter);
}

/// Intersection over ground-truth area, in [0,1]. Asymmetric: equals 1 iff
/// the ground truth lies entirely within the prediction.
inline double inner_iou(const BoundingBox& pred, const BoundingBox& gt) {
  return intersection_area(pred, gt) / corner_area(gt);
}

/// Complete IoU (Zheng et al.): IoU minus the normalized center-distance
/// penalty and the aspect-ratio term. Forward-only kernel, alpha computed
/// with the published trade-off v / ((1 - IoU) + v). Range (-1, 1];
/// equal to IoU when centers coincide and aspect ratios match.
inline double ciou(const BoundingBox& pred, const BoundingBox& gt) {
  const double i = iou(pred, gt);

  const double dx = pred.cx() - gt.cx();
  const double dy = pred.cy() - gt.cy();
  const double rho2 = dx * dx + dy * dy;

  const double ew = std::max(pred.x2(), gt.x2()) - std::min(pred.x1(), gt.x1());
  const double eh = std::max(pred.y2(), gt.y2()) - std::min(pred.y1(), gt.y1());
  const double c2 = ew * ew + eh * eh;

  constexpr double kFourOverPi2 = 4.0 / (M_PI * M_PI);
  const double da = std::atan(gt.w() / gt.h()) - std::atan(pred.w() / pred.h());
  const double v = kFourOverPi2 * da * da;
  const double alpha = v > 0.0 ? v / ((1.0 - i) + v) : 0.0;

  return i - rho2 / c2 - alpha * v;
}

// ---------------------------------------------------------------------------
// Object-keypoint similarity
// ---------------------------------------------------------------------------

/// Per-keypoint tolerance weights. Defaults to the 17 published COCO sigmas.
struct OksSigmas {
  std::array<double, kNumKeypoints> sigmas;

  explicit OksSigmas(std::array<double, kNumKeypoints> s) : sigmas(s) {
    for (double v : s)
      if (!(v > 0.0)) throw InvariantError("OksSigmas: weights must be positive");
  }

  static OksSigmas coco() {
    return OksSigmas({0.026, 0.025, 0.025, 0.035, 0.035, 0.079, 0.079, 0.072,
                      0.072, 0.062, 0.062, 0.107, 0.107, 0.087, 0.087, 0.089,
                      0.089});
  }
};

/// The keypoint-loss similarity divides the (non-squared) distance by
/// 2 * area^2 * w^2 as written; the alternate mode reads the area factor as
/// s^2 = area, matching the conventional OKS normalization.
enum class OksAreaMode { kAreaSquared, kArea };

inline double oks_area_factor(double gt_area, OksAreaMode mode) {
  return mode == OksAreaMode::kAreaSquared ? gt_area * gt_area : gt_area;
}

/// Loss-side OKS: per-keypoint exp(-d / (2 * area^2 * w_k^2)) with d the
/// plain Euclidean distance. Slots whose ground-truth keypoint is unlabeled
/// are empty. Values are in (0, 1].
inline std::array<std::optional<double>, kNumKeypoints> oks_paper(
    const Skeleton& pred, const Skeleton& gt, double gt_area,
    const OksSigmas& sigmas, OksAreaMode area_mode = OksAreaMode::kAreaSquared) {
  if (!(gt_area > 0.0)) throw InvariantError("oks_paper: gt_area must be positive");
  std::array<std::optional<double>, kNumKeypoints> out{};
  const double area_factor = oks_area_factor(gt_area, area_mode);
  for (int k = 0; k < kNumKeypoints; ++k) {
    if (!gt[k].labeled()) continue;
    const double d = std::hypot(pred[k].x - gt[k].x, pred[k].y - gt[k].y);
    const double w = sigmas.sigmas[static_cast<size_t>(k)];
    out[static_cast<size_t>(k)] = std::exp(-d / (2.0 * area_factor * w * w));
  }
  return out;
}

/// Same similarity evaluated for a single point pair; used for part-box
/// centers with the per-part gamma tolerances.
inline double oks_point(double pred_x, double pred_y, double gt_x, double gt_y,
                        double gt_area, double weight,
                        OksAreaMode area_mode = OksAreaMode::kAreaSquared) {
  const double d = std::hypot(pred_x - gt_x, pred_y - gt_y);
  return std::exp(-d / (2.0 * oks_area_factor(gt_area, area_mode) * weight * weight));
}

/// Evaluation-side OKS as defined by the COCO API: mean over labeled
/// keypoints of exp(-d^2 / (2 * s^2 * kappa_k^2)) with s^2 the ground-truth
/// area and kappa_k = 2 * sigma_k. Empty when no keypoint is labeled --
/// an unscoreable pair, which is different from a score of zero.
inline std::optional<double> oks_coco(const Skeleton& pred, const Skeleton& gt,
                                      double gt_area, const OksSigmas& sigmas) {
  if (!(gt_area > 0.0)) throw InvariantError("oks_coco: gt_area must be positive");
  double sum = 0.0;
  int n = 0;
  for (int k = 0; k < kNumKeypoints; ++k) {
    if (!gt[k].labeled()) continue;
    const double dx = pred[k].x - gt[k].x;
    const double dy = pred[k].y - gt[k].y;
    const double kappa = 2.0 * sigmas.sigmas[static_cast<size_t>(k)];
    sum += std::exp(-(dx * dx + dy * dy) / (2.0 * gt_area * kappa * kappa));
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

}  // namespace bkp
