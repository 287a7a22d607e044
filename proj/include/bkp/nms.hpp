#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <span>
#include <tuple>
#include <vector>

#include "bkp/core.hpp"
#include "bkp/geometry.hpp"

namespace bkp {

/// Confidence and overlap thresholds, separate for the body class and the
/// part classes. Defaults follow the referenced joint-detection setup.
struct NmsConfig {
  double tau_conf_body = 0.05;
  double tau_iou_body = 0.6;
  double tau_conf_part = 0.1;
  double tau_iou_part = 0.3;

  void validate() const {
    for (double t : {tau_conf_body, tau_iou_body, tau_conf_part, tau_iou_part})
      if (!(t >= 0.0 && t <= 1.0))
        throw ConfigError("NmsConfig: thresholds must be in [0,1]");
  }
};

struct Candidate {
  BoundingBox box;
  int class_id;  // kPersonClassId for bodies, >= 1 for parts
};

namespace detail {
// Deterministic ranking within a class: confidence first, geometry as the
// tie-break so equal-confidence duplicates order reproducibly.
inline bool candidate_order(const Candidate& a, const Candidate& b) {
  return std::make_tuple(-a.box.conf(), a.box.cx(), a.box.cy(), a.box.w(),
                         a.box.h()) <
         std::make_tuple(-b.box.conf(), b.box.cx(), b.box.cy(), b.box.w(),
                         b.box.h());
}
}  // namespace detail

/// Greedy hard NMS, grouped per class. Returns indices into `candidates` of
/// the survivors, ordered by (class_id, -conf, cx, cy, w, h). A box is
/// dropped when its IoU with an already-kept higher-confidence box of the
/// same class exceeds the class's tau_iou; boxes below tau_conf are removed
/// up front.
inline std::vector<std::size_t> nms_keep_indices(
    std::span<const Candidate> candidates, const NmsConfig& cfg) {
  cfg.validate();

  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const Candidate& c = candidates[i];
    const bool is_body = c.class_id == kPersonClassId;
    const double tau_conf = is_body ? cfg.tau_conf_body : cfg.tau_conf_part;
    if (c.box.conf() >= tau_conf) by_class[c.class_id].push_back(i);
  }

  std::vector<std::size_t> kept;
  for (auto& [class_id, idx] : by_class) {
    const bool is_body = class_id == kPersonClassId;
    const double tau_iou = is_body ? cfg.tau_iou_body : cfg.tau_iou_part;

    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return detail::candidate_order(candidates[a], candidates[b]);
    });

    std::vector<std::size_t> kept_in_class;
    for (std::size_t i : idx) {
      bool suppressed = false;
      for (std::size_t j : kept_in_class) {
        if (iou(candidates[i].box, candidates[j].box) > tau_iou) {
          suppressed = true;
          break;
        }
      }
      if (!suppressed) kept_in_class.push_back(i);
    }
    kept.insert(kept.end(), kept_in_class.begin(), kept_in_class.end());
  }
  return kept;
}

inline std::vector<Candidate> nms(std::span<const Candidate> candidates,
                                  const NmsConfig& cfg) {
  std::vector<Candidate> out;
  for (std::size_t i : nms_keep_indices(candidates, cfg))
    out.push_back(candidates[i]);
  return out;
}

}  // namespace bkp
