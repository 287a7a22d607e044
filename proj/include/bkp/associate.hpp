#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "bkp/core.hpp"

namespace bkp {

// ---------------------------------------------------------------------------
// Skeleton-based body/part association
// ---------------------------------------------------------------------------

/// A body detection with its inherently associated keypoints, as produced by
/// a joint detection+pose pipeline after NMS.
struct DetectedBody {
  BoundingBox box;
  Skeleton skeleton;
};

struct PartDetection {
  BoundingBox box;
  int class_id;
};

struct Point2 {
  double x;
  double y;
};

/// Per (body, part class) keypoint centroid. An entry is present iff the
/// body has at least one labeled keypoint in that class's index set.
class CentroidTable {
 public:
  CentroidTable(std::size_t n_bodies, const ClassMap& cmap)
      : cmap_(&cmap),
        cells_(n_bodies, std::vector<std::optional<Point2>>(cmap.size())) {}

  std::size_t n_bodies() const { return cells_.size(); }

  const std::optional<Point2>& lookup(std::size_t body, int class_id) const {
    return cells_[body][class_pos(class_id)];
  }

  void set(std::size_t body, int class_id, Point2 p) {
    cells_[body][class_pos(class_id)] = p;
  }

 private:
  std::size_t class_pos(int class_id) const {
    const auto& parts = cmap_->parts();
    for (std::size_t i = 0; i < parts.size(); ++i)
      if (parts[i].id == class_id) return i;
    throw ConfigError("CentroidTable: unknown part class id " +
                      std::to_string(class_id));
  }

  const ClassMap* cmap_;
  std::vector<std::vector<std::optional<Point2>>> cells_;
};

/// Mean position of each body's labeled keypoints within each part class's
/// index set; absent when none of them is labeled.
inline CentroidTable centroids(std::span<const DetectedBody> bodies,
                               const ClassMap& cmap) {
  CentroidTable table(bodies.size(), cmap);
  for (std::size_t b = 0; b < bodies.size(); ++b) {
    for (const PartClass& pc : cmap.parts()) {
      double sx = 0.0, sy = 0.0;
      int n = 0;
      for (int k : pc.keypoint_indices) {
        const Keypoint& kp = bodies[b].skeleton[k];
        if (!kp.labeled()) continue;
        sx += kp.x;
        sy += kp.y;
        ++n;
      }
      if (n > 0) table.set(b, pc.id, {sx / n, sy / n});
    }
  }
  return table;
}

struct AssocConfig {
  /// Maximum parts of one class attached to one body; 0 means unlimited.
  /// When the cap demotes a part (lower confidence than the kept ones), it is
  /// returned as unassigned rather than dropped.
  int max_per_class = 0;
  /// Optional robustness guard: a part is left unassigned when its distance
  /// to the winning centroid exceeds factor * body diagonal.
  std::optional<double> max_dist_factor;
};

struct Association {
  std::vector<PersonInstance> people;  // one per input body, same order
  std::vector<PartDetection> unassigned;
};

/// Assign every part detection to the body whose class centroid is nearest
/// to the part's box center. Bodies without a centroid for that class are
/// not candidates; a part with no candidate body comes back unassigned.
/// Distance ties break toward the lower body index. Deterministic.
inline Association bkp_associate(std::span<const DetectedBody> bodies,
                                 std::span<const PartDetection> parts,
                                 const ClassMap& cmap,
                                 const AssocConfig& cfg = {}) {
  const CentroidTable table = centroids(bodies, cmap);

  Association out;
  out.people.reserve(bodies.size());
  for (const DetectedBody& b : bodies)
    out.people.emplace_back(b.box, b.skeleton);

  // owner body index per part, parallel to `parts`
  std::vector<std::optional<std::size_t>> owner(parts.size());

  for (std::size_t p = 0; p < parts.size(); ++p) {
    const PartDetection& part = parts[p];
    cmap.at(part.class_id);  // unknown class ids are a configuration error

    double best_dist = std::numeric_limits<double>::infinity();
    std::optional<std::size_t> best;
    for (std::size_t b = 0; b < bodies.size(); ++b) {
      const auto& centroid = table.lookup(b, part.class_id);
      if (!centroid) continue;
      const double d = std::hypot(part.box.cx() - centroid->x,
                                  part.box.cy() - centroid->y);
      if (d < best_dist) {
        best_dist = d;
        best = b;
      }
    }

    if (best && cfg.max_dist_factor &&
        best_dist > *cfg.max_dist_factor * bodies[*best].box.diagonal())
      best.reset();

    owner[p] = best;
    if (!best) out.unassigned.push_back(part);
  }

  // Attach in input order so multi-part lists are reproducible.
  for (std::size_t p = 0; p < parts.size(); ++p)
    if (owner[p])
      out.people[*owner[p]].parts[parts[p].class_id].push_back(parts[p].box);

  if (cfg.max_per_class > 0) {
    const std::size_t cap = static_cast<std::size_t>(cfg.max_per_class);
    for (auto& person : out.people) {
      for (auto& [class_id, boxes] : person.parts) {
        while (boxes.size() > cap) {
          // demote the lowest-confidence box (latest on ties)
          std::size_t worst = 0;
          for (std::size_t i = 1; i < boxes.size(); ++i)
            if (boxes[i].conf() <= boxes[worst].conf()) worst = i;
          out.unassigned.push_back({boxes[worst], class_id});
          boxes.erase(boxes.begin() + static_cast<std::ptrdiff_t>(worst));
        }
      }
    }
  }

  return out;
}

// ---------------------------------------------------------------------------
// Scene bridging
// ---------------------------------------------------------------------------

struct FlatDetections {
  std::vector<DetectedBody> bodies;
  std::vector<PartDetection> parts;
};

/// Discard a prediction scene's person/part grouping, leaving the raw
/// detections an associator starts from. A person without a skeleton yields
/// an all-unlabeled one (it can anchor no parts).
inline FlatDetections flatten_scene(const Scene& scene) {
  FlatDetections out;
  for (const PersonInstance& person : scene.people) {
    out.bodies.push_back(
        {person.body, person.skeleton ? *person.skeleton : Skeleton{}});
    for (const auto& [class_id, boxes] : person.parts)
      for (const BoundingBox& b : boxes) out.parts.push_back({b, class_id});
  }
  for (const auto& [class_id, boxes] : scene.unassigned_parts)
    for (const BoundingBox& b : boxes) out.parts.push_back({b, class_id});
  return out;
}

inline Scene to_scene(const Association& assoc, std::string image_id,
                      double width, double height) {
  Scene scene;
  scene.image_id = std::move(image_id);
  scene.width = width;
  scene.height = height;
  scene.source = SceneSource::kPrediction;
  scene.people = assoc.people;
  for (const PartDetection& p : assoc.unassigned)
    scene.unassigned_parts[p.class_id].push_back(p.box);
  return scene;
}

}  // namespace bkp
