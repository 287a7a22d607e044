#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace bkp {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
  virtual const char* kind() const noexcept { return "error"; }
};

/// Invalid configuration (unknown mode, bad threshold, malformed class map).
class ConfigError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "config"; }
};

/// Malformed input file (bad JSON, missing field, dangling reference).
class ParseError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "parse"; }
};

/// Attempt to construct a domain value that violates its invariants.
class InvariantError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "invariant"; }
};

// ---------------------------------------------------------------------------
// BoundingBox
// ---------------------------------------------------------------------------

/// Axis-aligned box stored as center + size, in pixels. Corner form
/// (x1, y1, x2, y2) exists only at the I/O boundary.
class BoundingBox {
 public:
  BoundingBox(double cx, double cy, double w, double h, double conf = 1.0)
      : cx_(cx), cy_(cy), w_(w), h_(h), conf_(conf) {
    if (!(w > 0.0) || !(h > 0.0))
      throw InvariantError("BoundingBox: width and height must be positive");
    if (!(conf >= 0.0 && conf <= 1.0))
      throw InvariantError("BoundingBox: confidence must be in [0,1]");
    if (!std::isfinite(cx) || !std::isfinite(cy) || !std::isfinite(w) ||
        !std::isfinite(h))
      throw InvariantError("BoundingBox: coordinates must be finite");
  }

  static BoundingBox from_corners(double x1, double y1, double x2, double y2,
                                  double conf = 1.0) {
    return BoundingBox((x1 + x2) / 2.0, (y1 + y2) / 2.0, x2 - x1, y2 - y1,
                       conf);
  }

  double cx() const { return cx_; }
  double cy() const { return cy_; }
  double w() const { return w_; }
  double h() const { return h_; }
  double conf() const { return conf_; }

  double x1() const { return cx_ - w_ / 2.0; }
  double y1() const { return cy_ - h_ / 2.0; }
  double x2() const { return cx_ + w_ / 2.0; }
  double y2() const { return cy_ + h_ / 2.0; }

  double area() const { return w_ * h_; }
  double diagonal() const { return std::hypot(w_, h_); }

  BoundingBox with_conf(double conf) const {
    return BoundingBox(cx_, cy_, w_, h_, conf);
  }

  /// Intersect with [0,width]x[0,height]; used when ingesting files.
  /// Boxes entirely outside the image collapse to a thin sliver on the border,
  /// so the result is always a valid box.
  BoundingBox clamped(double width, double height) const {
    const double kMin = 1e-3;
    double nx1 = std::clamp(x1(), 0.0, width - kMin);
    double ny1 = std::clamp(y1(), 0.0, height - kMin);
    double nx2 = std::clamp(x2(), nx1 + kMin, width);
    double ny2 = std::clamp(y2(), ny1 + kMin, height);
    return from_corners(nx1, ny1, nx2, ny2, conf_);
  }

  friend bool operator==(const BoundingBox& a, const BoundingBox& b) {
    return a.cx_ == b.cx_ && a.cy_ == b.cy_ && a.w_ == b.w_ && a.h_ == b.h_ &&
           a.conf_ == b.conf_;
  }

 private:
  double cx_, cy_, w_, h_, conf_;
};

// ---------------------------------------------------------------------------
// Keypoints and skeletons
// ---------------------------------------------------------------------------

/// COCO visibility convention.
enum class Visibility : std::uint8_t {
  kNotLabeled = 0,  // x, y are meaningless and ignored by all consumers
  kOccluded = 1,    // labeled but not visible in the image
  kVisible = 2,
};

struct Keypoint {
  double x = 0.0;
  double y = 0.0;
  Visibility v = Visibility::kNotLabeled;

  /// Loss and association layers treat any labeled keypoint as usable.
  bool labeled() const { return v != Visibility::kNotLabeled; }
};

inline constexpr int kNumKeypoints = 17;

/// COCO keypoint order.
namespace joints {
inline constexpr int kNose = 0;
inline constexpr int kLeftEye = 1;
inline constexpr int kRightEye = 2;
inline constexpr int kLeftEar = 3;
inline constexpr int kRightEar = 4;
inline constexpr int kLeftShoulder = 5;
inline constexpr int kRightShoulder = 6;
inline constexpr int kLeftElbow = 7;
inline constexpr int kRightElbow = 8;
inline constexpr int kLeftWrist = 9;
inline constexpr int kRightWrist = 10;
inline constexpr int kLeftHip = 11;
inline constexpr int kRightHip = 12;
inline constexpr int kLeftKnee = 13;
inline constexpr int kRightKnee = 14;
inline constexpr int kLeftAnkle = 15;
inline constexpr int kRightAnkle = 16;
}  // namespace joints

/// Fixed-length 17-point skeleton; the array length enforces the invariant.
struct Skeleton {
  std::array<Keypoint, kNumKeypoints> keypoints{};

  Keypoint& operator[](int i) { return keypoints[static_cast<size_t>(i)]; }
  const Keypoint& operator[](int i) const {
    return keypoints[static_cast<size_t>(i)];
  }

  int labeled_count() const {
    int n = 0;
    for (const auto& k : keypoints) n += k.labeled() ? 1 : 0;
    return n;
  }
};

// ---------------------------------------------------------------------------
// Part classes
// ---------------------------------------------------------------------------

/// A named body region plus the skeleton indices whose centroid anchors the
/// body-part association, and the OKS tolerance used by the part box loss.
struct PartClass {
  int id;
  std::string name;
  std::vector<int> keypoint_indices;
  double oks_weight;  // gamma

  PartClass(int id_, std::string name_, std::vector<int> indices,
            double gamma)
      : id(id_),
        name(std::move(name_)),
        keypoint_indices(std::move(indices)),
        oks_weight(gamma) {
    if (keypoint_indices.empty())
      throw InvariantError("PartClass '" + name +
                           "': keypoint index set must be non-empty");
    for (int k : keypoint_indices)
      if (k < 0 || k >= kNumKeypoints)
        throw InvariantError("PartClass '" + name +
                             "': keypoint index out of range");
    if (!(oks_weight > 0.0))
      throw InvariantError("PartClass '" + name + "': gamma must be positive");
  }
};

/// Class id 0 is reserved for the person/body class everywhere (NMS,
/// detection files, evaluation); part classes use ids >= 1.
inline constexpr int kPersonClassId = 0;
inline constexpr const char* kPersonClassName = "person";

enum class ClassMapMode { kCocoHumanParts, kBkpd, kCustom };

class ClassMap {
 public:
  ClassMap(std::vector<PartClass> parts, ClassMapMode mode)
      : parts_(std::move(parts)), mode_(mode) {
    if (parts_.empty()) throw InvariantError("ClassMap: no part classes");
    for (size_t i = 0; i < parts_.size(); ++i) {
      if (parts_[i].id == kPersonClassId)
        throw InvariantError("ClassMap: part id 0 is reserved for person");
      for (size_t j = i + 1; j < parts_.size(); ++j)
        if (parts_[i].id == parts_[j].id || parts_[i].name == parts_[j].name)
          throw InvariantError("ClassMap: duplicate part id or name");
    }
  }

  const std::vector<PartClass>& parts() const { return parts_; }
  ClassMapMode mode() const { return mode_; }
  size_t size() const { return parts_.size(); }

  const PartClass* find(int id) const {
    for (const auto& p : parts_)
      if (p.id == id) return &p;
    return nullptr;
  }

  const PartClass* find(const std::string& name) const {
    for (const auto& p : parts_)
      if (p.name == name) return &p;
    return nullptr;
  }

  const PartClass& at(int id) const {
    const PartClass* p = find(id);
    if (!p)
      throw ConfigError("ClassMap: unknown part class id " +
                        std::to_string(id));
    return *p;
  }

 private:
  std::vector<PartClass> parts_;
  ClassMapMode mode_;
};

/// The two fixed mappings used throughout: six COCO-HumanParts classes and
/// the five-class body/keypoint/part layout (head, chest, hip, hands).
inline ClassMap classmap_builtin(ClassMapMode mode) {
  using namespace joints;
  switch (mode) {
    case ClassMapMode::kCocoHumanParts:
      return ClassMap(
          {
              PartClass(1, "head", {kNose, kLeftEye, kRightEye, kLeftEar, kRightEar}, 0.10),
              PartClass(2, "face", {kNose, kLeftEye, kRightEye}, 0.10),
              PartClass(3, "left-hand", {kLeftWrist}, 0.062),
              PartClass(4, "right-hand", {kRightWrist}, 0.062),
              PartClass(5, "left-foot", {kLeftAnkle}, 0.089),
              PartClass(6, "right-foot", {kRightAnkle}, 0.089),
          },
          ClassMapMode::kCocoHumanParts);
    case ClassMapMode::kBkpd:
      return ClassMap(
          {
              PartClass(1, "head", {kNose, kLeftEye, kRightEye, kLeftEar, kRightEar}, 0.10),
              PartClass(2, "chest", {kLeftShoulder, kRightShoulder}, 0.12),
              PartClass(3, "hip", {kLeftHip, kRightHip}, 0.12),
              PartClass(4, "left-hand", {kLeftWrist}, 0.062),
              PartClass(5, "right-hand", {kRightWrist}, 0.062),
          },
          ClassMapMode::kBkpd);
    case ClassMapMode::kCustom:
      break;
  }
  throw ConfigError("classmap_builtin: no builtin for requested mode");
}

// ---------------------------------------------------------------------------
// Person instances and scenes
// ---------------------------------------------------------------------------

/// One person: body box, optional skeleton, and associated part boxes keyed
/// by part class id. Skeleton absence is explicit (tiny/small annotations),
/// never encoded as an all-zero skeleton.
struct PersonInstance {
  BoundingBox body;
  std::optional<Skeleton> skeleton;
  std::map<int, std::vector<BoundingBox>> parts;

  explicit PersonInstance(BoundingBox body_) : body(std::move(body_)) {}
  PersonInstance(BoundingBox body_, std::optional<Skeleton> skel)
      : body(std::move(body_)), skeleton(std::move(skel)) {}
};

enum class SceneSource { kGt, kPrediction, kSynthetic };

struct Scene {
  std::string image_id;
  double width = 0.0;
  double height = 0.0;
  std::vector<PersonInstance> people;
  /// Part detections that the association stage could not attach to any
  /// person. Empty for ground-truth scenes.
  std::map<int, std::vector<BoundingBox>> unassigned_parts;
  SceneSource source = SceneSource::kGt;
};

}  // namespace bkp
