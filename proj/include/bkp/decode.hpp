#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "bkp/core.hpp"

namespace bkp {

// ---------------------------------------------------------------------------
// Grid-relative prediction decoding
// ---------------------------------------------------------------------------

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Inverse of sigmoid on (0,1).
inline double logit(double p) { return std::log(p / (1.0 - p)); }

/// Where a raw prediction vector lives: cell indices, pixels per cell, and
/// the anchor dimensions in grid units.
struct GridContext {
  double grid_x;
  double grid_y;
  double stride;
  double anchor_w;
  double anchor_h;

  GridContext(double gx, double gy, double stride_, double aw, double ah)
      : grid_x(gx), grid_y(gy), stride(stride_), anchor_w(aw), anchor_h(ah) {
    if (!(stride > 0.0)) throw InvariantError("GridContext: stride must be positive");
    if (!(aw > 0.0) || !(ah > 0.0))
      throw InvariantError("GridContext: anchors must be positive");
  }
};

/// One cell/anchor output before any activation: 5 body values, 17x3
/// keypoint values, and 5 values per part class.
/// Field order (also the order of the flat tensor dumps):
///   body  x, y, w, h, conf
///   each keypoint  x, y, v
///   each part  x, y, w, h, conf
struct RawPrediction {
  std::array<double, 5> body{};
  std::array<std::array<double, 3>, kNumKeypoints> kpts{};
  std::vector<std::array<double, 5>> parts;

  size_t flat_size() const { return 5 + 3 * kNumKeypoints + 5 * parts.size(); }
};

/// Body w/h transform: the scheme used here squares a single sigmoid against
/// the anchor; kDoubled is the (2*sigmoid)^2 variant common in YOLO releases,
/// kept behind a switch for interop.
enum class WhMode { kPaper, kDoubled };

inline double decode_wh(double raw, double anchor, double stride, WhMode mode) {
  const double s = sigmoid(raw);
  const double f = mode == WhMode::kPaper ? s * s : (2.0 * s) * (2.0 * s);
  return f * anchor * stride;
}

/// Body box: center confined to the 2x2-cell neighborhood of the cell,
/// cx in [grid_x - 0.5, grid_x + 1.5] * stride.
inline BoundingBox decode_body(const RawPrediction& raw, const GridContext& ctx,
                               WhMode mode = WhMode::kPaper) {
  const double cx = (2.0 * sigmoid(raw.body[0]) - 0.5 + ctx.grid_x) * ctx.stride;
  const double cy = (2.0 * sigmoid(raw.body[1]) - 0.5 + ctx.grid_y) * ctx.stride;
  const double w = decode_wh(raw.body[2], ctx.anchor_w, ctx.stride, mode);
  const double h = decode_wh(raw.body[3], ctx.anchor_h, ctx.stride, mode);
  return BoundingBox(cx, cy, w, h, sigmoid(raw.body[4]));
}

struct DecodedPart {
  BoundingBox box;
  bool visible;
};

/// Part boxes: centers are raw cell-relative offsets (no squashing, so they
/// may land anywhere in the image); width and height are sigmoid^2 fractions
/// of the already-decoded body box, hence always strictly smaller than it.
/// `visible` reflects the caller-supplied confidence threshold; the raw
/// confidence is kept on the box either way.
inline std::vector<DecodedPart> decode_parts(const RawPrediction& raw,
                                             const GridContext& ctx,
                                             const BoundingBox& body,
                                             double conf_threshold = 0.0) {
  std::vector<DecodedPart> out;
  out.reserve(raw.parts.size());
  for (const auto& p : raw.parts) {
    const double cx = (p[0] + ctx.grid_x) * ctx.stride;
    const double cy = (p[1] + ctx.grid_y) * ctx.stride;
    const double sw = sigmoid(p[2]);
    const double sh = sigmoid(p[3]);
    const double conf = sigmoid(p[4]);
    BoundingBox box(cx, cy, sw * sw * body.w(), sh * sh * body.h(), conf);
    out.push_back({box, conf >= conf_threshold});
  }
  return out;
}

/// Keypoints follow the pose-head convention: coordinates are linear in the
/// raw value (2*raw - 0.5 + grid, no sigmoid) and may fall far from the
/// cell; visibility is sigmoid-thresholded at 0.5 into the labeled flag.
inline Skeleton decode_keypoints(const RawPrediction& raw,
                                 const GridContext& ctx) {
  Skeleton skel;
  for (int k = 0; k < kNumKeypoints; ++k) {
    const auto& r = raw.kpts[static_cast<size_t>(k)];
    Keypoint kp;
    kp.x = (2.0 * r[0] - 0.5 + ctx.grid_x) * ctx.stride;
    kp.y = (2.0 * r[1] - 0.5 + ctx.grid_y) * ctx.stride;
    kp.v = sigmoid(r[2]) >= 0.5 ? Visibility::kVisible : Visibility::kNotLabeled;
    skel[k] = kp;
  }
  return skel;
}

// ---------------------------------------------------------------------------
// Inverse transforms
// ---------------------------------------------------------------------------
// Exact inverses of the decode maps on their open domains; used to build raw
// tensor fixtures and to check the decode round trip.

inline std::array<double, 5> encode_body(const BoundingBox& box,
                                         const GridContext& ctx,
                                         WhMode mode = WhMode::kPaper) {
  const double tx = (box.cx() / ctx.stride - ctx.grid_x + 0.5) / 2.0;
  const double ty = (box.cy() / ctx.stride - ctx.grid_y + 0.5) / 2.0;
  const double fw = std::sqrt(box.w() / (ctx.anchor_w * ctx.stride));
  const double fh = std::sqrt(box.h() / (ctx.anchor_h * ctx.stride));
  const double scale = mode == WhMode::kPaper ? 1.0 : 0.5;
  return {logit(tx), logit(ty), logit(fw * scale), logit(fh * scale),
          logit(box.conf())};
}

inline std::array<double, 5> encode_part(const BoundingBox& part,
                                         const GridContext& ctx,
                                         const BoundingBox& body) {
  return {part.cx() / ctx.stride - ctx.grid_x,
          part.cy() / ctx.stride - ctx.grid_y,
          logit(std::sqrt(part.w() / body.w())),
          logit(std::sqrt(part.h() / body.h())), logit(part.conf())};
}

/// Coordinate part only; the visibility threshold is not invertible, so v_raw
/// is emitted saturated (+-6) from the flag.
inline std::array<double, 3> encode_keypoint(const Keypoint& kp,
                                             const GridContext& ctx) {
  return {(kp.x / ctx.stride - ctx.grid_x + 0.5) / 2.0,
          (kp.y / ctx.stride - ctx.grid_y + 0.5) / 2.0,
          kp.labeled() ? 6.0 : -6.0};
}

}  // namespace bkp
