#include "bkp/decode.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "bkp/rng.hpp"

using namespace bkp;

namespace {

RawPrediction make_raw(size_t n_parts, Rng& rng, double spread) {
  RawPrediction raw;
  for (auto& v : raw.body) v = rng.uniform(-spread, spread);
  for (auto& kp : raw.kpts)
    for (auto& v : kp) v = rng.uniform(-spread, spread);
  raw.parts.resize(n_parts);
  for (auto& p : raw.parts)
    for (auto& v : p) v = rng.uniform(-spread, spread);
  return raw;
}

}  // namespace

TEST(Sigmoid, Basics) {
  EXPECT_DOUBLE_EQ(sigmoid(0.0), 0.5);
  EXPECT_LT(sigmoid(-30.0), 1e-12);
  EXPECT_GT(sigmoid(30.0), 1.0 - 1e-12);
  Rng rng(1);
  for (int i = 0; i < 500; ++i) {
    const double x = rng.uniform(-20, 20);
    EXPECT_NEAR(sigmoid(x) + sigmoid(-x), 1.0, 1e-12);
  }
  for (int i = 0; i < 500; ++i) {
    // round-trip precision degrades as sigmoid saturates; stay in the
    // numerically meaningful band
    const double x = rng.uniform(-15, 15);
    EXPECT_NEAR(logit(sigmoid(x)), x, 1e-8);
  }
}

TEST(DecodeBody, FrozenExamples) {
  RawPrediction raw;
  raw.body = {0.0, 0.0, 0.0, 0.0, 0.0};
  const GridContext ctx(3.0, 1.0, 1.0, 8.0, 8.0);
  const BoundingBox box = decode_body(raw, ctx);
  EXPECT_DOUBLE_EQ(box.cx(), 3.5);  // 2*sigmoid(0) - 0.5 + 3
  EXPECT_DOUBLE_EQ(box.cy(), 1.5);
  EXPECT_DOUBLE_EQ(box.w(), 2.0);  // 0.5^2 * 8
  EXPECT_DOUBLE_EQ(box.h(), 2.0);
  EXPECT_DOUBLE_EQ(box.conf(), 0.5);

  // saturated raw x approaches the +1.5 cell bound
  raw.body[0] = 40.0;
  EXPECT_NEAR(decode_body(raw, ctx).cx(), (3.0 + 1.5) * ctx.stride, 1e-9);
  raw.body[0] = -40.0;
  EXPECT_NEAR(decode_body(raw, ctx).cx(), (3.0 - 0.5) * ctx.stride, 1e-9);
}

TEST(DecodeBody, DoubledModeForInterop) {
  RawPrediction raw;
  raw.body = {0.0, 0.0, 0.0, 0.0, 0.0};
  const GridContext ctx(0.0, 0.0, 4.0, 3.0, 3.0);
  EXPECT_DOUBLE_EQ(decode_body(raw, ctx, WhMode::kPaper).w(), 0.25 * 3.0 * 4.0);
  EXPECT_DOUBLE_EQ(decode_body(raw, ctx, WhMode::kDoubled).w(), 1.0 * 3.0 * 4.0);
}

TEST(DecodeBody, CenterConfinedToCellNeighborhood) {
  Rng rng(7);
  for (int i = 0; i < 20000; ++i) {
    const GridContext ctx(rng.uniform(0, 40), rng.uniform(0, 40),
                          rng.uniform(1, 32), rng.uniform(0.5, 10),
                          rng.uniform(0.5, 10));
    const RawPrediction raw = make_raw(0, rng, 12.0);
    const BoundingBox box = decode_body(raw, ctx);
    EXPECT_GE(box.cx(), (ctx.grid_x - 0.5) * ctx.stride - 1e-9);
    EXPECT_LE(box.cx(), (ctx.grid_x + 1.5) * ctx.stride + 1e-9);
    EXPECT_GE(box.cy(), (ctx.grid_y - 0.5) * ctx.stride - 1e-9);
    EXPECT_LE(box.cy(), (ctx.grid_y + 1.5) * ctx.stride + 1e-9);
  }
}

TEST(DecodeParts, FrozenExamplesAndStrictShrink) {
  RawPrediction raw;
  raw.body = {0.0, 0.0, 6.0, 6.0, 0.0};  // large body
  raw.parts = {{0.0, 0.0, 0.0, 0.0, 3.0}};
  const GridContext ctx(5.0, 2.0, 2.0, 10.0, 10.0);
  const BoundingBox body = BoundingBox(10, 10, 40.0, 30.0, 0.9);

  const auto parts = decode_parts(raw, ctx, body);
  ASSERT_EQ(parts.size(), 1u);
  EXPECT_DOUBLE_EQ(parts[0].box.cx(), 5.0 * 2.0);  // zero offset
  EXPECT_DOUBLE_EQ(parts[0].box.cy(), 2.0 * 2.0);
  EXPECT_DOUBLE_EQ(parts[0].box.w(), 0.25 * 40.0);  // sigmoid(0)^2 * body w
  EXPECT_DOUBLE_EQ(parts[0].box.h(), 0.25 * 30.0);
  EXPECT_DOUBLE_EQ(parts[0].box.conf(), sigmoid(3.0));
  EXPECT_TRUE(parts[0].visible);
  EXPECT_FALSE(decode_parts(raw, ctx, body, 0.99)[0].visible);
}

TEST(DecodeParts, CentersUnboundedButSizeBounded) {
  Rng rng(11);
  int outside = 0, total = 0;
  for (int i = 0; i < 20000; ++i) {
    const GridContext ctx(rng.uniform(0, 40), rng.uniform(0, 40),
                          rng.uniform(1, 32), rng.uniform(0.5, 10),
                          rng.uniform(0.5, 10));
    RawPrediction raw = make_raw(3, rng, 12.0);
    const BoundingBox body = decode_body(raw, ctx);
    for (const auto& part : decode_parts(raw, ctx, body)) {
      ++total;
      EXPECT_LT(part.box.w(), body.w());  // sigmoid^2 < 1 strictly
      EXPECT_LT(part.box.h(), body.h());
      const bool in_x = part.box.cx() >= (ctx.grid_x - 0.5) * ctx.stride &&
                        part.box.cx() <= (ctx.grid_x + 1.5) * ctx.stride;
      const bool in_y = part.box.cy() >= (ctx.grid_y - 0.5) * ctx.stride &&
                        part.box.cy() <= (ctx.grid_y + 1.5) * ctx.stride;
      if (!(in_x && in_y)) ++outside;
    }
  }
  // raw part offsets are unsquashed, so a large share of centers must leave
  // the 2x2-cell neighborhood
  EXPECT_GT(outside, total / 100);
}

TEST(DecodeKeypoints, ConventionAndThreshold) {
  RawPrediction raw;
  raw.kpts[0] = {0.25, 0.25, 30.0};
  raw.kpts[1] = {0.25, 0.25, -30.0};
  const GridContext ctx(0.0, 0.0, 4.0, 1.0, 1.0);
  const Skeleton skel = decode_keypoints(raw, ctx);
  EXPECT_DOUBLE_EQ(skel[0].x, 0.0);  // (2*0.25 - 0.5 + 0) * 4
  EXPECT_DOUBLE_EQ(skel[0].y, 0.0);
  EXPECT_EQ(skel[0].v, Visibility::kVisible);
  EXPECT_EQ(skel[1].v, Visibility::kNotLabeled);
}

TEST(Decode, EncodeDecodeRoundTrip) {
  Rng rng(13);
  for (int i = 0; i < 2000; ++i) {
    const GridContext ctx(rng.uniform(0, 40), rng.uniform(0, 40),
                          rng.uniform(1, 32), rng.uniform(0.5, 10),
                          rng.uniform(0.5, 10));
    RawPrediction raw = make_raw(2, rng, 4.0);
    const BoundingBox body = decode_body(raw, ctx);
    const auto back = encode_body(body, ctx);
    for (int k = 0; k < 5; ++k) EXPECT_NEAR(back[k], raw.body[k], 1e-9);

    const auto parts = decode_parts(raw, ctx, body);
    for (size_t p = 0; p < parts.size(); ++p) {
      const auto pb = encode_part(parts[p].box, ctx, body);
      for (int k = 0; k < 5; ++k) EXPECT_NEAR(pb[k], raw.parts[p][k], 1e-9);
    }

    const Skeleton skel = decode_keypoints(raw, ctx);
    for (int k = 0; k < kNumKeypoints; ++k) {
      const auto kb = encode_keypoint(skel[k], ctx);
      EXPECT_NEAR(kb[0], raw.kpts[k][0], 1e-9);
      EXPECT_NEAR(kb[1], raw.kpts[k][1], 1e-9);
    }
  }
}

TEST(GridContext, RejectsBadStrideAndAnchors) {
  EXPECT_THROW(GridContext(0, 0, 0.0, 1, 1), InvariantError);
  EXPECT_THROW(GridContext(0, 0, 8.0, 0.0, 1), InvariantError);
}
