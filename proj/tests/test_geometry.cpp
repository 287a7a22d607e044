#include "bkp/geometry.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "bkp/rng.hpp"

using namespace bkp;

namespace {

BoundingBox corners(double x1, double y1, double x2, double y2) {
  return BoundingBox::from_corners(x1, y1, x2, y2);
}

// Straight-line restatement of the complete-IoU formula, kept in test code
// as the reference for randomized comparisons.
double ciou_reference(const BoundingBox& p, const BoundingBox& g) {
  const double inter =
      std::max(0.0, std::min(p.x2(), g.x2()) - std::max(p.x1(), g.x1())) *
      std::max(0.0, std::min(p.y2(), g.y2()) - std::max(p.y1(), g.y1()));
  const double i = inter / (p.area() + g.area() - inter);
  const double rho2 = (p.cx() - g.cx()) * (p.cx() - g.cx()) +
                      (p.cy() - g.cy()) * (p.cy() - g.cy());
  const double ew = std::max(p.x2(), g.x2()) - std::min(p.x1(), g.x1());
  const double eh = std::max(p.y2(), g.y2()) - std::min(p.y1(), g.y1());
  const double da = std::atan(g.w() / g.h()) - std::atan(p.w() / p.h());
  const double v = 4.0 / (M_PI * M_PI) * da * da;
  const double alpha = v == 0.0 ? 0.0 : v / (1.0 - i + v);
  return i - rho2 / (ew * ew + eh * eh) - alpha * v;
}

BoundingBox random_box(Rng& rng, double span = 100.0) {
  const double cx = rng.uniform(-span, span);
  const double cy = rng.uniform(-span, span);
  const double w = rng.uniform(0.5, span / 2);
  const double h = rng.uniform(0.5, span / 2);
  return BoundingBox(cx, cy, w, h);
}

}  // namespace

TEST(Iou, IdentityDisjointAndOverlap) {
  const BoundingBox a = corners(0, 0, 10, 10);
  EXPECT_DOUBLE_EQ(iou(a, a), 1.0);
  EXPECT_DOUBLE_EQ(iou(a, corners(10, 10, 20, 20)), 0.0);
  // inter = 50, union = 150
  EXPECT_NEAR(iou(a, corners(5, 0, 15, 10)), 1.0 / 3.0, 1e-12);
}

TEST(Iou, SymmetricOnRandomBoxes) {
  Rng rng(101);
  for (int i = 0; i < 1000; ++i) {
    const BoundingBox a = random_box(rng), b = random_box(rng);
    EXPECT_DOUBLE_EQ(iou(a, b), iou(b, a));
    EXPECT_GE(iou(a, b), 0.0);
    EXPECT_LE(iou(a, b), 1.0);
  }
}

TEST(InnerIou, ContainmentAsymmetryAndDisjoint) {
  const BoundingBox gt = corners(2, 2, 8, 8);
  const BoundingBox pred = corners(0, 0, 10, 10);
  EXPECT_DOUBLE_EQ(inner_iou(pred, gt), 1.0);  // gt inside pred
  EXPECT_LT(inner_iou(gt, pred), 1.0);         // but not the reverse
  // inter = 50, gt area = 100
  EXPECT_DOUBLE_EQ(inner_iou(corners(0, 0, 5, 10), corners(0, 0, 10, 10)), 0.5);
  EXPECT_DOUBLE_EQ(inner_iou(corners(0, 0, 5, 5), corners(6, 6, 9, 9)), 0.0);
}

TEST(InnerIou, OneExactlyWhenGtContained) {
  Rng rng(202);
  for (int i = 0; i < 1000; ++i) {
    const BoundingBox pred = random_box(rng);
    // random gt strictly inside pred
    const double gx1 = rng.uniform(pred.x1(), pred.cx());
    const double gy1 = rng.uniform(pred.y1(), pred.cy());
    const double gx2 = rng.uniform(pred.cx() + 1e-6, pred.x2());
    const double gy2 = rng.uniform(pred.cy() + 1e-6, pred.y2());
    const BoundingBox gt = corners(gx1, gy1, gx2, gy2);
    EXPECT_DOUBLE_EQ(inner_iou(pred, gt), 1.0);

    // shifted beyond the prediction's right edge -> strictly below 1
    const BoundingBox shifted =
        BoundingBox(gt.cx() + pred.w(), gt.cy(), gt.w(), gt.h());
    EXPECT_LT(inner_iou(pred, shifted), 1.0);
  }
}

TEST(Ciou, FrozenScalarCases) {
  const BoundingBox a = corners(0, 0, 10, 10);
  EXPECT_DOUBLE_EQ(ciou(a, a), 1.0);

  // concentric, same aspect, pred half the side length: plain IoU 0.25 and
  // both penalty terms vanish
  EXPECT_NEAR(ciou(corners(5, 5, 15, 15), corners(0, 0, 20, 20)), 0.25, 1e-12);

  // disjoint same-shape boxes: rho2 = 400, c2 = 1000, v = 0
  EXPECT_NEAR(ciou(corners(0, 0, 10, 10), corners(20, 0, 30, 10)), -0.4, 1e-12);

  // mixed aspect + offset, frozen from the straight-line reference
  EXPECT_NEAR(ciou(corners(0, 0, 4, 8), corners(2, 1, 8, 5)),
              0.07588356242099963, 1e-12);
}

TEST(Ciou, MatchesReferenceAndIsBoundedByIou) {
  Rng rng(303);
  for (int i = 0; i < 2000; ++i) {
    const BoundingBox a = random_box(rng), b = random_box(rng);
    const double c = ciou(a, b);
    EXPECT_NEAR(c, ciou_reference(a, b), 1e-12);
    EXPECT_DOUBLE_EQ(c, ciou(b, a));
    EXPECT_LE(c, iou(a, b) + 1e-15);  // penalties are nonnegative
    // distance and aspect penalties each stay below 1
    EXPECT_GT(c, -2.0);
    EXPECT_LE(c, 1.0);
  }
}

TEST(OksPaper, FrozenScalarSubstitution) {
  // single keypoint, d = 8, area = 4, omega = 0.5:
  // exp(-8 / (2 * 16 * 0.25)) = exp(-1)
  Skeleton pred, gt;
  gt[0] = {0.0, 0.0, Visibility::kVisible};
  pred[0] = {8.0, 0.0, Visibility::kVisible};
  OksSigmas sigmas({0.5, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1});
  const auto out = oks_paper(pred, gt, 4.0, sigmas);
  ASSERT_TRUE(out[0].has_value());
  EXPECT_NEAR(*out[0], std::exp(-1.0), 1e-12);
  for (int k = 1; k < kNumKeypoints; ++k) EXPECT_FALSE(out[k].has_value());
}

TEST(OksPaper, PerfectPredictionAndEmptyGate) {
  Skeleton gt;
  for (int k = 0; k < kNumKeypoints; ++k)
    gt[k] = {k * 3.0, k * 2.0, Visibility::kVisible};
  const auto out = oks_paper(gt, gt, 100.0, OksSigmas::coco());
  for (int k = 0; k < kNumKeypoints; ++k) {
    ASSERT_TRUE(out[k].has_value());
    EXPECT_DOUBLE_EQ(*out[k], 1.0);
  }

  Skeleton unlabeled;
  const auto empty = oks_paper(gt, unlabeled, 100.0, OksSigmas::coco());
  for (int k = 0; k < kNumKeypoints; ++k) EXPECT_FALSE(empty[k].has_value());
}

TEST(OksPaper, StrictlyDecreasingInDistance) {
  Skeleton gt;
  gt[5] = {10.0, 10.0, Visibility::kVisible};
  const OksSigmas sigmas = OksSigmas::coco();
  double prev = 2.0;
  for (double d = 0.0; d < 64.0; d += 4.0) {
    Skeleton pred;
    pred[5] = {10.0 + d, 10.0, Visibility::kVisible};
    const auto out = oks_paper(pred, gt, 50.0, sigmas);
    ASSERT_TRUE(out[5].has_value());
    EXPECT_LT(*out[5], prev);
    prev = *out[5];
  }
}

TEST(OksPaper, AreaModeSwitch) {
  Skeleton pred, gt;
  gt[0] = {0.0, 0.0, Visibility::kVisible};
  pred[0] = {8.0, 0.0, Visibility::kVisible};
  OksSigmas sigmas({0.5, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1});
  const auto squared = oks_paper(pred, gt, 4.0, sigmas, OksAreaMode::kAreaSquared);
  const auto linear = oks_paper(pred, gt, 4.0, sigmas, OksAreaMode::kArea);
  EXPECT_NEAR(*squared[0], std::exp(-1.0), 1e-12);   // 2 * 4^2 * 0.25 = 8
  EXPECT_NEAR(*linear[0], std::exp(-4.0), 1e-12);    // 2 * 4 * 0.25 = 2
}

TEST(OksCoco, PerfectSingleKeypointAndUnscoreable) {
  Skeleton gt;
  for (int k = 0; k < kNumKeypoints; ++k)
    gt[k] = {k * 5.0, 40.0 - k, Visibility::kVisible};
  const auto perfect = oks_coco(gt, gt, 123.0, OksSigmas::coco());
  ASSERT_TRUE(perfect.has_value());
  EXPECT_DOUBLE_EQ(*perfect, 1.0);

  // one labeled keypoint with d^2 = 2 * s^2 * kappa^2 -> exp(-1)
  Skeleton one_gt, one_pred;
  one_gt[0] = {0.0, 0.0, Visibility::kVisible};
  const double area = 25.0;
  const double kappa = 2.0 * 0.026;
  const double d = std::sqrt(2.0 * area * kappa * kappa);
  one_pred[0] = {d, 0.0, Visibility::kVisible};
  const auto single = oks_coco(one_pred, one_gt, area, OksSigmas::coco());
  ASSERT_TRUE(single.has_value());
  EXPECT_NEAR(*single, std::exp(-1.0), 1e-12);

  Skeleton none;
  EXPECT_FALSE(oks_coco(gt, none, 25.0, OksSigmas::coco()).has_value());
}

TEST(OksCoco, TranslationInvariant) {
  Rng rng(404);
  for (int trial = 0; trial < 200; ++trial) {
    Skeleton gt, pred;
    for (int k = 0; k < kNumKeypoints; ++k) {
      const double x = rng.uniform(0, 100), y = rng.uniform(0, 100);
      gt[k] = {x, y,
               rng.chance(0.3) ? Visibility::kNotLabeled : Visibility::kVisible};
      pred[k] = {x + rng.normal(0, 3), y + rng.normal(0, 3),
                 Visibility::kVisible};
    }
    if (gt.labeled_count() == 0) continue;
    const double dx = rng.uniform(-50, 50), dy = rng.uniform(-50, 50);
    Skeleton gt2 = gt, pred2 = pred;
    for (int k = 0; k < kNumKeypoints; ++k) {
      gt2[k].x += dx;
      gt2[k].y += dy;
      pred2[k].x += dx;
      pred2[k].y += dy;
    }
    const auto a = oks_coco(pred, gt, 77.0, OksSigmas::coco());
    const auto b = oks_coco(pred2, gt2, 77.0, OksSigmas::coco());
    ASSERT_TRUE(a && b);
    EXPECT_NEAR(*a, *b, 1e-12);
  }
}

TEST(OksSigmasType, RejectsNonPositive) {
  std::array<double, kNumKeypoints> bad{};
  EXPECT_THROW(OksSigmas{bad}, InvariantError);
}
