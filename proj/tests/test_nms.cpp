#include "bkp/nms.hpp"

#include <gtest/gtest.h>

#include "bkp/rng.hpp"

using namespace bkp;

namespace {

Candidate body(double x1, double y1, double x2, double y2, double conf) {
  return {BoundingBox::from_corners(x1, y1, x2, y2, conf), kPersonClassId};
}

std::vector<Candidate> random_candidates(Rng& rng, int n, int n_classes) {
  std::vector<Candidate> out;
  for (int i = 0; i < n; ++i) {
    const double cx = rng.uniform(0, 200), cy = rng.uniform(0, 200);
    const double w = rng.uniform(4, 60), h = rng.uniform(4, 60);
    out.push_back({BoundingBox(cx, cy, w, h, rng.unit()),
                   static_cast<int>(rng.uniform_int(0, n_classes - 1))});
  }
  return out;
}

}  // namespace

TEST(Nms, SpecExamples) {
  const NmsConfig cfg;
  // single confident box survives
  auto kept = nms(std::vector<Candidate>{body(0, 0, 10, 10, 0.9)}, cfg);
  ASSERT_EQ(kept.size(), 1u);

  // identical duplicates: only the higher confidence one survives
  kept = nms(std::vector<Candidate>{body(0, 0, 10, 10, 0.9),
                                    body(0, 0, 10, 10, 0.8)},
             cfg);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_DOUBLE_EQ(kept[0].box.conf(), 0.9);

  // IoU 1/3 < 0.6: both survive
  kept = nms(std::vector<Candidate>{body(0, 0, 10, 10, 0.9),
                                    body(5, 0, 15, 10, 0.8)},
             cfg);
  EXPECT_EQ(kept.size(), 2u);
}

TEST(Nms, EmptyInputAndConfidenceFloor) {
  const NmsConfig cfg;  // tau_conf_body = 0.05, tau_conf_part = 0.1
  EXPECT_TRUE(nms(std::vector<Candidate>{}, cfg).empty());

  std::vector<Candidate> cands{body(0, 0, 10, 10, 0.04),
                               {BoundingBox(50, 50, 10, 10, 0.09), 1}};
  EXPECT_TRUE(nms(cands, cfg).empty());
  cands[0] = body(0, 0, 10, 10, 0.05);  // at threshold: kept
  EXPECT_EQ(nms(cands, cfg).size(), 1u);
}

TEST(Nms, BodyAndPartThresholdsDiffer) {
  NmsConfig cfg;  // body 0.6, part 0.3
  // two boxes with IoU = 0.5: survive as bodies, suppressed as parts
  const BoundingBox a = BoundingBox::from_corners(0, 0, 20, 10, 0.9);
  const BoundingBox b = BoundingBox::from_corners(5, 0, 25, 10, 0.8);
  ASSERT_DOUBLE_EQ(iou(a, b), 0.6);  // inter 150 / union 250
  // iou == tau is not suppression (only strictly greater drops)
  EXPECT_EQ(nms(std::vector<Candidate>{{a, 0}, {b, 0}}, cfg).size(), 2u);
  EXPECT_EQ(nms(std::vector<Candidate>{{a, 1}, {b, 1}}, cfg).size(), 1u);
}

TEST(Nms, DeterministicTieBreakOnEqualConfidence) {
  // same confidence, different geometry: order pinned by (cx, cy, w, h)
  std::vector<Candidate> cands{{BoundingBox(30, 0, 10, 10, 0.5), 0},
                               {BoundingBox(0, 0, 10, 10, 0.5), 0}};
  const auto kept = nms(cands, NmsConfig{});
  ASSERT_EQ(kept.size(), 2u);
  EXPECT_DOUBLE_EQ(kept[0].box.cx(), 0.0);
  EXPECT_DOUBLE_EQ(kept[1].box.cx(), 30.0);
}

TEST(Nms, ContractOverRandomCandidateSets) {
  Rng rng(99);
  const NmsConfig cfg;
  for (int trial = 0; trial < 200; ++trial) {
    const auto cands = random_candidates(rng, 60, 4);
    const auto kept_idx = nms_keep_indices(cands, cfg);
    const auto kept = nms(cands, cfg);

    // survivors are a subset of the input
    for (size_t idx : kept_idx) ASSERT_LT(idx, cands.size());

    // pairwise within-class IoU bounded by the class threshold
    for (size_t i = 0; i < kept.size(); ++i)
      for (size_t j = i + 1; j < kept.size(); ++j) {
        if (kept[i].class_id != kept[j].class_id) continue;
        const double tau = kept[i].class_id == kPersonClassId
                               ? cfg.tau_iou_body
                               : cfg.tau_iou_part;
        EXPECT_LE(iou(kept[i].box, kept[j].box), tau + 1e-12);
      }

    // idempotence
    const auto again = nms(kept, cfg);
    ASSERT_EQ(again.size(), kept.size());
    for (size_t i = 0; i < kept.size(); ++i)
      EXPECT_TRUE(again[i].box == kept[i].box);

    // raising tau_conf never increases survivor count
    NmsConfig stricter = cfg;
    stricter.tau_conf_body = 0.5;
    stricter.tau_conf_part = 0.5;
    EXPECT_LE(nms(cands, stricter).size(), kept.size());
  }
}

TEST(NmsConfig, RejectsOutOfRangeThresholds) {
  NmsConfig cfg;
  cfg.tau_iou_body = 1.5;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = NmsConfig{};
  cfg.tau_conf_part = -0.1;
  EXPECT_THROW(cfg.validate(), ConfigError);
}
