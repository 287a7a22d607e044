#include "bkp/synth.hpp"

#include <gtest/gtest.h>

#include "bkp/rng.hpp"

using namespace bkp;

namespace {
const ClassMap kBkpd = classmap_builtin(ClassMapMode::kBkpd);
}

TEST(Rng, KnownGoodStreamProperties) {
  // same seed, same stream; different seeds diverge immediately
  Rng a(123), b(123), c(124);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next(), b.next());
  EXPECT_NE(Rng(123).next(), c.next());

  // unit() lives in [0,1) and is roughly uniform
  Rng r(5);
  double sum = 0.0;
  for (int i = 0; i < 20000; ++i) {
    const double u = r.unit();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / 20000.0, 0.5, 0.01);

  // normal() has the right first two moments
  Rng n(6);
  double mean = 0.0, var = 0.0;
  const int kN = 20000;
  std::vector<double> xs(kN);
  for (int i = 0; i < kN; ++i) xs[i] = n.normal(2.0, 3.0);
  for (double x : xs) mean += x;
  mean /= kN;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= kN;
  EXPECT_NEAR(mean, 2.0, 0.1);
  EXPECT_NEAR(var, 9.0, 0.5);
}

TEST(Synth, DeterministicPerSeedAndIndex) {
  SynthConfig cfg;
  cfg.seed = 9;
  cfg.people_min = 1;
  cfg.people_max = 7;
  cfg.occlusion_prob = 0.2;
  cfg.noise = {5.0, 5.0, 0.5, 0.99, 0.2, 0.2};

  const auto a = generate_scene(cfg, 3, kBkpd);
  const auto b = generate_scene(cfg, 3, kBkpd);
  ASSERT_EQ(a.gt.people.size(), b.gt.people.size());
  for (size_t i = 0; i < a.gt.people.size(); ++i) {
    EXPECT_TRUE(a.gt.people[i].body == b.gt.people[i].body);
    ASSERT_TRUE(a.gt.people[i].skeleton && b.gt.people[i].skeleton);
    for (int k = 0; k < kNumKeypoints; ++k) {
      EXPECT_EQ((*a.gt.people[i].skeleton)[k].x, (*b.gt.people[i].skeleton)[k].x);
      EXPECT_EQ((*a.gt.people[i].skeleton)[k].v, (*b.gt.people[i].skeleton)[k].v);
    }
    EXPECT_EQ(a.gt.people[i].parts, b.gt.people[i].parts);
  }
  ASSERT_EQ(a.pred.people.size(), b.pred.people.size());
  for (size_t i = 0; i < a.pred.people.size(); ++i)
    EXPECT_TRUE(a.pred.people[i].body == b.pred.people[i].body);

  // different index gives different content; independent of n_scenes
  const auto c = generate_scene(cfg, 4, kBkpd);
  EXPECT_NE(a.gt.people.size() == c.gt.people.size() &&
                a.gt.people[0].body == c.gt.people[0].body,
            true);
}

TEST(Synth, ZeroNoiseMakesPredictionEqualGt) {
  SynthConfig cfg;
  cfg.seed = 10;
  cfg.people_min = 2;
  cfg.people_max = 5;
  cfg.occlusion_prob = 0.3;  // occlusion is part of the gt, not the noise
  for (int i = 0; i < 20; ++i) {
    const auto pair = generate_scene(cfg, static_cast<uint64_t>(i), kBkpd);
    ASSERT_EQ(pair.gt.people.size(), pair.pred.people.size());
    for (size_t p = 0; p < pair.gt.people.size(); ++p) {
      EXPECT_TRUE(pair.gt.people[p].body == pair.pred.people[p].body);
      EXPECT_EQ(pair.gt.people[p].parts, pair.pred.people[p].parts);
      ASSERT_TRUE(pair.pred.people[p].skeleton.has_value());
      for (int k = 0; k < kNumKeypoints; ++k) {
        EXPECT_EQ((*pair.gt.people[p].skeleton)[k].x,
                  (*pair.pred.people[p].skeleton)[k].x);
        EXPECT_EQ((*pair.gt.people[p].skeleton)[k].v,
                  (*pair.pred.people[p].skeleton)[k].v);
      }
    }
    EXPECT_EQ(pair.gt.source, SceneSource::kGt);
    EXPECT_EQ(pair.pred.source, SceneSource::kPrediction);
  }
}

TEST(Synth, FnRateOneEmptiesPredictions) {
  SynthConfig cfg;
  cfg.seed = 11;
  cfg.people_min = 1;
  cfg.people_max = 7;
  cfg.noise.fn_rate = 1.0;
  for (int i = 0; i < 10; ++i) {
    const auto pair = generate_scene(cfg, static_cast<uint64_t>(i), kBkpd);
    EXPECT_FALSE(pair.gt.people.empty());
    EXPECT_TRUE(pair.pred.people.empty());
  }
}

TEST(Synth, FpRateOneDoublesPeople) {
  SynthConfig cfg;
  cfg.seed = 12;
  cfg.people_min = 2;
  cfg.people_max = 4;
  cfg.noise.fp_rate = 1.0;
  const auto pair = generate_scene(cfg, 0, kBkpd);
  EXPECT_EQ(pair.pred.people.size(), 2 * pair.gt.people.size());
}

TEST(Synth, PartBoxesContainTheirLabeledKeypoints) {
  SynthConfig cfg;
  cfg.seed = 13;
  cfg.people_min = 1;
  cfg.people_max = 7;
  cfg.occlusion_prob = 0.25;
  for (int i = 0; i < 500; ++i) {
    const auto pair = generate_scene(cfg, static_cast<uint64_t>(i), kBkpd);
    for (const PersonInstance& person : pair.gt.people) {
      ASSERT_TRUE(person.skeleton.has_value());
      for (const PartClass& pc : kBkpd.parts()) {
        const auto it = person.parts.find(pc.id);
        ASSERT_NE(it, person.parts.end());
        ASSERT_EQ(it->second.size(), 1u);
        const BoundingBox& box = it->second[0];
        for (int k : pc.keypoint_indices) {
          const Keypoint& kp = (*person.skeleton)[k];
          if (!kp.labeled()) continue;
          EXPECT_GE(kp.x, box.x1() - 1e-9);
          EXPECT_LE(kp.x, box.x2() + 1e-9);
          EXPECT_GE(kp.y, box.y1() - 1e-9);
          EXPECT_LE(kp.y, box.y2() + 1e-9);
        }
      }
    }
  }
}

TEST(Synth, SceneInvariantsHoldAtScale) {
  // core-type invariants on a large deterministic corpus: boxes inside the
  // arena, positive sizes, confidences in range, skeletons present
  SynthConfig cfg;
  cfg.seed = 14;
  cfg.people_min = 1;
  cfg.people_max = 7;
  cfg.occlusion_prob = 0.3;
  cfg.noise = {10.0, 12.0, 0.3, 0.99, 0.25, 0.2};
  const int kScenes = 100000;
  long people_seen = 0;
  for (int i = 0; i < kScenes; ++i) {
    const auto pair = generate_scene(cfg, static_cast<uint64_t>(i), kBkpd);
    for (const Scene* scene : {&pair.gt, &pair.pred}) {
      ASSERT_LE(scene->people.size(), 14u);
      for (const PersonInstance& person : scene->people) {
        ++people_seen;
        ASSERT_GT(person.body.w(), 0.0);
        ASSERT_GT(person.body.h(), 0.0);
        ASSERT_GE(person.body.x1(), -1e-9);
        ASSERT_GE(person.body.y1(), -1e-9);
        ASSERT_LE(person.body.x2(), scene->width + 1e-9);
        ASSERT_LE(person.body.y2(), scene->height + 1e-9);
        ASSERT_GE(person.body.conf(), 0.0);
        ASSERT_LE(person.body.conf(), 1.0);
        for (const auto& [cid, boxes] : person.parts)
          for (const BoundingBox& b : boxes) {
            ASSERT_GT(b.area(), 0.0);
            ASSERT_GE(b.x1(), -1e-9);
            ASSERT_LE(b.x2(), scene->width + 1e-9);
          }
        if (scene == &pair.gt) ASSERT_TRUE(person.skeleton.has_value());
      }
    }
  }
  EXPECT_GT(people_seen, kScenes);  // sanity: the corpus is not degenerate
}

TEST(Synth, GtWithinPeopleRange) {
  SynthConfig cfg;
  cfg.seed = 15;
  cfg.people_min = 3;
  cfg.people_max = 6;
  bool saw_min = false, saw_max = false;
  for (int i = 0; i < 300; ++i) {
    const auto pair = generate_scene(cfg, static_cast<uint64_t>(i), kBkpd);
    ASSERT_GE(pair.gt.people.size(), 3u);
    ASSERT_LE(pair.gt.people.size(), 6u);
    saw_min |= pair.gt.people.size() == 3;
    saw_max |= pair.gt.people.size() == 6;
  }
  EXPECT_TRUE(saw_min);
  EXPECT_TRUE(saw_max);
}

TEST(Synth, ConfigValidation) {
  SynthConfig cfg;
  cfg.people_min = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = SynthConfig{};
  cfg.noise.conf_lo = 0.9;
  cfg.noise.conf_hi = 0.5;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = SynthConfig{};
  cfg.noise.fp_rate = 1.5;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = SynthConfig{};
  cfg.occlusion_prob = -0.2;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(OracleAssociate, TrivialCases) {
  const int head = kBkpd.find("head")->id;
  DetectedBody b{BoundingBox(50, 50, 40, 80, 0.9), Skeleton{}};
  b.skeleton[joints::kNose] = {50, 20, Visibility::kVisible};
  const std::vector<DetectedBody> bodies{b};
  const std::vector<PartDetection> parts{{BoundingBox(48, 22, 10, 10, 0.8), head}};

  // single body: every part lands on it
  const Association solo = oracle_associate(bodies, parts, kBkpd);
  EXPECT_EQ(solo.people[0].parts.at(head).size(), 1u);
  EXPECT_TRUE(solo.unassigned.empty());

  // empty body set: everything unassigned
  const Association none = oracle_associate({}, parts, kBkpd);
  EXPECT_EQ(none.unassigned.size(), 1u);
}
