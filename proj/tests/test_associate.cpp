#include "bkp/associate.hpp"

#include <gtest/gtest.h>

#include "bkp/synth.hpp"

using namespace bkp;

namespace {

DetectedBody body_at(double cx, double cy, double size = 60.0) {
  DetectedBody b{BoundingBox(cx, cy, size, size, 0.9), Skeleton{}};
  return b;
}

void set_kpt(DetectedBody& b, int idx, double x, double y,
             Visibility v = Visibility::kVisible) {
  b.skeleton[idx] = {x, y, v};
}

bool same_association(const Association& a, const Association& b) {
  if (a.people.size() != b.people.size() ||
      a.unassigned.size() != b.unassigned.size())
    return false;
  for (size_t i = 0; i < a.people.size(); ++i) {
    if (!(a.people[i].body == b.people[i].body)) return false;
    if (a.people[i].parts != b.people[i].parts) return false;
  }
  for (size_t i = 0; i < a.unassigned.size(); ++i)
    if (a.unassigned[i].class_id != b.unassigned[i].class_id ||
        !(a.unassigned[i].box == b.unassigned[i].box))
      return false;
  return true;
}

}  // namespace

TEST(Centroids, MidpointSingletonAndAbsent) {
  const ClassMap cm = classmap_builtin(ClassMapMode::kBkpd);
  DetectedBody b = body_at(0, 0);
  set_kpt(b, joints::kLeftShoulder, 0, 0);
  set_kpt(b, joints::kRightShoulder, 4, 0);
  const std::vector<DetectedBody> bodies{b};
  const CentroidTable table = centroids(bodies, cm);

  const auto chest = table.lookup(0, cm.find("chest")->id);
  ASSERT_TRUE(chest.has_value());
  EXPECT_DOUBLE_EQ(chest->x, 2.0);
  EXPECT_DOUBLE_EQ(chest->y, 0.0);

  // single labeled shoulder: centroid is that keypoint
  DetectedBody one = body_at(0, 0);
  set_kpt(one, joints::kLeftShoulder, 3, 1);
  const std::vector<DetectedBody> bodies2{one};
  const auto single =
      centroids(bodies2, cm).lookup(0, cm.find("chest")->id);
  ASSERT_TRUE(single.has_value());
  EXPECT_DOUBLE_EQ(single->x, 3.0);
  EXPECT_DOUBLE_EQ(single->y, 1.0);

  // no labeled keypoints in the set: absent entry
  EXPECT_FALSE(centroids(bodies2, cm).lookup(0, cm.find("hip")->id).has_value());
}

TEST(Centroids, OccludedKeypointsStillAnchor) {
  const ClassMap cm = classmap_builtin(ClassMapMode::kBkpd);
  DetectedBody b = body_at(0, 0);
  set_kpt(b, joints::kLeftHip, 1, 7, Visibility::kOccluded);
  const std::vector<DetectedBody> bodies{b};
  const auto hip = centroids(bodies, cm).lookup(0, cm.find("hip")->id);
  ASSERT_TRUE(hip.has_value());
  EXPECT_DOUBLE_EQ(hip->x, 1.0);
}

TEST(Associate, SoleCandidateAndNearest) {
  const ClassMap cm = classmap_builtin(ClassMapMode::kBkpd);
  const int head_id = cm.find("head")->id;

  DetectedBody b1 = body_at(0, 0);
  set_kpt(b1, joints::kNose, 0, 0);
  DetectedBody b2 = body_at(100, 0);
  set_kpt(b2, joints::kNose, 100, 0);
  const std::vector<DetectedBody> bodies{b1, b2};

  // head part centered at (90, 5): nearest head centroid is body 2's
  const std::vector<PartDetection> parts{{BoundingBox(90, 5, 10, 10, 0.8), head_id}};
  const Association assoc = bkp_associate(bodies, parts, cm);
  EXPECT_TRUE(assoc.unassigned.empty());
  EXPECT_TRUE(assoc.people[0].parts.empty());
  ASSERT_EQ(assoc.people[1].parts.at(head_id).size(), 1u);

  // single body takes everything
  const std::vector<DetectedBody> solo{b1};
  const Association solo_assoc = bkp_associate(solo, parts, cm);
  ASSERT_EQ(solo_assoc.people[0].parts.at(head_id).size(), 1u);
}

TEST(Associate, NoCandidateBodiesLeavesPartUnassigned) {
  const ClassMap cm = classmap_builtin(ClassMapMode::kBkpd);
  DetectedBody blind = body_at(0, 0);  // no labeled keypoints at all
  const std::vector<DetectedBody> bodies{blind};
  const std::vector<PartDetection> parts{
      {BoundingBox(0, 0, 10, 10, 0.8), cm.find("head")->id}};
  const Association assoc = bkp_associate(bodies, parts, cm);
  ASSERT_EQ(assoc.unassigned.size(), 1u);
  EXPECT_TRUE(assoc.people[0].parts.empty());

  const Association none = bkp_associate({}, parts, cm);
  EXPECT_EQ(none.unassigned.size(), 1u);
}

TEST(Associate, UnknownPartClassIsConfigError) {
  const ClassMap cm = classmap_builtin(ClassMapMode::kBkpd);
  const std::vector<PartDetection> parts{{BoundingBox(0, 0, 5, 5, 0.5), 99}};
  EXPECT_THROW(bkp_associate({}, parts, cm), ConfigError);
}

TEST(Associate, DistanceTieBreaksToLowerBodyIndex) {
  const ClassMap cm = classmap_builtin(ClassMapMode::kBkpd);
  const int head_id = cm.find("head")->id;
  DetectedBody b1 = body_at(-10, 0);
  set_kpt(b1, joints::kNose, -10, 0);
  DetectedBody b2 = body_at(10, 0);
  set_kpt(b2, joints::kNose, 10, 0);
  const std::vector<DetectedBody> bodies{b1, b2};
  const std::vector<PartDetection> parts{{BoundingBox(0, 0, 4, 4, 0.9), head_id}};
  const Association assoc = bkp_associate(bodies, parts, cm);
  EXPECT_EQ(assoc.people[0].parts.count(head_id), 1u);
  EXPECT_TRUE(assoc.people[1].parts.empty());
}

TEST(Associate, MaxPerClassDemotesLowestConfidence) {
  const ClassMap cm = classmap_builtin(ClassMapMode::kBkpd);
  const int head_id = cm.find("head")->id;
  DetectedBody b = body_at(0, 0);
  set_kpt(b, joints::kNose, 0, 0);
  const std::vector<DetectedBody> bodies{b};
  const std::vector<PartDetection> parts{
      {BoundingBox(1, 0, 4, 4, 0.7), head_id},
      {BoundingBox(0, 1, 4, 4, 0.9), head_id},
      {BoundingBox(1, 1, 4, 4, 0.8), head_id}};

  AssocConfig cfg;
  cfg.max_per_class = 1;
  const Association assoc = bkp_associate(bodies, parts, cm, cfg);
  ASSERT_EQ(assoc.people[0].parts.at(head_id).size(), 1u);
  EXPECT_DOUBLE_EQ(assoc.people[0].parts.at(head_id)[0].conf(), 0.9);
  EXPECT_EQ(assoc.unassigned.size(), 2u);
}

TEST(Associate, MaxDistFactorGuard) {
  const ClassMap cm = classmap_builtin(ClassMapMode::kBkpd);
  const int head_id = cm.find("head")->id;
  DetectedBody b = body_at(0, 0, 10.0);  // diagonal ~14.14
  set_kpt(b, joints::kNose, 0, 0);
  const std::vector<DetectedBody> bodies{b};
  const std::vector<PartDetection> parts{
      {BoundingBox(100, 0, 4, 4, 0.9), head_id}};

  AssocConfig cfg;
  cfg.max_dist_factor = 2.0;  // cutoff ~28.3 < 100
  EXPECT_EQ(bkp_associate(bodies, parts, cm, cfg).unassigned.size(), 1u);
  cfg.max_dist_factor = 10.0;  // cutoff ~141 > 100
  EXPECT_TRUE(bkp_associate(bodies, parts, cm, cfg).unassigned.empty());
}

TEST(Associate, EveryPartAppearsExactlyOnce) {
  const ClassMap cm = classmap_builtin(ClassMapMode::kBkpd);
  SynthConfig cfg;
  cfg.seed = 5;
  cfg.people_min = 1;
  cfg.people_max = 7;
  cfg.occlusion_prob = 0.3;
  cfg.noise = {6.0, 9.0, 0.4, 0.99, 0.2, 0.15};
  for (int i = 0; i < 100; ++i) {
    const auto pair = generate_scene(cfg, static_cast<uint64_t>(i), cm);
    const auto flat = flatten_scene(pair.pred);
    const Association assoc = bkp_associate(flat.bodies, flat.parts, cm);
    size_t total = assoc.unassigned.size();
    for (const auto& person : assoc.people)
      for (const auto& [cid, boxes] : person.parts) total += boxes.size();
    EXPECT_EQ(total, flat.parts.size());
  }
}

TEST(Associate, InvariantUnderRigidTranslation) {
  const ClassMap cm = classmap_builtin(ClassMapMode::kBkpd);
  SynthConfig cfg;
  cfg.seed = 6;
  cfg.people_min = 2;
  cfg.people_max = 5;
  cfg.noise = {5.0, 8.0, 0.5, 0.99, 0.0, 0.0};
  for (int i = 0; i < 50; ++i) {
    const auto pair = generate_scene(cfg, static_cast<uint64_t>(i), cm);
    auto flat = flatten_scene(pair.pred);
    const Association before = bkp_associate(flat.bodies, flat.parts, cm);

    const double dx = 37.5, dy = -12.25;
    for (auto& b : flat.bodies) {
      b.box = BoundingBox(b.box.cx() + dx, b.box.cy() + dy, b.box.w(),
                          b.box.h(), b.box.conf());
      for (auto& kp : b.skeleton.keypoints)
        if (kp.labeled()) {
          kp.x += dx;
          kp.y += dy;
        }
    }
    for (auto& p : flat.parts)
      p.box = BoundingBox(p.box.cx() + dx, p.box.cy() + dy, p.box.w(),
                          p.box.h(), p.box.conf());

    const Association after = bkp_associate(flat.bodies, flat.parts, cm);
    ASSERT_EQ(before.unassigned.size(), after.unassigned.size());
    for (size_t b = 0; b < before.people.size(); ++b) {
      ASSERT_EQ(before.people[b].parts.size(), after.people[b].parts.size());
      for (const auto& [cid, boxes] : before.people[b].parts)
        EXPECT_EQ(after.people[b].parts.at(cid).size(), boxes.size());
    }
  }
}

TEST(Associate, MatchesExhaustiveOracleOnRandomScenes) {
  const ClassMap cm = classmap_builtin(ClassMapMode::kBkpd);
  SynthConfig cfg;
  cfg.seed = 77;
  cfg.people_min = 1;
  cfg.people_max = 7;
  cfg.occlusion_prob = 0.25;
  cfg.noise = {8.0, 10.0, 0.4, 0.99, 0.2, 0.1};
  for (int i = 0; i < 300; ++i) {
    const auto pair = generate_scene(cfg, static_cast<uint64_t>(i), cm);
    const auto flat = flatten_scene(pair.pred);
    const Association a = bkp_associate(flat.bodies, flat.parts, cm);
    const Association b = oracle_associate(flat.bodies, flat.parts, cm);
    EXPECT_TRUE(same_association(a, b)) << "scene " << i;
  }
}
