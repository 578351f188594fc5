/* Copyright 2026 The crowd-suppress Authors.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <cmath>
#include <numbers>
#include <set>
#include <utility>
#include <vector>

#include <gtest/gtest.h>

#include "crowd/assignment.hpp"
#include "crowd/error.hpp"
#include "crowd/metrics.hpp"
#include "crowd/suppression.hpp"
#include "crowd/synth.hpp"
#include "oracles/oracles.hpp"

namespace {

using crowd::BBox;
using crowd::DetectorSimParams;
using crowd::GroundTruth;
using crowd::SceneParams;
using crowd::SimMode;

// Two boxes of equal height; the second is 10% larger so it dominates.
std::vector<GroundTruth> crowd_pair() {
  const BBox a{100, 100, 140, 200};
  const BBox b = crowd::place_partner(a, 0.95 * a.width(), 0.95 * a.height(),
                                      1.0, 0.0, 0.7);
  return {{a, 1, false}, {b, 1, false}};
}

DetectorSimParams exact(SimMode mode, std::size_t k = 2) {
  DetectorSimParams p;
  p.mode = mode;
  p.k = k;
  p.proposal_jitter = 0.0;
  p.seed = 1;
  return p;
}

TEST(Scene, DeterministicUnderSeed) {
  SceneParams p;
  p.seed = 42;
  EXPECT_EQ(crowd::generate_scene(p), crowd::generate_scene(p));
  SceneParams q = p;
  q.seed = 43;
  EXPECT_NE(crowd::generate_scene(p), crowd::generate_scene(q));
}

TEST(Scene, NoCrowdMeansAllSparse) {
  SceneParams p;
  p.crowd_pairs_mean = 0.0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    p.seed = s;
    const auto gts = crowd::generate_scene(p);
    for (bool f : crowd::crowd_flags(gts)) EXPECT_FALSE(f);
  }
}

TEST(Scene, BoxesStayInsideImage) {
  SceneParams p;
  for (std::uint64_t s = 0; s < 50; ++s) {
    p.seed = s;
    for (const auto& g : crowd::generate_scene(p)) {
      EXPECT_GE(g.box.x1, 0.0);
      EXPECT_GE(g.box.y1, 0.0);
      EXPECT_LE(g.box.x2, p.image_w);
      EXPECT_LE(g.box.y2, p.image_h);
    }
  }
}

TEST(Scene, DensityNearTargets) {
  SceneParams p;
  p.seed = 2024;
  const auto scenes = crowd::generate_dataset(p, 1000);
  const auto d = crowd::density(scenes);
  EXPECT_NEAR(d.objects_per_image, 22.64, 0.05 * 22.64);
  EXPECT_NEAR(d.overlaps_per_image, 2.40, 0.05 * 2.40);
}

TEST(Scene, TriplesReachCardinalityThree) {
  SceneParams p;
  p.cluster_size = 3;
  p.crowd_pairs_mean = 3.0;
  p.seed = 5;
  const auto scenes = crowd::generate_dataset(p, 50);
  EXPECT_EQ(crowd::max_gt_set_cardinality(scenes, 0.5), 3u);
}

TEST(Scene, PairsStayAtCardinalityTwo) {
  SceneParams p;
  p.seed = 6;
  const auto scenes = crowd::generate_dataset(p, 200);
  EXPECT_EQ(crowd::max_gt_set_cardinality(scenes, 0.5), 2u);
}

TEST(Scene, ValidationRejectsBadRanges) {
  SceneParams p;
  p.pair_iou_lo = 0.4;
  EXPECT_THROW(p.validate(), crowd::InvalidInput);
  p = {};
  p.box_scale_max = 5000.0;
  EXPECT_THROW(p.validate(), crowd::InvalidInput);
  p = {};
  p.cluster_size = 4;
  EXPECT_THROW(p.validate(), crowd::InvalidInput);
}

TEST(Scene, ImpossiblePackingFails) {
  SceneParams p;
  p.image_w = 120;
  p.image_h = 120;
  p.box_scale_min = 100;
  p.box_scale_max = 110;
  p.aspect = 1.0;
  p.n_objects_mean = 40;
  p.max_retries = 50;
  EXPECT_THROW(crowd::generate_scene(p), crowd::PlacementError);
}

TEST(PlacePartner, HitsTargetIou) {
  const BBox a{0, 0, 40, 100};
  for (double target : {0.55, 0.7, 0.8}) {
    for (double phi : {0.0, 1.0, 2.5, 4.0}) {
      const BBox b = crowd::place_partner(a, 36, 90, std::cos(phi), std::sin(phi),
                                          target);
      EXPECT_NEAR(oracle::box_iou(a, b), target, 1e-3);
    }
  }
}

TEST(PlacePartner, RejectsUnreachableTarget) {
  const BBox a{0, 0, 40, 100};
  // A half-size partner can reach at most IoU 0.25.
  EXPECT_THROW(crowd::place_partner(a, 20, 50, 1, 0, 0.6), crowd::InvalidInput);
}

TEST(Simulator, IsolatedExactDetection) {
  const std::vector<GroundTruth> gts{{{10, 10, 50, 110}, 1, false}};
  for (auto mode : {SimMode::kSingle, SimMode::kMip}) {
    const auto dets = crowd::simulate_detector(gts, exact(mode));
    ASSERT_EQ(dets.size(), 1u);
    EXPECT_DOUBLE_EQ(oracle::box_iou(dets[0].box, gts[0].box), 1.0);
  }
}

TEST(Simulator, SingleModeCollapsesCrowdPair) {
  const auto gts = crowd_pair();
  const auto dets = crowd::simulate_detector(gts, exact(SimMode::kSingle));
  ASSERT_EQ(dets.size(), 2u);
  EXPECT_EQ(dets[0].box, dets[1].box);
  const auto kept = crowd::nms(dets);
  ASSERT_EQ(kept.size(), 1u);
  // The surviving box is the larger member; the other GT cannot be matched.
  EXPECT_EQ(kept[0].box, gts[0].box);
}

TEST(Simulator, MipModeRecoversCrowdPair) {
  const auto gts = crowd_pair();
  const auto dets = crowd::simulate_detector(gts, exact(SimMode::kMip, 2));
  ASSERT_EQ(dets.size(), 4u);
  crowd::SuppressionConfig cfg;
  cfg.method = crowd::SuppressionMethod::kSetNms;
  const auto kept = crowd::set_nms(dets, cfg);
  ASSERT_EQ(kept.size(), 2u);
  std::set<std::pair<double, double>> covered;
  for (const auto& d : kept) covered.insert({d.box.x1, d.box.y1});
  EXPECT_TRUE(covered.count({gts[0].box.x1, gts[0].box.y1}));
  EXPECT_TRUE(covered.count({gts[1].box.x1, gts[1].box.y1}));
}

TEST(Simulator, MipSlotsAreUniqueAndComeFromTheSet) {
  SceneParams sp;
  sp.seed = 8;
  const auto gts = crowd::generate_scene(sp);
  DetectorSimParams p;
  p.proposal_jitter = 0.0;
  p.proposals_per_gt = 3;
  p.k = 2;
  const auto dets = crowd::simulate_detector(gts, p);
  std::set<std::pair<std::int64_t, int>> seen;
  for (const auto& d : dets) {
    EXPECT_TRUE(seen.insert({d.proposal_id, d.slot}).second);
    bool member = false;
    for (const auto& g : gts) member = member || g.box == d.box;
    EXPECT_TRUE(member);
  }
}

TEST(Simulator, ScoresFallWithJitter) {
  const std::vector<GroundTruth> gts{{{10, 10, 50, 110}, 1, false}};
  DetectorSimParams p = exact(SimMode::kMip);
  const double clean = crowd::simulate_detector(gts, p)[0].score;
  p.proposal_jitter = 0.2;
  double total = 0.0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    p.seed = s;
    const auto d = crowd::simulate_detector(gts, p);
    for (const auto& x : d) {
      EXPECT_LE(x.score, clean);
      EXPECT_GE(x.score, p.score_min);
      total += x.score;
    }
  }
  EXPECT_LT(total / 50.0, clean);
}

TEST(Simulator, ModesShareDetectionsForIsolatedObjects) {
  SceneParams sp;
  sp.crowd_pairs_mean = 0.0;
  sp.seed = 12;
  const auto gts = crowd::generate_scene(sp);
  DetectorSimParams single;
  single.mode = SimMode::kSingle;
  single.seed = 77;
  DetectorSimParams mip = single;
  mip.mode = SimMode::kMip;
  EXPECT_EQ(crowd::simulate_detector(gts, single),
            crowd::simulate_detector(gts, mip));
}

TEST(Simulator, MissProbabilityDropsObjects) {
  SceneParams sp;
  sp.crowd_pairs_mean = 0.0;
  sp.seed = 13;
  const auto gts = crowd::generate_scene(sp);
  DetectorSimParams p;
  p.seed = 3;
  const auto full = crowd::simulate_detector(gts, p);
  p.miss_prob = 0.5;
  const auto some = crowd::simulate_detector(gts, p);
  EXPECT_LT(some.size(), full.size());
}

TEST(Simulator, BackgroundFalsePositivesAvoidObjects) {
  SceneParams sp;
  sp.seed = 14;
  const auto gts = crowd::generate_scene(sp);
  DetectorSimParams p;
  p.proposal_jitter = 0.0;
  p.background_fp_mean = 5.0;
  p.seed = 4;
  const auto dets = crowd::simulate_detector(gts, p, {sp.image_w, sp.image_h});
  std::size_t strays = 0;
  for (const auto& d : dets) {
    double best = 0.0;
    for (const auto& g : gts) best = std::max(best, oracle::box_iou(d.box, g.box));
    if (best < 1.0) {
      ++strays;
      EXPECT_LT(best, 0.3);
    }
  }
  EXPECT_GT(strays, 0u);
}

TEST(Simulator, ValidationRejectsBadParams) {
  DetectorSimParams p;
  p.k = 0;
  EXPECT_THROW(p.validate(), crowd::InvalidInput);
  p = {};
  p.theta = 0.0;
  EXPECT_THROW(p.validate(), crowd::InvalidInput);
  p = {};
  p.miss_prob = 1.0;
  EXPECT_THROW(p.validate(), crowd::InvalidInput);
}

TEST(Dataset, IndependentOfJobCount) {
  SceneParams p;
  p.seed = 99;
  EXPECT_EQ(crowd::generate_dataset(p, 40, 1), crowd::generate_dataset(p, 40, 4));
}

TEST(Dataset, ZeroImages) {
  EXPECT_TRUE(crowd::generate_dataset(SceneParams{}, 0).empty());
}

TEST(Study, LabelsAndShape) {
  crowd::StudyPlan plan;
  plan.nms_sweep = {0.3, 0.5, 0.8};
  plan.k_sweep = {1, 2, 3};
  const auto arms = crowd::standard_study_arms(plan);
  std::vector<std::string> labels;
  for (const auto& a : arms) labels.push_back(a.label);
  const std::vector<std::string> want{
      "single+nms@0.50",       "single+soft-linear@0.50",
      "single+soft-gaussian(sigma=0.50)", "mip(k=2)+nms@0.50",
      "mip(k=2)+set-nms@0.50", "single+nms@0.30",
      "single+nms@0.80",       "single+set-nms@0.50",
      "mip(k=3)+set-nms@0.50"};
  EXPECT_EQ(labels, want);
}

TEST(Study, DeterministicAndJobIndependent) {
  SceneParams sp;
  crowd::StudyPlan plan;
  const auto arms = crowd::standard_study_arms(plan);
  const auto a = crowd::run_study(sp, arms, {}, 40, 5, 1);
  const auto b = crowd::run_study(sp, arms, {}, 40, 5, 3);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].label, b[i].label);
    EXPECT_EQ(a[i].report.ap, b[i].report.ap);
    EXPECT_EQ(a[i].report.mr2, b[i].report.mr2);
    EXPECT_EQ(a[i].report.ji, b[i].report.ji);
    EXPECT_EQ(a[i].report.recall.crowd.matched, b[i].report.recall.crowd.matched);
  }
}

TEST(Study, MipSetNmsImprovesCrowdRecall) {
  SceneParams sp;
  crowd::StudyPlan plan;
  const auto rows =
      crowd::run_study(sp, crowd::standard_study_arms(plan), {}, 200, 1, 1);
  const auto find = [&](const std::string& label) {
    for (const auto& r : rows)
      if (r.label == label) return r.report;
    ADD_FAILURE() << "missing row " << label;
    return crowd::EvalReport{};
  };
  EXPECT_GT(find("mip(k=2)+set-nms@0.50").recall.crowd.ratio(),
            find("single+nms@0.50").recall.crowd.ratio());
}

TEST(Study, SeparableScenesArePerfectForEveryArm) {
  SceneParams sp;
  sp.crowd_pairs_mean = 0.0;
  crowd::StudyPlan plan;
  plan.proposal_jitter = 0.0;
  plan.background_fp_mean = 0.0;
  plan.miss_prob = 0.0;
  // Isolated neighbours may overlap up to IoU 0.5, so sweep rows below 0.5
  // would legitimately suppress them.
  plan.nms_sweep = {0.5, 0.6, 0.8};
  plan.k_sweep = {1, 2, 3};
  const auto rows =
      crowd::run_study(sp, crowd::standard_study_arms(plan), {}, 30, 2, 1);
  for (const auto& r : rows) {
    EXPECT_NEAR(r.report.ap, 1.0, 1e-9) << r.label;
    EXPECT_NEAR(r.report.ji, 1.0, 1e-9) << r.label;
    EXPECT_NEAR(r.report.ap, rows[0].report.ap, 1e-6);
    EXPECT_NEAR(r.report.mr2, rows[0].report.mr2, 1e-6);
    EXPECT_NEAR(r.report.recall.total.ratio(), rows[0].report.recall.total.ratio(),
                1e-6);
  }
}

TEST(Study, CrossArmsCoversEveryPair) {
  std::vector<DetectorSimParams> sims(2);
  sims[0].mode = SimMode::kSingle;
  std::vector<crowd::SuppressionConfig> sups(3);
  sups[1].method = crowd::SuppressionMethod::kSetNms;
  sups[2].method = crowd::SuppressionMethod::kSoftLinear;
  EXPECT_EQ(crowd::cross_arms(sims, sups).size(), 6u);
}

}  // namespace
