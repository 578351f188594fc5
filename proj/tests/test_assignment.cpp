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

#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "crowd/assignment.hpp"
#include "crowd/error.hpp"
#include "oracles/oracles.hpp"

namespace {

using crowd::BBox;
using crowd::GroundTruth;

GroundTruth gt(BBox b, bool ignore = false) {
  GroundTruth g;
  g.box = b;
  g.ignore = ignore;
  return g;
}

TEST(GtSet, IdenticalBoxGivesOneMember) {
  const std::vector<GroundTruth> gts{gt({0, 0, 10, 10})};
  const crowd::GtSet s = crowd::build_gt_set({0, 0, 10, 10}, gts, 0.5);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s.entries[0].source_index, 0u);
  EXPECT_DOUBLE_EQ(s.entries[0].overlap, 1.0);
}

TEST(GtSet, DisjointGivesEmpty) {
  const std::vector<GroundTruth> gts{gt({100, 100, 110, 110})};
  EXPECT_EQ(crowd::build_gt_set({0, 0, 10, 10}, gts, 0.5).size(), 0u);
}

TEST(GtSet, ThirdOverlapIsBelowThreshold) {
  const std::vector<GroundTruth> gts{gt({1, 0, 3, 2}), gt({0, 0, 2, 2})};
  const crowd::GtSet s = crowd::build_gt_set({0, 0, 2, 2}, gts, 0.5);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s.entries[0].source_index, 1u);
}

TEST(GtSet, ThresholdIsInclusive) {
  // IoU exactly 0.5: 10x10 against 10x20 sharing the top half.
  const std::vector<GroundTruth> gts{gt({0, 0, 10, 20})};
  EXPECT_EQ(crowd::build_gt_set({0, 0, 10, 10}, gts, 0.5).size(), 1u);
}

TEST(GtSet, SkipsIgnoredAndSortsByOverlap) {
  const std::vector<GroundTruth> gts{gt({0, 0, 10, 12}), gt({0, 0, 10, 10}, true),
                                     gt({0, 0, 10, 11})};
  const crowd::GtSet s = crowd::build_gt_set({0, 0, 10, 10}, gts, 0.5);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s.entries[0].source_index, 2u);
  EXPECT_EQ(s.entries[1].source_index, 0u);
}

TEST(GtSet, MembershipMatchesOracle) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<GroundTruth> gts;
    for (int i = 0; i < 8; ++i) gts.push_back(gt(oracle::random_box(rng, 30.0)));
    const BBox p = oracle::random_box(rng, 30.0);
    const double theta = 0.3;
    const crowd::GtSet s = crowd::build_gt_set(p, gts, theta);
    std::size_t expected = 0;
    for (const auto& g : gts) expected += oracle::box_iou(p, g.box) >= theta;
    EXPECT_EQ(s.size(), expected);
    for (std::size_t i = 1; i < s.size(); ++i) {
      EXPECT_GE(s.entries[i - 1].overlap, s.entries[i].overlap);
    }
  }
}

TEST(GtSet, RejectsBadTheta) {
  const std::vector<GroundTruth> gts;
  EXPECT_THROW(crowd::build_gt_set({0, 0, 1, 1}, gts, 0.0), crowd::InvalidInput);
  EXPECT_THROW(crowd::build_gt_set({0, 0, 1, 1}, gts, 1.5), crowd::InvalidInput);
}

TEST(PadToK, EmptySetBecomesDummies) {
  const crowd::GtSet s = crowd::pad_to_k({}, 2);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_TRUE(s.entries[0].dummy);
  EXPECT_TRUE(s.entries[1].dummy);
  EXPECT_EQ(s.entries[0].gt.class_id, crowd::kBackgroundClass);
  EXPECT_EQ(s.real_count(), 0u);
}

TEST(PadToK, OneRealThenDummy) {
  const std::vector<GroundTruth> gts{gt({0, 0, 10, 10})};
  const crowd::GtSet s =
      crowd::pad_to_k(crowd::build_gt_set({0, 0, 10, 10}, gts, 0.5), 2);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_FALSE(s.entries[0].dummy);
  EXPECT_TRUE(s.entries[1].dummy);
  EXPECT_EQ(s.real_count(), 1u);
}

TEST(PadToK, OverflowReportsExcess) {
  const std::vector<GroundTruth> gts{gt({0, 0, 10, 10}), gt({0, 0, 10, 11}),
                                     gt({0, 0, 11, 10})};
  const crowd::GtSet s = crowd::build_gt_set({0, 0, 10, 10}, gts, 0.5);
  ASSERT_EQ(s.size(), 3u);
  try {
    crowd::pad_to_k(s, 2);
    FAIL() << "expected overflow";
  } catch (const crowd::GtSetOverflow& e) {
    EXPECT_EQ(e.excess(), 1u);
  }
}

TEST(PadToK, TruncateKeepsBestOverlaps) {
  const std::vector<GroundTruth> gts{gt({0, 0, 10, 13}), gt({0, 0, 10, 10}),
                                     gt({0, 0, 10, 11})};
  const crowd::GtSet s = crowd::pad_to_k(
      crowd::build_gt_set({0, 0, 10, 10}, gts, 0.5), 2,
      crowd::OverflowPolicy::kTruncateTopK);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s.entries[0].source_index, 1u);
  EXPECT_EQ(s.entries[1].source_index, 2u);
}

TEST(PadToK, ZeroKIsRejected) {
  EXPECT_THROW(crowd::pad_to_k({}, 0), crowd::InvalidInput);
}

TEST(MaxCardinality, IsolatedBoxes) {
  crowd::SceneRecord s;
  s.gts = {gt({0, 0, 10, 10}), gt({50, 50, 60, 60})};
  EXPECT_EQ(crowd::max_gt_set_cardinality(std::vector{s}), 1u);
}

TEST(MaxCardinality, OverlappingPair) {
  crowd::SceneRecord s;
  // 10x10 boxes shifted by 2.5: IoU = 75 / 125 = 0.6
  s.gts = {gt({0, 0, 10, 10}), gt({2.5, 0, 12.5, 10})};
  EXPECT_NEAR(oracle::box_iou(s.gts[0].box, s.gts[1].box), 0.6, 1e-12);
  EXPECT_EQ(crowd::max_gt_set_cardinality(std::vector{s}), 2u);
}

TEST(MaxCardinality, Triple) {
  crowd::SceneRecord s;
  s.gts = {gt({0, 0, 10, 10}), gt({1, 0, 11, 10}), gt({2, 0, 12, 10})};
  EXPECT_EQ(crowd::max_gt_set_cardinality(std::vector{s}), 3u);
}

}  // namespace
