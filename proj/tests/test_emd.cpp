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
#include <optional>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "crowd/assignment.hpp"
#include "crowd/emd.hpp"
#include "crowd/error.hpp"
#include "oracles/oracles.hpp"

namespace {

using crowd::BBox;
using crowd::CostMatrix;
using crowd::EmdConfig;
using crowd::GroundTruth;
using crowd::GtSet;
using crowd::PredictionSet;
using crowd::SlotPrediction;

std::vector<double> random_simplex(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.01, 1.0);
  std::vector<double> v(n);
  double sum = 0.0;
  for (double& x : v) sum += (x = u(rng));
  for (double& x : v) x /= sum;
  return v;
}

CostMatrix random_costs(std::mt19937_64& rng, std::size_t k) {
  std::uniform_real_distribution<double> u(0.0, 10.0);
  CostMatrix c(k);
  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t col = 0; col < k; ++col) c(r, col) = u(rng);
  }
  return c;
}

std::vector<double> flat(const CostMatrix& c) {
  return {c.data().begin(), c.data().end()};
}

SlotPrediction random_slot(std::mt19937_64& rng, std::size_t classes) {
  std::normal_distribution<double> n(0.0, 0.3);
  return {random_simplex(rng, classes), {n(rng), n(rng), n(rng), n(rng)}};
}

TEST(ClsLoss, OneHotIsZero) {
  const std::vector<double> s{0.0, 1.0, 0.0};
  EXPECT_EQ(crowd::cls_loss(s, 1), 0.0);
}

TEST(ClsLoss, UniformTwoClass) {
  const std::vector<double> s{0.5, 0.5};
  EXPECT_NEAR(crowd::cls_loss(s, 0), std::log(2.0), 1e-15);
  EXPECT_NEAR(crowd::cls_loss(s, 0), 0.693147, 1e-6);
}

TEST(ClsLoss, ZeroProbabilityIsClamped) {
  const std::vector<double> s{1.0, 0.0};
  EXPECT_NEAR(crowd::cls_loss(s, 1), -std::log(crowd::kProbabilityEpsilon),
              1e-9);
}

TEST(ClsLoss, FocalWithoutModulationIsCrossEntropy) {
  std::mt19937_64 rng(3);
  const crowd::FocalLoss focal{0.0, 1.0};
  for (int i = 0; i < 1000; ++i) {
    const std::vector<double> s = random_simplex(rng, 4);
    const int t = i % 4;
    EXPECT_NEAR(crowd::cls_loss(s, t, focal), crowd::cls_loss(s, t), 1e-12);
  }
}

TEST(ClsLoss, FocalClosedForm) {
  const std::vector<double> s{0.2, 0.8};
  const crowd::FocalLoss focal{2.0, 0.25};
  EXPECT_NEAR(crowd::cls_loss(s, 1, focal), -0.25 * 0.04 * std::log(0.8), 1e-15);
}

TEST(ClsLoss, RejectsBadInput) {
  EXPECT_THROW(crowd::cls_loss(std::vector<double>{0.5, 0.4}, 0),
               crowd::InvalidInput);
  EXPECT_THROW(crowd::cls_loss(std::vector<double>{0.5, 0.5}, 2),
               crowd::InvalidInput);
  EXPECT_THROW(crowd::cls_loss(std::vector<double>{}, 0), crowd::InvalidInput);
  EXPECT_THROW(crowd::cls_loss(std::vector<double>{1.5, -0.5}, 0),
               crowd::InvalidInput);
}

TEST(SmoothL1, ClosedForm) {
  EXPECT_DOUBLE_EQ(crowd::smooth_l1(0.5, 1.0), 0.125);
  EXPECT_DOUBLE_EQ(crowd::smooth_l1(2.0, 1.0), 1.5);
  EXPECT_DOUBLE_EQ(crowd::smooth_l1(-2.0, 1.0), 1.5);
  EXPECT_DOUBLE_EQ(crowd::smooth_l1(1.0, 1.0), 0.5);
  EXPECT_THROW(crowd::smooth_l1(1.0, 0.0), crowd::InvalidInput);
}

TEST(RegLoss, ExactPredictionIsZero) {
  const BBox p{0, 0, 10, 10};
  crowd::GtSetEntry e;
  e.gt.box = {2, 1, 14, 9};
  EXPECT_EQ(crowd::reg_loss(crowd::encode_delta(p, e.gt.box), p, e), 0.0);
}

TEST(RegLoss, DummyTargetIsZero) {
  crowd::GtSetEntry e;
  e.dummy = true;
  EXPECT_EQ(crowd::reg_loss({3, -2, 1, 5}, {0, 0, 10, 10}, e), 0.0);
}

TEST(RegLoss, SingleComponentResidual) {
  const BBox p{0, 0, 10, 10};
  crowd::GtSetEntry e;
  e.gt.box = p;
  EXPECT_DOUBLE_EQ(crowd::reg_loss({0.5, 0, 0, 0}, p, e), 0.125);
  EXPECT_DOUBLE_EQ(crowd::reg_loss({0, 2.0, 0, 0}, p, e), 1.5);
}

TEST(PairCost, SingleSlotIsStandardLoss) {
  std::mt19937_64 rng(9);
  const BBox p{10, 10, 40, 80};
  const GroundTruth g{{12, 8, 44, 76}, 1, false};
  const std::vector<GroundTruth> gts{g};
  PredictionSet pred{p, {random_slot(rng, 2)}};
  EmdConfig cfg;
  cfg.k = 1;
  const CostMatrix c = crowd::pair_cost_matrix(
      pred, crowd::pad_to_k(crowd::build_gt_set(p, gts, 0.5), 1), cfg);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_NEAR(c(0, 0),
              oracle::single_prediction_loss(pred.slots[0].class_scores, 1, p,
                                             pred.slots[0].delta, g.box, 1.0),
              1e-12);
}

TEST(PairCost, AllDummyColumnsAreBackgroundOnly) {
  std::mt19937_64 rng(4);
  const BBox p{0, 0, 10, 10};
  PredictionSet pred{p, {random_slot(rng, 3), random_slot(rng, 3)}};
  EmdConfig cfg;
  const CostMatrix c = crowd::pair_cost_matrix(pred, crowd::pad_to_k({}, 2), cfg);
  for (std::size_t s = 0; s < 2; ++s) {
    const double bg = -std::log(pred.slots[s].class_scores[0]);
    EXPECT_NEAR(c(s, 0), bg, 1e-15);
    EXPECT_NEAR(c(s, 1), bg, 1e-15);
  }
}

TEST(PairCost, HandBuiltTwoByTwo) {
  // Proposal (0,0,10,10); GT a = (0,0,10,10), GT b = (2.5,0,12.5,10).
  const BBox p{0, 0, 10, 10};
  const std::vector<GroundTruth> gts{{{0, 0, 10, 10}, 1, false},
                                     {{2.5, 0, 12.5, 10}, 1, false}};
  PredictionSet pred{p,
                     {{{0.2, 0.8}, {0.0, 0.0, 0.0, 0.0}},
                      {{0.4, 0.6}, {0.25, 0.0, 0.0, 0.0}}}};
  const GtSet set = crowd::build_gt_set(p, gts, 0.5);
  ASSERT_EQ(set.size(), 2u);
  EmdConfig cfg;
  const CostMatrix c = crowd::pair_cost_matrix(pred, set, cfg);
  // Target deltas: a -> (0,0,0,0), b -> (0.25,0,0,0).
  // Residual 0.25 in smooth-L1: 0.5 * 0.0625 = 0.03125.
  EXPECT_NEAR(c(0, 0), -std::log(0.8), 1e-15);
  EXPECT_NEAR(c(0, 1), -std::log(0.8) + 0.03125, 1e-15);
  EXPECT_NEAR(c(1, 0), -std::log(0.6) + 0.03125, 1e-15);
  EXPECT_NEAR(c(1, 1), -std::log(0.6), 1e-15);
}

TEST(PairCost, WrongShapeIsContractError) {
  PredictionSet pred{{0, 0, 1, 1}, {{{0.5, 0.5}, {}}}};
  EmdConfig cfg;
  EXPECT_THROW(crowd::pair_cost_matrix(pred, crowd::pad_to_k({}, 2), cfg),
               crowd::ContractError);
}

TEST(CostMatrix, SizeMismatchIsContractError) {
  EXPECT_THROW(CostMatrix(2, std::vector<double>{1, 2, 3}), crowd::ContractError);
}

TEST(EmdMatch, TwoByTwoPrefersDiagonal) {
  const crowd::EmdMatch m = crowd::emd_match(CostMatrix(2, {1, 2, 3, 1}));
  EXPECT_EQ(m.permutation, (std::vector<std::size_t>{0, 1}));
  EXPECT_DOUBLE_EQ(m.total, 2.0);
  EXPECT_EQ(m.per_slot_cost, (std::vector<double>{1.0, 1.0}));
}

TEST(EmdMatch, AllEqualGivesIdentity) {
  for (std::size_t k = 1; k <= 7; ++k) {
    const crowd::EmdMatch m = crowd::emd_match(CostMatrix(k, 0.75));
    std::vector<std::size_t> id(k);
    for (std::size_t i = 0; i < k; ++i) id[i] = i;
    EXPECT_EQ(m.permutation, id) << "k=" << k;
    EXPECT_DOUBLE_EQ(m.total, 0.75 * static_cast<double>(k));
  }
}

TEST(EmdMatch, RejectsEmptyAndNonFinite) {
  EXPECT_THROW(crowd::emd_match(CostMatrix{}), crowd::InvalidInput);
  EXPECT_THROW(crowd::emd_match(CostMatrix(2, {1, NAN, 0, 0})),
               crowd::InvalidInput);
  EXPECT_THROW(crowd::emd_match(CostMatrix(7, 1.0), crowd::MatchStrategy::kExhaustive),
               crowd::InvalidInput);
}

TEST(EmdMatch, RandomMatricesMatchEnumeration) {
  std::mt19937_64 rng(17);
  for (std::size_t k = 1; k <= 6; ++k) {
    for (int trial = 0; trial < 300; ++trial) {
      const CostMatrix c = random_costs(rng, k);
      const oracle::Assignment want = oracle::enumerate_assignments(flat(c), k);
      const crowd::EmdMatch got = crowd::emd_match(c);
      EXPECT_EQ(got.total, want.total);
      EXPECT_EQ(got.permutation, want.perm);
    }
  }
}

TEST(EmdMatch, SolverAgreesWithEnumeration) {
  std::mt19937_64 rng(23);
  for (std::size_t k = 1; k <= 7; ++k) {
    for (int trial = 0; trial < 100; ++trial) {
      const CostMatrix c = random_costs(rng, k);
      const oracle::Assignment want = oracle::enumerate_assignments(flat(c), k);
      const crowd::EmdMatch got = crowd::emd_match(c, crowd::MatchStrategy::kSolver);
      EXPECT_NEAR(got.total, want.total, 1e-9);
      EXPECT_EQ(got.permutation, want.perm);
    }
  }
}

TEST(EmdMatch, SolverTieBreakOnIntegerCosts) {
  // Small integer costs force many exact ties.
  std::mt19937_64 rng(29);
  std::uniform_int_distribution<int> u(0, 2);
  for (std::size_t k = 2; k <= 6; ++k) {
    for (int trial = 0; trial < 200; ++trial) {
      CostMatrix c(k);
      for (std::size_t r = 0; r < k; ++r) {
        for (std::size_t col = 0; col < k; ++col) c(r, col) = u(rng);
      }
      const oracle::Assignment want = oracle::enumerate_assignments(flat(c), k);
      EXPECT_EQ(crowd::emd_match(c, crowd::MatchStrategy::kSolver).permutation,
                want.perm);
      EXPECT_EQ(crowd::emd_match(c).permutation, want.perm);
    }
  }
}

TEST(EmdLoss, SingleSlotReducesToStandardLoss) {
  std::mt19937_64 rng(31);
  EmdConfig cfg;
  cfg.k = 1;
  for (int i = 0; i < 500; ++i) {
    const BBox gbox = oracle::random_box(rng, 100.0, 5.0, 60.0);
    const BBox p = gbox.translated(0.5, -0.5);
    const std::vector<GroundTruth> gts{{gbox, 1, false}};
    PredictionSet pred{p, {random_slot(rng, 2)}};
    const crowd::EmdMatch m =
        crowd::emd_loss(pred, crowd::build_gt_set(p, gts, 0.5), cfg);
    EXPECT_NEAR(m.total,
                oracle::single_prediction_loss(pred.slots[0].class_scores, 1, p,
                                               pred.slots[0].delta, gbox, 1.0),
                1e-12);
  }
}

TEST(EmdLoss, IdenticalSlotsAgainstRealAndDummy) {
  const BBox p{0, 0, 10, 10};
  const std::vector<GroundTruth> gts{{p, 1, false}};
  const SlotPrediction slot{{0.5, 0.5}, {0, 0, 0, 0}};
  PredictionSet pred{p, {slot, slot}};
  EmdConfig cfg;
  const crowd::EmdMatch m =
      crowd::emd_loss(pred, crowd::build_gt_set(p, gts, 0.5), cfg);
  EXPECT_EQ(m.permutation, (std::vector<std::size_t>{0, 1}));
  EXPECT_NEAR(m.total, 2.0 * std::log(2.0), 1e-15);
}

TEST(EmdLoss, RandomInstancesMatchEnumeration) {
  std::mt19937_64 rng(37);
  for (std::size_t k : {2u, 3u}) {
    EmdConfig cfg;
    cfg.k = k;
    for (int i = 0; i < 300; ++i) {
      const BBox p{0, 0, 20, 40};
      std::vector<GroundTruth> gts;
      const int n_real = static_cast<int>(rng() % (k + 1));
      for (int g = 0; g < n_real; ++g) {
        gts.push_back({p.translated(0.4 * g, 0.3 * g), 1, false});
      }
      PredictionSet pred{p, {}};
      for (std::size_t s = 0; s < k; ++s) pred.slots.push_back(random_slot(rng, 2));
      const GtSet set = crowd::pad_to_k(crowd::build_gt_set(p, gts, 0.5), k);
      const crowd::EmdMatch m = crowd::emd_loss(pred, set, cfg);
      std::vector<double> costs(k * k);
      for (std::size_t s = 0; s < k; ++s) {
        for (std::size_t j = 0; j < k; ++j) {
          const auto& e = set.entries[j];
          costs[s * k + j] = oracle::single_prediction_loss(
              pred.slots[s].class_scores, e.dummy ? 0 : 1, p, pred.slots[s].delta,
              e.dummy ? std::nullopt : std::optional<BBox>(e.gt.box), 1.0);
        }
      }
      const oracle::Assignment want = oracle::enumerate_assignments(costs, k);
      EXPECT_NEAR(m.total, want.total, 1e-12);
      EXPECT_EQ(m.permutation, want.perm);
    }
  }
}

TEST(EmdLoss, OverflowPropagatesUnlessTruncating) {
  const BBox p{0, 0, 10, 10};
  const std::vector<GroundTruth> gts{{p, 1, false},
                                     {{0, 0, 10, 11}, 1, false},
                                     {{0, 0, 11, 10}, 1, false}};
  PredictionSet pred{p, {{{0.5, 0.5}, {}}, {{0.5, 0.5}, {}}}};
  EmdConfig cfg;
  const GtSet set = crowd::build_gt_set(p, gts, 0.5);
  EXPECT_THROW(crowd::emd_loss(pred, set, cfg), crowd::GtSetOverflow);
  cfg.overflow = crowd::OverflowPolicy::kTruncateTopK;
  EXPECT_NO_THROW(crowd::emd_loss(pred, set, cfg));
}

TEST(EmdLoss, WeightsScaleTerms) {
  const BBox p{0, 0, 10, 10};
  const std::vector<GroundTruth> gts{{{0, 0, 10, 10}, 1, false}};
  PredictionSet pred{p, {{{0.5, 0.5}, {0.5, 0, 0, 0}}}};
  EmdConfig cfg;
  cfg.k = 1;
  cfg.cls_weight = 2.0;
  cfg.reg_weight = 4.0;
  const crowd::EmdMatch m =
      crowd::emd_loss(pred, crowd::build_gt_set(p, gts, 0.5), cfg);
  EXPECT_NEAR(m.total, 2.0 * std::log(2.0) + 4.0 * 0.125, 1e-15);
}

}  // namespace
