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

#pragma once

#include <cstddef>
#include <span>
#include <variant>
#include <vector>

#include "crowd/assignment.hpp"
#include "crowd/geometry.hpp"

namespace crowd {

// Probability clamp applied before taking logs.
inline constexpr double kProbabilityEpsilon = 1e-12;

// Largest K handled by plain permutation enumeration.
inline constexpr std::size_t kMaxExhaustiveK = 6;

struct SlotPrediction {
  // Softmax output over classes, background included at kBackgroundClass.
  std::vector<double> class_scores;
  BoxDelta delta;
};

struct PredictionSet {
  BBox proposal;
  std::vector<SlotPrediction> slots;
};

struct CrossEntropy {};

struct FocalLoss {
  double gamma = 2.0;
  double alpha = 0.25;
};

using ClsMode = std::variant<CrossEntropy, FocalLoss>;

struct SmoothL1 {
  double beta = 1.0;
};

struct EmdConfig {
  std::size_t k = 2;
  ClsMode cls_mode = CrossEntropy{};
  SmoothL1 reg_mode{};
  double cls_weight = 1.0;
  double reg_weight = 1.0;
  OverflowPolicy overflow = OverflowPolicy::kError;
};

// Dense row-major square matrix; row = prediction slot, column = GT entry.
class CostMatrix {
 public:
  CostMatrix() = default;
  explicit CostMatrix(std::size_t n, double fill = 0.0)
      : n_(n), data_(n * n, fill) {}
  CostMatrix(std::size_t n, std::vector<double> row_major);

  std::size_t size() const noexcept { return n_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * n_ + c]; }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * n_ + c];
  }
  std::span<const double> data() const noexcept { return data_; }

 private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

struct EmdMatch {
  // permutation[k] is the GT column assigned to slot k.
  std::vector<std::size_t> permutation;
  std::vector<double> per_slot_cost;
  double total = 0.0;
};

enum class MatchStrategy {
  kAuto,        // enumeration up to kMaxExhaustiveK, assignment solver above
  kExhaustive,
  kSolver,
};

// Throws InvalidInput when target_class is out of range or the scores are not
// a probability vector (non-negative, summing to 1 within 1e-6).
double cls_loss(std::span<const double> scores, int target_class,
                const ClsMode& mode = CrossEntropy{});

double smooth_l1(double x, double beta = 1.0);

// Regression term for one slot against one set entry; 0 for dummies.
double reg_loss(const BoxDelta& pred, const BBox& proposal,
                const GtSetEntry& target, const SmoothL1& mode = {});

CostMatrix pair_cost_matrix(const PredictionSet& pred, const GtSet& gts,
                            const EmdConfig& cfg);

// Minimum-cost one-to-one assignment. Among optimal permutations the
// lexicographically smallest is returned.
EmdMatch emd_match(const CostMatrix& costs,
                   MatchStrategy strategy = MatchStrategy::kAuto);

// Pads gts to cfg.k when short, then matches.
EmdMatch emd_loss(const PredictionSet& pred, const GtSet& gts,
                  const EmdConfig& cfg);

}  // namespace crowd
