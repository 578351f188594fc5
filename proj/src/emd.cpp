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

#include "crowd/emd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "crowd/error.hpp"
#include "crowd/linear_assignment.hpp"

namespace crowd {
namespace {

constexpr double kProbabilitySumTolerance = 1e-6;

void validate_probabilities(std::span<const double> scores) {
  if (scores.empty()) throw InvalidInput("class score vector is empty");
  double sum = 0.0;
  for (double s : scores) {
    if (!std::isfinite(s) || s < 0.0) {
      throw InvalidInput("class scores must be finite and non-negative");
    }
    sum += s;
  }
  if (std::abs(sum - 1.0) > kProbabilitySumTolerance) {
    std::ostringstream msg;
    msg << "class scores sum to " << sum << ", expected 1";
    throw InvalidInput(msg.str());
  }
}

double slot_total(const CostMatrix& costs,
                  const std::vector<std::size_t>& perm) {
  double total = 0.0;
  for (std::size_t k = 0; k < perm.size(); ++k) total += costs(k, perm[k]);
  return total;
}

EmdMatch make_match(const CostMatrix& costs, std::vector<std::size_t> perm) {
  EmdMatch match;
  match.per_slot_cost.reserve(perm.size());
  for (std::size_t k = 0; k < perm.size(); ++k) {
    match.per_slot_cost.push_back(costs(k, perm[k]));
  }
  match.total = slot_total(costs, perm);
  match.permutation = std::move(perm);
  return match;
}

// std::next_permutation walks permutations in lexicographic order, so keeping
// only strict improvements retains the smallest permutation among ties.
EmdMatch match_exhaustive(const CostMatrix& costs) {
  std::vector<std::size_t> perm(costs.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::vector<std::size_t> best = perm;
  double best_total = slot_total(costs, perm);
  while (std::next_permutation(perm.begin(), perm.end())) {
    const double total = slot_total(costs, perm);
    if (total < best_total) {
      best_total = total;
      best = perm;
    }
  }
  return make_match(costs, std::move(best));
}

}  // namespace

CostMatrix::CostMatrix(std::size_t n, std::vector<double> row_major)
    : n_(n), data_(std::move(row_major)) {
  if (data_.size() != n * n) {
    throw ContractError("cost matrix data does not match its dimension");
  }
}

double cls_loss(std::span<const double> scores, int target_class,
                const ClsMode& mode) {
  validate_probabilities(scores);
  if (target_class < 0 ||
      static_cast<std::size_t>(target_class) >= scores.size()) {
    std::ostringstream msg;
    msg << "target class " << target_class << " outside vocabulary of size "
        << scores.size();
    throw InvalidInput(msg.str());
  }
  const double p =
      std::max(scores[static_cast<std::size_t>(target_class)],
               kProbabilityEpsilon);
  if (const auto* focal = std::get_if<FocalLoss>(&mode)) {
    if (focal->gamma < 0.0) throw InvalidInput("focal gamma must be >= 0");
    return -focal->alpha * std::pow(1.0 - p, focal->gamma) * std::log(p);
  }
  return -std::log(p);
}

double smooth_l1(double x, double beta) {
  if (!(beta > 0.0)) throw InvalidInput("smooth-L1 beta must be positive");
  const double ax = std::abs(x);
  return ax < beta ? 0.5 * x * x / beta : ax - 0.5 * beta;
}

double reg_loss(const BoxDelta& pred, const BBox& proposal,
                const GtSetEntry& target, const SmoothL1& mode) {
  if (target.dummy) return 0.0;
  const BoxDelta want = encode_delta(proposal, target.gt.box);
  return smooth_l1(pred.dx - want.dx, mode.beta) +
         smooth_l1(pred.dy - want.dy, mode.beta) +
         smooth_l1(pred.dw - want.dw, mode.beta) +
         smooth_l1(pred.dh - want.dh, mode.beta);
}

CostMatrix pair_cost_matrix(const PredictionSet& pred, const GtSet& gts,
                            const EmdConfig& cfg) {
  const std::size_t k = cfg.k;
  if (pred.slots.size() != k || gts.entries.size() != k) {
    std::ostringstream msg;
    msg << "cost matrix needs " << k << " slots and " << k
        << " GT entries, got " << pred.slots.size() << " and "
        << gts.entries.size();
    throw ContractError(msg.str());
  }
  CostMatrix costs(k);
  for (std::size_t s = 0; s < k; ++s) {
    const SlotPrediction& slot = pred.slots[s];
    for (std::size_t j = 0; j < k; ++j) {
      const GtSetEntry& entry = gts.entries[j];
      const int target = entry.dummy ? kBackgroundClass : entry.gt.class_id;
      costs(s, j) =
          cfg.cls_weight * cls_loss(slot.class_scores, target, cfg.cls_mode) +
          cfg.reg_weight *
              reg_loss(slot.delta, pred.proposal, entry, cfg.reg_mode);
    }
  }
  return costs;
}

EmdMatch emd_match(const CostMatrix& costs, MatchStrategy strategy) {
  if (costs.size() == 0) throw InvalidInput("cost matrix is empty");
  for (double c : costs.data()) {
    if (!std::isfinite(c)) throw InvalidInput("cost matrix must be finite");
  }
  if (strategy == MatchStrategy::kExhaustive && costs.size() > kMaxExhaustiveK) {
    throw InvalidInput("exhaustive matching is limited to K <= 6");
  }
  const bool exhaustive =
      strategy == MatchStrategy::kExhaustive ||
      (strategy == MatchStrategy::kAuto && costs.size() <= kMaxExhaustiveK);
  if (exhaustive) return match_exhaustive(costs);
  return make_match(costs, solve_assignment_lexicographic(costs).row_to_col);
}

EmdMatch emd_loss(const PredictionSet& pred, const GtSet& gts,
                  const EmdConfig& cfg) {
  const GtSet padded = gts.entries.size() == cfg.k
                           ? gts
                           : pad_to_k(gts, cfg.k, cfg.overflow);
  return emd_match(pair_cost_matrix(pred, padded, cfg));
}

}  // namespace crowd
