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
#include <limits>
#include <span>
#include <vector>

#include "crowd/types.hpp"

namespace crowd {

// GT pairs above this IoU mark both members as crowded.
inline constexpr double kCrowdIouThreshold = 0.5;

enum class ApInterpolation { kAllPoints, kElevenPoint };
enum class JiMatching { kMaximum, kGreedy };

struct EvalConfig {
  double iou_thresh = 0.5;
  double fppi_lo = 1e-2;
  double fppi_hi = 1e2;
  int fppi_points = 9;
  ApInterpolation ap_interpolation = ApInterpolation::kAllPoints;
  JiMatching ji_matching = JiMatching::kMaximum;

  void validate() const;  // throws InvalidInput
};

enum class MatchOutcome { kTruePositive, kFalsePositive, kIgnored };

struct GreedyMatch {
  std::vector<MatchOutcome> det_outcome;  // parallel to the detections
  std::vector<bool> gt_matched;           // parallel to the ground truths
  // Matched GT index per detection, or -1.
  std::vector<std::ptrdiff_t> det_to_gt;
};

// Detections must already be in descending-score order. Each takes the
// unmatched non-ignored same-class GT with the highest IoU >= iou_thresh.
// A detection left without one but overlapping an ignored GT is kIgnored.
GreedyMatch match_greedy(std::span<const Detection> dets,
                         std::span<const GroundTruth> gts, double iou_thresh);

// Global score sweep over all images. Throws UndefinedMetric without
// non-ignored ground truth.
double average_precision(std::span<const SceneRecord> scenes,
                         const EvalConfig& cfg = {});

// Log-average miss rate over cfg.fppi_points log-spaced FPPI references.
double mr2(std::span<const SceneRecord> scenes, const EvalConfig& cfg = {});

// Detections with score >= score_threshold versus non-ignored GTs. Both sets
// empty over the whole dataset counts as perfect agreement (1.0).
double jaccard_index(std::span<const SceneRecord> scenes, const EvalConfig& cfg,
                     double score_threshold);

struct BestJi {
  double ji = 0.0;
  // +infinity when the empty prediction set scores best.
  double threshold = std::numeric_limits<double>::infinity();
};

// Max JI over every distinct detection score plus the empty set; ties go to
// the highest threshold.
BestJi best_ji(std::span<const SceneRecord> scenes, const EvalConfig& cfg = {});

struct RecallCount {
  std::size_t matched = 0;
  std::size_t gt_count = 0;
  // matched / gt_count, 0 when there are no ground truths.
  double ratio() const noexcept {
    return gt_count == 0 ? 0.0
                         : static_cast<double>(matched) /
                               static_cast<double>(gt_count);
  }
};

struct RecallSplit {
  RecallCount total;
  RecallCount sparse;
  RecallCount crowd;
};

// Per-GT crowd flags: true iff another non-ignored GT of the image overlaps
// with IoU > kCrowdIouThreshold. Ignored GTs are never crowd.
std::vector<bool> crowd_flags(std::span<const GroundTruth> gts);

RecallSplit recall_split(std::span<const SceneRecord> scenes,
                         const EvalConfig& cfg, double score_threshold);

struct DensityStats {
  std::size_t images = 0;
  double objects_per_image = 0.0;
  // Unordered GT pairs with IoU > kCrowdIouThreshold.
  double overlaps_per_image = 0.0;
};

DensityStats density(std::span<const SceneRecord> scenes);

struct EvalReport {
  double ap = 0.0;
  double mr2 = 1.0;
  double ji = 0.0;
  double ji_best_threshold = std::numeric_limits<double>::infinity();
  // Recall measured at the best-JI threshold.
  RecallSplit recall;
  DensityStats density;
};

EvalReport evaluate(std::span<const SceneRecord> scenes,
                    const EvalConfig& cfg = {});

}  // namespace crowd
