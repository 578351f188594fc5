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
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "crowd/metrics.hpp"
#include "crowd/suppression.hpp"
#include "crowd/types.hpp"

namespace crowd {

// Generator targets default to CrowdHuman instance density:
// 22.64 objects and 2.40 overlapping pairs per image.
struct SceneParams {
  double image_w = 1600.0;
  double image_h = 900.0;
  double n_objects_mean = 22.64;
  // Mean number of crowd clusters per image. Each pair contributes one
  // overlap (IoU > 0.5); a triple contributes three.
  double crowd_pairs_mean = 2.40;
  double pair_iou_lo = 0.55;
  double pair_iou_hi = 0.9;
  // Box height range in pixels; width = height * aspect.
  double box_scale_min = 40.0;
  double box_scale_max = 240.0;
  double aspect = 0.41;
  // Partner boxes are scaled by a factor drawn from [partner_scale_min, 1].
  double partner_scale_min = 0.85;
  // 2 = pairs, 3 = triples with every pairwise IoU > 0.5.
  int cluster_size = 2;
  int max_retries = 2000;
  std::uint64_t seed = 0;

  void validate() const;  // throws InvalidInput
};

// Throws PlacementError naming the failed constraint.
std::vector<GroundTruth> generate_scene(const SceneParams& params);

// Offset `partner` along (dir_x, dir_y) from `anchor`'s center so their IoU is
// `target_iou`. Returns the placed partner box. Exposed for testing.
BBox place_partner(const BBox& anchor, double partner_w, double partner_h,
                   double dir_x, double dir_y, double target_iou);

enum class SimMode { kSingle, kMip };

struct DetectorSimParams {
  SimMode mode = SimMode::kMip;
  // Slots per proposal in mip mode. Single mode always uses one slot.
  std::size_t k = 2;
  // Relative std of corner noise for proposals and for decoded boxes.
  double proposal_jitter = 0.05;
  std::size_t proposals_per_gt = 1;
  double base_score = 0.95;
  // score = base - penalty * (corner displacement L2 / box diagonal).
  double score_penalty = 2.0;
  double score_min = 0.05;
  double score_max = 0.99;
  // Single mode: proposals over a crowded set regress to its largest member.
  bool collapse_in_single_mode = true;
  double theta = 0.5;
  // Poisson mean of background false positives per image.
  double background_fp_mean = 0.0;
  // Chance that no proposal fires on an object at all. Gives the simulated
  // detector a recall ceiling below 1.
  double miss_prob = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ImageSize {
  double width = 0.0;
  double height = 0.0;
};

std::vector<Detection> simulate_detector(std::span<const GroundTruth> gts,
                                         const DetectorSimParams& params,
                                         ImageSize image = {});

// splitmix64-style derivation of a per-item seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

// n_images scenes from per-image seeds derived from params.seed.
std::vector<SceneRecord> generate_dataset(const SceneParams& params,
                                          std::size_t n_images,
                                          std::size_t jobs = 1);

struct StudyArm {
  std::string label;
  DetectorSimParams sim;
  SuppressionConfig suppression;
};

// Cross product of simulators and suppressors.
std::vector<StudyArm> cross_arms(std::span<const DetectorSimParams> sims,
                                 std::span<const SuppressionConfig> sups);

std::string arm_label(const DetectorSimParams& sim,
                      const SuppressionConfig& sup);

struct StudyRow {
  std::string label;
  SimMode mode = SimMode::kMip;
  std::size_t k = 1;
  SuppressionConfig suppression;
  EvalReport report;
};

// Generates n_images scenes under `seed`, runs every arm on the same scenes
// and evaluates each. Output is independent of `jobs`.
std::vector<StudyRow> run_study(const SceneParams& scene_params,
                                std::span<const StudyArm> arms,
                                const EvalConfig& eval_cfg,
                                std::size_t n_images, std::uint64_t seed,
                                std::size_t jobs = 1);

std::vector<StudyRow> run_study(const SceneParams& scene_params,
                                std::span<const DetectorSimParams> sims,
                                std::span<const SuppressionConfig> sups,
                                const EvalConfig& eval_cfg,
                                std::size_t n_images, std::uint64_t seed,
                                std::size_t jobs = 1);

// Knobs for the standard study layout.
struct StudyPlan {
  double proposal_jitter = 0.08;
  std::size_t proposals_per_gt = 4;
  double background_fp_mean = 1.0;
  double miss_prob = 0.02;
  double theta = 0.5;
  double iou_thresh = 0.5;
  std::size_t k = 2;
  // Extra single+nms rows at these thresholds.
  std::vector<double> nms_sweep;
  // Extra set-nms rows at these K values (K = 1 is the single baseline).
  std::vector<std::size_t> k_sweep;
};

// Baseline rows: single with nms / soft-linear / soft-gaussian, mip with nms
// and set-nms; followed by the requested sweeps.
std::vector<StudyArm> standard_study_arms(const StudyPlan& plan);

}  // namespace crowd
