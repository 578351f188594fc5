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
#include <string_view>
#include <vector>

#include "crowd/types.hpp"

namespace crowd {

enum class SuppressionMethod { kNms, kSoftLinear, kSoftGaussian, kSetNms };

// CLI spelling: "nms", "soft-linear", "soft-gaussian", "set-nms".
std::string_view to_string(SuppressionMethod method);
// Accepts the CLI spelling and underscore variants; throws InvalidInput.
SuppressionMethod parse_suppression_method(std::string_view name);

struct SuppressionConfig {
  SuppressionMethod method = SuppressionMethod::kNms;
  double iou_thresh = 0.5;
  double sigma = 0.5;          // gaussian decay width
  double score_floor = 0.001;  // soft modes drop detections below this
};

// All suppressors are class-aware, compare IoU > iou_thresh strictly, order
// equal scores by input position, and return detections in descending score.
std::vector<Detection> nms(std::span<const Detection> dets,
                           const SuppressionConfig& cfg = {});

// Never suppresses a pair that shares a proposal_id; otherwise identical to
// nms().
std::vector<Detection> set_nms(std::span<const Detection> dets,
                               const SuppressionConfig& cfg = {});

// Linear decay multiplies by (1 - IoU) when IoU > iou_thresh. Gaussian decay
// multiplies by exp(-IoU^2 / sigma) for every overlapping same-class box.
std::vector<Detection> soft_nms(std::span<const Detection> dets,
                                const SuppressionConfig& cfg = {});

// Dispatches on cfg.method.
std::vector<Detection> suppress(std::span<const Detection> dets,
                                const SuppressionConfig& cfg);

struct CloudParams {
  std::size_t n_boxes = 10000;
  // Number of jittered copies drawn around each distinct location.
  std::size_t duplication = 4;
  double image_w = 4000.0;
  double image_h = 4000.0;
  double jitter = 0.05;
  // When true every box gets its own proposal id; otherwise all copies of a
  // location share one proposal (each with its own slot).
  bool distinct_proposals = true;
  // Draw every box at the same location (exact duplicate cloud).
  bool identical = false;
  std::uint64_t seed = 0;
};

std::vector<Detection> make_box_cloud(const CloudParams& params);

struct BenchReport {
  SuppressionMethod method = SuppressionMethod::kNms;
  std::size_t n_boxes = 0;
  std::size_t kept = 0;
  double seconds = 0.0;  // best of the repeats
  double boxes_per_second = 0.0;
};

BenchReport bench_suppression(const CloudParams& cloud,
                              const SuppressionConfig& cfg,
                              std::size_t repeats = 3);

}  // namespace crowd
