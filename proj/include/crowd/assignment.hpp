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
#include <vector>

#include "crowd/geometry.hpp"
#include "crowd/types.hpp"

namespace crowd {

// Default IoU threshold for set membership, NMS and evaluation matching.
inline constexpr double kDefaultIouThreshold = 0.5;

struct GtSetEntry {
  GroundTruth gt;
  bool dummy = false;
  // Index into the ground-truth list the set was built from; unset for dummies.
  std::size_t source_index = 0;
  // IoU with the source proposal (0 for dummies).
  double overlap = 0.0;
};

// Ground truths correlated with one proposal, ordered by descending IoU.
struct GtSet {
  std::vector<GtSetEntry> entries;
  BBox source_proposal;
  double theta = kDefaultIouThreshold;

  std::size_t size() const noexcept { return entries.size(); }
  std::size_t real_count() const noexcept;
};

enum class OverflowPolicy {
  kError,          // throw GtSetOverflow
  kTruncateTopK,   // keep the k entries with the highest IoU
};

// All non-ignored ground truths with iou(proposal, gt) >= theta, ordered by
// descending IoU; equal IoUs keep input order. theta must lie in (0, 1].
GtSet build_gt_set(const BBox& proposal, std::span<const GroundTruth> gts,
                   double theta = kDefaultIouThreshold);

// Appends background dummies until the set holds exactly k entries.
GtSet pad_to_k(GtSet set, std::size_t k,
               OverflowPolicy policy = OverflowPolicy::kError);

// Largest |G(b)| over the dataset, using every non-ignored GT box as a proxy
// for the densest proposal around it.
std::size_t max_gt_set_cardinality(std::span<const SceneRecord> scenes,
                                   double theta = kDefaultIouThreshold);

}  // namespace crowd
