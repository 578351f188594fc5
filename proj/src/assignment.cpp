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

#include "crowd/assignment.hpp"

#include <algorithm>
#include <sstream>

#include "crowd/error.hpp"

namespace crowd {

std::size_t GtSet::real_count() const noexcept {
  return static_cast<std::size_t>(std::count_if(
      entries.begin(), entries.end(),
      [](const GtSetEntry& e) { return !e.dummy; }));
}

GtSet build_gt_set(const BBox& proposal, std::span<const GroundTruth> gts,
                   double theta) {
  if (!(theta > 0.0 && theta <= 1.0)) {
    throw InvalidInput("theta must lie in (0, 1]");
  }
  GtSet set;
  set.source_proposal = proposal;
  set.theta = theta;
  for (std::size_t j = 0; j < gts.size(); ++j) {
    if (gts[j].ignore) continue;
    const double overlap = iou(proposal, gts[j].box);
    if (overlap >= theta) {
      set.entries.push_back({gts[j], false, j, overlap});
    }
  }
  std::stable_sort(set.entries.begin(), set.entries.end(),
                   [](const GtSetEntry& a, const GtSetEntry& b) {
                     return a.overlap > b.overlap;
                   });
  return set;
}

GtSet pad_to_k(GtSet set, std::size_t k, OverflowPolicy policy) {
  if (k == 0) throw InvalidInput("k must be positive");
  if (set.entries.size() > k) {
    if (policy == OverflowPolicy::kError) {
      const std::size_t excess = set.entries.size() - k;
      std::ostringstream msg;
      msg << "ground-truth set holds " << set.entries.size()
          << " entries but only " << k << " slots are available (excess "
          << excess << ")";
      throw GtSetOverflow(excess, msg.str());
    }
    // Entries are already sorted by descending IoU.
    set.entries.resize(k);
    return set;
  }
  GtSetEntry dummy;
  dummy.dummy = true;
  dummy.gt.class_id = kBackgroundClass;
  dummy.gt.box = BBox{};
  while (set.entries.size() < k) set.entries.push_back(dummy);
  return set;
}

std::size_t max_gt_set_cardinality(std::span<const SceneRecord> scenes,
                                   double theta) {
  std::size_t best = 0;
  for (const SceneRecord& scene : scenes) {
    for (const GroundTruth& gt : scene.gts) {
      if (gt.ignore) continue;
      best = std::max(best, build_gt_set(gt.box, scene.gts, theta).size());
    }
  }
  return best;
}

}  // namespace crowd
