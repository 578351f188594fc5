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

#include <cstdint>
#include <string>
#include <vector>

#include "crowd/geometry.hpp"

namespace crowd {

// Class id reserved for "no object"; real instances never carry it.
inline constexpr int kBackgroundClass = 0;

// Default foreground class (pedestrian datasets are single-class).
inline constexpr int kDefaultClass = 1;

struct GroundTruth {
  BBox box;
  int class_id = kDefaultClass;
  bool ignore = false;

  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

// A scored prediction. proposal_id identifies the proposal that emitted it;
// slot is its index inside that proposal's prediction set.
struct Detection {
  BBox box;
  double score = 0.0;
  int class_id = kDefaultClass;
  std::int64_t proposal_id = 0;
  int slot = 0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

// One image worth of annotations and (optionally) detections.
struct SceneRecord {
  std::string id;
  int width = 0;  // 0 = unknown
  int height = 0;
  std::vector<GroundTruth> gts;
  std::vector<Detection> dets;

  friend bool operator==(const SceneRecord&, const SceneRecord&) = default;
};

}  // namespace crowd
