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
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "crowd/emd.hpp"
#include "crowd/types.hpp"

namespace crowd {

struct ParseStats {
  std::size_t records = 0;
  // Detections that arrived without a proposal_id and were given a fresh one.
  std::size_t dets_missing_proposal_id = 0;
};

// One JSON object per line. Boxes may be given as "box_xyxy" or "box_xywh";
// CrowdHuman odgt lines ("ID", "gtboxes" with "fbox") are also accepted.
// Blank lines are skipped. Throws ParseError carrying the line number.
std::vector<SceneRecord> parse_scene_stream(std::istream& in,
                                            ParseStats* stats = nullptr);
std::vector<SceneRecord> parse_scene_file(const std::filesystem::path& path,
                                          ParseStats* stats = nullptr);

// Parses a single line; exposed for streaming consumers.
SceneRecord parse_scene_line(const std::string& line, std::size_t line_no,
                             ParseStats* stats = nullptr);

// Corner-form JSONL, LF endings, fields in the order id, width, height, gts,
// dets. Numbers use shortest round-trip formatting.
void write_scene_stream(std::span<const SceneRecord> records, std::ostream& out);
void write_scene_file(std::span<const SceneRecord> records,
                      const std::filesystem::path& path);

std::string scene_to_json_line(const SceneRecord& record);

// One proposal's K-slot prediction set, keyed to a scene record by image_id.
// Line format:
//   {"id": "<image id>", "proposal_id": <int>, "proposal": [x1,y1,x2,y2],
//    "slots": [{"scores": [p0, p1, ...], "delta": [dx,dy,dw,dh]}, ...]}
struct ProposalPrediction {
  std::string image_id;
  std::int64_t proposal_id = 0;
  PredictionSet prediction;
};

std::vector<ProposalPrediction> parse_prediction_stream(std::istream& in);
std::vector<ProposalPrediction> parse_prediction_file(
    const std::filesystem::path& path);
void write_prediction_stream(std::span<const ProposalPrediction> preds,
                             std::ostream& out);

}  // namespace crowd
