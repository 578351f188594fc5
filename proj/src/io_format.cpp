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

#include "crowd/io_format.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_set>
#include <utility>

#include <json.hpp>

#include "crowd/error.hpp"

namespace crowd {
namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

[[noreturn]] void fail(std::size_t line_no, const std::string& id,
                       const std::string& what) {
  std::ostringstream msg;
  msg << "line " << line_no;
  if (!id.empty()) msg << " (record '" << id << "')";
  msg << ": " << what;
  throw ParseError(line_no, msg.str());
}

std::array<double, 4> read_quad(const json& value, std::size_t line_no,
                                const std::string& id, const char* key) {
  if (!value.is_array() || value.size() != 4) {
    fail(line_no, id, std::string(key) + " must be an array of 4 numbers");
  }
  std::array<double, 4> out{};
  for (std::size_t i = 0; i < 4; ++i) {
    if (!value[i].is_number()) {
      fail(line_no, id, std::string(key) + " must contain only numbers");
    }
    out[i] = value[i].get<double>();
  }
  return out;
}

BBox read_box(const json& obj, std::size_t line_no, const std::string& id,
              const char* xyxy_key, const char* xywh_key) {
  BBox box;
  if (obj.contains(xyxy_key)) {
    const auto q = read_quad(obj.at(xyxy_key), line_no, id, xyxy_key);
    box = {q[0], q[1], q[2], q[3]};
    if (!box.is_finite()) fail(line_no, id, "box coordinates must be finite");
    if (box.x2 < box.x1 || box.y2 < box.y1) {
      fail(line_no, id, "box_xyxy has x2 < x1 or y2 < y1");
    }
  } else if (obj.contains(xywh_key)) {
    const auto q = read_quad(obj.at(xywh_key), line_no, id, xywh_key);
    if (q[2] < 0.0 || q[3] < 0.0) {
      fail(line_no, id, "box_xywh has negative width or height");
    }
    box = BBox::from_xywh(q[0], q[1], q[2], q[3]);
    if (!box.is_finite()) fail(line_no, id, "box coordinates must be finite");
  } else {
    fail(line_no, id,
         std::string("box needs \"") + xyxy_key + "\" or \"" + xywh_key + "\"");
  }
  return box;
}

bool read_flag(const json& value) {
  if (value.is_boolean()) return value.get<bool>();
  if (value.is_number()) return value.get<double>() != 0.0;
  throw json::type_error::create(302, "ignore flag must be bool or number",
                                 nullptr);
}

// Detections without an explicit proposal_id each get a fresh id above every
// explicit one in the record.
void assign_missing_proposals(SceneRecord& rec,
                              const std::vector<bool>& has_id,
                              ParseStats* stats) {
  std::int64_t next = 0;
  for (std::size_t i = 0; i < rec.dets.size(); ++i) {
    if (has_id[i]) next = std::max(next, rec.dets[i].proposal_id + 1);
  }
  for (std::size_t i = 0; i < rec.dets.size(); ++i) {
    if (has_id[i]) continue;
    rec.dets[i].proposal_id = next++;
    if (stats) ++stats->dets_missing_proposal_id;
  }
}

SceneRecord parse_native(const json& obj, std::size_t line_no,
                         ParseStats* stats) {
  SceneRecord rec;
  if (!obj.contains("id") || !obj.at("id").is_string()) {
    fail(line_no, "", "record needs a string \"id\"");
  }
  rec.id = obj.at("id").get<std::string>();
  if (obj.contains("width")) rec.width = obj.at("width").get<int>();
  if (obj.contains("height")) rec.height = obj.at("height").get<int>();

  if (obj.contains("gts")) {
    const json& gts = obj.at("gts");
    if (!gts.is_array()) fail(line_no, rec.id, "\"gts\" must be an array");
    for (const json& g : gts) {
      if (!g.is_object()) fail(line_no, rec.id, "gt entries must be objects");
      GroundTruth gt;
      gt.box = read_box(g, line_no, rec.id, "box_xyxy", "box_xywh");
      if (g.contains("class")) gt.class_id = g.at("class").get<int>();
      if (g.contains("ignore")) gt.ignore = read_flag(g.at("ignore"));
      if (gt.class_id == kBackgroundClass || gt.class_id < 0) {
        fail(line_no, rec.id, "gt class must be a positive id (0 is background)");
      }
      rec.gts.push_back(gt);
    }
  }

  std::vector<bool> has_id;
  if (obj.contains("dets")) {
    const json& dets = obj.at("dets");
    if (!dets.is_array()) fail(line_no, rec.id, "\"dets\" must be an array");
    for (const json& d : dets) {
      if (!d.is_object()) fail(line_no, rec.id, "det entries must be objects");
      Detection det;
      det.box = read_box(d, line_no, rec.id, "box_xyxy", "box_xywh");
      if (!d.contains("score") || !d.at("score").is_number()) {
        fail(line_no, rec.id, "detection needs a numeric \"score\"");
      }
      det.score = d.at("score").get<double>();
      if (!std::isfinite(det.score)) {
        fail(line_no, rec.id, "detection score must be finite");
      }
      if (d.contains("class")) det.class_id = d.at("class").get<int>();
      const bool explicit_id = d.contains("proposal_id");
      if (explicit_id) {
        det.proposal_id = d.at("proposal_id").get<std::int64_t>();
        if (det.proposal_id < 0) {
          fail(line_no, rec.id, "proposal_id must be non-negative");
        }
      }
      if (d.contains("slot")) det.slot = d.at("slot").get<int>();
      if (det.slot < 0) fail(line_no, rec.id, "slot must be non-negative");
      rec.dets.push_back(det);
      has_id.push_back(explicit_id);
    }
  }
  assign_missing_proposals(rec, has_id, stats);

  std::set<std::pair<std::int64_t, int>> seen;
  for (const Detection& d : rec.dets) {
    if (!seen.emplace(d.proposal_id, d.slot).second) {
      fail(line_no, rec.id,
           "two detections share proposal_id " + std::to_string(d.proposal_id) +
               " and slot " + std::to_string(d.slot));
    }
  }
  return rec;
}

// CrowdHuman odgt: {"ID": ..., "gtboxes": [{"tag", "fbox": [x,y,w,h],
// "extra": {"ignore": 0|1}}], "dtboxes": [{"box": [x,y,w,h], "score"}]}.
// Only the full-body box is read; non-person tags become ignore regions.
SceneRecord parse_odgt(const json& obj, std::size_t line_no, ParseStats* stats) {
  SceneRecord rec;
  if (!obj.at("ID").is_string()) fail(line_no, "", "\"ID\" must be a string");
  rec.id = obj.at("ID").get<std::string>();
  if (obj.contains("width")) rec.width = obj.at("width").get<int>();
  if (obj.contains("height")) rec.height = obj.at("height").get<int>();
  for (const json& g : obj.at("gtboxes")) {
    GroundTruth gt;
    gt.box = read_box(g, line_no, rec.id, "box_xyxy", "fbox");
    const std::string tag = g.value("tag", std::string("person"));
    gt.ignore = tag != "person";
    if (g.contains("extra") && g.at("extra").contains("ignore")) {
      gt.ignore = gt.ignore || read_flag(g.at("extra").at("ignore"));
    }
    rec.gts.push_back(gt);
  }
  std::vector<bool> has_id;
  if (obj.contains("dtboxes")) {
    for (const json& d : obj.at("dtboxes")) {
      Detection det;
      det.box = read_box(d, line_no, rec.id, "box_xyxy", "box");
      det.score = d.at("score").get<double>();
      if (!std::isfinite(det.score)) {
        fail(line_no, rec.id, "detection score must be finite");
      }
      rec.dets.push_back(det);
      has_id.push_back(false);
    }
  }
  assign_missing_proposals(rec, has_id, stats);
  return rec;
}

void check_writable(const SceneRecord& rec) {
  auto bad = [&](const std::string& what) {
    throw InvalidInput("record '" + rec.id + "': " + what);
  };
  for (const GroundTruth& g : rec.gts) {
    if (!g.box.is_valid()) bad("ground-truth box is not a valid finite box");
  }
  for (const Detection& d : rec.dets) {
    if (!d.box.is_valid()) bad("detection box is not a valid finite box");
    if (!std::isfinite(d.score)) bad("detection score is not finite");
  }
}

ordered_json box_json(const BBox& b) {
  return ordered_json::array({b.x1, b.y1, b.x2, b.y2});
}

}  // namespace

SceneRecord parse_scene_line(const std::string& line, std::size_t line_no,
                             ParseStats* stats) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::parse_error& e) {
    fail(line_no, "", std::string("malformed JSON: ") + e.what());
  }
  if (!obj.is_object()) fail(line_no, "", "each line must be a JSON object");
  try {
    SceneRecord rec = (!obj.contains("id") && obj.contains("ID") &&
                       obj.contains("gtboxes"))
                          ? parse_odgt(obj, line_no, stats)
                          : parse_native(obj, line_no, stats);
    if (stats) ++stats->records;
    return rec;
  } catch (const json::exception& e) {
    std::string id;
    if (obj.contains("id") && obj.at("id").is_string()) {
      id = obj.at("id").get<std::string>();
    }
    fail(line_no, id, std::string("unexpected field type: ") + e.what());
  }
}

std::vector<SceneRecord> parse_scene_stream(std::istream& in,
                                            ParseStats* stats) {
  std::vector<SceneRecord> records;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (std::all_of(line.begin(), line.end(),
                    [](unsigned char c) { return std::isspace(c); })) {
      continue;
    }
    SceneRecord rec = parse_scene_line(line, line_no, stats);
    if (!ids.insert(rec.id).second) {
      fail(line_no, rec.id, "duplicate record id");
    }
    records.push_back(std::move(rec));
  }
  if (in.bad()) throw IoError("read failure while parsing scene stream");
  return records;
}

std::vector<SceneRecord> parse_scene_file(const std::filesystem::path& path,
                                          ParseStats* stats) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  try {
    return parse_scene_stream(in, stats);
  } catch (const ParseError& e) {
    throw ParseError(e.line(), path.string() + ": " + e.what());
  }
}

std::string scene_to_json_line(const SceneRecord& rec) {
  check_writable(rec);
  ordered_json obj;
  obj["id"] = rec.id;
  obj["width"] = rec.width;
  obj["height"] = rec.height;
  ordered_json gts = ordered_json::array();
  for (const GroundTruth& g : rec.gts) {
    ordered_json e;
    e["box_xyxy"] = box_json(g.box);
    e["class"] = g.class_id;
    e["ignore"] = g.ignore;
    gts.push_back(std::move(e));
  }
  obj["gts"] = std::move(gts);
  ordered_json dets = ordered_json::array();
  for (const Detection& d : rec.dets) {
    ordered_json e;
    e["box_xyxy"] = box_json(d.box);
    e["score"] = d.score;
    e["class"] = d.class_id;
    e["proposal_id"] = d.proposal_id;
    e["slot"] = d.slot;
    dets.push_back(std::move(e));
  }
  obj["dets"] = std::move(dets);
  return obj.dump();
}

std::vector<ProposalPrediction> parse_prediction_stream(std::istream& in) {
  std::vector<ProposalPrediction> preds;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (std::all_of(line.begin(), line.end(),
                    [](unsigned char c) { return std::isspace(c); })) {
      continue;
    }
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      fail(line_no, "", std::string("malformed JSON: ") + e.what());
    }
    if (!obj.is_object()) fail(line_no, "", "each line must be a JSON object");
    ProposalPrediction pred;
    try {
      if (!obj.contains("id") || !obj.at("id").is_string()) {
        fail(line_no, "", "prediction needs a string \"id\"");
      }
      pred.image_id = obj.at("id").get<std::string>();
      pred.proposal_id = obj.value("proposal_id", std::int64_t{0});
      if (!obj.contains("proposal")) {
        fail(line_no, pred.image_id, "prediction needs a \"proposal\" box");
      }
      const auto q = read_quad(obj.at("proposal"), line_no, pred.image_id,
                               "proposal");
      pred.prediction.proposal = {q[0], q[1], q[2], q[3]};
      if (!obj.contains("slots") || !obj.at("slots").is_array()) {
        fail(line_no, pred.image_id, "prediction needs a \"slots\" array");
      }
      for (const json& s : obj.at("slots")) {
        SlotPrediction slot;
        slot.class_scores = s.at("scores").get<std::vector<double>>();
        const auto d = read_quad(s.at("delta"), line_no, pred.image_id, "delta");
        slot.delta = {d[0], d[1], d[2], d[3]};
        pred.prediction.slots.push_back(std::move(slot));
      }
    } catch (const json::exception& e) {
      fail(line_no, pred.image_id,
           std::string("unexpected field type: ") + e.what());
    }
    preds.push_back(std::move(pred));
  }
  if (in.bad()) throw IoError("read failure while parsing predictions");
  return preds;
}

std::vector<ProposalPrediction> parse_prediction_file(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  try {
    return parse_prediction_stream(in);
  } catch (const ParseError& e) {
    throw ParseError(e.line(), path.string() + ": " + e.what());
  }
}

void write_prediction_stream(std::span<const ProposalPrediction> preds,
                             std::ostream& out) {
  for (const ProposalPrediction& p : preds) {
    ordered_json obj;
    obj["id"] = p.image_id;
    obj["proposal_id"] = p.proposal_id;
    obj["proposal"] = box_json(p.prediction.proposal);
    ordered_json slots = ordered_json::array();
    for (const SlotPrediction& s : p.prediction.slots) {
      ordered_json e;
      e["scores"] = s.class_scores;
      e["delta"] = ordered_json::array({s.delta.dx, s.delta.dy, s.delta.dw,
                                        s.delta.dh});
      slots.push_back(std::move(e));
    }
    obj["slots"] = std::move(slots);
    out << obj.dump() << '\n';
  }
}

void write_scene_stream(std::span<const SceneRecord> records,
                        std::ostream& out) {
  for (const SceneRecord& rec : records) out << scene_to_json_line(rec) << '\n';
}

void write_scene_file(std::span<const SceneRecord> records,
                      const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  write_scene_stream(records, out);
  out.flush();
  if (!out) throw IoError("write failure on '" + path.string() + "'");
}

}  // namespace crowd
