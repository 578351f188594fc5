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

#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "crowd/assignment.hpp"
#include "crowd/emd.hpp"
#include "crowd/error.hpp"
#include "crowd/io_format.hpp"
#include "crowd/metrics.hpp"
#include "crowd/parallel.hpp"
#include "crowd/suppression.hpp"
#include "crowd/synth.hpp"
#include "crowd/version.hpp"

namespace crowd::cli {
namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

// Bad flag values found after CLI11 has parsed.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::size_t default_jobs() {
  const char* env = std::getenv("CROWD_SUPPRESS_JOBS");
  if (env == nullptr || *env == '\0') return 1;
  std::size_t v = 0;
  const char* end = env + std::char_traits<char>::length(env);
  auto [ptr, ec] = std::from_chars(env, end, v);
  if (ec != std::errc() || ptr != end || v == 0) {
    throw UsageError(std::string("CROWD_SUPPRESS_JOBS must be a positive "
                                 "integer, got '") + env + "'");
  }
  return v;
}

std::string num(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

ordered_json finite_or_null(double v) {
  return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr);
}

struct Common {
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  double iou = 0.5;
  std::string format = "json";
  std::string out;
  std::string manifest;
};

void add_seed(CLI::App* app, Common& c) {
  app->add_option("--seed", c.seed, "Master seed")->capture_default_str();
}
void add_jobs(CLI::App* app, Common& c) {
  app->add_option("--jobs,-j", c.jobs,
                  "Worker threads (default: $CROWD_SUPPRESS_JOBS or 1)")
      ->check(CLI::PositiveNumber);
}
void add_iou(CLI::App* app, Common& c, const char* help) {
  app->add_option("--iou", c.iou, help)
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
}
void add_format(CLI::App* app, Common& c) {
  app->add_option("--format", c.format, "Report format")
      ->check(CLI::IsMember({"json", "tsv"}))
      ->capture_default_str();
}
void add_manifest(CLI::App* app, Common& c) {
  app->add_option("--manifest", c.manifest,
                  "Manifest path (default: <out>.manifest.json, or stderr)");
}

void add_scene_options(CLI::App* app, SceneParams& p) {
  app->add_option("--width", p.image_w, "Image width")->capture_default_str();
  app->add_option("--height", p.image_h, "Image height")->capture_default_str();
  app->add_option("--objects-mean", p.n_objects_mean,
                  "Mean objects per image")->capture_default_str();
  app->add_option("--pairs-mean", p.crowd_pairs_mean,
                  "Mean crowd clusters per image")->capture_default_str();
  app->add_option("--pair-iou-lo", p.pair_iou_lo,
                  "Lower bound of in-cluster IoU")->capture_default_str();
  app->add_option("--pair-iou-hi", p.pair_iou_hi,
                  "Upper bound of in-cluster IoU")->capture_default_str();
  app->add_option("--min-scale", p.box_scale_min,
                  "Smallest box height")->capture_default_str();
  app->add_option("--max-scale", p.box_scale_max,
                  "Largest box height")->capture_default_str();
  app->add_option("--aspect", p.aspect, "Box width / height")
      ->capture_default_str();
  app->add_option("--cluster-size", p.cluster_size,
                  "Objects per crowd cluster (2 = pairs)")->capture_default_str();
}

ordered_json scene_params_json(const SceneParams& p) {
  ordered_json j;
  j["width"] = p.image_w;
  j["height"] = p.image_h;
  j["objects_mean"] = p.n_objects_mean;
  j["pairs_mean"] = p.crowd_pairs_mean;
  j["pair_iou_lo"] = p.pair_iou_lo;
  j["pair_iou_hi"] = p.pair_iou_hi;
  j["min_scale"] = p.box_scale_min;
  j["max_scale"] = p.box_scale_max;
  j["aspect"] = p.aspect;
  j["partner_scale_min"] = p.partner_scale_min;
  j["cluster_size"] = p.cluster_size;
  j["max_retries"] = p.max_retries;
  return j;
}

std::string_view mode_name(SimMode m) {
  return m == SimMode::kSingle ? "single" : "mip";
}

ordered_json sim_params_json(const DetectorSimParams& p) {
  ordered_json j;
  j["mode"] = mode_name(p.mode);
  j["k"] = p.k;
  j["jitter"] = p.proposal_jitter;
  j["proposals_per_gt"] = p.proposals_per_gt;
  j["base_score"] = p.base_score;
  j["score_penalty"] = p.score_penalty;
  j["score_min"] = p.score_min;
  j["score_max"] = p.score_max;
  j["theta"] = p.theta;
  j["background_fp_mean"] = p.background_fp_mean;
  j["miss_prob"] = p.miss_prob;
  return j;
}

ordered_json suppression_json(const SuppressionConfig& c) {
  ordered_json j;
  j["method"] = to_string(c.method);
  j["iou"] = c.iou_thresh;
  j["sigma"] = c.sigma;
  j["score_floor"] = c.score_floor;
  return j;
}

ordered_json eval_config_json(const EvalConfig& c) {
  ordered_json j;
  j["iou"] = c.iou_thresh;
  j["fppi_lo"] = c.fppi_lo;
  j["fppi_hi"] = c.fppi_hi;
  j["fppi_points"] = c.fppi_points;
  j["ap_interpolation"] =
      c.ap_interpolation == ApInterpolation::kAllPoints ? "all-points"
                                                        : "eleven-point";
  j["ji_matching"] = c.ji_matching == JiMatching::kMaximum ? "maximum" : "greedy";
  return j;
}

ordered_json recall_json(const RecallCount& r) {
  ordered_json j;
  j["matched"] = r.matched;
  j["gt"] = r.gt_count;
  j["ratio"] = r.ratio();
  return j;
}

ordered_json report_json(const EvalReport& r) {
  ordered_json j;
  j["ap"] = r.ap;
  j["mr2"] = r.mr2;
  j["ji"] = r.ji;
  j["ji_threshold"] = finite_or_null(r.ji_best_threshold);
  ordered_json rec;
  rec["total"] = recall_json(r.recall.total);
  rec["sparse"] = recall_json(r.recall.sparse);
  rec["crowd"] = recall_json(r.recall.crowd);
  j["recall"] = std::move(rec);
  ordered_json dens;
  dens["images"] = r.density.images;
  dens["objects_per_image"] = r.density.objects_per_image;
  dens["overlaps_per_image"] = r.density.overlaps_per_image;
  j["density"] = std::move(dens);
  return j;
}

// Collects what a run needs to be reproduced and writes it when done.
class Manifest {
 public:
  explicit Manifest(std::string subcommand)
      : start_(Clock::now()) {
    doc_["schema_version"] = kReportSchemaVersion;
    doc_["tool"] = "crowd-suppress";
    doc_["version"] = kVersion;
    doc_["subcommand"] = std::move(subcommand);
    doc_["config"] = ordered_json::object();
    doc_["seeds"] = ordered_json::object();
    doc_["inputs"] = ordered_json::array();
    doc_["outputs"] = ordered_json::array();
  }

  ordered_json& config() { return doc_["config"]; }
  void seed(const std::string& key, std::uint64_t v) { doc_["seeds"][key] = v; }
  void input(const std::string& p) { doc_["inputs"].push_back(p); }
  void output(const std::string& p) { doc_["outputs"].push_back(p); }
  void mark(const std::string& phase) {
    const auto now = Clock::now();
    timings_[phase] = std::chrono::duration<double>(now - last_).count();
    last_ = now;
  }

  void write(const std::string& path, std::ostream& err) {
    ordered_json t = ordered_json::object();
    for (const auto& [k, v] : timings_) t[k] = v;
    t["wall_seconds"] =
        std::chrono::duration<double>(Clock::now() - start_).count();
    doc_["timings"] = std::move(t);
    if (path.empty()) {
      err << "manifest: " << doc_.dump() << '\n';
      return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    f << doc_.dump(2) << '\n';
    if (!f) throw IoError("write failure on '" + path + "'");
  }

 private:
  ordered_json doc_;
  Clock::time_point start_;
  Clock::time_point last_ = Clock::now();
  std::map<std::string, double> timings_;
};

std::string manifest_path(const Common& c) {
  if (!c.manifest.empty()) return c.manifest;
  if (!c.out.empty() && c.out != "-") return c.out + ".manifest.json";
  return {};
}

// Writes `text` to the --out path, or to stdout when none is given.
void emit(const Common& c, const std::string& text, std::ostream& out) {
  if (c.out.empty() || c.out == "-") {
    out << text;
    return;
  }
  std::ofstream f(c.out, std::ios::binary);
  if (!f) throw IoError("cannot open '" + c.out + "' for writing");
  f << text;
  if (!f) throw IoError("write failure on '" + c.out + "'");
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) parts.push_back(item);
  }
  return parts;
}

template <typename T>
T parse_number(const std::string& s, const char* what) {
  T v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw UsageError(std::string("bad ") + what + " value '" + s + "'");
  }
  return v;
}

// Library validators throw InvalidInput; at this layer that is a flag error.
template <typename Fn>
void check_flags(Fn&& fn) {
  try {
    fn();
  } catch (const InvalidInput& e) {
    throw UsageError(e.what());
  }
}

SuppressionMethod method_flag(const std::string& s) {
  try {
    return parse_suppression_method(s);
  } catch (const InvalidInput& e) {
    throw UsageError(e.what());
  }
}

// ---------------------------------------------------------------- synth

struct SynthOpts {
  Common c;
  SceneParams scene;
  std::size_t n_images = 100;
  std::string detector = "none";
  DetectorSimParams sim;
};

void run_synth(SynthOpts& o, std::ostream& out, std::ostream& err) {
  o.scene.seed = o.c.seed;
  o.sim.mode = o.detector == "single" ? SimMode::kSingle : SimMode::kMip;
  check_flags([&] {
    o.scene.validate();
    if (o.detector != "none") o.sim.validate();
  });
  Manifest m("synth");
  m.config()["n_images"] = o.n_images;
  m.config()["jobs"] = o.c.jobs;
  m.config()["scene"] = scene_params_json(o.scene);
  m.config()["detector"] = o.detector;
  if (o.detector != "none") m.config()["sim"] = sim_params_json(o.sim);
  m.seed("master", o.c.seed);

  std::vector<SceneRecord> scenes =
      generate_dataset(o.scene, o.n_images, o.c.jobs);
  m.mark("generate_seconds");
  if (o.detector != "none") {
    parallel_for(scenes.size(), o.c.jobs, [&](std::size_t i) {
      DetectorSimParams sim = o.sim;
      sim.seed = derive_seed(derive_seed(o.c.seed, i), 1);
      scenes[i].dets = simulate_detector(
          scenes[i].gts, sim,
          {static_cast<double>(scenes[i].width),
           static_cast<double>(scenes[i].height)});
    });
    m.mark("simulate_seconds");
  }
  std::ostringstream buf;
  write_scene_stream(scenes, buf);
  emit(o.c, buf.str(), out);
  m.output(o.c.out.empty() ? "-" : o.c.out);
  m.write(manifest_path(o.c), err);
}

// ------------------------------------------------------------- suppress

struct SuppressOpts {
  Common c;
  std::string in;
  std::string method = "nms";
  SuppressionConfig cfg;
};

void run_suppress(SuppressOpts& o, std::ostream& out, std::ostream& err) {
  o.cfg.method = method_flag(o.method);
  o.cfg.iou_thresh = o.c.iou;
  if (!(o.cfg.sigma > 0.0)) throw UsageError("--sigma must be positive");
  Manifest m("suppress");
  m.config()["suppression"] = suppression_json(o.cfg);
  m.config()["jobs"] = o.c.jobs;
  m.input(o.in);

  ParseStats stats;
  std::vector<SceneRecord> scenes = parse_scene_file(o.in, &stats);
  m.mark("parse_seconds");
  if (o.cfg.method == SuppressionMethod::kSetNms &&
      stats.dets_missing_proposal_id > 0) {
    err << "warning: " << stats.dets_missing_proposal_id
        << " detection(s) have no proposal_id; set-nms treats each as its "
           "own proposal, same as nms\n";
  }
  parallel_for(scenes.size(), o.c.jobs, [&](std::size_t i) {
    scenes[i].dets = suppress(scenes[i].dets, o.cfg);
  });
  m.mark("suppress_seconds");
  std::ostringstream buf;
  write_scene_stream(scenes, buf);
  emit(o.c, buf.str(), out);
  m.output(o.c.out.empty() ? "-" : o.c.out);
  m.write(manifest_path(o.c), err);
}

// ----------------------------------------------------------------- eval

struct EvalOpts {
  Common c;
  std::string gt;
  std::string det;
  EvalConfig cfg;
  std::string ap_mode = "all-points";
  std::string ji_mode = "maximum";
};

// Pairs detection records with ground-truth records by id.
std::vector<SceneRecord> merge_by_id(std::vector<SceneRecord> gts,
                                     const std::vector<SceneRecord>& dets) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < gts.size(); ++i) {
    index.emplace(gts[i].id, i);
    gts[i].dets.clear();
  }
  std::vector<std::string> missing;
  for (const SceneRecord& d : dets) {
    auto it = index.find(d.id);
    if (it == index.end()) {
      missing.push_back(d.id);
      continue;
    }
    gts[it->second].dets = d.dets;
  }
  if (!missing.empty()) {
    std::string msg = "detection file has ids missing from the ground truth:";
    const std::size_t shown = std::min<std::size_t>(missing.size(), 20);
    for (std::size_t i = 0; i < shown; ++i) msg += " " + missing[i];
    if (missing.size() > shown) {
      msg += " (and " + std::to_string(missing.size() - shown) + " more)";
    }
    throw InvalidInput(msg);
  }
  return gts;
}

void run_eval(EvalOpts& o, std::ostream& out, std::ostream& err) {
  o.cfg.iou_thresh = o.c.iou;
  o.cfg.ap_interpolation = o.ap_mode == "all-points"
                               ? ApInterpolation::kAllPoints
                               : ApInterpolation::kElevenPoint;
  o.cfg.ji_matching =
      o.ji_mode == "maximum" ? JiMatching::kMaximum : JiMatching::kGreedy;
  check_flags([&] { o.cfg.validate(); });
  Manifest m("eval");
  m.config()["eval"] = eval_config_json(o.cfg);
  m.input(o.gt);
  m.input(o.det);

  std::vector<SceneRecord> scenes =
      merge_by_id(parse_scene_file(o.gt), parse_scene_file(o.det));
  m.mark("parse_seconds");
  const EvalReport r = evaluate(scenes, o.cfg);
  m.mark("evaluate_seconds");

  std::string text;
  if (o.c.format == "json") {
    ordered_json j;
    j["schema_version"] = kReportSchemaVersion;
    j["config"] = eval_config_json(o.cfg);
    const ordered_json metrics = report_json(r);
    for (auto& [k, v] : metrics.items()) j[k] = v;
    text = j.dump(2) + "\n";
  } else {
    std::ostringstream t;
    t << "ap\tmr2\tji\tji_threshold\trecall\trecall_sparse\trecall_crowd\t"
         "gt\tgt_sparse\tgt_crowd\timages\tobjects_per_image\t"
         "overlaps_per_image\n";
    t << num(r.ap) << '\t' << num(r.mr2) << '\t' << num(r.ji) << '\t'
      << num(r.ji_best_threshold) << '\t' << num(r.recall.total.ratio())
      << '\t' << num(r.recall.sparse.ratio()) << '\t'
      << num(r.recall.crowd.ratio()) << '\t' << r.recall.total.gt_count << '\t'
      << r.recall.sparse.gt_count << '\t' << r.recall.crowd.gt_count << '\t'
      << r.density.images << '\t' << num(r.density.objects_per_image) << '\t'
      << num(r.density.overlaps_per_image) << '\n';
    text = t.str();
  }
  emit(o.c, text, out);
  if (!o.c.out.empty()) m.output(o.c.out);
  m.write(manifest_path(o.c), err);
}

// ------------------------------------------------------------------ emd

struct EmdOpts {
  Common c;
  std::string predictions;
  std::string gt;
  std::size_t k = 2;
  std::string cls_mode = "ce";
  FocalLoss focal;
  double beta = 1.0;
  double theta = 0.5;
  bool truncate = false;
  double cls_weight = 1.0;
  double reg_weight = 1.0;
};

void run_emd(EmdOpts& o, std::ostream& out, std::ostream& err) {
  EmdConfig cfg;
  cfg.k = o.k;
  if (o.cls_mode == "focal") {
    cfg.cls_mode = o.focal;
  } else {
    cfg.cls_mode = CrossEntropy{};
  }
  cfg.reg_mode.beta = o.beta;
  cfg.cls_weight = o.cls_weight;
  cfg.reg_weight = o.reg_weight;
  cfg.overflow =
      o.truncate ? OverflowPolicy::kTruncateTopK : OverflowPolicy::kError;
  if (o.k == 0) throw UsageError("--k must be at least 1");
  if (!(o.theta > 0.0 && o.theta <= 1.0)) {
    throw UsageError("--theta must lie in (0, 1]");
  }
  if (!(o.beta > 0.0)) throw UsageError("--beta must be positive");

  Manifest m("emd");
  ordered_json& mc = m.config();
  mc["k"] = o.k;
  mc["cls_mode"] = o.cls_mode;
  if (o.cls_mode == "focal") {
    mc["gamma"] = o.focal.gamma;
    mc["alpha"] = o.focal.alpha;
  }
  mc["beta"] = o.beta;
  mc["theta"] = o.theta;
  mc["truncate_topk"] = o.truncate;
  mc["cls_weight"] = o.cls_weight;
  mc["reg_weight"] = o.reg_weight;
  m.input(o.predictions);
  m.input(o.gt);

  const std::vector<SceneRecord> scenes = parse_scene_file(o.gt);
  const std::vector<ProposalPrediction> preds =
      parse_prediction_file(o.predictions);
  m.mark("parse_seconds");
  std::map<std::string, const SceneRecord*> by_id;
  for (const SceneRecord& s : scenes) by_id.emplace(s.id, &s);
  std::set<std::string> missing;
  for (const ProposalPrediction& p : preds) {
    if (!by_id.count(p.image_id)) missing.insert(p.image_id);
  }
  if (!missing.empty()) {
    std::string msg = "prediction file has ids missing from the ground truth:";
    for (const std::string& id : missing) msg += " " + id;
    throw InvalidInput(msg);
  }

  struct Row {
    GtSet set;
    EmdMatch match;
  };
  std::vector<Row> rows(preds.size());
  parallel_for(preds.size(), o.c.jobs, [&](std::size_t i) {
    const ProposalPrediction& p = preds[i];
    GtSet g = build_gt_set(p.prediction.proposal, by_id.at(p.image_id)->gts,
                           o.theta);
    try {
      g = pad_to_k(std::move(g), cfg.k, cfg.overflow);
    } catch (const GtSetOverflow& e) {
      throw GtSetOverflow(
          e.excess(), "proposal " + std::to_string(p.proposal_id) +
                          " in image '" + p.image_id + "' matches " +
                          std::to_string(cfg.k + e.excess()) +
                          " ground truths, " + std::to_string(e.excess()) +
                          " more than k=" + std::to_string(cfg.k) +
                          " (use --truncate-topk to keep the best k)");
    }
    rows[i].match = emd_loss(p.prediction, g, cfg);
    rows[i].set = std::move(g);
  });
  m.mark("match_seconds");

  double sum = 0.0;
  for (const Row& r : rows) sum += r.match.total;
  const double mean = rows.empty() ? 0.0 : sum / static_cast<double>(rows.size());

  std::string text;
  if (o.c.format == "json") {
    ordered_json j;
    j["schema_version"] = kReportSchemaVersion;
    ordered_json arr = ordered_json::array();
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const Row& r = rows[i];
      ordered_json e;
      e["id"] = preds[i].image_id;
      e["proposal_id"] = preds[i].proposal_id;
      e["gt_set_size"] = r.set.real_count();
      e["permutation"] = r.match.permutation;
      ordered_json matched = ordered_json::array();
      for (std::size_t col : r.match.permutation) {
        const GtSetEntry& entry = r.set.entries[col];
        matched.push_back(entry.dummy ? ordered_json(nullptr)
                                      : ordered_json(entry.source_index));
      }
      e["matched_gt"] = std::move(matched);
      e["per_slot_cost"] = r.match.per_slot_cost;
      e["total"] = r.match.total;
      arr.push_back(std::move(e));
    }
    j["proposals"] = std::move(arr);
    ordered_json agg;
    agg["proposals"] = rows.size();
    agg["mean_loss"] = mean;
    j["aggregate"] = std::move(agg);
    text = j.dump(2) + "\n";
  } else {
    std::ostringstream t;
    t << "id\tproposal_id\tgt_set_size\tpermutation\ttotal\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
      t << preds[i].image_id << '\t' << preds[i].proposal_id << '\t'
        << rows[i].set.real_count() << '\t';
      for (std::size_t s = 0; s < rows[i].match.permutation.size(); ++s) {
        t << (s ? "," : "") << rows[i].match.permutation[s];
      }
      t << '\t' << num(rows[i].match.total) << '\n';
    }
    t << "mean\t\t\t\t" << num(mean) << '\n';
    text = t.str();
  }
  emit(o.c, text, out);
  if (!o.c.out.empty()) m.output(o.c.out);
  m.write(manifest_path(o.c), err);
}

// ---------------------------------------------------------------- study

struct StudyOpts {
  Common c;
  std::string out_dir;
  SceneParams scene;
  std::size_t n_images = 1000;
  StudyPlan plan;
  std::string nms_sweep = "0.3,0.4,0.5,0.6,0.7,0.8";
  std::string k_sweep = "1,2,3";
};

ordered_json study_row_json(const StudyRow& r) {
  ordered_json j;
  j["label"] = r.label;
  j["mode"] = mode_name(r.mode);
  j["k"] = r.k;
  j["method"] = to_string(r.suppression.method);
  j["iou"] = r.suppression.iou_thresh;
  if (r.suppression.method == SuppressionMethod::kSoftGaussian) {
    j["sigma"] = r.suppression.sigma;
  }
  const ordered_json metrics = report_json(r.report);
  for (auto& [k, v] : metrics.items()) {
    if (k != "density") j[k] = v;
  }
  return j;
}

std::string study_csv(const std::vector<StudyRow>& rows) {
  std::ostringstream t;
  t << "label,mode,k,method,iou,sigma,ap,mr2,ji,ji_threshold,recall,"
       "recall_sparse,recall_crowd,matched,matched_sparse,matched_crowd,gt,"
       "gt_sparse,gt_crowd\n";
  for (const StudyRow& r : rows) {
    const RecallSplit& rs = r.report.recall;
    t << '"' << r.label << '"' << ',' << mode_name(r.mode) << ',' << r.k << ','
      << to_string(r.suppression.method) << ',' << num(r.suppression.iou_thresh)
      << ','
      << (r.suppression.method == SuppressionMethod::kSoftGaussian
              ? num(r.suppression.sigma)
              : "")
      << ',' << num(r.report.ap) << ',' << num(r.report.mr2) << ','
      << num(r.report.ji) << ','
      << (std::isfinite(r.report.ji_best_threshold)
              ? num(r.report.ji_best_threshold)
              : "")
      << ',' << num(rs.total.ratio()) << ',' << num(rs.sparse.ratio()) << ','
      << num(rs.crowd.ratio()) << ',' << rs.total.matched << ','
      << rs.sparse.matched << ',' << rs.crowd.matched << ','
      << rs.total.gt_count << ',' << rs.sparse.gt_count << ','
      << rs.crowd.gt_count << '\n';
  }
  return t.str();
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw IoError("cannot open '" + p.string() + "' for writing");
  f << text;
  if (!f) throw IoError("write failure on '" + p.string() + "'");
}

void run_study_cmd(StudyOpts& o, std::ostream& out, std::ostream& err) {
  o.scene.seed = o.c.seed;
  o.plan.iou_thresh = o.c.iou;
  o.plan.nms_sweep.clear();
  o.plan.k_sweep.clear();
  if (o.nms_sweep != "none") {
    for (const std::string& s : split_list(o.nms_sweep)) {
      const double t = parse_number<double>(s, "--nms-sweep");
      if (!(t > 0.0 && t <= 1.0)) {
        throw UsageError("--nms-sweep thresholds must lie in (0, 1]");
      }
      o.plan.nms_sweep.push_back(t);
    }
  }
  if (o.k_sweep != "none") {
    for (const std::string& s : split_list(o.k_sweep)) {
      const auto k = parse_number<std::size_t>(s, "--k-sweep");
      if (k == 0) throw UsageError("--k-sweep values must be at least 1");
      o.plan.k_sweep.push_back(k);
    }
  }
  std::vector<StudyArm> arms;
  check_flags([&] {
    o.scene.validate();
    arms = standard_study_arms(o.plan);
    for (const StudyArm& a : arms) a.sim.validate();
  });
  EvalConfig eval_cfg;
  eval_cfg.iou_thresh = o.c.iou;

  Manifest m("study");
  ordered_json& mc = m.config();
  mc["n_images"] = o.n_images;
  mc["jobs"] = o.c.jobs;
  mc["scene"] = scene_params_json(o.scene);
  mc["jitter"] = o.plan.proposal_jitter;
  mc["proposals_per_gt"] = o.plan.proposals_per_gt;
  mc["background_fp_mean"] = o.plan.background_fp_mean;
  mc["miss_prob"] = o.plan.miss_prob;
  mc["theta"] = o.plan.theta;
  mc["k"] = o.plan.k;
  mc["nms_sweep"] = o.plan.nms_sweep;
  mc["k_sweep"] = o.plan.k_sweep;
  mc["eval"] = eval_config_json(eval_cfg);
  m.seed("master", o.c.seed);
  ordered_json arm_list = ordered_json::array();
  for (const StudyArm& a : arms) {
    ordered_json e;
    e["label"] = a.label;
    e["sim"] = sim_params_json(a.sim);
    e["sim_seed"] = a.sim.seed;
    e["suppression"] = suppression_json(a.suppression);
    arm_list.push_back(std::move(e));
  }
  mc["arms"] = std::move(arm_list);

  const std::vector<StudyRow> rows =
      run_study(o.scene, arms, eval_cfg, o.n_images, o.c.seed, o.c.jobs);
  m.mark("study_seconds");

  ordered_json report;
  report["schema_version"] = kReportSchemaVersion;
  report["n_images"] = o.n_images;
  report["seed"] = o.c.seed;
  ordered_json jr = ordered_json::array();
  for (const StudyRow& r : rows) jr.push_back(study_row_json(r));
  report["rows"] = std::move(jr);
  if (!rows.empty()) {
    ordered_json d;
    d["images"] = rows.front().report.density.images;
    d["objects_per_image"] = rows.front().report.density.objects_per_image;
    d["overlaps_per_image"] = rows.front().report.density.overlaps_per_image;
    report["density"] = std::move(d);
  }

  const fs::path dir(o.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw IoError("cannot create '" + dir.string() + "': " + ec.message());
  }
  write_text(dir / "report.json", report.dump(2) + "\n");
  write_text(dir / "study.csv", study_csv(rows));
  m.output((dir / "report.json").string());
  m.output((dir / "study.csv").string());

  if (o.c.format == "json") {
    out << report.dump(2) << '\n';
  } else {
    out << "label\tap\tmr2\tji\trecall\trecall_sparse\trecall_crowd\n";
    for (const StudyRow& r : rows) {
      out << r.label << '\t' << num(r.report.ap) << '\t' << num(r.report.mr2)
          << '\t' << num(r.report.ji) << '\t'
          << num(r.report.recall.total.ratio()) << '\t'
          << num(r.report.recall.sparse.ratio()) << '\t'
          << num(r.report.recall.crowd.ratio()) << '\n';
    }
  }
  m.write((dir / "manifest.json").string(), err);
}

// ---------------------------------------------------------------- bench

struct BenchOpts {
  Common c;
  CloudParams cloud;
  std::string methods = "nms,set-nms,soft-linear,soft-gaussian";
  std::size_t repeats = 3;
  double sigma = 0.5;
};

void run_bench(BenchOpts& o, std::ostream& out, std::ostream& err) {
  if (o.cloud.n_boxes == 0) throw UsageError("--n-boxes must be at least 1");
  if (o.cloud.duplication == 0) {
    throw UsageError("--duplication must be at least 1");
  }
  if (o.repeats == 0) throw UsageError("--repeats must be at least 1");
  o.cloud.seed = o.c.seed;
  std::vector<SuppressionMethod> methods;
  for (const std::string& s : split_list(o.methods)) {
    methods.push_back(method_flag(s));
  }
  if (methods.empty()) throw UsageError("--methods is empty");

  Manifest m("bench");
  ordered_json& mc = m.config();
  mc["n_boxes"] = o.cloud.n_boxes;
  mc["duplication"] = o.cloud.duplication;
  mc["jitter"] = o.cloud.jitter;
  mc["distinct_proposals"] = o.cloud.distinct_proposals;
  mc["repeats"] = o.repeats;
  mc["iou"] = o.c.iou;
  mc["sigma"] = o.sigma;
  m.seed("master", o.c.seed);

  std::vector<BenchReport> reports;
  for (SuppressionMethod meth : methods) {
    SuppressionConfig cfg;
    cfg.method = meth;
    cfg.iou_thresh = o.c.iou;
    cfg.sigma = o.sigma;
    reports.push_back(bench_suppression(o.cloud, cfg, o.repeats));
  }
  m.mark("bench_seconds");

  // Set NMS and NMS must agree when no two boxes share a proposal.
  const BenchReport* nms_r = nullptr;
  const BenchReport* set_r = nullptr;
  for (const BenchReport& r : reports) {
    if (r.method == SuppressionMethod::kNms) nms_r = &r;
    if (r.method == SuppressionMethod::kSetNms) set_r = &r;
  }
  const bool checked = nms_r && set_r && o.cloud.distinct_proposals;
  const bool consistent = !checked || nms_r->kept == set_r->kept;
  if (!consistent) {
    err << "warning: set-nms kept " << set_r->kept << " boxes but nms kept "
        << nms_r->kept << " on a distinct-proposal cloud\n";
  }

  std::string text;
  if (o.c.format == "json") {
    ordered_json j;
    j["schema_version"] = kReportSchemaVersion;
    ordered_json arr = ordered_json::array();
    for (const BenchReport& r : reports) {
      ordered_json e;
      e["method"] = to_string(r.method);
      e["n_boxes"] = r.n_boxes;
      e["kept"] = r.kept;
      e["seconds"] = r.seconds;
      e["boxes_per_second"] = r.boxes_per_second;
      arr.push_back(std::move(e));
    }
    j["results"] = std::move(arr);
    ordered_json x;
    x["set_nms_vs_nms_checked"] = checked;
    x["consistent"] = consistent;
    if (nms_r && set_r && nms_r->boxes_per_second > 0.0) {
      x["set_nms_throughput_ratio"] =
          set_r->boxes_per_second / nms_r->boxes_per_second;
    }
    j["cross_check"] = std::move(x);
    text = j.dump(2) + "\n";
  } else {
    std::ostringstream t;
    t << "method\tn_boxes\tkept\tseconds\tboxes_per_second\n";
    for (const BenchReport& r : reports) {
      t << to_string(r.method) << '\t' << r.n_boxes << '\t' << r.kept << '\t'
        << num(r.seconds) << '\t' << num(r.boxes_per_second) << '\n';
    }
    text = t.str();
  }
  emit(o.c, text, out);
  if (!o.c.out.empty()) m.output(o.c.out);
  m.write(manifest_path(o.c), err);
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"Crowded-scene detection toolkit: set assignment, EMD "
               "matching, Set NMS and evaluation",
               "crowd-suppress"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  std::size_t jobs_default = 1;
  try {
    jobs_default = default_jobs();
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  std::function<void()> action;

  SynthOpts synth;
  synth.c.jobs = jobs_default;
  synth.sim.proposal_jitter = 0.05;
  {
    auto* sc = app.add_subcommand("synth", "Generate a synthetic scene file");
    add_seed(sc, synth.c);
    add_jobs(sc, synth.c);
    sc->add_option("--out,-o", synth.c.out, "Output JSONL (default: stdout)");
    add_manifest(sc, synth.c);
    sc->add_option("--n-images,-n", synth.n_images, "Number of images")
        ->capture_default_str();
    add_scene_options(sc, synth.scene);
    sc->add_option("--detector", synth.detector,
                   "Also simulate detections: none, single or mip")
        ->check(CLI::IsMember({"none", "single", "mip"}))
        ->capture_default_str();
    sc->add_option("--k", synth.sim.k, "Predictions per proposal (mip)")
        ->capture_default_str();
    sc->add_option("--jitter", synth.sim.proposal_jitter,
                   "Proposal jitter, relative to box size")
        ->capture_default_str();
    sc->add_option("--proposals-per-gt", synth.sim.proposals_per_gt,
                   "Proposals sampled around each object")
        ->capture_default_str();
    sc->add_option("--background-fp", synth.sim.background_fp_mean,
                   "Mean background false positives per image")
        ->capture_default_str();
    sc->add_option("--miss-prob", synth.sim.miss_prob,
                   "Chance an object gets no detection at all")
        ->capture_default_str();
    sc->add_option("--theta", synth.sim.theta,
                   "IoU for a proposal to claim an object")
        ->capture_default_str();
    sc->callback([&] { action = [&] { run_synth(synth, out, err); }; });
  }

  SuppressOpts sup;
  sup.c.jobs = jobs_default;
  {
    auto* sc = app.add_subcommand("suppress", "Suppress duplicate detections");
    add_jobs(sc, sup.c);
    add_iou(sc, sup.c, "Suppression IoU threshold");
    sc->add_option("--in,-i", sup.in, "Input scene JSONL")->required();
    sc->add_option("--out,-o", sup.c.out, "Output JSONL (default: stdout)");
    add_manifest(sc, sup.c);
    sc->add_option("--method,-m", sup.method,
                   "nms, set-nms, soft-linear or soft-gaussian")
        ->capture_default_str();
    sc->add_option("--sigma", sup.cfg.sigma, "Gaussian soft-NMS width")
        ->capture_default_str();
    sc->add_option("--score-floor", sup.cfg.score_floor,
                   "Soft-NMS drops detections scored below this")
        ->capture_default_str();
    sc->callback([&] { action = [&] { run_suppress(sup, out, err); }; });
  }

  EvalOpts ev;
  ev.c.jobs = jobs_default;
  {
    auto* sc = app.add_subcommand("eval", "Evaluate detections");
    add_jobs(sc, ev.c);
    add_iou(sc, ev.c, "Match IoU threshold");
    add_format(sc, ev.c);
    sc->add_option("--gt", ev.gt, "Ground-truth scene JSONL")->required();
    sc->add_option("--det", ev.det, "Detection scene JSONL")->required();
    sc->add_option("--out,-o", ev.c.out, "Report path (default: stdout)");
    add_manifest(sc, ev.c);
    sc->add_option("--fppi-lo", ev.cfg.fppi_lo, "Lowest FPPI reference")
        ->capture_default_str();
    sc->add_option("--fppi-hi", ev.cfg.fppi_hi, "Highest FPPI reference")
        ->capture_default_str();
    sc->add_option("--fppi-points", ev.cfg.fppi_points,
                   "Log-spaced FPPI references")->capture_default_str();
    sc->add_option("--ap", ev.ap_mode, "AP interpolation")
        ->check(CLI::IsMember({"all-points", "eleven-point"}))
        ->capture_default_str();
    sc->add_option("--ji-matching", ev.ji_mode, "JI matching")
        ->check(CLI::IsMember({"maximum", "greedy"}))
        ->capture_default_str();
    sc->callback([&] { action = [&] { run_eval(ev, out, err); }; });
  }

  EmdOpts emd;
  emd.c.jobs = jobs_default;
  {
    auto* sc = app.add_subcommand("emd", "Score K-slot predictions");
    add_jobs(sc, emd.c);
    add_format(sc, emd.c);
    sc->add_option("--predictions,-p", emd.predictions,
                   "Prediction JSONL")->required();
    sc->add_option("--gt", emd.gt, "Ground-truth scene JSONL")->required();
    sc->add_option("--out,-o", emd.c.out, "Report path (default: stdout)");
    add_manifest(sc, emd.c);
    sc->add_option("--k", emd.k, "Predictions per proposal")
        ->capture_default_str();
    sc->add_option("--cls-mode", emd.cls_mode, "ce or focal")
        ->check(CLI::IsMember({"ce", "focal"}))
        ->capture_default_str();
    sc->add_option("--gamma", emd.focal.gamma, "Focal gamma")
        ->capture_default_str();
    sc->add_option("--alpha", emd.focal.alpha, "Focal alpha")
        ->capture_default_str();
    sc->add_option("--beta", emd.beta, "Smooth-L1 beta")->capture_default_str();
    sc->add_option("--theta", emd.theta, "GT-set IoU threshold")
        ->capture_default_str();
    sc->add_flag("--truncate-topk", emd.truncate,
                 "Keep the k best-overlapping objects instead of failing");
    sc->add_option("--cls-weight", emd.cls_weight, "Classification weight")
        ->capture_default_str();
    sc->add_option("--reg-weight", emd.reg_weight, "Regression weight")
        ->capture_default_str();
    sc->callback([&] { action = [&] { run_emd(emd, out, err); }; });
  }

  StudyOpts st;
  st.c.jobs = jobs_default;
  {
    auto* sc = app.add_subcommand(
        "study", "Compare simulator modes and suppression methods");
    add_seed(sc, st.c);
    add_jobs(sc, st.c);
    add_iou(sc, st.c, "Suppression and match IoU threshold");
    add_format(sc, st.c);
    sc->add_option("--out-dir,-o", st.out_dir,
                   "Directory for report.json, study.csv, manifest.json")
        ->required();
    sc->add_option("--n-images,-n", st.n_images, "Images per arm")
        ->capture_default_str();
    add_scene_options(sc, st.scene);
    sc->add_option("--jitter", st.plan.proposal_jitter, "Proposal jitter")
        ->capture_default_str();
    sc->add_option("--proposals-per-gt", st.plan.proposals_per_gt,
                   "Proposals per object")->capture_default_str();
    sc->add_option("--background-fp", st.plan.background_fp_mean,
                   "Mean background false positives per image")
        ->capture_default_str();
    sc->add_option("--miss-prob", st.plan.miss_prob,
                   "Chance an object gets no detection at all")
        ->capture_default_str();
    sc->add_option("--theta", st.plan.theta, "GT-set IoU threshold")
        ->capture_default_str();
    sc->add_option("--k", st.plan.k, "K for the mip rows")
        ->capture_default_str();
    sc->add_option("--nms-sweep", st.nms_sweep,
                   "Comma-separated NMS thresholds, or none")
        ->capture_default_str();
    sc->add_option("--k-sweep", st.k_sweep, "Comma-separated K values, or none")
        ->capture_default_str();
    sc->callback([&] { action = [&] { run_study_cmd(st, out, err); }; });
  }

  BenchOpts bench;
  bench.c.jobs = jobs_default;
  {
    auto* sc = app.add_subcommand("bench", "Measure suppression throughput");
    add_seed(sc, bench.c);
    add_jobs(sc, bench.c);
    add_iou(sc, bench.c, "Suppression IoU threshold");
    add_format(sc, bench.c);
    sc->add_option("--out,-o", bench.c.out, "Report path (default: stdout)");
    add_manifest(sc, bench.c);
    sc->add_option("--n-boxes", bench.cloud.n_boxes, "Boxes in the cloud")
        ->capture_default_str();
    sc->add_option("--duplication", bench.cloud.duplication,
                   "Boxes per underlying object")->capture_default_str();
    sc->add_option("--methods", bench.methods, "Comma-separated methods")
        ->capture_default_str();
    sc->add_option("--repeats", bench.repeats, "Timed repeats (best is kept)")
        ->capture_default_str();
    sc->add_option("--sigma", bench.sigma, "Gaussian soft-NMS width")
        ->capture_default_str();
    sc->add_flag("!--shared-proposals", bench.cloud.distinct_proposals,
                 "Give duplicates of one object the same proposal id");
    sc->callback([&] { action = [&] { run_bench(bench, out, err); }; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  try {
    action();
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace crowd::cli
