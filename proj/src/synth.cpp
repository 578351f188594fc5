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

#include "crowd/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <set>
#include <sstream>

#include "crowd/assignment.hpp"
#include "crowd/error.hpp"
#include "crowd/geometry.hpp"
#include "crowd/parallel.hpp"

namespace crowd {
namespace {

// Small counter-based generator. Every stream is a pure function of its seed
// and the transforms below are written out explicitly, so outputs are
// identical across standard library implementations.
// Stream index for the per-object "detector never fires" draw; far from the
// small proposal indices.
constexpr std::uint64_t kMissStream = 0x4D15'0000'0000ULL;

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // [0, 1)
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    // Box-Muller; 1 - u keeps the log argument in (0, 1].
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  // Knuth's multiplication method; fine for the small means used here.
  std::size_t poisson(double mean) {
    if (mean <= 0.0) return 0;
    const double limit = std::exp(-mean);
    std::size_t k = 0;
    double p = uniform();
    while (p > limit) {
      ++k;
      p *= uniform();
    }
    return k;
  }

 private:
  std::uint64_t state_;
};

double max_iou_against(const BBox& box, const std::vector<BBox>& others) {
  double best = 0.0;
  for (const BBox& o : others) best = std::max(best, iou(box, o));
  return best;
}

bool inside(const BBox& box, double w, double h) {
  return box.x1 >= 0.0 && box.y1 >= 0.0 && box.x2 <= w && box.y2 <= h;
}

BBox jitter_box(const BBox& box, double rel_std, Rng& rng) {
  if (rel_std <= 0.0) return box;
  const double sx = rel_std * box.width();
  const double sy = rel_std * box.height();
  for (int attempt = 0; attempt < 16; ++attempt) {
    BBox out{box.x1 + sx * rng.normal(), box.y1 + sy * rng.normal(),
             box.x2 + sx * rng.normal(), box.y2 + sy * rng.normal()};
    if (out.has_positive_size()) return out;
  }
  return box;
}

double corner_displacement(const BBox& a, const BBox& b) {
  const double dx1 = a.x1 - b.x1, dy1 = a.y1 - b.y1;
  const double dx2 = a.x2 - b.x2, dy2 = a.y2 - b.y2;
  return std::sqrt(dx1 * dx1 + dy1 * dy1 + dx2 * dx2 + dy2 * dy2);
}

std::string format_double(double v, int precision) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
  return buf;
}

}  // namespace

void SceneParams::validate() const {
  if (!(image_w > 0.0 && image_h > 0.0)) {
    throw InvalidInput("image size must be positive");
  }
  if (n_objects_mean < 0.0 || crowd_pairs_mean < 0.0) {
    throw InvalidInput("object and crowd means must be non-negative");
  }
  if (!(pair_iou_lo > 0.5 && pair_iou_lo <= pair_iou_hi && pair_iou_hi < 1.0)) {
    throw InvalidInput("pair IoU range must satisfy 0.5 < lo <= hi < 1");
  }
  if (!(box_scale_min > 0.0 && box_scale_min <= box_scale_max)) {
    throw InvalidInput("box scale range must satisfy 0 < min <= max");
  }
  if (box_scale_max > image_h || box_scale_max * aspect > image_w) {
    throw InvalidInput("largest box does not fit inside the image");
  }
  if (!(aspect > 0.0)) throw InvalidInput("aspect must be positive");
  if (!(partner_scale_min > 0.0 && partner_scale_min <= 1.0)) {
    throw InvalidInput("partner_scale_min must lie in (0, 1]");
  }
  if (cluster_size != 2 && cluster_size != 3) {
    throw InvalidInput("cluster_size must be 2 or 3");
  }
  if (max_retries < 1) throw InvalidInput("max_retries must be positive");
}

void DetectorSimParams::validate() const {
  if (mode == SimMode::kMip && k < 1) throw InvalidInput("mip k must be >= 1");
  if (proposal_jitter < 0.0) throw InvalidInput("jitter must be >= 0");
  if (!(theta > 0.0 && theta <= 1.0)) throw InvalidInput("theta in (0, 1]");
  if (score_min > score_max) throw InvalidInput("score clip range inverted");
  if (background_fp_mean < 0.0) {
    throw InvalidInput("background_fp_mean must be >= 0");
  }
  if (!(miss_prob >= 0.0 && miss_prob < 1.0)) {
    throw InvalidInput("miss_prob must lie in [0, 1)");
  }
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  Rng rng(master ^ (0xD1B54A32D192ED03ULL * (index + 1)));
  rng.next();
  return rng.next();
}

BBox place_partner(const BBox& anchor, double partner_w, double partner_h,
                   double dir_x, double dir_y, double target_iou) {
  const double norm = std::hypot(dir_x, dir_y);
  if (!(norm > 0.0)) throw InvalidInput("direction must be non-zero");
  dir_x /= norm;
  dir_y /= norm;
  const double cx = anchor.center_x(), cy = anchor.center_y();
  auto at = [&](double t) {
    const double px = cx + t * dir_x, py = cy + t * dir_y;
    return BBox{px - 0.5 * partner_w, py - 0.5 * partner_h,
                px + 0.5 * partner_w, py + 0.5 * partner_h};
  };
  // IoU is non-increasing in the offset along a fixed ray.
  double lo = 0.0;
  double hi = anchor.width() + anchor.height() + partner_w + partner_h;
  if (iou(anchor, at(lo)) < target_iou) {
    throw InvalidInput("target IoU exceeds the concentric overlap");
  }
  for (int iter = 0; iter < 200 && hi - lo > 1e-12; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (iou(anchor, at(mid)) >= target_iou) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return at(lo);
}

std::vector<GroundTruth> generate_scene(const SceneParams& params) {
  params.validate();
  Rng rng(params.seed);
  const std::size_t cluster = static_cast<std::size_t>(params.cluster_size);
  std::size_t n_objects = rng.poisson(params.n_objects_mean);
  std::size_t n_clusters = rng.poisson(params.crowd_pairs_mean);
  n_clusters = std::min(n_clusters, n_objects / cluster);
  const std::size_t n_isolated = n_objects - n_clusters * cluster;

  // Triples need tighter pairs so the two partners still overlap > 0.5.
  const double iou_lo =
      cluster == 3 ? std::max(params.pair_iou_lo, 0.75) : params.pair_iou_lo;
  const double iou_hi = std::max(iou_lo, params.pair_iou_hi);

  std::vector<BBox> boxes;
  auto random_box = [&]() {
    const double h = rng.uniform(params.box_scale_min, params.box_scale_max);
    const double w = params.aspect * h;
    const double x = rng.uniform(0.0, params.image_w - w);
    const double y = rng.uniform(0.0, params.image_h - h);
    return BBox{x, y, x + w, y + h};
  };

  for (std::size_t c = 0; c < n_clusters; ++c) {
    bool placed = false;
    for (int attempt = 0; attempt < params.max_retries && !placed; ++attempt) {
      const BBox anchor = random_box();
      if (max_iou_against(anchor, boxes) > kCrowdIouThreshold) continue;
      std::vector<BBox> members{anchor};
      bool ok = true;
      for (std::size_t m = 1; m < cluster && ok; ++m) {
        const double s = rng.uniform(params.partner_scale_min, 1.0);
        const double hi = std::min(iou_hi, 0.98 * s * s);
        if (hi < iou_lo) {
          ok = false;
          break;
        }
        const double target = rng.uniform(iou_lo, hi);
        const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const BBox partner =
            place_partner(anchor, s * anchor.width(), s * anchor.height(),
                          std::cos(phi), std::sin(phi), target);
        ok = inside(partner, params.image_w, params.image_h) &&
             max_iou_against(partner, boxes) <= kCrowdIouThreshold;
        for (std::size_t q = 1; ok && q < members.size(); ++q) {
          ok = iou(partner, members[q]) > kCrowdIouThreshold;
        }
        if (ok) members.push_back(partner);
      }
      if (!ok) continue;
      boxes.insert(boxes.end(), members.begin(), members.end());
      placed = true;
    }
    if (!placed) {
      std::ostringstream msg;
      msg << "could not place crowd cluster " << c << " with pairwise IoU in ["
          << iou_lo << ", " << iou_hi
          << "] and IoU <= 0.5 against other boxes after "
          << params.max_retries << " retries";
      throw PlacementError(msg.str());
    }
  }

  for (std::size_t i = 0; i < n_isolated; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < params.max_retries && !placed; ++attempt) {
      const BBox box = random_box();
      if (max_iou_against(box, boxes) > kCrowdIouThreshold) continue;
      boxes.push_back(box);
      placed = true;
    }
    if (!placed) {
      std::ostringstream msg;
      msg << "could not place isolated box " << i
          << " with IoU <= 0.5 against existing boxes after "
          << params.max_retries << " retries";
      throw PlacementError(msg.str());
    }
  }

  std::vector<GroundTruth> gts;
  gts.reserve(boxes.size());
  for (const BBox& b : boxes) gts.push_back({b, kDefaultClass, false});
  return gts;
}

std::vector<Detection> simulate_detector(std::span<const GroundTruth> gts,
                                         const DetectorSimParams& params,
                                         ImageSize image) {
  params.validate();
  std::vector<Detection> dets;
  std::int64_t proposal_id = 0;
  // Each proposal and each (proposal, member) decode draws from its own
  // stream, so changing the mode or K only adds or removes detections and
  // never perturbs the ones that remain.
  for (std::size_t i = 0; i < gts.size(); ++i) {
    if (gts[i].ignore) continue;
    if (params.miss_prob > 0.0) {
      Rng miss_rng(derive_seed(derive_seed(params.seed, i), kMissStream));
      if (miss_rng.uniform() < params.miss_prob) continue;
    }
    for (std::size_t p = 0; p < params.proposals_per_gt; ++p) {
      const std::uint64_t proposal_seed = derive_seed(
          derive_seed(params.seed, i), static_cast<std::uint64_t>(p));
      Rng proposal_rng(proposal_seed);
      const BBox proposal =
          jitter_box(gts[i].box, params.proposal_jitter, proposal_rng);
      const GtSet set = build_gt_set(proposal, gts, params.theta);
      const std::int64_t id = proposal_id++;
      if (set.entries.empty()) continue;

      std::vector<const GtSetEntry*> targets;
      if (params.mode == SimMode::kSingle) {
        const GtSetEntry* pick = &set.entries.front();
        if (params.collapse_in_single_mode && set.entries.size() >= 2) {
          for (const GtSetEntry& e : set.entries) {
            if (e.gt.box.area() > pick->gt.box.area()) pick = &e;
          }
        }
        targets.push_back(pick);
      } else {
        const std::size_t n = std::min(params.k, set.entries.size());
        for (std::size_t s = 0; s < n; ++s) targets.push_back(&set.entries[s]);
      }

      for (std::size_t s = 0; s < targets.size(); ++s) {
        const GtSetEntry& target = *targets[s];
        Rng decode_rng(derive_seed(proposal_seed, target.source_index));
        Detection d;
        d.box = jitter_box(target.gt.box, params.proposal_jitter, decode_rng);
        const double disp =
            corner_displacement(d.box, target.gt.box) / target.gt.box.diagonal();
        d.score = std::clamp(params.base_score - params.score_penalty * disp,
                             params.score_min, params.score_max);
        d.class_id = target.gt.class_id;
        d.proposal_id = id;
        d.slot = static_cast<int>(s);
        dets.push_back(d);
      }
    }
  }

  if (params.background_fp_mean > 0.0 && image.width > 0.0 &&
      image.height > 0.0) {
    Rng rng(derive_seed(params.seed, 0xB4C6'0000'0000ULL));
    const std::size_t n_fp = rng.poisson(params.background_fp_mean);
    std::vector<BBox> gt_boxes;
    for (const GroundTruth& g : gts) gt_boxes.push_back(g.box);
    const double max_h = std::min(240.0, image.height);
    for (std::size_t f = 0; f < n_fp; ++f) {
      for (int attempt = 0; attempt < 64; ++attempt) {
        const double h = rng.uniform(std::min(40.0, max_h), max_h);
        const double w = std::min(0.41 * h, image.width);
        const double x = rng.uniform(0.0, image.width - w);
        const double y = rng.uniform(0.0, image.height - h);
        const BBox box{x, y, x + w, y + h};
        if (max_iou_against(box, gt_boxes) >= 0.3) continue;
        Detection d;
        d.box = box;
        d.score = rng.uniform(params.score_min, 0.7);
        d.class_id = kDefaultClass;
        d.proposal_id = proposal_id++;
        d.slot = 0;
        dets.push_back(d);
        break;
      }
    }
  }
  return dets;
}

std::vector<SceneRecord> generate_dataset(const SceneParams& params,
                                          std::size_t n_images,
                                          std::size_t jobs) {
  params.validate();
  std::vector<SceneRecord> scenes(n_images);
  parallel_for(n_images, jobs, [&](std::size_t i) {
    SceneParams p = params;
    p.seed = derive_seed(params.seed, i);
    SceneRecord& rec = scenes[i];
    char id[32];
    std::snprintf(id, sizeof(id), "synth_%06zu", i);
    rec.id = id;
    rec.width = static_cast<int>(std::lround(params.image_w));
    rec.height = static_cast<int>(std::lround(params.image_h));
    rec.gts = generate_scene(p);
  });
  return scenes;
}

std::string arm_label(const DetectorSimParams& sim,
                      const SuppressionConfig& sup) {
  std::string label = sim.mode == SimMode::kSingle
                          ? std::string("single")
                          : "mip(k=" + std::to_string(sim.k) + ")";
  label += "+";
  label += to_string(sup.method);
  if (sup.method == SuppressionMethod::kSoftGaussian) {
    label += "(sigma=" + format_double(sup.sigma, 2) + ")";
  } else {
    label += "@" + format_double(sup.iou_thresh, 2);
  }
  return label;
}

std::vector<StudyArm> cross_arms(std::span<const DetectorSimParams> sims,
                                 std::span<const SuppressionConfig> sups) {
  std::vector<StudyArm> arms;
  for (const DetectorSimParams& sim : sims) {
    for (const SuppressionConfig& sup : sups) {
      arms.push_back({arm_label(sim, sup), sim, sup});
    }
  }
  return arms;
}

std::vector<StudyRow> run_study(const SceneParams& scene_params,
                                std::span<const StudyArm> arms,
                                const EvalConfig& eval_cfg,
                                std::size_t n_images, std::uint64_t seed,
                                std::size_t jobs) {
  if (n_images < 1) throw InvalidInput("a study needs at least one image");
  eval_cfg.validate();
  SceneParams sp = scene_params;
  sp.seed = seed;
  const std::vector<SceneRecord> scenes = generate_dataset(sp, n_images, jobs);
  const ImageSize size{sp.image_w, sp.image_h};

  std::vector<StudyRow> rows;
  rows.reserve(arms.size());
  std::vector<SceneRecord> records = scenes;
  for (const StudyArm& arm : arms) {
    parallel_for(n_images, jobs, [&](std::size_t i) {
      DetectorSimParams sim = arm.sim;
      sim.seed = derive_seed(derive_seed(seed, i), arm.sim.seed);
      const std::vector<Detection> raw =
          simulate_detector(scenes[i].gts, sim, size);
      records[i].dets = suppress(raw, arm.suppression);
    });
    StudyRow row;
    row.label = arm.label.empty() ? arm_label(arm.sim, arm.suppression)
                                  : arm.label;
    row.mode = arm.sim.mode;
    row.k = arm.sim.mode == SimMode::kSingle ? 1 : arm.sim.k;
    row.suppression = arm.suppression;
    row.report = evaluate(records, eval_cfg);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<StudyRow> run_study(const SceneParams& scene_params,
                                std::span<const DetectorSimParams> sims,
                                std::span<const SuppressionConfig> sups,
                                const EvalConfig& eval_cfg,
                                std::size_t n_images, std::uint64_t seed,
                                std::size_t jobs) {
  const std::vector<StudyArm> arms = cross_arms(sims, sups);
  return run_study(scene_params, arms, eval_cfg, n_images, seed, jobs);
}

std::vector<StudyArm> standard_study_arms(const StudyPlan& plan) {
  DetectorSimParams base;
  base.proposal_jitter = plan.proposal_jitter;
  base.proposals_per_gt = plan.proposals_per_gt;
  base.background_fp_mean = plan.background_fp_mean;
  base.miss_prob = plan.miss_prob;
  base.theta = plan.theta;

  DetectorSimParams single = base;
  single.mode = SimMode::kSingle;
  single.k = 1;
  DetectorSimParams mip = base;
  mip.mode = SimMode::kMip;
  mip.k = plan.k;

  auto sup = [&](SuppressionMethod method, double thresh) {
    SuppressionConfig cfg;
    cfg.method = method;
    cfg.iou_thresh = thresh;
    return cfg;
  };

  std::vector<StudyArm> arms;
  std::set<std::string> seen;
  auto add = [&](const DetectorSimParams& sim, const SuppressionConfig& s) {
    std::string label = arm_label(sim, s);
    if (seen.insert(label).second) arms.push_back({label, sim, s});
  };
  add(single, sup(SuppressionMethod::kNms, plan.iou_thresh));
  add(single, sup(SuppressionMethod::kSoftLinear, plan.iou_thresh));
  add(single, sup(SuppressionMethod::kSoftGaussian, plan.iou_thresh));
  add(mip, sup(SuppressionMethod::kNms, plan.iou_thresh));
  add(mip, sup(SuppressionMethod::kSetNms, plan.iou_thresh));
  for (double t : plan.nms_sweep) add(single, sup(SuppressionMethod::kNms, t));
  for (std::size_t k : plan.k_sweep) {
    if (k == 0) throw InvalidInput("k sweep values must be >= 1");
    DetectorSimParams sim = k == 1 ? single : mip;
    sim.k = k;
    add(sim, sup(SuppressionMethod::kSetNms, plan.iou_thresh));
  }
  return arms;
}

}  // namespace crowd
