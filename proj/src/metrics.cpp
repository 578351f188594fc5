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

#include "crowd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "crowd/error.hpp"
#include "crowd/geometry.hpp"

namespace crowd {
namespace {

constexpr double kMissRateFloor = 1e-10;

std::vector<std::size_t> score_order(std::span<const Detection> dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return dets[a].score > dets[b].score;
                   });
  return order;
}

std::vector<Detection> sorted_dets(std::span<const Detection> dets,
                                   double min_score = -INFINITY) {
  std::vector<Detection> out;
  out.reserve(dets.size());
  for (std::size_t i : score_order(dets)) {
    if (dets[i].score >= min_score) out.push_back(dets[i]);
  }
  return out;
}

std::size_t count_gts(std::span<const GroundTruth> gts) {
  return static_cast<std::size_t>(std::count_if(
      gts.begin(), gts.end(), [](const GroundTruth& g) { return !g.ignore; }));
}

std::size_t count_gts(std::span<const SceneRecord> scenes) {
  std::size_t n = 0;
  for (const SceneRecord& s : scenes) n += count_gts(s.gts);
  return n;
}

struct Outcome {
  double score;
  bool tp;
};

// Cumulative counts after every distinct score, highest score first. Equal
// scores enter the curve together so the result does not depend on how
// tied detections are ordered across images.
struct CurvePoint {
  double score;
  std::size_t tp;
  std::size_t fp;
};

std::vector<CurvePoint> score_sweep(std::span<const SceneRecord> scenes,
                                    double iou_thresh) {
  std::vector<Outcome> outcomes;
  for (const SceneRecord& scene : scenes) {
    const std::vector<Detection> dets = sorted_dets(scene.dets);
    const GreedyMatch match = match_greedy(dets, scene.gts, iou_thresh);
    for (std::size_t i = 0; i < dets.size(); ++i) {
      if (match.det_outcome[i] == MatchOutcome::kIgnored) continue;
      outcomes.push_back(
          {dets[i].score, match.det_outcome[i] == MatchOutcome::kTruePositive});
    }
  }
  std::sort(outcomes.begin(), outcomes.end(),
            [](const Outcome& a, const Outcome& b) { return a.score > b.score; });
  std::vector<CurvePoint> curve;
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    (outcomes[i].tp ? tp : fp) += 1;
    if (i + 1 == outcomes.size() || outcomes[i + 1].score != outcomes[i].score) {
      curve.push_back({outcomes[i].score, tp, fp});
    }
  }
  return curve;
}

double ap_from_curve(const std::vector<CurvePoint>& curve, std::size_t n_gt,
                     ApInterpolation interpolation) {
  const std::size_t n = curve.size();
  std::vector<double> recall(n), precision(n);
  for (std::size_t i = 0; i < n; ++i) {
    recall[i] = static_cast<double>(curve[i].tp) / static_cast<double>(n_gt);
    precision[i] = static_cast<double>(curve[i].tp) /
                   static_cast<double>(curve[i].tp + curve[i].fp);
  }
  if (interpolation == ApInterpolation::kElevenPoint) {
    double sum = 0.0;
    for (int t = 0; t <= 10; ++t) {
      const double r = t / 10.0;
      double best = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (recall[i] >= r) best = std::max(best, precision[i]);
      }
      sum += best;
    }
    return sum / 11.0;
  }
  // Area under the monotone precision envelope.
  for (std::size_t i = n; i-- > 1;) {
    precision[i - 1] = std::max(precision[i - 1], precision[i]);
  }
  double ap = 0.0, prev_recall = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ap += (recall[i] - prev_recall) * precision[i];
    prev_recall = recall[i];
  }
  return std::clamp(ap, 0.0, 1.0);
}

std::vector<double> fppi_references(const EvalConfig& cfg) {
  const double lo = std::log10(cfg.fppi_lo);
  const double step = (std::log10(cfg.fppi_hi) - lo) / (cfg.fppi_points - 1);
  std::vector<double> refs(static_cast<std::size_t>(cfg.fppi_points));
  for (int i = 0; i < cfg.fppi_points; ++i) {
    refs[static_cast<std::size_t>(i)] = std::pow(10.0, lo + i * step);
  }
  return refs;
}

double mr2_from_curve(const std::vector<CurvePoint>& curve, std::size_t n_gt,
                      std::size_t n_images, const EvalConfig& cfg) {
  std::vector<double> fppi(curve.size()), miss(curve.size());
  for (std::size_t i = 0; i < curve.size(); ++i) {
    fppi[i] = static_cast<double>(curve[i].fp) / static_cast<double>(n_images);
    miss[i] = 1.0 - static_cast<double>(curve[i].tp) / static_cast<double>(n_gt);
  }
  double log_sum = 0.0;
  const std::vector<double> refs = fppi_references(cfg);
  for (double ref : refs) {
    double mr = 1.0;
    if (!curve.empty()) {
      // Last operating point whose FPPI fits the budget; below the curve's
      // reach fall back to its first (lowest-FPPI) point.
      const auto it = std::upper_bound(fppi.begin(), fppi.end(), ref);
      const std::size_t idx =
          it == fppi.begin() ? 0
                             : static_cast<std::size_t>(it - fppi.begin()) - 1;
      mr = miss[idx];
    }
    log_sum += std::log(std::max(mr, kMissRateFloor));
  }
  return std::clamp(std::exp(log_sum / static_cast<double>(refs.size())), 0.0,
                    1.0);
}

// Per-image JI bookkeeping: detections in score order that participate,
// each with its candidate GTs ordered by descending IoU.
struct JiImage {
  std::vector<double> scores;
  std::vector<std::vector<std::size_t>> candidates;
  std::size_t n_gt = 0;
};

JiImage prepare_ji_image(const SceneRecord& scene, double iou_thresh) {
  JiImage img;
  img.n_gt = scene.gts.size();
  for (std::size_t i : score_order(scene.dets)) {
    const Detection& d = scene.dets[i];
    std::vector<std::pair<double, std::size_t>> cands;
    bool hits_ignored = false;
    for (std::size_t j = 0; j < scene.gts.size(); ++j) {
      const GroundTruth& g = scene.gts[j];
      if (g.class_id != d.class_id) continue;
      const double ov = iou(d.box, g.box);
      if (ov < iou_thresh) continue;
      if (g.ignore) {
        hits_ignored = true;
      } else {
        cands.emplace_back(ov, j);
      }
    }
    if (cands.empty() && hits_ignored) continue;
    std::stable_sort(cands.begin(), cands.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<std::size_t> idx;
    idx.reserve(cands.size());
    for (const auto& c : cands) idx.push_back(c.second);
    img.scores.push_back(d.score);
    img.candidates.push_back(std::move(idx));
  }
  return img;
}

// Incremental matcher: add detections one at a time (score order) and report
// whether the matching grew.
class IncrementalMatcher {
 public:
  IncrementalMatcher(const JiImage& img, JiMatching mode)
      : img_(img), mode_(mode), gt_owner_(img.n_gt, kNone) {}

  bool add(std::size_t det) {
    if (mode_ == JiMatching::kGreedy) {
      for (std::size_t g : img_.candidates[det]) {
        if (gt_owner_[g] == kNone) {
          gt_owner_[g] = det;
          return true;
        }
      }
      return false;
    }
    visited_.assign(img_.n_gt, 0);
    return augment(det);
  }

 private:
  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

  bool augment(std::size_t det) {
    for (std::size_t g : img_.candidates[det]) {
      if (visited_[g]) continue;
      visited_[g] = 1;
      if (gt_owner_[g] == kNone || augment(gt_owner_[g])) {
        gt_owner_[g] = det;
        return true;
      }
    }
    return false;
  }

  const JiImage& img_;
  JiMatching mode_;
  std::vector<std::size_t> gt_owner_;
  std::vector<char> visited_;
};

double ji_ratio(std::size_t matches, std::size_t dets, std::size_t gts) {
  const std::size_t denom = dets + gts - matches;
  if (denom == 0) return 1.0;
  return static_cast<double>(matches) / static_cast<double>(denom);
}

void require_gts(std::size_t n_gt, const char* metric) {
  if (n_gt == 0) {
    throw UndefinedMetric(std::string(metric) +
                          " is undefined without non-ignored ground truth");
  }
}

}  // namespace

void EvalConfig::validate() const {
  if (!(iou_thresh > 0.0 && iou_thresh <= 1.0)) {
    throw InvalidInput("evaluation IoU threshold must lie in (0, 1]");
  }
  if (!(fppi_lo > 0.0 && fppi_lo < fppi_hi && std::isfinite(fppi_hi))) {
    throw InvalidInput("FPPI range must satisfy 0 < lo < hi");
  }
  if (fppi_points < 2) throw InvalidInput("fppi_points must be >= 2");
}

GreedyMatch match_greedy(std::span<const Detection> dets,
                         std::span<const GroundTruth> gts, double iou_thresh) {
  GreedyMatch result;
  result.det_outcome.assign(dets.size(), MatchOutcome::kFalsePositive);
  result.det_to_gt.assign(dets.size(), -1);
  result.gt_matched.assign(gts.size(), false);
  for (std::size_t i = 0; i < dets.size(); ++i) {
    const Detection& d = dets[i];
    std::ptrdiff_t best = -1;
    double best_iou = -1.0;
    bool hits_ignored = false;
    for (std::size_t j = 0; j < gts.size(); ++j) {
      const GroundTruth& g = gts[j];
      if (g.class_id != d.class_id) continue;
      const double ov = iou(d.box, g.box);
      if (ov < iou_thresh) continue;
      if (g.ignore) {
        hits_ignored = true;
        continue;
      }
      if (result.gt_matched[j]) continue;
      if (ov > best_iou) {
        best_iou = ov;
        best = static_cast<std::ptrdiff_t>(j);
      }
    }
    if (best >= 0) {
      result.det_outcome[i] = MatchOutcome::kTruePositive;
      result.det_to_gt[i] = best;
      result.gt_matched[static_cast<std::size_t>(best)] = true;
    } else if (hits_ignored) {
      result.det_outcome[i] = MatchOutcome::kIgnored;
    }
  }
  return result;
}

double average_precision(std::span<const SceneRecord> scenes,
                         const EvalConfig& cfg) {
  cfg.validate();
  const std::size_t n_gt = count_gts(scenes);
  require_gts(n_gt, "average precision");
  return ap_from_curve(score_sweep(scenes, cfg.iou_thresh), n_gt,
                       cfg.ap_interpolation);
}

double mr2(std::span<const SceneRecord> scenes, const EvalConfig& cfg) {
  cfg.validate();
  const std::size_t n_gt = count_gts(scenes);
  require_gts(n_gt, "MR-2");
  return mr2_from_curve(score_sweep(scenes, cfg.iou_thresh), n_gt,
                        scenes.size(), cfg);
}

double jaccard_index(std::span<const SceneRecord> scenes, const EvalConfig& cfg,
                     double score_threshold) {
  cfg.validate();
  if (std::isnan(score_threshold)) {
    throw InvalidInput("score threshold must not be NaN");
  }
  std::size_t matches = 0, dets = 0, gts = 0;
  for (const SceneRecord& scene : scenes) {
    const JiImage img = prepare_ji_image(scene, cfg.iou_thresh);
    IncrementalMatcher matcher(img, cfg.ji_matching);
    for (std::size_t i = 0; i < img.scores.size(); ++i) {
      if (img.scores[i] < score_threshold) break;
      ++dets;
      if (matcher.add(i)) ++matches;
    }
    gts += count_gts(scene.gts);
  }
  return ji_ratio(matches, dets, gts);
}

BestJi best_ji(std::span<const SceneRecord> scenes, const EvalConfig& cfg) {
  cfg.validate();
  struct Event {
    double score;
    bool matched;
  };
  std::vector<Event> events;
  std::size_t gts = 0;
  for (const SceneRecord& scene : scenes) {
    const JiImage img = prepare_ji_image(scene, cfg.iou_thresh);
    IncrementalMatcher matcher(img, cfg.ji_matching);
    for (std::size_t i = 0; i < img.scores.size(); ++i) {
      events.push_back({img.scores[i], matcher.add(i)});
    }
    gts += count_gts(scene.gts);
  }
  std::sort(events.begin(), events.end(),
            [](const Event& a, const Event& b) { return a.score > b.score; });

  BestJi best;
  best.ji = ji_ratio(0, 0, gts);
  std::size_t dets = 0, matches = 0;
  for (std::size_t i = 0; i < events.size(); ++i) {
    ++dets;
    if (events[i].matched) ++matches;
    if (i + 1 < events.size() && events[i + 1].score == events[i].score) {
      continue;
    }
    const double ji = ji_ratio(matches, dets, gts);
    if (ji > best.ji) {
      best.ji = ji;
      best.threshold = events[i].score;
    }
  }
  return best;
}

std::vector<bool> crowd_flags(std::span<const GroundTruth> gts) {
  std::vector<bool> crowd(gts.size(), false);
  for (std::size_t i = 0; i < gts.size(); ++i) {
    if (gts[i].ignore) continue;
    for (std::size_t j = i + 1; j < gts.size(); ++j) {
      if (gts[j].ignore) continue;
      if (iou(gts[i].box, gts[j].box) > kCrowdIouThreshold) {
        crowd[i] = true;
        crowd[j] = true;
      }
    }
  }
  return crowd;
}

RecallSplit recall_split(std::span<const SceneRecord> scenes,
                         const EvalConfig& cfg, double score_threshold) {
  cfg.validate();
  RecallSplit split;
  for (const SceneRecord& scene : scenes) {
    const std::vector<Detection> dets = sorted_dets(scene.dets, score_threshold);
    const GreedyMatch match = match_greedy(dets, scene.gts, cfg.iou_thresh);
    const std::vector<bool> crowd = crowd_flags(scene.gts);
    for (std::size_t j = 0; j < scene.gts.size(); ++j) {
      if (scene.gts[j].ignore) continue;
      RecallCount& bucket = crowd[j] ? split.crowd : split.sparse;
      ++bucket.gt_count;
      ++split.total.gt_count;
      if (match.gt_matched[j]) {
        ++bucket.matched;
        ++split.total.matched;
      }
    }
  }
  return split;
}

DensityStats density(std::span<const SceneRecord> scenes) {
  DensityStats stats;
  stats.images = scenes.size();
  if (scenes.empty()) return stats;
  std::size_t objects = 0, overlaps = 0;
  for (const SceneRecord& scene : scenes) {
    objects += count_gts(scene.gts);
    for (std::size_t i = 0; i < scene.gts.size(); ++i) {
      if (scene.gts[i].ignore) continue;
      for (std::size_t j = i + 1; j < scene.gts.size(); ++j) {
        if (scene.gts[j].ignore) continue;
        if (iou(scene.gts[i].box, scene.gts[j].box) > kCrowdIouThreshold) {
          ++overlaps;
        }
      }
    }
  }
  const double n = static_cast<double>(scenes.size());
  stats.objects_per_image = static_cast<double>(objects) / n;
  stats.overlaps_per_image = static_cast<double>(overlaps) / n;
  return stats;
}

EvalReport evaluate(std::span<const SceneRecord> scenes, const EvalConfig& cfg) {
  cfg.validate();
  const std::size_t n_gt = count_gts(scenes);
  require_gts(n_gt, "evaluation");
  const std::vector<CurvePoint> curve = score_sweep(scenes, cfg.iou_thresh);
  EvalReport report;
  report.ap = ap_from_curve(curve, n_gt, cfg.ap_interpolation);
  report.mr2 = mr2_from_curve(curve, n_gt, scenes.size(), cfg);
  const BestJi ji = best_ji(scenes, cfg);
  report.ji = ji.ji;
  report.ji_best_threshold = ji.threshold;
  report.recall = recall_split(scenes, cfg, ji.threshold);
  report.density = density(scenes);
  return report;
}

}  // namespace crowd
