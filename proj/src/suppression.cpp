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

#include "crowd/suppression.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "crowd/error.hpp"
#include "crowd/geometry.hpp"

namespace crowd {
namespace {

void validate(std::span<const Detection> dets, const SuppressionConfig& cfg) {
  if (!(cfg.iou_thresh > 0.0 && cfg.iou_thresh < 1.0)) {
    throw InvalidInput("suppression IoU threshold must lie in (0, 1)");
  }
  for (const Detection& d : dets) {
    if (!std::isfinite(d.score)) {
      throw InvalidInput("detection scores must be finite");
    }
  }
}

// Indices sorted by descending score, ties by ascending input index.
std::vector<std::size_t> score_order(std::span<const Detection> dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return dets[a].score > dets[b].score;
                   });
  return order;
}

// Structure-of-arrays copy in processing order keeps the inner loop tight.
struct SortedBoxes {
  std::vector<double> x1, y1, x2, y2, area;
  std::vector<int> cls;
  std::vector<std::int64_t> proposal;

  SortedBoxes(std::span<const Detection> dets,
              const std::vector<std::size_t>& order) {
    const std::size_t n = order.size();
    x1.resize(n), y1.resize(n), x2.resize(n), y2.resize(n), area.resize(n);
    cls.resize(n), proposal.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const Detection& d = dets[order[i]];
      x1[i] = d.box.x1;
      y1[i] = d.box.y1;
      x2[i] = d.box.x2;
      y2[i] = d.box.y2;
      area[i] = d.box.area();
      cls[i] = d.class_id;
      proposal[i] = d.proposal_id;
    }
  }

  double overlap(std::size_t i, std::size_t j) const {
    const double w = std::min(x2[i], x2[j]) - std::max(x1[i], x1[j]);
    if (w <= 0.0) return 0.0;
    const double h = std::min(y2[i], y2[j]) - std::max(y1[i], y1[j]);
    if (h <= 0.0) return 0.0;
    const double inter = w * h;
    const double uni = area[i] + area[j] - inter;
    return uni <= 0.0 ? 0.0 : inter / uni;
  }
};

template <bool kSkipSameProposal>
std::vector<Detection> greedy_suppress(std::span<const Detection> dets,
                                       const SuppressionConfig& cfg) {
  validate(dets, cfg);
  const std::vector<std::size_t> order = score_order(dets);
  const SortedBoxes boxes(dets, order);
  const std::size_t n = order.size();
  std::vector<char> removed(n, 0);
  std::vector<Detection> kept;
  for (std::size_t i = 0; i < n; ++i) {
    if (removed[i]) continue;
    kept.push_back(dets[order[i]]);
    for (std::size_t j = i + 1; j < n; ++j) {
      if (removed[j] || boxes.cls[j] != boxes.cls[i]) continue;
      if (boxes.overlap(i, j) > cfg.iou_thresh) {
        if constexpr (kSkipSameProposal) {
          if (boxes.proposal[j] == boxes.proposal[i]) continue;
        }
        removed[j] = 1;
      }
    }
  }
  return kept;
}

}  // namespace

std::string_view to_string(SuppressionMethod method) {
  switch (method) {
    case SuppressionMethod::kNms:
      return "nms";
    case SuppressionMethod::kSoftLinear:
      return "soft-linear";
    case SuppressionMethod::kSoftGaussian:
      return "soft-gaussian";
    case SuppressionMethod::kSetNms:
      return "set-nms";
  }
  return "unknown";
}

SuppressionMethod parse_suppression_method(std::string_view name) {
  std::string key(name);
  std::replace(key.begin(), key.end(), '_', '-');
  if (key == "nms") return SuppressionMethod::kNms;
  if (key == "soft-linear" || key == "soft-nms") {
    return SuppressionMethod::kSoftLinear;
  }
  if (key == "soft-gaussian") return SuppressionMethod::kSoftGaussian;
  if (key == "set-nms") return SuppressionMethod::kSetNms;
  throw InvalidInput("unknown suppression method '" + std::string(name) + "'");
}

std::vector<Detection> nms(std::span<const Detection> dets,
                           const SuppressionConfig& cfg) {
  return greedy_suppress<false>(dets, cfg);
}

std::vector<Detection> set_nms(std::span<const Detection> dets,
                               const SuppressionConfig& cfg) {
  return greedy_suppress<true>(dets, cfg);
}

std::vector<Detection> soft_nms(std::span<const Detection> dets,
                                const SuppressionConfig& cfg) {
  validate(dets, cfg);
  const bool gaussian = cfg.method == SuppressionMethod::kSoftGaussian;
  if (gaussian && !(cfg.sigma > 0.0)) {
    throw InvalidInput("soft-nms sigma must be positive");
  }
  // Alive detections in input order; selection scans for the max score so
  // ties resolve to the lowest input index.
  std::vector<Detection> alive;
  alive.reserve(dets.size());
  for (const Detection& d : dets) {
    if (d.score >= cfg.score_floor) alive.push_back(d);
  }
  std::vector<Detection> out;
  out.reserve(alive.size());
  while (!alive.empty()) {
    std::size_t top = 0;
    for (std::size_t i = 1; i < alive.size(); ++i) {
      if (alive[i].score > alive[top].score) top = i;
    }
    const Detection best = alive[top];
    alive.erase(alive.begin() + static_cast<std::ptrdiff_t>(top));
    out.push_back(best);
    std::size_t write = 0;
    for (std::size_t i = 0; i < alive.size(); ++i) {
      Detection d = alive[i];
      if (d.class_id == best.class_id) {
        const double ov = iou(best.box, d.box);
        if (gaussian) {
          if (ov > 0.0) d.score *= std::exp(-(ov * ov) / cfg.sigma);
        } else if (ov > cfg.iou_thresh) {
          d.score *= 1.0 - ov;
        }
      }
      if (d.score >= cfg.score_floor) alive[write++] = d;
    }
    alive.resize(write);
  }
  return out;
}

std::vector<Detection> suppress(std::span<const Detection> dets,
                                const SuppressionConfig& cfg) {
  switch (cfg.method) {
    case SuppressionMethod::kNms:
      return nms(dets, cfg);
    case SuppressionMethod::kSetNms:
      return set_nms(dets, cfg);
    case SuppressionMethod::kSoftLinear:
    case SuppressionMethod::kSoftGaussian:
      return soft_nms(dets, cfg);
  }
  throw InvalidInput("unknown suppression method");
}

std::vector<Detection> make_box_cloud(const CloudParams& params) {
  std::vector<Detection> cloud;
  if (params.n_boxes == 0) return cloud;
  cloud.reserve(params.n_boxes);
  std::mt19937_64 rng(params.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  const std::size_t dup = std::max<std::size_t>(1, params.duplication);

  BBox anchor;
  std::int64_t location = -1;
  for (std::size_t i = 0; i < params.n_boxes; ++i) {
    if (params.identical) {
      anchor = {100.0, 100.0, 160.0, 250.0};
    } else if (i % dup == 0) {
      const double h = 40.0 + 160.0 * unit(rng);
      const double w = 0.41 * h;
      const double x = unit(rng) * (params.image_w - w);
      const double y = unit(rng) * (params.image_h - h);
      anchor = {x, y, x + w, y + h};
      ++location;
    }
    Detection d;
    d.box = anchor;
    if (!params.identical && i % dup != 0) {
      const double sx = params.jitter * anchor.width();
      const double sy = params.jitter * anchor.height();
      d.box.x1 += sx * noise(rng);
      d.box.y1 += sy * noise(rng);
      d.box.x2 += sx * noise(rng);
      d.box.y2 += sy * noise(rng);
      if (d.box.x2 <= d.box.x1) d.box.x2 = d.box.x1 + 1.0;
      if (d.box.y2 <= d.box.y1) d.box.y2 = d.box.y1 + 1.0;
    }
    d.score = params.identical ? 0.5 : unit(rng);
    d.class_id = kDefaultClass;
    if (params.distinct_proposals || params.identical) {
      d.proposal_id = static_cast<std::int64_t>(i);
      d.slot = 0;
    } else {
      d.proposal_id = location;
      d.slot = static_cast<int>(i % dup);
    }
    cloud.push_back(d);
  }
  return cloud;
}

BenchReport bench_suppression(const CloudParams& cloud,
                              const SuppressionConfig& cfg,
                              std::size_t repeats) {
  const std::vector<Detection> dets = make_box_cloud(cloud);
  BenchReport report;
  report.method = cfg.method;
  report.n_boxes = dets.size();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < std::max<std::size_t>(1, repeats); ++r) {
    const auto start = std::chrono::steady_clock::now();
    const std::vector<Detection> kept = suppress(dets, cfg);
    const auto stop = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double>(stop - start).count());
    report.kept = kept.size();
  }
  report.seconds = best;
  report.boxes_per_second =
      best > 0.0 ? static_cast<double>(dets.size()) / best
                 : std::numeric_limits<double>::infinity();
  return report;
}

}  // namespace crowd
