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

#include "crowd/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "crowd/error.hpp"

namespace crowd {
namespace {

void require_positive_size(const BBox& box, const char* role) {
  if (!box.has_positive_size()) {
    std::ostringstream msg;
    msg << role << " box (" << box.x1 << ", " << box.y1 << ", " << box.x2
        << ", " << box.y2 << ") must have positive width and height";
    throw InvalidGeometry(msg.str());
  }
}

}  // namespace

double intersection_area(const BBox& a, const BBox& b) noexcept {
  const double w = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double h = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (w <= 0.0 || h <= 0.0) return 0.0;
  return w * h;
}

double iou(const BBox& a, const BBox& b) noexcept {
  const double inter = intersection_area(a, b);
  if (inter <= 0.0) return 0.0;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

BoxDelta encode_delta(const BBox& proposal, const BBox& target) {
  require_positive_size(proposal, "proposal");
  require_positive_size(target, "target");
  const double pw = proposal.width();
  const double ph = proposal.height();
  return {
      (target.center_x() - proposal.center_x()) / pw,
      (target.center_y() - proposal.center_y()) / ph,
      std::log(target.width() / pw),
      std::log(target.height() / ph),
  };
}

BBox decode_delta(const BBox& proposal, const BoxDelta& delta) {
  require_positive_size(proposal, "proposal");
  if (!delta.is_finite()) throw InvalidInput("box delta must be finite");
  const double pw = proposal.width();
  const double ph = proposal.height();
  const double cx = proposal.center_x() + delta.dx * pw;
  const double cy = proposal.center_y() + delta.dy * ph;
  const double w = pw * std::exp(delta.dw);
  const double h = ph * std::exp(delta.dh);
  return {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
}

}  // namespace crowd
