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

#include <cmath>

namespace crowd {

// Axis-aligned box in absolute pixel coordinates, corner form.
// Coordinates are real-valued; width is x2 - x1 with no +1 convention.
struct BBox {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const noexcept { return x2 - x1; }
  double height() const noexcept { return y2 - y1; }
  double area() const noexcept { return width() * height(); }
  double center_x() const noexcept { return x1 + 0.5 * width(); }
  double center_y() const noexcept { return y1 + 0.5 * height(); }
  double diagonal() const noexcept { return std::hypot(width(), height()); }

  bool is_finite() const noexcept {
    return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) &&
           std::isfinite(y2);
  }
  // Finite with x1 <= x2 and y1 <= y2; zero area is allowed.
  bool is_valid() const noexcept { return is_finite() && x1 <= x2 && y1 <= y2; }
  bool has_positive_size() const noexcept {
    return is_finite() && width() > 0.0 && height() > 0.0;
  }

  static BBox from_xywh(double x, double y, double w, double h) noexcept {
    return {x, y, x + w, y + h};
  }

  BBox translated(double dx, double dy) const noexcept {
    return {x1 + dx, y1 + dy, x2 + dx, y2 + dy};
  }

  friend bool operator==(const BBox&, const BBox&) = default;
};

// Regression offsets of a target relative to a proposal: center shift
// normalized by proposal size, log-ratio of sizes.
struct BoxDelta {
  double dx = 0.0;
  double dy = 0.0;
  double dw = 0.0;
  double dh = 0.0;

  bool is_finite() const noexcept {
    return std::isfinite(dx) && std::isfinite(dy) && std::isfinite(dw) &&
           std::isfinite(dh);
  }

  friend bool operator==(const BoxDelta&, const BoxDelta&) = default;
};

double intersection_area(const BBox& a, const BBox& b) noexcept;

// Intersection over union; 0 when the union has zero area.
double iou(const BBox& a, const BBox& b) noexcept;

// Throws InvalidGeometry unless both boxes have positive width and height.
BoxDelta encode_delta(const BBox& proposal, const BBox& target);

// Throws InvalidGeometry for a degenerate proposal and InvalidInput for a
// non-finite delta.
BBox decode_delta(const BBox& proposal, const BoxDelta& delta);

}  // namespace crowd
