#pragma once

#include <algorithm>
#include <cmath>

#include "rebox/errors.hpp"
#include "rebox/tensor.hpp"

namespace rebox {

/// Axis-aligned box in absolute pixel coordinates, upper-left (x1, y1) and
/// lower-right (x2, y2) corners. Coordinates are continuous; sub-pixel values
/// are meaningful. A box is valid iff x2 > x1 and y2 > y1.
struct BoundingBox {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  bool valid() const { return x2 > x1 && y2 > y1; }
  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return valid() ? width() * height() : 0.0; }
};

/// Center/size view of a box: (cx, cy) center, (w, h) extents.
struct CenterSize {
  double cx = 0, cy = 0, w = 0, h = 0;
};

/// Box expressed relative to a reference box: corner offsets from the
/// reference center, divided by the reference extents. A box normalized
/// against itself is (-0.5, -0.5, 0.5, 0.5).
struct NormalizedBox {
  double nx1 = 0, ny1 = 0, nx2 = 0, ny2 = 0;
};

inline CenterSize to_center_size(const BoundingBox& b) {
  if (!b.valid()) throw InvalidBoxError("box has non-positive extent");
  return {(b.x1 + b.x2) / 2.0, (b.y1 + b.y2) / 2.0, b.x2 - b.x1, b.y2 - b.y1};
}

inline BoundingBox to_corner_box(const CenterSize& cs) {
  return {cs.cx - cs.w / 2.0, cs.cy - cs.h / 2.0, cs.cx + cs.w / 2.0, cs.cy + cs.h / 2.0};
}

inline NormalizedBox normalize_box(const BoundingBox& target, const BoundingBox& reference) {
  if (!target.valid()) throw InvalidBoxError("target box has non-positive extent");
  const CenterSize r = to_center_size(reference);
  return {(target.x1 - r.cx) / r.w, (target.y1 - r.cy) / r.h,
          (target.x2 - r.cx) / r.w, (target.y2 - r.cy) / r.h};
}

inline BoundingBox denormalize_box(const NormalizedBox& n, const BoundingBox& reference) {
  const CenterSize r = to_center_size(reference);
  if (n.nx2 <= n.nx1 || n.ny2 <= n.ny1)
    throw DegeneratePredictionError("regression output is not a box");
  return {n.nx1 * r.w + r.cx, n.ny1 * r.h + r.cy, n.nx2 * r.w + r.cx, n.ny2 * r.h + r.cy};
}

/// Continuous-area intersection over union; no pixel discretization.
inline double iou(const BoundingBox& a, const BoundingBox& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0 || ih <= 0) return 0.0;
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

/// Consistency between the regression input box and its prediction: the
/// detection confidence. A collapsed prediction scores 0 rather than raising,
/// so threshold sweeps never abort.
inline double pop_score(const BoundingBox& input_box, const BoundingBox& predicted_box) {
  if (!predicted_box.valid()) return 0.0;
  return iou(input_box, predicted_box);
}

/// Clips to [0, w] x [0, h]; throws if nothing of the box remains.
inline BoundingBox clip_box(const BoundingBox& b, double img_w, double img_h) {
  BoundingBox c{std::max(b.x1, 0.0), std::max(b.y1, 0.0),
                std::min(b.x2, img_w), std::min(b.y2, img_h)};
  if (!c.valid()) throw InvalidBoxError("box lies entirely outside the image");
  return c;
}

/// Centered proportional expansion: width and height grow by factor (1 + s),
/// the center stays put, and the result is clipped to the image bounds.
/// s = 0 returns the box unchanged.
inline BoundingBox augment_box(const BoundingBox& b, double s, double img_w, double img_h) {
  if (s < 0) throw std::invalid_argument("augmentation factor must be >= 0");
  const CenterSize c = to_center_size(b);
  const double hw = c.w * (1.0 + s) / 2.0;
  const double hh = c.h * (1.0 + s) / 2.0;
  return clip_box({c.cx - hw, c.cy - hh, c.cx + hw, c.cy + hh}, img_w, img_h);
}

/// Resamples the image content under `b` to a side x side patch with bilinear
/// interpolation. Sample points outside the image read as zero. Pixel (r, c)
/// of the image is centered at (c + 0.5, r + 0.5) in box coordinates, so a box
/// exactly aligned with a side x side pixel region copies it verbatim.
template <typename T>
TensorT<T> warp_region(const TensorT<T>& image, const BoundingBox& b, int side) {
  if (image.rank() != 3) throw ShapeError("warp_region expects an (H, W, C) image");
  if (!b.valid()) throw InvalidBoxError("warp source box has non-positive extent");
  const int h = image.extent(0), w = image.extent(1), ch = image.extent(2);
  if (std::min(b.x2, double(w)) <= std::max(b.x1, 0.0) ||
      std::min(b.y2, double(h)) <= std::max(b.y1, 0.0))
    throw InvalidBoxError("warp source box does not intersect the image");

  TensorT<T> out({side, side, ch});
  const double sx = b.width() / side;
  const double sy = b.height() / side;
  for (int r = 0; r < side; ++r) {
    const double v = b.y1 + (r + 0.5) * sy - 0.5;  // row coordinate in pixel centers
    const int v0 = int(std::floor(v));
    const double fv = v - v0;
    for (int c = 0; c < side; ++c) {
      const double u = b.x1 + (c + 0.5) * sx - 0.5;
      const int u0 = int(std::floor(u));
      const double fu = u - u0;
      for (int k = 0; k < ch; ++k) {
        auto px = [&](int row, int col) -> double {
          if (row < 0 || row >= h || col < 0 || col >= w) return 0.0;
          return double(image.at3(row, col, k));
        };
        const double top = px(v0, u0) * (1 - fu) + px(v0, u0 + 1) * fu;
        const double bot = px(v0 + 1, u0) * (1 - fu) + px(v0 + 1, u0 + 1) * fu;
        out.at3(r, c, k) = T(top * (1 - fv) + bot * fv);
      }
    }
  }
  return out;
}

}  // namespace rebox
