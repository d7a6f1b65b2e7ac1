#include "uam/geometry.hpp"

#include <algorithm>
#include <array>

namespace uam {

namespace {

bool within_box(Vec2 a, Vec2 b, Vec2 p) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) &&
         std::min(a.y, b.y) <= p.y && p.y <= std::max(a.y, b.y);
}

}  // namespace

std::optional<Vec2> segment_intersection(Vec2 p0, Vec2 p1, Vec2 q0, Vec2 q1) {
  const Vec2 r = p1 - p0;
  const Vec2 s = q1 - q0;
  const double denom = cross(r, s);
  const Vec2 qp = q0 - p0;

  if (denom == 0.0) {
    if (cross(qp, r) != 0.0) return std::nullopt;  // parallel, disjoint lines
    for (Vec2 c : std::array{q0, q1}) {
      if (within_box(p0, p1, c)) return c;
    }
    for (Vec2 c : std::array{p0, p1}) {
      if (within_box(q0, q1, c)) return c;
    }
    return std::nullopt;
  }

  const double t = cross(qp, s) / denom;
  const double u = cross(qp, r) / denom;
  if (t < 0.0 || t > 1.0 || u < 0.0 || u > 1.0) return std::nullopt;
  return p0 + t * r;
}

}  // namespace uam
