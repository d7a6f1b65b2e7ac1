#pragma once

#include <cmath>
#include <optional>

namespace uam {

inline constexpr double kFeetToMeters = 0.3048;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 v) { return {s * v.x, s * v.y}; }
  friend bool operator==(Vec2 a, Vec2 b) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 v) { return std::hypot(v.x, v.y); }
inline double distance(Vec2 a, Vec2 b) { return norm(b - a); }

// Point where segments [p0,p1] and [q0,q1] meet. Collinear overlaps report
// the first overlapping endpoint.
std::optional<Vec2> segment_intersection(Vec2 p0, Vec2 p1, Vec2 q0, Vec2 q1);

}  // namespace uam
