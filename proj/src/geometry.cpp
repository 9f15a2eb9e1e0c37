#include "scenehgn/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "scenehgn/errors.hpp"
#include "scenehgn/kdtree.hpp"
#include "scenehgn/rng.hpp"

namespace scenehgn {

double wrap_angle(double radians) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  double r = std::fmod(radians, kTwoPi);
  if (r <= -std::numbers::pi) r += kTwoPi;
  if (r > std::numbers::pi) r -= kTwoPi;
  return r;
}

Mat3 yaw_matrix(double yaw) {
  const double c = std::cos(yaw), s = std::sin(yaw);
  Mat3 r;
  r << c, 0, s,
       0, 1, 0,
      -s, 0, c;
  return r;
}

Vec2 rotate_ground(const Vec2& v, double yaw) {
  const double c = std::cos(yaw), s = std::sin(yaw);
  return {c * v.x() + s * v.y(), -s * v.x() + c * v.y()};
}

Vec2 yaw_direction(double yaw) { return {std::cos(yaw), -std::sin(yaw)}; }

double direction_yaw(const Vec2& dir) { return std::atan2(-dir.y(), dir.x()); }

PlacementParams::PlacementParams(const Vec3& c, const Vec3& s, double o)
    : center(c), scale(s), orientation(wrap_angle(o)) {
  check_placement(*this);
}

void check_placement(const PlacementParams& p) {
  if (!p.center.allFinite() || !std::isfinite(p.orientation)) {
    throw InvalidPlacement("placement has non-finite center or orientation");
  }
  for (int k = 0; k < 3; ++k) {
    if (!(p.scale[k] > 0.0) || !std::isfinite(p.scale[k])) {
      throw InvalidPlacement("placement scale must be finite and strictly positive");
    }
  }
}

std::array<Vec3, 8> obb_corners(const PlacementParams& p) {
  check_placement(p);
  const Mat3 r = yaw_matrix(p.orientation);
  const Vec3 half = 0.5 * p.scale;
  std::array<Vec3, 8> out;
  for (int i = 0; i < 8; ++i) {
    const Vec3 local((i & 1) ? half.x() : -half.x(), (i & 2) ? half.y() : -half.y(),
                     (i & 4) ? half.z() : -half.z());
    out[i] = p.center + r * local;
  }
  return out;
}

const std::array<Vec3, 6>& unit_box_normals() {
  static const std::array<Vec3, 6> n = {Vec3(1, 0, 0),  Vec3(-1, 0, 0), Vec3(0, 1, 0),
                                        Vec3(0, -1, 0), Vec3(0, 0, 1),  Vec3(0, 0, -1)};
  return n;
}

std::array<Vec3, 6> obb_normals(const PlacementParams& p) {
  check_placement(p);
  const Mat3 r = yaw_matrix(p.orientation);
  std::array<Vec3, 6> out;
  for (int i = 0; i < 6; ++i) out[i] = r * unit_box_normals()[i];
  return out;
}

std::array<Vec2, 4> ground_corners(const PlacementParams& p) {
  const double hx = 0.5 * p.scale.x(), hz = 0.5 * p.scale.z();
  const Vec2 c = ground(p.center);
  const std::array<Vec2, 4> local = {Vec2(-hx, -hz), Vec2(hx, -hz), Vec2(hx, hz), Vec2(-hx, hz)};
  std::array<Vec2, 4> out;
  for (int i = 0; i < 4; ++i) out[i] = c + rotate_ground(local[i], p.orientation);
  return out;
}

double bounding_radius(const PlacementParams& p) { return 0.5 * p.scale.norm(); }

// ---------------------------------------------------------------------------

std::array<int, 6> face_sample_counts(const Vec3& scale, int n) {
  const double ax = scale.y() * scale.z(), ay = scale.x() * scale.z(), az = scale.x() * scale.y();
  const std::array<double, 6> area = {ax, ax, ay, ay, az, az};
  const double total = 2.0 * (ax + ay + az);
  if (!(total > 0.0)) throw InvalidPlacement("cannot sample a box with zero surface area");
  std::array<int, 6> counts{};
  std::array<double, 6> frac{};
  int assigned = 0;
  for (int f = 0; f < 6; ++f) {
    const double quota = n * area[f] / total;
    counts[f] = static_cast<int>(std::floor(quota));
    frac[f] = quota - counts[f];
    assigned += counts[f];
  }
  std::array<int, 6> order = {0, 1, 2, 3, 4, 5};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return frac[a] > frac[b]; });
  for (int k = 0; assigned < n; ++k, ++assigned) ++counts[order[k % 6]];
  return counts;
}

std::vector<Vec3> unit_surface_samples(const Vec3& scale, int n, std::uint64_t seed) {
  if (n < 1) throw DomainError("sample count must be at least 1");
  const auto counts = face_sample_counts(scale, n);
  Rng rng(seed);
  std::vector<Vec3> out;
  out.reserve(n);
  for (int f = 0; f < 6; ++f) {
    const int axis = f / 2;
    const double side = (f % 2 == 0) ? 0.5 : -0.5;
    const int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
    for (int k = 0; k < counts[f]; ++k) {
      Vec3 u;
      u[axis] = side;
      u[a1] = rng.uniform() - 0.5;
      u[a2] = rng.uniform() - 0.5;
      out.push_back(u);
    }
  }
  return out;
}

std::vector<Vec3> pose_samples(std::span<const Vec3> unit, const PlacementParams& p) {
  const Mat3 r = yaw_matrix(p.orientation);
  std::vector<Vec3> out;
  out.reserve(unit.size());
  for (const Vec3& u : unit) out.push_back(p.center + r * p.scale.cwiseProduct(u));
  return out;
}

std::vector<Vec3> sample_surface_points(const PlacementParams& p, int n, std::uint64_t seed) {
  check_placement(p);
  const auto unit = unit_surface_samples(p.scale, n, seed);
  return pose_samples(unit, p);
}

std::vector<Vec3> rotate_about(std::span<const Vec3> pts, const Vec2& pivot, double angle) {
  const Mat3 r = yaw_matrix(angle);
  const Vec3 c(pivot.x(), 0.0, pivot.y());
  std::vector<Vec3> out;
  out.reserve(pts.size());
  for (const Vec3& q : pts) out.push_back(c + r * (q - c));
  return out;
}

PlacementParams rotate_about(const PlacementParams& p, const Vec2& pivot, double angle) {
  PlacementParams out = p;
  const Vec2 g = pivot + rotate_ground(ground(p.center) - pivot, angle);
  out.center = Vec3(g.x(), p.center.y(), g.y());
  out.orientation = wrap_angle(p.orientation + angle);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::size_t kBruteForceLimit = 4096;

double directed_mean_sq(std::span<const Vec3> from, std::span<const Vec3> to) {
  double sum = 0.0;
  if (from.size() * to.size() <= kBruteForceLimit) {
    for (const Vec3& p : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const Vec3& q : to) best = std::min(best, (p - q).squaredNorm());
      sum += best;
    }
  } else {
    const KdTree<double> tree(to);
    for (const Vec3& p : from) sum += tree.nearest(p).sq_dist;
  }
  return sum / static_cast<double>(from.size());
}

}  // namespace

double chamfer_distance(std::span<const Vec3> a, std::span<const Vec3> b) {
  if (a.empty() || b.empty()) throw DomainError("chamfer distance of an empty point set");
  return directed_mean_sq(a, b) + directed_mean_sq(b, a);
}

double min_pairwise_distance(std::span<const Vec3> a, std::span<const Vec3> b) {
  if (a.empty() || b.empty()) throw DomainError("distance to an empty point set");
  const auto& small = a.size() <= b.size() ? a : b;
  const auto& large = a.size() <= b.size() ? b : a;
  const KdTree<double> tree(large);
  double best = std::numeric_limits<double>::infinity();
  for (const Vec3& p : small) best = std::min(best, tree.nearest(p).sq_dist);
  return std::sqrt(best);
}

// ---------------------------------------------------------------------------

double signed_area(std::span<const Vec2> poly) {
  double s = 0.0;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % n];
    s += a.x() * b.y() - b.x() * a.y();
  }
  return 0.5 * s;
}

namespace {

double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

bool on_segment(const Vec2& p, const Vec2& a, const Vec2& b) {
  return std::min(a.x(), b.x()) <= p.x() && p.x() <= std::max(a.x(), b.x()) &&
         std::min(a.y(), b.y()) <= p.y() && p.y() <= std::max(a.y(), b.y());
}

int orient(const Vec2& a, const Vec2& b, const Vec2& c) {
  const double v = cross(b - a, c - a);
  return (v > 0) - (v < 0);
}

bool segments_intersect(const Vec2& p1, const Vec2& p2, const Vec2& q1, const Vec2& q2) {
  const int d1 = orient(q1, q2, p1), d2 = orient(q1, q2, p2);
  const int d3 = orient(p1, p2, q1), d4 = orient(p1, p2, q2);
  if (d1 * d2 < 0 && d3 * d4 < 0) return true;
  if (d1 == 0 && on_segment(p1, q1, q2)) return true;
  if (d2 == 0 && on_segment(p2, q1, q2)) return true;
  if (d3 == 0 && on_segment(q1, p1, p2)) return true;
  if (d4 == 0 && on_segment(q2, p1, p2)) return true;
  return false;
}

Vec2 closest_on_segment(const Vec2& q, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) return a;
  const double t = std::clamp((q - a).dot(ab) / len2, 0.0, 1.0);
  return a + t * ab;
}

}  // namespace

bool is_simple_polygon(std::span<const Vec2> poly) {
  const std::size_t n = poly.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    if ((poly[i] - poly[(i + 1) % n]).squaredNorm() == 0.0) return false;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a1 = poly[i];
    const Vec2& a2 = poly[(i + 1) % n];
    for (std::size_t j = i + 1; j < n; ++j) {
      const Vec2& b1 = poly[j];
      const Vec2& b2 = poly[(j + 1) % n];
      const bool adjacent = (j == i + 1) || (i == 0 && j == n - 1);
      if (adjacent) {
        // Adjacent edges share one vertex; they must not fold back onto each other.
        const Vec2& shared = (j == i + 1) ? a2 : a1;
        const Vec2& other_a = (j == i + 1) ? a1 : a2;
        const Vec2& other_b = (j == i + 1) ? b2 : b1;
        const Vec2 da = other_a - shared, db = other_b - shared;
        if (std::abs(cross(da, db)) == 0.0 && da.dot(db) > 0.0) return false;
        continue;
      }
      if (segments_intersect(a1, a2, b1, b2)) return false;
    }
  }
  return true;
}

bool point_in_polygon(std::span<const Vec2> poly, const Vec2& q, double tol) {
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % n];
    if ((closest_on_segment(q, a, b) - q).norm() <= tol) return true;
  }
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[j];
    if ((a.y() > q.y()) != (b.y() > q.y())) {
      const double x = a.x() + (q.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
      if (q.x() < x) inside = !inside;
    }
  }
  return inside;
}

Vec2 closest_boundary_point(std::span<const Vec2> poly, const Vec2& q) {
  Vec2 best = poly.front();
  double best_d = std::numeric_limits<double>::infinity();
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 c = closest_on_segment(q, poly[i], poly[(i + 1) % n]);
    const double d = (c - q).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

double outside_distance(std::span<const Vec2> poly, const Vec2& q) {
  if (point_in_polygon(poly, q, 0.0)) return 0.0;
  return (closest_boundary_point(poly, q) - q).norm();
}

}  // namespace scenehgn
