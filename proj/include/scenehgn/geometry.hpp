#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace scenehgn {

using Vec2 = Eigen::Vector2d;  // ground-plane coordinates (x, z)
using Vec3 = Eigen::Vector3d;  // world coordinates, y is up
using Mat3 = Eigen::Matrix3d;

/// Wraps an angle into (-pi, pi].
double wrap_angle(double radians);

/// Rotation by `yaw` about the world up-axis (y).
Mat3 yaw_matrix(double yaw);

/// Applies the yaw rotation to a ground-plane vector (x, z).
Vec2 rotate_ground(const Vec2& v, double yaw);

/// Unit forward direction of a box with the given yaw (its local +x axis),
/// projected to the ground plane.
Vec2 yaw_direction(double yaw);

/// Yaw whose forward direction is `dir` (inverse of yaw_direction).
double direction_yaw(const Vec2& dir);

inline Vec2 ground(const Vec3& p) { return {p.x(), p.z()}; }

/// Oriented box placement: center, full extents, yaw about the up-axis.
struct PlacementParams {
  Vec3 center = Vec3::Zero();
  Vec3 scale = Vec3::Ones();
  double orientation = 0.0;

  PlacementParams() = default;
  /// Normalizes the orientation; throws InvalidPlacement on non-positive or
  /// non-finite extents.
  PlacementParams(const Vec3& center, const Vec3& scale, double orientation);

  bool operator==(const PlacementParams&) const = default;
};

/// Throws InvalidPlacement unless every extent is finite and strictly positive
/// and center/orientation are finite.
void check_placement(const PlacementParams& p);

/// Box corners. Corner i uses sign(+) on local axis k when bit k of i is set
/// (bit 0 = x, bit 1 = y, bit 2 = z); local corner (+-sx/2, +-sy/2, +-sz/2) is
/// rotated by the yaw and translated by the center.
std::array<Vec3, 8> obb_corners(const PlacementParams& p);

/// Face normals in the order +x, -x, +y, -y, +z, -z of the yawed axis set.
std::array<Vec3, 6> obb_normals(const PlacementParams& p);

/// The six unit normals of an axis-aligned unit box (same order).
const std::array<Vec3, 6>& unit_box_normals();

/// Ground-projected corners in counter-clockwise order.
std::array<Vec2, 4> ground_corners(const PlacementParams& p);

/// Radius of the sphere circumscribing the box.
double bounding_radius(const PlacementParams& p);

// ---------------------------------------------------------------------------
// Surface samples

/// Seed shared by every object so congruent boxes get congruent samples.
inline constexpr std::uint64_t kSurfaceSampleSeed = 0x5CE9E5A3D1F0B7ULL;
/// Sample count used by the distance-based relation detectors.
inline constexpr int kDetectionSamples = 2000;

/// Per-face sample counts proportional to face areas (largest remainder,
/// ties to the lower face index). Faces ordered as in obb_normals.
std::array<int, 6> face_sample_counts(const Vec3& scale, int n);

/// Stratified surface samples in unit-cube coordinates: each returned u lies
/// on the surface of [-1/2, 1/2]^3 and the local point is scale.cwiseProduct(u).
/// Face counts come from `face_sample_counts(scale, n)`.
std::vector<Vec3> unit_surface_samples(const Vec3& scale, int n, std::uint64_t seed);

/// Places unit-cube samples on the box surface in world coordinates.
std::vector<Vec3> pose_samples(std::span<const Vec3> unit, const PlacementParams& p);

/// `n` world-space surface samples of the box.
std::vector<Vec3> sample_surface_points(const PlacementParams& p, int n,
                                        std::uint64_t seed = kSurfaceSampleSeed);

/// Rotates points by `angle` about the vertical axis through `pivot`.
std::vector<Vec3> rotate_about(std::span<const Vec3> pts, const Vec2& pivot, double angle);

/// Placement rotated by `angle` about the vertical axis through `pivot`.
PlacementParams rotate_about(const PlacementParams& p, const Vec2& pivot, double angle);

// ---------------------------------------------------------------------------
// Point-set distances

/// Symmetric Chamfer distance: mean over A of the squared distance to the
/// nearest point of B, plus the same from B to A. Throws DomainError on an
/// empty set.
double chamfer_distance(std::span<const Vec3> a, std::span<const Vec3> b);

/// Smallest Euclidean distance between any point of A and any point of B.
double min_pairwise_distance(std::span<const Vec3> a, std::span<const Vec3> b);

// ---------------------------------------------------------------------------
// Ground polygons

/// Shoelace signed area (positive for counter-clockwise in (x, z)).
double signed_area(std::span<const Vec2> poly);

/// True when no two non-adjacent edges intersect and no adjacent edges
/// overlap; requires at least 3 vertices.
bool is_simple_polygon(std::span<const Vec2> poly);

/// True if q lies inside the polygon or on its boundary (within `tol`).
bool point_in_polygon(std::span<const Vec2> poly, const Vec2& q, double tol = 1e-12);

/// Closest point on the polygon boundary to q.
Vec2 closest_boundary_point(std::span<const Vec2> poly, const Vec2& q);

/// Distance from q to the boundary when outside, 0 when inside.
double outside_distance(std::span<const Vec2> poly, const Vec2& q);

}  // namespace scenehgn
