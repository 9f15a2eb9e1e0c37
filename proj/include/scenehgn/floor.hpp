#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "scenehgn/geometry.hpp"

namespace scenehgn {

inline constexpr int kRingSize = 596;
inline constexpr int kFeatureChannels = 9;

/// Closed ring of kRingSize (x, z) vertices; edge i joins vertex i to i + 1.
using FloorRing = std::vector<Vec2>;

/// Per-vertex features: columns 0-5 hold the symmetric factor embedded in 3D
/// (Sxx, Sxy, Sxz, Syy, Syz, Szz), columns 6-8 the axis-angle rotation log.
using DeformationFeatures = Eigen::Matrix<double, Eigen::Dynamic, kFeatureChannels, Eigen::RowMajor>;

/// Throws InvalidFloor unless the polygon has >= 3 vertices, is simple and
/// counter-clockwise with positive area.
void check_floor(std::span<const Vec2> polygon);

/// Index of the lexicographically smallest (x, z) vertex.
std::size_t anchor_vertex(std::span<const Vec2> polygon);

/// Turning angle above which a polygon vertex is kept as an exact ring vertex.
inline constexpr double kSharpCornerAngle = 0.35;  // about 20 degrees

/// Resamples the polygon boundary into a ring. Ring vertex 0 is the anchor
/// vertex; every sharp corner is hit exactly; the vertices between two
/// consecutive corners are spread uniformly by arc length, with per-chain
/// counts proportional to chain length (largest remainder).
FloorRing register_ring(std::span<const Vec2> polygon);

/// Regular kRingSize-gon of unit circumradius, counter-clockwise in (x, z).
const FloorRing& reference_ring();

/// Fits, at each vertex, the linear map carrying the two incident reference
/// edges onto the ring edges, then splits it into rotation and symmetric
/// factor. Rotation angles are unwrapped along the cycle. Throws
/// DegenerateRing on a zero-length edge or a size mismatch.
DeformationFeatures ring_to_features(const FloorRing& ring, const FloorRing& reference = reference_ring());

/// Least-squares reconstruction from features with vertex `anchor_index`
/// pinned at `anchor_position`.
FloorRing features_to_ring(const DeformationFeatures& features, const FloorRing& reference = reference_ring(),
                           std::size_t anchor_index = 0, const Vec2& anchor_position = Vec2::Zero());

/// Features of the identity deformation.
DeformationFeatures identity_features(std::size_t n = kRingSize);

/// Per-channel mean and max (18 values) mapped to `dim` values by a fixed
/// random matrix drawn from `seed`.
Eigen::VectorXd pool_condition(const DeformationFeatures& features, int dim = 32, std::uint64_t seed = 0xF100B);

/// Drops ring vertices whose incident edges are collinear and same-directed.
std::vector<Vec2> simplify_ring(const FloorRing& ring, double tol = 1e-9);

/// Binary feature file: 8-byte magic "SHGNFLR1" then rows x 9 little-endian
/// float64 values, row-major.
void write_features(const std::string& path, const DeformationFeatures& features);
DeformationFeatures read_features(const std::string& path);
std::string encode_features(const DeformationFeatures& features);
DeformationFeatures decode_features(std::string_view bytes);

}  // namespace scenehgn
