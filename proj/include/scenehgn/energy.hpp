#pragma once

#include <array>
#include <map>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "scenehgn/scene.hpp"

namespace scenehgn {

struct EnergyWeights {
  double w_locate = 1.0;
  double w_ro = 1.0;
  double w_inside = 1.0;
  double w_hrot = 1.0;
  double w_hpara = 1.0;
  double w_binary = 1.0;

  /// Throws ConfigError on a negative or non-finite weight.
  void check() const;
};

EnergyWeights load_weights(const std::string& path);

/// Discrete orientation classes: 0, 45, 90, 135, 180, -45, -90, -135 degrees.
inline constexpr std::array<double, 8> kAngleTable = {
    0.0,
    std::numbers::pi / 4,
    std::numbers::pi / 2,
    3 * std::numbers::pi / 4,
    std::numbers::pi,
    -std::numbers::pi / 4,
    -std::numbers::pi / 2,
    -3 * std::numbers::pi / 4};
inline constexpr double kMaxAngleOffset = std::numbers::pi / 8;  // 22.5 degrees

/// Index of the table angle closest to `yaw` on the circle (ties to the lower
/// index) and the wrapped residual yaw - Angle[k].
struct AngleClass {
  int index = 0;
  double residual = 0.0;
};
AngleClass nearest_angle_class(double yaw);

struct OrientationPrediction {
  std::array<double, 8> rho{};
  double b = 0.0;
};

/// d_center + d_scale + d_orient. The orientation difference is wrapped to
/// (-pi, pi]. Throws DomainError when |b| exceeds 22.5 degrees.
double placement_loss(const PlacementParams& pred, const OrientationPrediction& orient,
                      const PlacementParams& gt);

/// Chamfer distance between the yaw-rotated unit-box normals and the
/// canonical set.
double room_object_loss(double yaw);
/// Sum of room_object_loss over objects whose vertical flags set `align`.
double room_object_loss(const SceneHierarchy& scene);

/// Sum over the four ground corners of the squared distance outside `floor`.
double containment_penalty(std::span<const Vec2> floor, const PlacementParams& p);
double containment_penalty(const SceneHierarchy& scene);

/// Default number of surface samples per object inside energy terms.
inline constexpr int kEnergySamples = 256;

/// Sum over members of the smallest Chamfer distance to the 2 pi / N rotation
/// (about the barycenter) of any other member. All members share unit samples
/// generated from their mean extent.
double hyper_rotation_loss(std::span<const PlacementParams> members, int samples = kEnergySamples);

/// Squared ground distance between the hub center and the members' barycenter.
double hyper_hub_loss(std::span<const PlacementParams> members, const PlacementParams& hub);

struct ParallelLoss {
  double normals = 0.0;  // pairwise Chamfer between rotated normal sets
  double line = 0.0;     // squared perpendicular distances to the line (p, v)
  double total() const { return normals + line; }
};
ParallelLoss hyper_parallel_loss(std::span<const PlacementParams> members);

/// Squared residual of the symmetry implied by `type` (adjacency has none).
double binary_symmetry_residual(BinaryEdgeType type, const PlacementParams& a, const PlacementParams& b);
double binary_symmetry_residual(const BinaryEdge& edge, const SceneHierarchy& scene);

using Gradient7 = Eigen::Matrix<double, 7, 1>;  // d/d(center, scale, orientation)

struct EnergyOptions {
  EnergyWeights weights;
  int samples = kEnergySamples;
  /// Target placements for the locate term (skipped when null).
  const SceneHierarchy* reference = nullptr;
  bool compute_gradient = true;
};

struct EnergyReport {
  std::map<std::string, double> terms;  // unweighted values
  double total = 0.0;
  std::map<std::string, Gradient7> gradient;
};

/// Names of the reported terms, in summation order.
const std::vector<std::string>& energy_term_names();

EnergyReport total_energy(const SceneHierarchy& scene, const EnergyOptions& options = {});

}  // namespace scenehgn
