#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scenehgn/scene.hpp"

namespace scenehgn {

struct DetectionThresholds {
  double adjacency_factor = 0.05;
  double symmetry_tol = 0.02;      // meters
  double eps_r = 0.05;             // Chamfer bound for rotational hyper-edges, m^2
  double eps_t = 0.01;             // squared line distance for parallel hyper-edges, m^2
  double align_angle_tol = 0.05;   // radians
  double parallel_angle_tol = 0.02;
  double merge_factor = 2.0;       // merge thresholds = merge_factor * detection thresholds

  /// Throws ConfigError unless every value is strictly positive.
  void check() const;
};

DetectionThresholds load_thresholds(const std::string& path);

/// Per-pair quantities behind the symmetry decisions.
struct PairResiduals {
  double extent = 0.0;        // max |s_a,k - s_b,k|
  double height = 0.0;        // |y_a - y_b|
  double yaw = 0.0;           // |wrap(theta_b - theta_a)|
  double mirror_yaw = 0.0;    // yaw mismatch of the reflected box, modulo pi
  Vec2 rotation_center = Vec2::Zero();
  double rotation_angle = 0.0;
};

PairResiduals pair_residuals(const PlacementParams& a, const PlacementParams& b);

/// Yaw of a's box after mirroring across the vertical plane that bisects the
/// segment from a's to b's center.
double mirrored_yaw(const PlacementParams& a, const PlacementParams& b);

/// Center of the yaw rotation by `angle` that carries point a onto point b.
/// Requires angle != 0 (mod 2 pi).
Vec2 rotation_center(const Vec2& a, const Vec2& b, double angle);

bool detect_adjacency(const ObjectNode& a, const ObjectNode& b, const DetectionThresholds& th);

struct SymmetrySet {
  bool translational = false;
  bool reflective = false;
  bool rotational = false;
  PairResiduals residuals;
};

SymmetrySet detect_binary_symmetries(const ObjectNode& a, const ObjectNode& b,
                                     const DetectionThresholds& th);

/// Chamfer terms CD(O_{i+1}, Rot(p, 2 pi / N) O_i) for the objects ordered by
/// polar angle around the barycenter p, wrap-around term last.
struct NFoldFit {
  Vec2 center = Vec2::Zero();
  std::vector<int> order;  // indices into the input, cyclic order
  std::vector<double> chamfer;
};
NFoldFit fit_nfold(std::span<const ObjectNode> objects, int samples = kDetectionSamples);

std::optional<HyperEdge> detect_nfold_rotation(std::span<const ObjectNode> objects,
                                               const DetectionThresholds& th);

/// Line direction used by the parallel hyper-edge: normalized sum of pairwise
/// center differences over centers sorted by x, then z. Each difference is
/// sign-aligned with the first-to-last difference so that near-vertical lines
/// do not cancel. Returns zero when all centers coincide.
Vec2 parallel_direction(std::span<const Vec2> centers);

std::optional<HyperEdge> detect_parallel_collinear(std::span<const ObjectNode> objects,
                                                   const DetectionThresholds& th);

/// Appendix-style greedy merging over one region's children.
std::vector<HyperEdge> extract_hyperedges(const SceneHierarchy& scene, const RegionNode& region,
                                          const DetectionThresholds& th);

std::vector<VerticalFlags> detect_room_object_edges(const SceneHierarchy& scene,
                                                    const DetectionThresholds& th);

/// Binary edges between every pair of objects sharing a region (all pairs when
/// the scene has no regions), in canonical order.
std::vector<BinaryEdge> detect_binary_edges(const SceneHierarchy& scene, const DetectionThresholds& th);

/// Returns the scene with its whole edge set recomputed.
SceneHierarchy detect_relations(const SceneHierarchy& scene, const DetectionThresholds& th = {});

/// Orders edges canonically: binary by (type, a, b) with a < b, hyper-edges by
/// smallest member id, vertical flags by object order.
void canonicalize_edges(EdgeSet& edges, const SceneHierarchy& scene);

}  // namespace scenehgn
