#pragma once

#include <span>
#include <vector>

#include "scenehgn/scene.hpp"

namespace scenehgn {

struct ClusterParams {
  double eps = 0.5;
  int min_pts = 30;
  int samples_per_object = 10000;

  /// Throws ConfigError on invalid values.
  void check() const;
};

inline constexpr int kNoise = -1;

/// DBSCAN. A point is core when at least `min_pts` points (itself included)
/// lie within `eps`. Clusters are numbered in order of their first core point;
/// a border point joins the cluster of its lowest-index core neighbour.
std::vector<int> dbscan(std::span<const Vec3> points, double eps, int min_pts);

/// Groups objects into functional regions. Objects take the cluster holding
/// most of their surface samples; objects with only noise samples become
/// singleton regions; clusters above the child cap are re-clustered with a
/// halved radius. Region ids are "region_<k>".
std::vector<RegionNode> extract_regions(std::span<const ObjectNode> objects, const ClusterParams& params,
                                        const SceneConfig& config = default_config());

/// Scene with its regions replaced by extract_regions over all objects.
SceneHierarchy assign_regions(const SceneHierarchy& scene, const ClusterParams& params,
                              const SceneConfig& config = default_config());

}  // namespace scenehgn
