#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "scenehgn/geometry.hpp"
#include "scenehgn/rng.hpp"
#include "scenehgn/scene.hpp"

namespace scenehgn::testing {

inline ObjectNode make_object(const std::string& id, const std::string& category, const Vec3& center,
                              const Vec3& scale, double yaw) {
  ObjectNode o;
  o.id = id;
  o.category = category;
  o.placement = PlacementParams(center, scale, yaw);
  o.feature.assign(static_cast<std::size_t>(default_config().feature_dim), 0.0);
  return o;
}

inline std::vector<Vec2> rect_floor(double x0, double z0, double x1, double z1) {
  return {{x0, z0}, {x1, z0}, {x1, z1}, {x0, z1}};
}

/// Random box with extents in [0.3, 2] and yaw in (-pi, pi].
inline PlacementParams random_placement(Rng& rng, double spread = 3.0) {
  return PlacementParams(Vec3(rng.uniform(-spread, spread), rng.uniform(0.0, 1.0), rng.uniform(-spread, spread)),
                         Vec3(rng.uniform(0.3, 2.0), rng.uniform(0.3, 2.0), rng.uniform(0.3, 2.0)),
                         rng.uniform(-3.14159, 3.14159));
}

/// One region holding every object, wall-aligned and inside flags unset.
inline SceneHierarchy scene_of(std::vector<ObjectNode> objects, std::vector<Vec2> floor = rect_floor(-6, -6, 6, 6)) {
  SceneHierarchy s;
  s.room_id = "test";
  s.room_type = "living_room";
  s.floor = std::move(floor);
  RegionNode r;
  r.id = "region_0";
  for (const auto& o : objects) r.children.push_back(o.id);
  s.objects = std::move(objects);
  if (!r.children.empty()) s.regions.push_back(r);
  return s;
}

/// Independent yaw rotation about +y: x' = c x + s z, z' = -s x + c z.
inline Vec3 yaw_rotate(const Vec3& v, double yaw) {
  const double c = std::cos(yaw), s = std::sin(yaw);
  return {c * v.x() + s * v.z(), v.y(), -s * v.x() + c * v.z()};
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}); }

}  // namespace scenehgn::testing
