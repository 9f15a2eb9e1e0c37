#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scenehgn/scene.hpp"

namespace scenehgn {

/// Relation pattern planted in one region.
enum class Pattern {
  NFold,        // dining table with n chairs facing it
  Collinear,    // bed flanked by n - 1 nightstands on one line
  WardrobeRow,  // n touching wardrobes in a row
  Pair,         // coffee table between two facing armchairs
  Office,       // desk with a chair in front
  Single        // a lone bookshelf
};

enum class FloorShape { Rectangle, LShape, Rectilinear };

struct RegionSpec {
  Pattern pattern = Pattern::Single;
  int count = 0;  // n for NFold, Collinear and WardrobeRow
};

struct SceneTemplate {
  std::string room_type = "living_room";
  FloorShape floor = FloorShape::Rectangle;
  std::vector<RegionSpec> regions;
  double sigma_pos = 0.0;  // meters
  double sigma_yaw = 0.0;  // radians

  /// Throws GenerationError when the template cannot be realized.
  void check() const;
};

struct GeneratedScene {
  SceneHierarchy scene;  // edges hold the planted relations
  /// Copy of the planted relations (kept when `scene` is perturbed).
  EdgeSet annotations;
};

/// Deterministic per seed. Patterns are placed at least 1 m apart, rotated by
/// a seeded multiple of 90 degrees, inside a floor of the requested shape.
/// Every relation in `annotations` is computed from the construction.
GeneratedScene gen_scene(const SceneTemplate& t, std::uint64_t seed);

/// Seeded random template with 1 to 4 regions and no noise.
SceneTemplate random_template(std::uint64_t seed);

/// Gaussian noise on center (x, z) and yaw; scales untouched.
SceneHierarchy perturb(const SceneHierarchy& scene, double sigma_pos, double sigma_yaw, std::uint64_t seed);

/// `count` scenes from random_template(mix_seed(seed, i)).
std::vector<GeneratedScene> gen_corpus(int count, std::uint64_t seed);

/// Writes scene_NNNN.json files and ground_truth.json into `dir` (created if
/// missing).
void write_corpus(const std::string& dir, const std::vector<GeneratedScene>& corpus);

std::string_view to_string(Pattern p);
std::string_view to_string(FloorShape f);

}  // namespace scenehgn
