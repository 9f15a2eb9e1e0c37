#pragma once

#include <string>

#include "scenehgn/scene.hpp"

namespace scenehgn {

inline constexpr double kPixelsPerMeter = 100.0;

/// Top-down SVG: floor outline, one rotated rect group per object, dashed
/// convex hull per region, and hyper-edge links from members to their center.
/// Output bytes depend only on the scene.
std::string render_svg(const SceneHierarchy& scene, const SceneConfig& vocab = default_config());

/// Throws IoError when the file cannot be written.
void write_svg(const std::string& path, const SceneHierarchy& scene, const SceneConfig& vocab = default_config());

}  // namespace scenehgn
