#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "scenehgn/geometry.hpp"

namespace scenehgn {

inline constexpr int kMaxChildren = 10;

enum class RegionType { Living, Dining, Office, Ceil, Cabinet };
inline constexpr int kNumRegionTypes = 5;

enum class BinaryEdgeType { Adjacency, Translational, Reflective, Rotational };
inline constexpr int kNumBinaryEdgeTypes = 4;

enum class HyperEdgeType { NFoldRotation, ParallelCollinear };

std::string_view to_string(RegionType t);
std::string_view to_string(BinaryEdgeType t);
std::string_view to_string(HyperEdgeType t);
/// Parsers return nullopt for unknown names.
std::optional<RegionType> parse_region_type(std::string_view s);
std::optional<BinaryEdgeType> parse_binary_edge_type(std::string_view s);
std::optional<HyperEdgeType> parse_hyper_edge_type(std::string_view s);

/// Category vocabulary, object-feature size, and the category -> region type
/// table used by region extraction.
struct SceneConfig {
  std::vector<std::string> categories;
  int feature_dim = 8;
  std::map<std::string, RegionType> label_map;
  RegionType default_region = RegionType::Living;

  /// Index of a category, or -1.
  int category_index(std::string_view category) const;
  RegionType region_for(std::string_view category) const;
};

/// Built-in 3D-FRONT-style vocabulary.
const SceneConfig& default_config();
/// Loads a config JSON file ({categories, feature_dim, label_map}); missing
/// keys fall back to the defaults.
SceneConfig load_config(const std::string& path);

struct ObjectNode {
  std::string id;
  std::string category;
  PlacementParams placement;
  std::vector<double> feature;

  bool operator==(const ObjectNode&) const = default;
};

struct RegionNode {
  std::string id;
  RegionType region_type = RegionType::Living;
  std::vector<std::string> children;

  bool operator==(const RegionNode&) const = default;
};

struct BinaryEdge {
  BinaryEdgeType type = BinaryEdgeType::Adjacency;
  std::string a, b;

  bool operator==(const BinaryEdge&) const = default;
};

/// N-ary relation. For NFoldRotation `center` is the rotation center (x, z),
/// `fold` the symmetry order and `hub` the optional central object the members
/// face; for ParallelCollinear `direction` is the shared line direction (x, z).
struct HyperEdge {
  HyperEdgeType type = HyperEdgeType::ParallelCollinear;
  std::vector<std::string> members;
  Vec2 center = Vec2::Zero();
  int fold = 0;
  std::optional<std::string> hub;
  Vec2 direction = Vec2::Zero();

  bool operator==(const HyperEdge&) const = default;
};

/// Room-to-object flags: aligned with the (axis-aligned) walls, and inside
/// the floor polygon.
struct VerticalFlags {
  std::string object;
  bool align = false;
  bool inside = false;

  bool operator==(const VerticalFlags&) const = default;
};

struct EdgeSet {
  std::vector<BinaryEdge> binary;
  std::vector<HyperEdge> hyper;
  std::vector<VerticalFlags> vertical;

  bool operator==(const EdgeSet&) const = default;
};

struct SceneHierarchy {
  std::string room_id;
  std::string room_type;  // free-form tag, used by the per-room-type metrics
  std::vector<Vec2> floor;  // counter-clockwise (x, z) polygon
  std::vector<RegionNode> regions;
  std::vector<ObjectNode> objects;
  EdgeSet edges;

  const ObjectNode* find_object(std::string_view id) const;
  ObjectNode* find_object(std::string_view id);
  /// Index into `objects`, or -1.
  int object_index(std::string_view id) const;
  /// Region that lists the object as a child, or nullptr.
  const RegionNode* region_of(std::string_view object_id) const;
  const VerticalFlags* vertical_of(std::string_view object_id) const;

  bool operator==(const SceneHierarchy&) const = default;
};

struct Violation {
  std::string node;
  std::string rule;
  std::string message;
};

/// Lists every broken invariant; empty when the scene is well formed.
std::vector<Violation> validate(const SceneHierarchy& scene,
                                const SceneConfig& config = default_config());

}  // namespace scenehgn
