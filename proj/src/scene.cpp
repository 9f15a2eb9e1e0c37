#include "scenehgn/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "json.hpp"

#include "scenehgn/errors.hpp"

namespace scenehgn {

namespace {

constexpr std::string_view kRegionNames[] = {"Living_region", "Dining_region", "Office_region",
                                             "Ceil_region", "Cabinet_region"};
constexpr std::string_view kBinaryNames[] = {"adjacency", "translational", "reflective",
                                             "rotational"};
constexpr std::string_view kHyperNames[] = {"nfold_rotation", "parallel_collinear"};

template <typename Enum, std::size_t N>
std::optional<Enum> parse_name(const std::string_view (&names)[N], std::string_view s) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == s) return static_cast<Enum>(i);
  }
  return std::nullopt;
}

}  // namespace

std::string_view to_string(RegionType t) { return kRegionNames[static_cast<int>(t)]; }
std::string_view to_string(BinaryEdgeType t) { return kBinaryNames[static_cast<int>(t)]; }
std::string_view to_string(HyperEdgeType t) { return kHyperNames[static_cast<int>(t)]; }

std::optional<RegionType> parse_region_type(std::string_view s) {
  return parse_name<RegionType>(kRegionNames, s);
}
std::optional<BinaryEdgeType> parse_binary_edge_type(std::string_view s) {
  return parse_name<BinaryEdgeType>(kBinaryNames, s);
}
std::optional<HyperEdgeType> parse_hyper_edge_type(std::string_view s) {
  return parse_name<HyperEdgeType>(kHyperNames, s);
}

// ---------------------------------------------------------------------------

int SceneConfig::category_index(std::string_view category) const {
  const auto it = std::find(categories.begin(), categories.end(), category);
  return it == categories.end() ? -1 : static_cast<int>(it - categories.begin());
}

RegionType SceneConfig::region_for(std::string_view category) const {
  const auto it = label_map.find(std::string(category));
  return it == label_map.end() ? default_region : it->second;
}

const SceneConfig& default_config() {
  static const SceneConfig config = [] {
    SceneConfig c;
    c.categories = {"bed",         "nightstand",   "wardrobe",     "cabinet",
                    "dining_table", "dining_chair", "coffee_table", "sofa",
                    "armchair",    "tv_stand",     "desk",         "office_chair",
                    "bookshelf",   "ceiling_lamp", "floor_lamp",   "dresser"};
    c.feature_dim = 8;
    using R = RegionType;
    // No sleeping region exists among the five types; beds route to Living.
    c.label_map = {{"bed", R::Living},         {"nightstand", R::Cabinet},
                   {"wardrobe", R::Cabinet},   {"cabinet", R::Cabinet},
                   {"dining_table", R::Dining}, {"dining_chair", R::Dining},
                   {"coffee_table", R::Living}, {"sofa", R::Living},
                   {"armchair", R::Living},    {"tv_stand", R::Living},
                   {"desk", R::Office},        {"office_chair", R::Office},
                   {"bookshelf", R::Cabinet},  {"ceiling_lamp", R::Ceil},
                   {"floor_lamp", R::Ceil},    {"dresser", R::Cabinet}};
    return c;
  }();
  return config;
}

SceneConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path, e.what());
  }
  SceneConfig c = default_config();
  try {
    if (j.contains("categories")) c.categories = j.at("categories").get<std::vector<std::string>>();
    if (j.contains("feature_dim")) c.feature_dim = j.at("feature_dim").get<int>();
    if (j.contains("label_map")) {
      c.label_map.clear();
      for (const auto& [k, v] : j.at("label_map").items()) {
        const auto t = parse_region_type(v.get<std::string>());
        if (!t) throw ParseError(path + ":/label_map/" + k, "unknown region type");
        c.label_map[k] = *t;
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path, e.what());
  }
  if (c.feature_dim < 1) throw ConfigError("feature_dim must be at least 1");
  if (c.categories.empty()) throw ConfigError("category vocabulary is empty");
  return c;
}

// ---------------------------------------------------------------------------

int SceneHierarchy::object_index(std::string_view id) const {
  for (std::size_t i = 0; i < objects.size(); ++i) {
    if (objects[i].id == id) return static_cast<int>(i);
  }
  return -1;
}

const ObjectNode* SceneHierarchy::find_object(std::string_view id) const {
  const int i = object_index(id);
  return i < 0 ? nullptr : &objects[i];
}

ObjectNode* SceneHierarchy::find_object(std::string_view id) {
  const int i = object_index(id);
  return i < 0 ? nullptr : &objects[i];
}

const RegionNode* SceneHierarchy::region_of(std::string_view object_id) const {
  for (const auto& r : regions) {
    if (std::find(r.children.begin(), r.children.end(), object_id) != r.children.end()) return &r;
  }
  return nullptr;
}

const VerticalFlags* SceneHierarchy::vertical_of(std::string_view object_id) const {
  for (const auto& v : edges.vertical) {
    if (v.object == object_id) return &v;
  }
  return nullptr;
}

// ---------------------------------------------------------------------------

std::vector<Violation> validate(const SceneHierarchy& scene, const SceneConfig& config) {
  std::vector<Violation> out;
  auto report = [&](const std::string& node, const char* rule, std::string msg) {
    out.push_back({node, rule, std::move(msg)});
  };

  std::map<std::string, int> membership;
  std::set<std::string> object_ids;
  for (const auto& o : scene.objects) {
    if (!object_ids.insert(o.id).second) report(o.id, "unique_id", "duplicate object id");
    membership[o.id] = 0;
    const auto& p = o.placement;
    for (int k = 0; k < 3; ++k) {
      if (!(p.scale[k] > 0.0) || !std::isfinite(p.scale[k])) {
        report(o.id, "scale_positive", "scale components must be strictly positive");
        break;
      }
    }
    if (!p.center.allFinite()) report(o.id, "center_finite", "center must be finite");
    if (!(p.orientation > -std::numbers::pi && p.orientation <= std::numbers::pi)) {
      report(o.id, "orientation_range", "orientation must lie in (-pi, pi]");
    }
    if (config.category_index(o.category) < 0) {
      report(o.id, "category_vocab", "category '" + o.category + "' not in vocabulary");
    }
    if (static_cast<int>(o.feature.size()) != config.feature_dim) {
      report(o.id, "feature_dim",
             "feature has " + std::to_string(o.feature.size()) + " values, expected " +
                 std::to_string(config.feature_dim));
    }
  }

  if (scene.regions.empty() || static_cast<int>(scene.regions.size()) > kMaxChildren) {
    report(scene.room_id, "room_region_count", "room must have 1 to 10 regions, has " +
                                                   std::to_string(scene.regions.size()));
  }
  std::set<std::string> region_ids;
  for (const auto& r : scene.regions) {
    if (!region_ids.insert(r.id).second) report(r.id, "unique_id", "duplicate region id");
    if (object_ids.count(r.id)) report(r.id, "unique_id", "region id collides with an object id");
    if (r.children.empty() || static_cast<int>(r.children.size()) > kMaxChildren) {
      report(r.id, "region_child_count", "region must have 1 to 10 children, has " +
                                             std::to_string(r.children.size()));
    }
    for (const auto& c : r.children) {
      const auto it = membership.find(c);
      if (it == membership.end()) {
        report(r.id, "child_exists", "child '" + c + "' is not an object");
      } else {
        ++it->second;
      }
    }
  }
  for (const auto& [id, count] : membership) {
    if (count != 1) {
      report(id, "single_region",
             "object belongs to " + std::to_string(count) + " regions, expected exactly 1");
    }
  }

  std::set<std::tuple<int, std::string, std::string>> seen_binary;
  for (const auto& e : scene.edges.binary) {
    const std::string label = std::string(to_string(e.type)) + ":" + e.a + "-" + e.b;
    if (!object_ids.count(e.a) || !object_ids.count(e.b)) {
      report(label, "edge_endpoint", "binary edge endpoint does not exist");
      continue;
    }
    if (e.a == e.b) report(label, "edge_self", "binary edge joins an object to itself");
    const auto key = std::make_tuple(static_cast<int>(e.type), std::min(e.a, e.b), std::max(e.a, e.b));
    if (!seen_binary.insert(key).second) report(label, "edge_duplicate", "duplicate binary edge");
  }

  for (std::size_t h = 0; h < scene.edges.hyper.size(); ++h) {
    const auto& e = scene.edges.hyper[h];
    const std::string label = "hyper#" + std::to_string(h);
    if (e.members.size() < 3) report(label, "hyper_member_count", "hyper-edge needs at least 3 members");
    std::set<std::string> distinct(e.members.begin(), e.members.end());
    if (distinct.size() != e.members.size()) report(label, "hyper_distinct", "hyper-edge members repeat");
    bool endpoints_ok = true;
    for (const auto& m : e.members) {
      if (!object_ids.count(m)) {
        report(label, "edge_endpoint", "hyper-edge member '" + m + "' does not exist");
        endpoints_ok = false;
      }
    }
    if (!endpoints_ok) continue;
    std::set<const RegionNode*> owners;
    for (const auto& m : e.members) owners.insert(scene.region_of(m));
    if (owners.size() > 1) report(label, "hyper_same_region", "hyper-edge spans several regions");
    if (e.type == HyperEdgeType::NFoldRotation && e.hub) {
      if (!object_ids.count(*e.hub)) {
        report(label, "edge_endpoint", "hyper-edge hub does not exist");
      } else if (distinct.count(*e.hub)) {
        report(label, "hyper_hub", "hub must not be a member");
      } else if (owners.size() == 1 && scene.region_of(*e.hub) != *owners.begin()) {
        report(label, "hyper_same_region", "hub lies in another region");
      }
    }
  }

  std::set<std::string> seen_vertical;
  for (const auto& v : scene.edges.vertical) {
    if (!object_ids.count(v.object)) report(v.object, "edge_endpoint", "vertical flags for unknown object");
    if (!seen_vertical.insert(v.object).second) report(v.object, "vertical_duplicate", "duplicate vertical flags");
  }
  return out;
}

}  // namespace scenehgn
