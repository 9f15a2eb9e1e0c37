#include "scenehgn/serialize.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "scenehgn/errors.hpp"

namespace scenehgn {

namespace {

void dump_number(const Json& j, std::string& out) {
  if (j.is_number_integer()) {
    out += j.dump();
    return;
  }
  const double v = j.get<double>();
  if (!std::isfinite(v)) {
    out += "null";
    return;
  }
  char buf[40];
  std::snprintf(buf, sizeof buf, "%#.17g", v);
  out += buf;
}

void dump_rec(const Json& j, int depth, std::string& out) {
  const std::string pad(2 * depth + 2, ' ');
  const std::string close_pad(2 * depth, ' ');
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (const auto& [k, v] : j.items()) {
        if (!first) out += ",\n";
        first = false;
        out += pad;
        out += Json(k).dump();
        out += ": ";
        dump_rec(v, depth + 1, out);
      }
      out += "\n" + close_pad + "}";
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      // Short numeric arrays (coordinates, features) stay on one line.
      const bool flat = std::all_of(j.begin(), j.end(), [](const Json& e) { return e.is_number(); });
      if (flat) {
        out += "[";
        for (std::size_t i = 0; i < j.size(); ++i) {
          if (i) out += ", ";
          dump_number(j[i], out);
        }
        out += "]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ",\n";
        out += pad;
        dump_rec(j[i], depth + 1, out);
      }
      out += "\n" + close_pad + "]";
      return;
    }
    case Json::value_t::number_float:
    case Json::value_t::number_integer:
    case Json::value_t::number_unsigned:
      dump_number(j, out);
      return;
    default:
      out += j.dump();
  }
}

Json vec_json(const Vec2& v) { return Json::array({v.x(), v.y()}); }
Json vec_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

// Checked accessors that report the JSON pointer of the failing field.
const Json& field(const Json& obj, const char* key, const std::string& path) {
  if (!obj.is_object()) throw ParseError(path.empty() ? "/" : path, "expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(path + "/" + key, "missing field");
  return *it;
}

std::string get_string(const Json& j, const std::string& path) {
  if (!j.is_string()) throw ParseError(path, "expected a string");
  return j.get<std::string>();
}

double get_number(const Json& j, const std::string& path) {
  if (!j.is_number()) throw ParseError(path, "expected a number");
  return j.get<double>();
}

int get_int(const Json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ParseError(path, "expected an integer");
  return j.get<int>();
}

bool get_bool(const Json& j, const std::string& path) {
  if (!j.is_boolean()) throw ParseError(path, "expected a boolean");
  return j.get<bool>();
}

const Json& get_array(const Json& j, const std::string& path) {
  if (!j.is_array()) throw ParseError(path, "expected an array");
  return j;
}

template <int N>
Eigen::Matrix<double, N, 1> get_vec(const Json& j, const std::string& path) {
  get_array(j, path);
  if (j.size() != N) throw ParseError(path, "expected " + std::to_string(N) + " numbers");
  Eigen::Matrix<double, N, 1> v;
  for (int i = 0; i < N; ++i) v[i] = get_number(j[i], path + "/" + std::to_string(i));
  return v;
}

std::vector<std::string> get_strings(const Json& j, const std::string& path) {
  get_array(j, path);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(get_string(j[i], path + "/" + std::to_string(i)));
  return out;
}

}  // namespace

std::string dump_json(const Json& j) {
  std::string out;
  dump_rec(j, 0, out);
  out += "\n";
  return out;
}

Json scene_to_json(const SceneHierarchy& scene) {
  Json j;
  j["room_id"] = scene.room_id;
  if (!scene.room_type.empty()) j["room_type"] = scene.room_type;
  Json floor = Json::array();
  for (const auto& v : scene.floor) floor.push_back(vec_json(v));
  j["floor"] = floor;

  Json regions = Json::array();
  for (const auto& r : scene.regions) {
    Json jr;
    jr["id"] = r.id;
    jr["region_type"] = std::string(to_string(r.region_type));
    jr["children"] = r.children;
    regions.push_back(jr);
  }
  j["regions"] = regions;

  Json objects = Json::array();
  for (const auto& o : scene.objects) {
    Json jo;
    jo["id"] = o.id;
    jo["category"] = o.category;
    jo["center"] = vec_json(o.placement.center);
    jo["scale"] = vec_json(o.placement.scale);
    jo["orientation"] = o.placement.orientation;
    Json f = Json::array();
    for (double x : o.feature) f.push_back(x);
    jo["feature"] = f;
    objects.push_back(jo);
  }
  j["objects"] = objects;

  Json binary = Json::array();
  for (const auto& e : scene.edges.binary) {
    binary.push_back(Json{{"type", std::string(to_string(e.type))}, {"a", e.a}, {"b", e.b}});
  }
  Json hyper = Json::array();
  for (const auto& e : scene.edges.hyper) {
    Json jh;
    jh["type"] = std::string(to_string(e.type));
    jh["members"] = e.members;
    Json params = Json::object();
    if (e.type == HyperEdgeType::NFoldRotation) {
      params["center"] = vec_json(e.center);
      params["n"] = e.fold;
      if (e.hub) params["hub"] = *e.hub;
    } else {
      params["direction"] = vec_json(e.direction);
    }
    jh["params"] = params;
    hyper.push_back(jh);
  }
  Json vertical = Json::array();
  for (const auto& v : scene.edges.vertical) {
    vertical.push_back(Json{{"object", v.object}, {"align", v.align}, {"inside", v.inside}});
  }
  j["edges"] = Json{{"binary", binary}, {"hyper", hyper}, {"vertical", vertical}};
  return j;
}

SceneHierarchy scene_from_json(const Json& j) {
  SceneHierarchy s;
  s.room_id = get_string(field(j, "room_id", ""), "/room_id");
  if (j.contains("room_type")) s.room_type = get_string(j["room_type"], "/room_type");

  const Json& floor = get_array(field(j, "floor", ""), "/floor");
  for (std::size_t i = 0; i < floor.size(); ++i) {
    s.floor.push_back(get_vec<2>(floor[i], "/floor/" + std::to_string(i)));
  }

  const Json& regions = get_array(field(j, "regions", ""), "/regions");
  for (std::size_t i = 0; i < regions.size(); ++i) {
    const std::string p = "/regions/" + std::to_string(i);
    RegionNode r;
    r.id = get_string(field(regions[i], "id", p), p + "/id");
    const auto name = get_string(field(regions[i], "region_type", p), p + "/region_type");
    const auto t = parse_region_type(name);
    if (!t) throw ParseError(p + "/region_type", "unknown region type '" + name + "'");
    r.region_type = *t;
    r.children = get_strings(field(regions[i], "children", p), p + "/children");
    s.regions.push_back(std::move(r));
  }

  const Json& objects = get_array(field(j, "objects", ""), "/objects");
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const std::string p = "/objects/" + std::to_string(i);
    const Json& jo = objects[i];
    ObjectNode o;
    o.id = get_string(field(jo, "id", p), p + "/id");
    o.category = get_string(field(jo, "category", p), p + "/category");
    // Stored verbatim; out-of-range values surface through validate().
    o.placement.center = get_vec<3>(field(jo, "center", p), p + "/center");
    o.placement.scale = get_vec<3>(field(jo, "scale", p), p + "/scale");
    o.placement.orientation = get_number(field(jo, "orientation", p), p + "/orientation");
    const Json& f = get_array(field(jo, "feature", p), p + "/feature");
    for (std::size_t k = 0; k < f.size(); ++k) o.feature.push_back(get_number(f[k], p + "/feature/" + std::to_string(k)));
    s.objects.push_back(std::move(o));
  }

  const Json& edges = field(j, "edges", "");
  const Json& binary = get_array(field(edges, "binary", "/edges"), "/edges/binary");
  for (std::size_t i = 0; i < binary.size(); ++i) {
    const std::string p = "/edges/binary/" + std::to_string(i);
    BinaryEdge e;
    const auto name = get_string(field(binary[i], "type", p), p + "/type");
    const auto t = parse_binary_edge_type(name);
    if (!t) throw ParseError(p + "/type", "unknown binary edge type '" + name + "'");
    e.type = *t;
    e.a = get_string(field(binary[i], "a", p), p + "/a");
    e.b = get_string(field(binary[i], "b", p), p + "/b");
    s.edges.binary.push_back(std::move(e));
  }
  const Json& hyper = get_array(field(edges, "hyper", "/edges"), "/edges/hyper");
  for (std::size_t i = 0; i < hyper.size(); ++i) {
    const std::string p = "/edges/hyper/" + std::to_string(i);
    HyperEdge e;
    const auto name = get_string(field(hyper[i], "type", p), p + "/type");
    const auto t = parse_hyper_edge_type(name);
    if (!t) throw ParseError(p + "/type", "unknown hyper-edge type '" + name + "'");
    e.type = *t;
    e.members = get_strings(field(hyper[i], "members", p), p + "/members");
    const Json& params = field(hyper[i], "params", p);
    const std::string pp = p + "/params";
    if (e.type == HyperEdgeType::NFoldRotation) {
      e.center = get_vec<2>(field(params, "center", pp), pp + "/center");
      e.fold = get_int(field(params, "n", pp), pp + "/n");
      if (params.contains("hub")) e.hub = get_string(params["hub"], pp + "/hub");
    } else {
      e.direction = get_vec<2>(field(params, "direction", pp), pp + "/direction");
    }
    s.edges.hyper.push_back(std::move(e));
  }
  const Json& vertical = get_array(field(edges, "vertical", "/edges"), "/edges/vertical");
  for (std::size_t i = 0; i < vertical.size(); ++i) {
    const std::string p = "/edges/vertical/" + std::to_string(i);
    VerticalFlags v;
    v.object = get_string(field(vertical[i], "object", p), p + "/object");
    v.align = get_bool(field(vertical[i], "align", p), p + "/align");
    v.inside = get_bool(field(vertical[i], "inside", p), p + "/inside");
    s.edges.vertical.push_back(std::move(v));
  }
  return s;
}

std::string serialize_scene(const SceneHierarchy& scene) { return dump_json(scene_to_json(scene)); }

Json parse_json(std::string_view text, const std::string& source) {
  try {
    return Json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(source + " byte " + std::to_string(e.byte), e.what());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(source, e.what());
  }
}

SceneHierarchy deserialize_scene(std::string_view text) {
  const Json j = parse_json(text);
  try {
    return scene_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("/", e.what());
  }
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("write failed for " + path);
}

SceneHierarchy load_scene(const std::string& path) {
  const std::string text = read_text_file(path);
  const Json j = parse_json(text, path);
  try {
    return scene_from_json(j);
  } catch (const ParseError& e) {
    throw ParseError(path + ":" + e.where(), e.what());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path, e.what());
  }
}

void save_scene(const std::string& path, const SceneHierarchy& scene) {
  write_text_file(path, serialize_scene(scene));
}

}  // namespace scenehgn
