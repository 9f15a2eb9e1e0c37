#pragma once

#include <string>
#include <string_view>

#include "json.hpp"
#include "scenehgn/scene.hpp"

namespace scenehgn {

using Json = nlohmann::ordered_json;

/// Deterministic text form of a JSON value: two-space indentation, keys in
/// insertion order, every floating-point number printed with 17 significant
/// digits so doubles round-trip exactly.
std::string dump_json(const Json& j);

Json scene_to_json(const SceneHierarchy& scene);
/// Throws ParseError (with a JSON pointer to the offending field).
SceneHierarchy scene_from_json(const Json& j);

std::string serialize_scene(const SceneHierarchy& scene);
/// Throws ParseError on malformed or truncated input; never aborts.
SceneHierarchy deserialize_scene(std::string_view text);

/// Parses text into a JSON value, mapping parser failures to ParseError.
Json parse_json(std::string_view text, const std::string& source = "input");

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view text);

SceneHierarchy load_scene(const std::string& path);
void save_scene(const std::string& path, const SceneHierarchy& scene);

}  // namespace scenehgn
