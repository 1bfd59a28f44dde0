#pragma once

#include <string>

#include <json.hpp>

#include "twsc/instances.hpp"

namespace twsc {

// JSON interchange used by the CLI; see README for the schemas. Parse
// functions throw ValidationError on malformed input.

nlohmann::json instance_to_json(const Instance& inst);
Instance instance_from_json(const nlohmann::json& j);

nlohmann::json decomposition_to_json(const TreeDecomposition& td);
TreeDecomposition decomposition_from_json(const nlohmann::json& j);

nlohmann::json load_json_file(const std::string& path);
void save_json_file(const std::string& path, const nlohmann::json& j);

// Canonical subset key: sorted ids joined by commas; "" for the empty set.
std::string subset_key(const VertexSet& set);
VertexSet subset_from_key(const std::string& key);

}  // namespace twsc
