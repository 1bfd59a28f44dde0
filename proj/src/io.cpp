#include "twsc/io.hpp"

#include <fstream>
#include <sstream>

namespace twsc {

namespace {

Rat weight_from_json(const nlohmann::json& j, const char* what) {
    if (j.is_number_integer()) return Rat(static_cast<long long>(j.get<long long>()));
    if (j.is_string()) {
        auto parsed = parse_rational(j.get<std::string>());
        if (parsed) return *parsed;
    }
    throw ValidationError(std::string(what) + ": weight must be an integer or a \"p/q\" string");
}

nlohmann::json weight_to_json(const Rat& w) { return format_rational(w); }

std::vector<WeightedPair> pairs_from_json(const nlohmann::json& j, const char* what) {
    if (!j.is_array()) throw ValidationError(std::string(what) + " must be an array");
    std::vector<WeightedPair> out;
    for (const auto& e : j) {
        if (!e.is_array() || e.size() != 3 || !e[0].is_number_integer() || !e[1].is_number_integer())
            throw ValidationError(std::string(what) + " entries must be [u, v, weight]");
        out.push_back({e[0].get<int>(), e[1].get<int>(), weight_from_json(e[2], what)});
    }
    return out;
}

}  // namespace

nlohmann::json instance_to_json(const Instance& inst) {
    nlohmann::json j;
    j["n"] = inst.n;
    j["edges"] = nlohmann::json::array();
    for (const auto& e : inst.edges) j["edges"].push_back({e.u, e.v, weight_to_json(e.weight)});
    j["demands"] = nlohmann::json::array();
    for (const auto& d : inst.demands) j["demands"].push_back({d.u, d.v, weight_to_json(d.weight)});
    return j;
}

Instance instance_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("n") || !j["n"].is_number_integer())
        throw ValidationError("instance file: expected object with integer \"n\"");
    return Instance::create(j["n"].get<int>(),
                            pairs_from_json(j.value("edges", nlohmann::json::array()), "edges"),
                            pairs_from_json(j.value("demands", nlohmann::json::array()), "demands"));
}

nlohmann::json decomposition_to_json(const TreeDecomposition& td) {
    nlohmann::json j;
    j["bags"] = td.bags;
    j["tree_edges"] = nlohmann::json::array();
    for (const auto& [a, b] : td.tree_edges) j["tree_edges"].push_back({a, b});
    return j;
}

TreeDecomposition decomposition_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("bags") || !j["bags"].is_array())
        throw ValidationError("decomposition file: expected object with \"bags\" array");
    TreeDecomposition td;
    for (const auto& bag : j["bags"]) {
        if (!bag.is_array()) throw ValidationError("decomposition file: bags must be arrays of ids");
        td.bags.push_back(canonical_set(bag.get<VertexSet>()));
    }
    for (const auto& e : j.value("tree_edges", nlohmann::json::array())) {
        if (!e.is_array() || e.size() != 2)
            throw ValidationError("decomposition file: tree_edges entries must be [i, j]");
        td.tree_edges.emplace_back(e[0].get<int>(), e[1].get<int>());
    }
    return td;
}

nlohmann::json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path);
    nlohmann::json j = nlohmann::json::parse(in, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded()) throw ValidationError("invalid JSON in " + path);
    return j;
}

void save_json_file(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write " + path);
    out << j.dump(2) << "\n";
}

std::string subset_key(const VertexSet& set) {
    std::ostringstream os;
    for (std::size_t i = 0; i < set.size(); ++i) {
        if (i) os << ",";
        os << set[i];
    }
    return os.str();
}

VertexSet subset_from_key(const std::string& key) {
    VertexSet out;
    if (key.empty()) return out;
    std::istringstream is(key);
    std::string tok;
    while (std::getline(is, tok, ',')) {
        try {
            out.push_back(std::stoi(tok));
        } catch (const std::exception&) {
            throw ValidationError("bad subset key: " + key);
        }
    }
    return canonical_set(out);
}

}  // namespace twsc
