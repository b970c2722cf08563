#include "igda/graph.hpp"

#include <fstream>
#include <unordered_map>

#include "igda/errors.hpp"
#include "igda/hash.hpp"

namespace igda {

const VariableSpec& GroundTruthGraph::variable(NodeId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= variables.size()) {
    throw DomainError("variable id " + std::to_string(id) + " out of range");
  }
  return variables[static_cast<std::size_t>(id)];
}

std::optional<NodeId> GroundTruthGraph::find(std::string_view name) const {
  for (const auto& v : variables) {
    if (v.name == name) return v.id;
  }
  return std::nullopt;
}

std::vector<EdgePair> candidate_edges(std::size_t node_count) {
  if (node_count < 2) {
    throw InvalidGraphError("a graph needs at least 2 variables, got " + std::to_string(node_count));
  }
  std::vector<EdgePair> pairs;
  pairs.reserve(node_count * (node_count - 1));
  for (std::size_t i = 0; i < node_count; ++i) {
    for (std::size_t j = 0; j < node_count; ++j) {
      if (i != j) pairs.push_back({static_cast<NodeId>(i), static_cast<NodeId>(j)});
    }
  }
  return pairs;
}

void check_pair(EdgePair pair, std::size_t node_count) {
  const auto in_range = [node_count](NodeId id) {
    return id >= 0 && static_cast<std::size_t>(id) < node_count;
  };
  if (!in_range(pair.parent) || !in_range(pair.child)) {
    throw DomainError("pair (" + std::to_string(pair.parent) + "," + std::to_string(pair.child) +
                      ") has an id outside 0.." + std::to_string(node_count - 1));
  }
  if (pair.parent == pair.child) {
    throw DomainError("self-edge (" + std::to_string(pair.parent) + "," +
                      std::to_string(pair.child) + ") is not a candidate pair");
  }
}

EdgeLabel label_of(const GroundTruthGraph& graph, NodeId parent, NodeId child) {
  const EdgePair pair{parent, child};
  check_pair(pair, graph.node_count());
  return label_from_bool(graph.edges.contains(pair));
}

void validate(const GroundTruthGraph& graph) {
  if (graph.variables.size() < 2) {
    throw InvalidGraphError("a graph needs at least 2 variables");
  }
  std::unordered_map<std::string, NodeId> names;
  for (std::size_t k = 0; k < graph.variables.size(); ++k) {
    const auto& v = graph.variables[k];
    if (v.id != static_cast<NodeId>(k)) {
      throw InvalidGraphError("variable ids must be 0..n-1 in order; found " + std::to_string(v.id) +
                              " at position " + std::to_string(k));
    }
    if (v.name.empty()) throw InvalidGraphError("variable " + std::to_string(k) + " has no name");
    if (!names.emplace(v.name, v.id).second) {
      throw InvalidGraphError("duplicate variable name '" + v.name + "'");
    }
  }
  for (const auto& e : graph.edges) {
    try {
      check_pair(e, graph.node_count());
    } catch (const DomainError& err) {
      throw InvalidGraphError(std::string("bad edge: ") + err.what());
    }
  }
}

GroundTruthGraph graph_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw InvalidGraphError("graph document must be a JSON object");
  GroundTruthGraph graph;
  try {
    graph.task_description = doc.value("task_description", std::string{});
    if (!doc.contains("variables") || !doc["variables"].is_array()) {
      throw InvalidGraphError("graph document has no \"variables\" array");
    }
    NodeId next = 0;
    for (const auto& v : doc["variables"]) {
      VariableSpec spec;
      spec.id = next++;
      if (v.is_string()) {
        spec.name = v.get<std::string>();
      } else {
        spec.name = v.at("name").get<std::string>();
        if (v.contains("description") && !v["description"].is_null()) {
          spec.description = v["description"].get<std::string>();
        }
      }
      graph.variables.push_back(std::move(spec));
    }
    graph.edges_known = doc.contains("edges") && !doc["edges"].is_null();
    // Names must be unique before edges can be resolved.
    GroundTruthGraph names_only = graph;
    names_only.edges.clear();
    validate(names_only);
    if (graph.edges_known) {
      for (const auto& e : doc["edges"]) {
        if (!e.is_array() || e.size() != 2) {
          throw InvalidGraphError("each edge must be a [parent, child] pair");
        }
        const auto parent_name = e[0].get<std::string>();
        const auto child_name = e[1].get<std::string>();
        const auto parent = graph.find(parent_name);
        const auto child = graph.find(child_name);
        if (!parent) throw InvalidGraphError("edge references unknown variable '" + parent_name + "'");
        if (!child) throw InvalidGraphError("edge references unknown variable '" + child_name + "'");
        if (*parent == *child) throw InvalidGraphError("self-edge on '" + parent_name + "'");
        graph.edges.insert({*parent, *child});
      }
    }
  } catch (const nlohmann::json::exception& err) {
    throw InvalidGraphError(std::string("malformed graph document: ") + err.what());
  }
  validate(graph);
  return graph;
}

nlohmann::json graph_to_json(const GroundTruthGraph& graph) {
  nlohmann::json doc;
  doc["task_description"] = graph.task_description;
  auto vars = nlohmann::json::array();
  for (const auto& v : graph.variables) {
    vars.push_back({{"name", v.name}, {"description", v.description}});
  }
  doc["variables"] = std::move(vars);
  if (graph.edges_known) {
    auto edges = nlohmann::json::array();
    for (const auto& e : graph.edges) {
      edges.push_back({graph.variable(e.parent).name, graph.variable(e.child).name});
    }
    doc["edges"] = std::move(edges);
  }
  return doc;
}

GroundTruthGraph load_graph(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidGraphError("cannot open graph file " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& err) {
    throw InvalidGraphError("graph file " + path.string() + " is not valid JSON: " + err.what());
  }
  return graph_from_json(doc);
}

std::string graph_hash(const GroundTruthGraph& graph) {
  return sha256_hex(graph_to_json(graph).dump());
}

std::string describe_pair(const GroundTruthGraph& graph, EdgePair pair) {
  return graph.variable(pair.parent).name + "->" + graph.variable(pair.child).name;
}

nlohmann::json pair_to_json(EdgePair pair) { return nlohmann::json::array({pair.parent, pair.child}); }

EdgePair pair_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 2) throw DomainError("pair must be a two-element array");
  return {j[0].get<NodeId>(), j[1].get<NodeId>()};
}

}  // namespace igda
