#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace igda {

using NodeId = std::int32_t;

/// An ordered variable pair (parent, child). Edge identity is the id pair;
/// names are display-only.
struct EdgePair {
  NodeId parent = 0;
  NodeId child = 0;

  friend constexpr auto operator<=>(const EdgePair&, const EdgePair&) = default;
};

enum class EdgeLabel : std::uint8_t { Absent = 0, Present = 1 };

constexpr EdgeLabel label_from_bool(bool present) noexcept {
  return present ? EdgeLabel::Present : EdgeLabel::Absent;
}
constexpr bool is_present(EdgeLabel label) noexcept { return label == EdgeLabel::Present; }

/// Signed belief in [-100, 100]. The sign carries the predicted label
/// (>= 0 means present) and the magnitude the certainty.
class SignedConfidence {
 public:
  static constexpr double kMax = 100.0;

  constexpr SignedConfidence() = default;
  /// Clamps into [-100, 100].
  explicit constexpr SignedConfidence(double value) noexcept
      : value_(value > kMax ? kMax : (value < -kMax ? -kMax : value)) {}

  static constexpr SignedConfidence certain(EdgeLabel label) noexcept {
    return SignedConfidence(is_present(label) ? kMax : -kMax);
  }

  constexpr double value() const noexcept { return value_; }
  constexpr double magnitude() const noexcept { return value_ < 0 ? -value_ : value_; }
  constexpr EdgeLabel label() const noexcept { return label_from_bool(value_ >= 0.0); }
  constexpr double uncertainty() const noexcept { return kMax - magnitude(); }
  constexpr bool is_certain() const noexcept { return magnitude() >= kMax; }

  friend constexpr bool operator==(SignedConfidence, SignedConfidence) = default;

 private:
  double value_ = 0.0;
};

struct VariableSpec {
  NodeId id = 0;
  std::string name;
  std::string description;
};

/// Variables plus (optionally) the true edge set. Cycles are allowed; self
/// edges and duplicate pairs are not.
struct GroundTruthGraph {
  std::string task_description;
  std::vector<VariableSpec> variables;
  std::set<EdgePair> edges;
  /// False when the graph file carried no "edges" field at all.
  bool edges_known = true;

  std::size_t node_count() const noexcept { return variables.size(); }
  std::size_t pair_count() const noexcept { return node_count() * (node_count() - 1); }
  const VariableSpec& variable(NodeId id) const;
  std::optional<NodeId> find(std::string_view name) const;
};

/// All (i, j), i != j, in lexicographic order. Throws InvalidGraphError for n < 2.
std::vector<EdgePair> candidate_edges(std::size_t node_count);

/// Position of `pair` in candidate_edges(node_count).
constexpr std::size_t pair_index(EdgePair pair, std::size_t node_count) noexcept {
  const auto i = static_cast<std::size_t>(pair.parent);
  const auto j = static_cast<std::size_t>(pair.child);
  return i * (node_count - 1) + (j < i ? j : j - 1);
}

constexpr EdgePair pair_at(std::size_t index, std::size_t node_count) noexcept {
  const auto i = index / (node_count - 1);
  auto j = index % (node_count - 1);
  if (j >= i) ++j;
  return {static_cast<NodeId>(i), static_cast<NodeId>(j)};
}

/// Throws DomainError for self-edges and out-of-range ids.
void check_pair(EdgePair pair, std::size_t node_count);

/// Ground truth label of (parent, child).
EdgeLabel label_of(const GroundTruthGraph& graph, NodeId parent, NodeId child);

/// Validates ids, name uniqueness and edge endpoints. Throws InvalidGraphError.
void validate(const GroundTruthGraph& graph);

/// Parses the graph file format:
/// { "task_description": ..., "variables": [{"name", "description"}...],
///   "edges": [[parentName, childName]...] }
GroundTruthGraph graph_from_json(const nlohmann::json& doc);
nlohmann::json graph_to_json(const GroundTruthGraph& graph);
GroundTruthGraph load_graph(const std::filesystem::path& path);

/// Stable content hash (hex SHA-256 of the canonical JSON form).
std::string graph_hash(const GroundTruthGraph& graph);

/// "A->B" using variable names.
std::string describe_pair(const GroundTruthGraph& graph, EdgePair pair);

nlohmann::json pair_to_json(EdgePair pair);
EdgePair pair_from_json(const nlohmann::json& j);

}  // namespace igda
