#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace igda {

enum class SelectionPolicy { Uncertainty, Random, Static, LlmDirect };
enum class UpdateStrategy { Local, None, Global };

/// Which pairs count as adjacent to an experimented pair (i, j).
enum class AdjacencyScope {
  /// (i, k) and (l, j) only.
  SameRole,
  /// Every pair touching i or j, including (k, i), (j, m) and (j, i).
  AnySharedNode,
};

enum class BackendFailure { MarkNeutral, Abort };

std::string_view to_string(SelectionPolicy policy);
std::string_view to_string(UpdateStrategy strategy);
std::string_view to_string(AdjacencyScope scope);
SelectionPolicy parse_policy(std::string_view text);
UpdateStrategy parse_strategy(std::string_view text);
AdjacencyScope parse_adjacency(std::string_view text);

/// "uncertainty+local" style label.
std::string method_label(SelectionPolicy policy, UpdateStrategy strategy);

struct DiscoveryConfig {
  int rounds = 10;
  int per_round = 5;
  int zero_shot_samples = 16;
  int update_samples = 1;
  SelectionPolicy policy = SelectionPolicy::Uncertainty;
  UpdateStrategy updates = UpdateStrategy::Local;
  AdjacencyScope adjacency = AdjacencyScope::SameRole;
  /// Ignore `rounds` and keep going until every pair is experimented.
  bool until_exhausted = false;
  std::uint64_t seed = 0;
  int runs = 5;
  BackendFailure on_backend_error = BackendFailure::MarkNeutral;
  /// llm-direct refuses graphs with more candidate pairs than this.
  std::size_t direct_max_pairs = 1000;
  int direct_attempts = 4;
  /// Threads used for independent predictor calls within a phase.
  int workers = 1;

  /// Throws ContractError for out-of-range values.
  void validate() const;
  /// Everything except the seed, which run headers record separately.
  nlohmann::json to_json() const;
  static DiscoveryConfig from_json(const nlohmann::json& j);
};

}  // namespace igda
