#include "igda/config.hpp"

#include "igda/errors.hpp"

namespace igda {

std::string_view to_string(SelectionPolicy policy) {
  switch (policy) {
    case SelectionPolicy::Uncertainty: return "uncertainty";
    case SelectionPolicy::Random: return "random";
    case SelectionPolicy::Static: return "static";
    case SelectionPolicy::LlmDirect: return "llm-direct";
  }
  return "?";
}

std::string_view to_string(UpdateStrategy strategy) {
  switch (strategy) {
    case UpdateStrategy::Local: return "local";
    case UpdateStrategy::None: return "none";
    case UpdateStrategy::Global: return "global";
  }
  return "?";
}

std::string_view to_string(AdjacencyScope scope) {
  return scope == AdjacencyScope::SameRole ? "same-role" : "any-shared-node";
}

SelectionPolicy parse_policy(std::string_view text) {
  for (auto p : {SelectionPolicy::Uncertainty, SelectionPolicy::Random, SelectionPolicy::Static, SelectionPolicy::LlmDirect}) {
    if (to_string(p) == text) return p;
  }
  throw ContractError("unknown selection policy '" + std::string(text) + "'");
}

UpdateStrategy parse_strategy(std::string_view text) {
  for (auto s : {UpdateStrategy::Local, UpdateStrategy::None, UpdateStrategy::Global}) {
    if (to_string(s) == text) return s;
  }
  throw ContractError("unknown update strategy '" + std::string(text) + "'");
}

AdjacencyScope parse_adjacency(std::string_view text) {
  for (auto s : {AdjacencyScope::SameRole, AdjacencyScope::AnySharedNode}) {
    if (to_string(s) == text) return s;
  }
  throw ContractError("unknown adjacency scope '" + std::string(text) + "'");
}

std::string method_label(SelectionPolicy policy, UpdateStrategy strategy) {
  return std::string(to_string(policy)) + "+" + std::string(to_string(strategy));
}

void DiscoveryConfig::validate() const {
  if (rounds < 1) throw ContractError("rounds must be >= 1");
  if (per_round < 1) throw ContractError("experiments per round must be >= 1");
  if (zero_shot_samples < 1) throw ContractError("zero-shot samples must be >= 1");
  if (update_samples < 1) throw ContractError("update samples must be >= 1");
  if (runs < 1) throw ContractError("run count must be >= 1");
  if (direct_attempts < 1) throw ContractError("direct selection attempts must be >= 1");
  if (workers < 1) throw ContractError("workers must be >= 1");
}

nlohmann::json DiscoveryConfig::to_json() const {
  return {{"rounds", rounds},
          {"per_round", per_round},
          {"zero_shot_samples", zero_shot_samples},
          {"update_samples", update_samples},
          {"policy", to_string(policy)},
          {"updates", to_string(updates)},
          {"adjacency", to_string(adjacency)},
          {"until_exhausted", until_exhausted},
          {"runs", runs},
          {"on_backend_error", on_backend_error == BackendFailure::Abort ? "abort" : "mark"},
          {"direct_max_pairs", direct_max_pairs},
          {"direct_attempts", direct_attempts}};
}

DiscoveryConfig DiscoveryConfig::from_json(const nlohmann::json& j) {
  DiscoveryConfig c;
  c.rounds = j.value("rounds", c.rounds);
  c.per_round = j.value("per_round", c.per_round);
  c.zero_shot_samples = j.value("zero_shot_samples", c.zero_shot_samples);
  c.update_samples = j.value("update_samples", c.update_samples);
  c.policy = parse_policy(j.value("policy", std::string(to_string(c.policy))));
  c.updates = parse_strategy(j.value("updates", std::string(to_string(c.updates))));
  c.adjacency = parse_adjacency(j.value("adjacency", std::string(to_string(c.adjacency))));
  c.until_exhausted = j.value("until_exhausted", c.until_exhausted);
  c.seed = j.value("seed", c.seed);
  c.runs = j.value("runs", c.runs);
  c.on_backend_error = j.value("on_backend_error", std::string("mark")) == "abort" ? BackendFailure::Abort
                                                                                  : BackendFailure::MarkNeutral;
  c.direct_max_pairs = j.value("direct_max_pairs", c.direct_max_pairs);
  c.direct_attempts = j.value("direct_attempts", c.direct_attempts);
  c.workers = j.value("workers", c.workers);
  c.validate();
  return c;
}

}  // namespace igda
