#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "igda/config.hpp"
#include "igda/engine.hpp"
#include "igda/graph.hpp"

namespace igda {

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

/// Builds the predictor a session uses for Ĝ_0 and updates.
using SessionPredictorFactory =
    std::function<std::unique_ptr<Predictor>(const GroundTruthGraph& graph, const DiscoveryConfig& config)>;

struct SessionServiceOptions {
  /// Used when a create request carries no graph.
  std::optional<GroundTruthGraph> default_graph;
  /// Base config; a create request's "config" object overrides fields.
  DiscoveryConfig default_config;
  SessionPredictorFactory predictor_factory;
  /// Sessions are saved here after every change. Empty keeps them in memory.
  std::filesystem::path store_dir;
};

/// Human-in-the-loop discovery sessions. A person plays the experiment
/// oracle: each round's proposals collect feedback one pair at a time, and
/// the round commits once every proposed pair has a label. Until then any
/// pending label can be withdrawn.
///
/// Every mutating call accepts a client request id; repeating a request id
/// returns the first response without acting again.
class SessionService {
 public:
  explicit SessionService(SessionServiceOptions options);
  ~SessionService();

  /// Body: {"graph": {...}?, "config": {...}?}. Returns {"id", ...state}.
  ApiResponse create(const nlohmann::json& body, const std::string& request_id = {});
  ApiResponse get(const std::string& id);
  /// Body: {"pair": ..., "label": ...}. Pair as [p, c] ids, {"parent","child"}
  /// ids or names, or "A->B"; label as bool, 0/1, "present"/"absent".
  ApiResponse feedback(const std::string& id, const nlohmann::json& body, const std::string& request_id = {});
  /// Withdraws pending feedback: body {"pair": ...} or {} for the latest.
  ApiResponse undo(const std::string& id, const nlohmann::json& body, const std::string& request_id = {});
  ApiResponse graph(const std::string& id);
  ApiResponse history(const std::string& id);
  ApiResponse list();

  /// Loads every saved session from the store directory; returns the count.
  std::size_t restore();

 private:
  struct Session;

  std::shared_ptr<Session> find(const std::string& id);
  std::shared_ptr<Session> build(const std::string& id, GroundTruthGraph graph, const DiscoveryConfig& config,
                                 std::optional<InitialPrediction> initial);
  void save(const Session& s) const;

  SessionServiceOptions options_;
  std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::map<std::string, ApiResponse> create_replies_;
};

}  // namespace igda
