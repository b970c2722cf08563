#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "igda/config.hpp"
#include "igda/graph.hpp"
#include "igda/metrics.hpp"
#include "igda/predictor.hpp"
#include "igda/runlog.hpp"
#include "igda/simulation.hpp"

namespace igda {

/// Zero-shot prediction Ĝ_0 for every candidate pair.
struct InitialPrediction {
  std::size_t node_count = 0;
  /// Candidate order.
  std::vector<double> confidences;
  /// Pairs that fell back to the neutral 0 (backend failure or no parseable sample).
  std::vector<EdgePair> flagged;
  /// Flagged pairs whose backend call failed outright.
  std::size_t backend_failures = 0;

  nlohmann::json to_json() const;
  static InitialPrediction from_json(const nlohmann::json& j);
};

/// Assesses every candidate pair with `samples` zero-shot samples. Pairs are
/// independent and run on up to `workers` threads when the predictor allows.
/// With BackendFailure::MarkNeutral a TransportError leaves the pair at 0 and
/// flags it; with Abort it propagates.
InitialPrediction initialize(const GroundTruthGraph& graph, Predictor& predictor, int samples,
                             BackendFailure on_error = BackendFailure::MarkNeutral, int workers = 1);

struct Snapshot {
  int round = 0;
  std::vector<double> confidences;
  std::vector<bool> experimented;
};

/// Current belief over every candidate pair plus per-round history.
class PredictionState {
 public:
  /// Takes Ĝ_0 and records it as snapshot 0.
  explicit PredictionState(const InitialPrediction& initial);

  std::size_t node_count() const noexcept { return node_count_; }
  std::size_t pair_count() const noexcept { return confidences_.size(); }

  SignedConfidence confidence(EdgePair pair) const;
  EdgeLabel label(EdgePair pair) const { return confidence(pair).label(); }
  bool experimented(EdgePair pair) const;
  std::size_t experimented_count() const noexcept { return experimented_count_; }
  std::size_t remaining() const noexcept { return pair_count() - experimented_count_; }

  const std::vector<SignedConfidence>& confidences() const noexcept { return confidences_; }
  std::vector<double> confidence_values() const;
  std::vector<EdgeLabel> label_vector() const;
  LabelMap labels() const;
  std::vector<EdgePair> experimented_pairs() const;
  /// Non-experimented pairs in candidate order.
  std::vector<EdgePair> remaining_pairs() const;

  /// Throws ContractError when `pair` is frozen.
  void set_confidence(EdgePair pair, SignedConfidence value);
  /// Fixes the pair at ±100. Throws ContractError if already frozen.
  void freeze(EdgePair pair, EdgeLabel label);
  /// Queues an update value for round-end aggregation.
  void buffer_update(EdgePair pair, double value);
  std::size_t buffered(EdgePair pair) const;
  bool buffers_empty() const noexcept;
  /// Every pair with a nonempty buffer takes the buffer mean; buffers are cleared.
  void aggregate_buffers();

  /// Rounds completed so far.
  int round() const noexcept { return round_; }
  /// Appends a snapshot and advances the round counter. Buffers must be empty.
  void close_round();
  const std::vector<Snapshot>& history() const noexcept { return history_; }

 private:
  std::size_t index(EdgePair pair) const;

  std::size_t node_count_;
  std::vector<SignedConfidence> confidences_;
  std::vector<bool> experimented_;
  std::vector<std::vector<double>> buffers_;
  std::size_t experimented_count_ = 0;
  std::size_t buffered_pairs_ = 0;
  int round_ = 0;
  std::vector<Snapshot> history_;
};

// Selection policies. Each returns at most `count` non-experimented pairs;
// an empty result means nothing is left.

/// Smallest |confidence| first, ties by (parent, child).
std::vector<EdgePair> select_uncertain(const PredictionState& state, std::size_t count);
std::vector<EdgePair> select_random(const PredictionState& state, std::size_t count, Rng& rng);
/// Ascending |c| over Ĝ_0 with lexicographic ties. Computed once per run.
std::vector<EdgePair> static_ranking(const InitialPrediction& initial);
std::vector<EdgePair> select_static(const std::vector<EdgePair>& ranking, const PredictionState& state,
                                    std::size_t count);

struct DirectSelection {
  std::vector<EdgePair> pairs;
  /// How many pairs came from the random fill.
  std::size_t random_fill = 0;
  int attempts = 0;
  std::size_t rejected = 0;
};

/// Asks the predictor for experiments given the current labels. Invalid,
/// duplicate and already experimented proposals are dropped; after
/// `attempts` prompts any deficit is filled at random. Throws
/// PolicyUnavailableError when the graph has more than `max_pairs` pairs.
DirectSelection select_llm_direct(const PredictionState& state, Predictor& predictor, std::size_t count, Rng& rng,
                                  int round, int attempts = 4, std::size_t max_pairs = 1000);

struct UpdateTarget {
  EdgePair pair;
  UpdateRelation relation = UpdateRelation::SharesParent;

  friend bool operator==(const UpdateTarget&, const UpdateTarget&) = default;
};

/// Uncertain, non-experimented pairs sharing a node with `experiment`.
/// SameRole yields (i,k) tagged shares-parent then (l,j) tagged shares-child.
/// AnySharedNode adds every other pair touching i or j, the reverse pair
/// included; pairs touching i are tagged shares-parent.
std::vector<UpdateTarget> adjacent_update_targets(const PredictionState& state, EdgePair experiment,
                                                  AdjacencyScope scope = AdjacencyScope::SameRole);

struct ExperimentResult {
  EdgePair pair;
  EdgeLabel label = EdgeLabel::Absent;

  friend bool operator==(const ExperimentResult&, const ExperimentResult&) = default;
};

struct UpdateOptions {
  UpdateStrategy strategy = UpdateStrategy::Local;
  AdjacencyScope adjacency = AdjacencyScope::SameRole;
  int samples = 1;
  int workers = 1;
  /// Round being played (1-based); passed through to the predictor.
  int round = 1;
};

/// Freezes every result, then updates the rest of the prediction per
/// `options.strategy`. Update prompts see the round-start confidences.
/// Buffers are aggregated before returning; the caller closes the round.
/// A TransportError from one update call skips that update.
std::vector<UpdateRecord> apply_feedback_and_update(PredictionState& state, std::span<const ExperimentResult> results,
                                                    Predictor& predictor, const UpdateOptions& options);

/// Source of experiment outcomes.
class ExperimentOracle {
 public:
  virtual ~ExperimentOracle() = default;
  virtual EdgeLabel answer(EdgePair pair) = 0;
};

/// Answers from a graph's edge set.
class TruthOracle final : public ExperimentOracle {
 public:
  explicit TruthOracle(const GroundTruthGraph& graph);
  EdgeLabel answer(EdgePair pair) override;

 private:
  const GroundTruthGraph& graph_;
};

/// One discovery run, advanced a round at a time. proposals() picks the
/// round's pairs; commit() takes the outcomes. Used directly by interactive
/// sessions and through run_discovery() in batch mode.
class DiscoveryRun {
 public:
  DiscoveryRun(const GroundTruthGraph& graph, DiscoveryConfig config, Predictor& predictor,
               const InitialPrediction& initial, std::uint64_t seed);

  bool finished() const noexcept;
  /// The pending round's pairs. Stable until commit().
  const std::vector<EdgePair>& proposals();
  /// Records outcomes for exactly the proposed pairs (any order). Throws
  /// ContractError for missing or unexpected pairs and
  /// OracleInconsistencyError when a pair carries two different labels.
  void commit(std::span<const ExperimentResult> results);

  /// Rounds completed.
  int round() const noexcept { return state_.round(); }
  const PredictionState& state() const noexcept { return state_; }
  const RunLog& log() const noexcept { return log_; }
  RunLog take_log() { return std::move(log_); }
  const DiscoveryConfig& config() const noexcept { return config_; }

 private:
  void record_summary(const std::set<EdgePair>& experimented_now, const LabelMap& previous);

  const GroundTruthGraph& graph_;
  DiscoveryConfig config_;
  Predictor& predictor_;
  PredictionState state_;
  Rng rng_;
  std::vector<EdgePair> ranking_;
  std::optional<std::vector<EdgePair>> pending_;
  std::size_t pending_fill_ = 0;
  RunLog log_;
};

/// False only for configurations whose outcome cannot depend on the seed.
bool consumes_seed(const DiscoveryConfig& config);

/// Runs rounds until the budget or the candidate set is exhausted.
/// `initial` defaults to a fresh initialize() with the config's K.
RunLog run_discovery(const GroundTruthGraph& graph, const DiscoveryConfig& config, Predictor& predictor,
                     ExperimentOracle& oracle, const std::optional<InitialPrediction>& initial = std::nullopt);

using PredictorFactory = std::function<std::unique_ptr<Predictor>(std::uint64_t run_seed)>;

struct RunFailure {
  int run = 0;
  std::string message;
};

struct BatchResult {
  /// Completed runs in run order.
  std::vector<RunLog> logs;
  std::vector<int> run_indices;
  std::vector<RunFailure> failures;
};

/// config.runs independent runs with seeds derive_run_seed(config.seed, k).
/// Runs that throw are recorded and skipped. All runs share `initial`.
BatchResult run_batch(const GroundTruthGraph& graph, const DiscoveryConfig& config, const PredictorFactory& factory,
                      ExperimentOracle& oracle, const InitialPrediction& initial);

}  // namespace igda
