#pragma once

#include <cstddef>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "igda/graph.hpp"

namespace igda {

using LabelMap = std::map<EdgePair, EdgeLabel>;

struct GraphMetrics {
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
  std::size_t true_negatives = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  friend bool operator==(const GraphMetrics&, const GraphMetrics&) = default;
};

/// Label of every candidate pair under `graph`'s edge set.
LabelMap truth_labels(const GroundTruthGraph& graph);

/// Confusion counts plus precision/recall/F1 with the zero-denominator
/// convention (undefined ratios are 0). Throws CoverageError unless
/// `predicted` holds exactly the candidate pairs of `truth`.
GraphMetrics compute_metrics(const LabelMap& predicted, const GroundTruthGraph& truth);

/// Per-round change accounting. Every changed label is either an
/// improvement (wrong -> right) or a regression (right -> wrong);
/// improvements on pairs experimented this round are experiment
/// improvements, all others update improvements.
struct ImprovementBreakdown {
  std::size_t experiment_improvements = 0;
  std::size_t update_improvements = 0;
  std::size_t regressions = 0;
  long long net_improvement = 0;
  std::size_t total_changed = 0;

  friend bool operator==(const ImprovementBreakdown&, const ImprovementBreakdown&) = default;
};

/// Throws CoverageError on incomplete maps and ContractError if an
/// experimented pair regressed (experiments always end correct).
ImprovementBreakdown diff_rounds(const LabelMap& previous, const LabelMap& next,
                                 const GroundTruthGraph& truth,
                                 const std::set<EdgePair>& experimented_this_round);

nlohmann::json to_json(const GraphMetrics& m);
GraphMetrics metrics_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ImprovementBreakdown& b);
ImprovementBreakdown breakdown_from_json(const nlohmann::json& j);

}  // namespace igda
