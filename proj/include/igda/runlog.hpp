#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "igda/graph.hpp"
#include "igda/metrics.hpp"

namespace igda {

// Append-only record of one discovery run. On disk each record is one JSON
// line tagged by "type": run_header, round_selection, experiment,
// local_update, round_summary.

struct RunHeader {
  std::string graph_hash;
  std::string method;
  nlohmann::json config;
  /// Absent when nothing in the run consumed randomness.
  std::optional<std::uint64_t> seed;
  std::vector<std::string> variable_names;
  /// Present when the evaluation truth is known; lets analysis recompute metrics.
  std::optional<std::vector<EdgePair>> truth_edges;
  /// Pairs whose zero-shot assessment fell back to the neutral 0.
  std::vector<EdgePair> initial_flagged;
};

struct SelectionRecord {
  int round = 0;
  std::string policy;
  std::vector<EdgePair> pairs;
  /// Pairs filled in at random after llm-direct proposals ran short.
  std::size_t random_fill = 0;
};

struct ExperimentRecord {
  int round = 0;
  EdgePair pair;
  EdgeLabel label = EdgeLabel::Absent;
};

struct UpdateRecord {
  int round = 0;
  /// Unset for global updates.
  std::optional<EdgePair> experiment;
  EdgePair target;
  std::string relation;  // shares-parent, shares-child or global
  double prior = 0.0;
  double output = 0.0;
  bool skipped = false;
};

struct RoundSummary {
  int round = 0;
  std::size_t experimented_count = 0;
  std::optional<GraphMetrics> metrics;
  /// Absent for round 0.
  std::optional<ImprovementBreakdown> breakdown;
  /// Signed confidence per candidate pair, candidate order.
  std::vector<double> confidences;
};

struct RunLog {
  RunHeader header;
  std::vector<SelectionRecord> selections;
  std::vector<ExperimentRecord> experiments;
  std::vector<UpdateRecord> updates;
  std::vector<RoundSummary> summaries;

  std::size_t node_count() const noexcept { return header.variable_names.size(); }
  std::size_t pair_count() const noexcept { return node_count() * (node_count() - 1); }
  /// Graph with the logged names and truth edges (no descriptions).
  GroundTruthGraph truth_graph() const;
};

void write_jsonl(const RunLog& log, std::ostream& out);
/// Throws IntegrityError on malformed or out-of-order records.
RunLog read_jsonl(std::istream& in);

void save_runlog(const RunLog& log, const std::filesystem::path& path);
RunLog load_runlog(const std::filesystem::path& path);

}  // namespace igda
