#include "igda/metrics.hpp"

#include "igda/errors.hpp"

namespace igda {
namespace {

void check_coverage(const LabelMap& labels, std::size_t node_count, const char* what) {
  if (labels.size() != node_count * (node_count - 1)) {
    throw CoverageError(std::string(what) + " covers " + std::to_string(labels.size()) +
                        " pairs, expected " + std::to_string(node_count * (node_count - 1)));
  }
  for (const auto& [pair, label] : labels) {
    try {
      check_pair(pair, node_count);
    } catch (const DomainError& err) {
      throw CoverageError(std::string(what) + " holds a non-candidate pair: " + err.what());
    }
  }
}

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

LabelMap truth_labels(const GroundTruthGraph& graph) {
  LabelMap labels;
  for (const auto& pair : candidate_edges(graph.node_count())) {
    labels.emplace(pair, label_from_bool(graph.edges.contains(pair)));
  }
  return labels;
}

GraphMetrics compute_metrics(const LabelMap& predicted, const GroundTruthGraph& truth) {
  check_coverage(predicted, truth.node_count(), "prediction");
  GraphMetrics m;
  for (const auto& [pair, label] : predicted) {
    const bool actual = truth.edges.contains(pair);
    if (is_present(label)) {
      actual ? ++m.true_positives : ++m.false_positives;
    } else {
      actual ? ++m.false_negatives : ++m.true_negatives;
    }
  }
  m.precision = ratio(m.true_positives, m.true_positives + m.false_positives);
  m.recall = ratio(m.true_positives, m.true_positives + m.false_negatives);
  const double denom = m.precision + m.recall;
  m.f1 = denom == 0.0 ? 0.0 : 2.0 * m.precision * m.recall / denom;
  return m;
}

ImprovementBreakdown diff_rounds(const LabelMap& previous, const LabelMap& next,
                                 const GroundTruthGraph& truth,
                                 const std::set<EdgePair>& experimented_this_round) {
  check_coverage(previous, truth.node_count(), "previous labels");
  check_coverage(next, truth.node_count(), "next labels");
  ImprovementBreakdown b;
  for (const auto& [pair, before] : previous) {
    const auto after = next.at(pair);
    if (after == before) continue;
    ++b.total_changed;
    const auto actual = label_from_bool(truth.edges.contains(pair));
    const bool experimented = experimented_this_round.contains(pair);
    if (after == actual) {
      experimented ? ++b.experiment_improvements : ++b.update_improvements;
    } else {
      if (experimented) {
        throw ContractError("experimented pair " + describe_pair(truth, pair) +
                            " changed to a wrong label");
      }
      ++b.regressions;
    }
  }
  b.net_improvement = static_cast<long long>(b.experiment_improvements + b.update_improvements) -
                      static_cast<long long>(b.regressions);
  return b;
}

nlohmann::json to_json(const GraphMetrics& m) {
  return {{"tp", m.true_positives}, {"fp", m.false_positives}, {"fn", m.false_negatives},
          {"tn", m.true_negatives}, {"precision", m.precision}, {"recall", m.recall},
          {"f1", m.f1}};
}

GraphMetrics metrics_from_json(const nlohmann::json& j) {
  GraphMetrics m;
  m.true_positives = j.at("tp").get<std::size_t>();
  m.false_positives = j.at("fp").get<std::size_t>();
  m.false_negatives = j.at("fn").get<std::size_t>();
  m.true_negatives = j.at("tn").get<std::size_t>();
  m.precision = j.at("precision").get<double>();
  m.recall = j.at("recall").get<double>();
  m.f1 = j.at("f1").get<double>();
  return m;
}

nlohmann::json to_json(const ImprovementBreakdown& b) {
  return {{"experiment_improvements", b.experiment_improvements},
          {"update_improvements", b.update_improvements},
          {"regressions", b.regressions},
          {"net_improvement", b.net_improvement},
          {"total_changed", b.total_changed}};
}

ImprovementBreakdown breakdown_from_json(const nlohmann::json& j) {
  ImprovementBreakdown b;
  b.experiment_improvements = j.at("experiment_improvements").get<std::size_t>();
  b.update_improvements = j.at("update_improvements").get<std::size_t>();
  b.regressions = j.at("regressions").get<std::size_t>();
  b.net_improvement = j.at("net_improvement").get<long long>();
  b.total_changed = j.at("total_changed").get<std::size_t>();
  return b;
}

}  // namespace igda
