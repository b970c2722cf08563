#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "igda/metrics.hpp"
#include "igda/runlog.hpp"

namespace igda {

/// F1 of one run after `round` rounds; fraction = experimented / n(n-1).
struct CurvePoint {
  int round = 0;
  double fraction = 0.0;
  double f1 = 0.0;

  friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

/// One point per round boundary, starting with Ĝ_0 at fraction 0. Metrics
/// missing from the log are recomputed from the logged truth edges. A log
/// that stops before its budget yields the partial curve and a warning.
/// Throws ContractError when the log carries no truth to score against.
std::vector<CurvePoint> f1_curve(const RunLog& log);

/// True when the log ends before its configured budget.
bool is_truncated(const RunLog& log);

enum class SpreadStatistic {
  /// Sample standard deviation (0 for a single run).
  StdDev,
  /// Half the min/max range.
  Envelope,
};

struct AggregatePoint {
  int round = 0;
  double fraction = 0.0;
  double mean = 0.0;
  double spread = 0.0;
  double min = 0.0;
  double max = 0.0;
  std::size_t runs = 0;
};

using AggregateCurve = std::vector<AggregatePoint>;

/// Pointwise mean and spread. Throws AlignmentError unless every curve has
/// the same rounds and fractions.
AggregateCurve aggregate_curves(const std::vector<std::vector<CurvePoint>>& curves,
                                SpreadStatistic spread = SpreadStatistic::StdDev);
/// Same, from logs. Also requires a common graph hash.
AggregateCurve aggregate_logs(const std::vector<RunLog>& logs, SpreadStatistic spread = SpreadStatistic::StdDev);

/// Trapezoidal area under F1 over the budget fraction.
double area_under_curve(const std::vector<CurvePoint>& curve);
double area_under_curve(const AggregateCurve& curve);

struct RankTable {
  std::vector<std::string> methods;
  std::vector<int> rounds;
  /// ranks[step][method]; unset when the method has no point at that step.
  std::vector<std::vector<std::optional<double>>> ranks;
  /// Mean rank per method over the steps where it was ranked.
  std::vector<double> average;
  std::vector<std::string> notes;
};

/// Ranks methods by mean F1 at each round (0 = best, ties share the mean of
/// their positions).
RankTable rank_methods(const std::map<std::string, AggregateCurve>& curves);

struct ImprovementRow {
  int round = 0;
  ImprovementBreakdown breakdown;
  /// Shares of improvements; unset when the round had none.
  std::optional<double> experiment_share;
  std::optional<double> update_share;
};

/// Recomputes each round's breakdown from the logged confidences and
/// experiments. Throws IntegrityError if a logged breakdown disagrees, and
/// ContractError when the log has no truth edges.
std::vector<ImprovementRow> improvement_series(const RunLog& log);

/// Recomputes every logged metric and breakdown; throws IntegrityError on
/// the first mismatch.
void verify_replay(const RunLog& log);

// CSV export. Doubles are written with 17 significant digits so a round
// trip is exact.

void write_curves_csv(std::ostream& out, const std::map<std::string, AggregateCurve>& curves);
std::map<std::string, AggregateCurve> read_curves_csv(std::istream& in);

void write_ranks_csv(std::ostream& out, const RankTable& table);
RankTable read_ranks_csv(std::istream& in);

struct ImprovementSeries {
  std::string method;
  int run = 0;
  std::vector<ImprovementRow> rows;
};

void write_improvements_csv(std::ostream& out, const std::vector<ImprovementSeries>& series);
std::vector<ImprovementSeries> read_improvements_csv(std::istream& in);

}  // namespace igda
