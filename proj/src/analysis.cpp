#include "igda/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "igda/errors.hpp"
#include "igda/log.hpp"

namespace igda {
namespace {

LabelMap labels_from(const std::vector<double>& confidences, std::size_t node_count) {
  LabelMap out;
  for (std::size_t k = 0; k < confidences.size(); ++k) {
    out.emplace(pair_at(k, node_count), label_from_bool(confidences[k] >= 0.0));
  }
  return out;
}

void require_truth(const RunLog& log) {
  if (!log.header.truth_edges) throw ContractError("run log carries no truth edges to score against");
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double to_double(const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw IntegrityError("bad number '" + s + "'");
    return v;
  } catch (const std::logic_error&) {
    throw IntegrityError("bad number '" + s + "'");
  }
}

long long to_integer(const std::string& s) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(s, &used);
    if (used != s.size()) throw IntegrityError("bad integer '" + s + "'");
    return v;
  } catch (const std::logic_error&) {
    throw IntegrityError("bad integer '" + s + "'");
  }
}

std::optional<double> to_opt_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return to_double(s);
}

void check_method_name(const std::string& name) {
  if (name.find_first_of(",\n\r") != std::string::npos) {
    throw ContractError("method name '" + name + "' cannot be written to CSV");
  }
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

}  // namespace

bool is_truncated(const RunLog& log) {
  const auto pairs = log.pair_count();
  if (pairs == 0 || log.summaries.empty()) return true;
  if (log.summaries.back().experimented_count >= pairs) return false;
  const auto& cfg = log.header.config;
  const bool exhaust = cfg.value("until_exhausted", false);
  const int per_round = cfg.value("per_round", 1);
  const int rounds = cfg.value("rounds", 1);
  const auto needed = static_cast<int>((pairs + static_cast<std::size_t>(per_round) - 1) / static_cast<std::size_t>(per_round));
  const int budget = exhaust ? needed : std::min(rounds, needed);
  return log.summaries.back().round < budget;
}

std::vector<CurvePoint> f1_curve(const RunLog& log) {
  std::optional<GroundTruthGraph> truth;
  std::vector<CurvePoint> out;
  const auto pairs = static_cast<double>(log.pair_count());
  for (const auto& s : log.summaries) {
    double f1 = 0.0;
    if (s.metrics) {
      f1 = s.metrics->f1;
    } else {
      require_truth(log);
      if (!truth) truth = log.truth_graph();
      f1 = compute_metrics(labels_from(s.confidences, log.node_count()), *truth).f1;
    }
    out.push_back({s.round, static_cast<double>(s.experimented_count) / pairs, f1});
  }
  if (is_truncated(log)) {
    warn("run log stops at round " + std::to_string(log.summaries.empty() ? 0 : log.summaries.back().round) +
         " before its budget; the curve is partial");
  }
  return out;
}

AggregateCurve aggregate_curves(const std::vector<std::vector<CurvePoint>>& curves, SpreadStatistic spread) {
  if (curves.empty()) return {};
  const auto& grid = curves.front();
  for (const auto& c : curves) {
    if (c.size() != grid.size()) throw AlignmentError("curves have different numbers of rounds");
    for (std::size_t k = 0; k < c.size(); ++k) {
      if (c[k].round != grid[k].round || c[k].fraction != grid[k].fraction) {
        throw AlignmentError("curves disagree on the budget grid at round " + std::to_string(grid[k].round));
      }
    }
  }
  AggregateCurve out;
  out.reserve(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    std::vector<double> values;
    values.reserve(curves.size());
    for (const auto& c : curves) values.push_back(c[k].f1);
    std::sort(values.begin(), values.end());
    double sum = 0.0;
    for (double v : values) sum += v;
    const double mean = sum / static_cast<double>(values.size());
    AggregatePoint p{grid[k].round, grid[k].fraction, mean, 0.0, values.front(), values.back(), values.size()};
    if (spread == SpreadStatistic::Envelope) {
      p.spread = (p.max - p.min) / 2.0;
    } else if (values.size() > 1) {
      double ss = 0.0;
      for (double v : values) ss += (v - mean) * (v - mean);
      p.spread = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    out.push_back(p);
  }
  return out;
}

AggregateCurve aggregate_logs(const std::vector<RunLog>& logs, SpreadStatistic spread) {
  std::vector<std::vector<CurvePoint>> curves;
  for (const auto& log : logs) {
    if (log.header.graph_hash != logs.front().header.graph_hash) {
      throw AlignmentError("run logs come from different graphs");
    }
    curves.push_back(f1_curve(log));
  }
  return aggregate_curves(curves, spread);
}

double area_under_curve(const std::vector<CurvePoint>& curve) {
  double area = 0.0;
  for (std::size_t k = 1; k < curve.size(); ++k) {
    area += (curve[k].fraction - curve[k - 1].fraction) * (curve[k].f1 + curve[k - 1].f1) / 2.0;
  }
  return area;
}

double area_under_curve(const AggregateCurve& curve) {
  double area = 0.0;
  for (std::size_t k = 1; k < curve.size(); ++k) {
    area += (curve[k].fraction - curve[k - 1].fraction) * (curve[k].mean + curve[k - 1].mean) / 2.0;
  }
  return area;
}

RankTable rank_methods(const std::map<std::string, AggregateCurve>& curves) {
  RankTable table;
  std::set<int> rounds;
  for (const auto& [method, curve] : curves) {
    table.methods.push_back(method);
    for (const auto& p : curve) rounds.insert(p.round);
  }
  table.rounds.assign(rounds.begin(), rounds.end());
  std::vector<double> rank_sum(table.methods.size(), 0.0);
  std::vector<std::size_t> rank_count(table.methods.size(), 0);

  for (int round : table.rounds) {
    std::vector<std::pair<double, std::size_t>> present;
    std::size_t m = 0;
    for (const auto& [method, curve] : curves) {
      const auto it = std::find_if(curve.begin(), curve.end(), [&](const AggregatePoint& p) { return p.round == round; });
      if (it == curve.end()) {
        table.notes.push_back(method + " has no point at round " + std::to_string(round));
      } else {
        present.emplace_back(it->mean, m);
      }
      ++m;
    }
    std::sort(present.begin(), present.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    std::vector<std::optional<double>> row(table.methods.size());
    for (std::size_t start = 0; start < present.size();) {
      std::size_t end = start;
      while (end < present.size() && present[end].first == present[start].first) ++end;
      const double shared = static_cast<double>(start + end - 1) / 2.0;
      for (std::size_t k = start; k < end; ++k) {
        row[present[k].second] = shared;
        rank_sum[present[k].second] += shared;
        ++rank_count[present[k].second];
      }
      start = end;
    }
    table.ranks.push_back(std::move(row));
  }
  for (std::size_t m = 0; m < table.methods.size(); ++m) {
    table.average.push_back(rank_count[m] ? rank_sum[m] / static_cast<double>(rank_count[m]) : 0.0);
  }
  return table;
}

std::vector<ImprovementRow> improvement_series(const RunLog& log) {
  require_truth(log);
  const auto truth = log.truth_graph();
  std::vector<ImprovementRow> out;
  for (std::size_t k = 1; k < log.summaries.size(); ++k) {
    const auto& prev = log.summaries[k - 1];
    const auto& next = log.summaries[k];
    std::set<EdgePair> experimented;
    for (const auto& e : log.experiments) {
      if (e.round == next.round) experimented.insert(e.pair);
    }
    ImprovementRow row;
    row.round = next.round;
    try {
      row.breakdown = diff_rounds(labels_from(prev.confidences, log.node_count()),
                                  labels_from(next.confidences, log.node_count()), truth, experimented);
    } catch (const ContractError& err) {
      throw IntegrityError("round " + std::to_string(next.round) + ": " + err.what());
    }
    if (next.breakdown && !(*next.breakdown == row.breakdown)) {
      throw IntegrityError("logged improvement breakdown for round " + std::to_string(next.round) +
                           " does not match the logged confidences");
    }
    const auto total = row.breakdown.experiment_improvements + row.breakdown.update_improvements;
    if (total > 0) {
      row.experiment_share = static_cast<double>(row.breakdown.experiment_improvements) / static_cast<double>(total);
      row.update_share = static_cast<double>(row.breakdown.update_improvements) / static_cast<double>(total);
    }
    out.push_back(row);
  }
  return out;
}

void verify_replay(const RunLog& log) {
  if (log.summaries.empty()) throw IntegrityError("run log has no round summaries");
  if (log.summaries.front().round != 0) throw IntegrityError("run log does not start at round 0");
  std::set<EdgePair> experimented;
  for (const auto& s : log.summaries) {
    if (s.confidences.size() != log.pair_count()) {
      throw IntegrityError("round " + std::to_string(s.round) + " does not cover every pair");
    }
    for (const auto& e : log.experiments) {
      if (e.round == s.round && !experimented.insert(e.pair).second) {
        throw IntegrityError("pair experimented twice in round " + std::to_string(s.round));
      }
    }
    if (experimented.size() != s.experimented_count) {
      throw IntegrityError("experiment count mismatch at round " + std::to_string(s.round));
    }
    for (const auto& p : experimented) {
      const double c = s.confidences[pair_index(p, log.node_count())];
      if (std::fabs(c) != 100.0) throw IntegrityError("experimented pair not frozen at round " + std::to_string(s.round));
    }
  }
  if (!log.header.truth_edges) return;
  const auto truth = log.truth_graph();
  for (const auto& s : log.summaries) {
    if (!s.metrics) continue;
    const auto recomputed = compute_metrics(labels_from(s.confidences, log.node_count()), truth);
    if (!(recomputed == *s.metrics)) {
      throw IntegrityError("logged metrics for round " + std::to_string(s.round) + " do not match the confidences");
    }
  }
  improvement_series(log);
}

// ---------------------------------------------------------------- CSV

void write_curves_csv(std::ostream& out, const std::map<std::string, AggregateCurve>& curves) {
  out << "method,round,fraction,f1_mean,f1_spread,f1_min,f1_max,runs\n";
  for (const auto& [method, curve] : curves) {
    check_method_name(method);
    for (const auto& p : curve) {
      out << method << ',' << p.round << ',' << fmt(p.fraction) << ',' << fmt(p.mean) << ',' << fmt(p.spread) << ','
          << fmt(p.min) << ',' << fmt(p.max) << ',' << p.runs << '\n';
    }
  }
  if (!out) throw Error("failed writing curves CSV");
}

std::map<std::string, AggregateCurve> read_curves_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || strip_cr(line) != "method,round,fraction,f1_mean,f1_spread,f1_min,f1_max,runs") {
    throw IntegrityError("unexpected curves CSV header");
  }
  std::map<std::string, AggregateCurve> out;
  while (std::getline(in, line)) {
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 8) throw IntegrityError("curves CSV row has " + std::to_string(cells.size()) + " cells");
    out[cells[0]].push_back({static_cast<int>(to_integer(cells[1])), to_double(cells[2]), to_double(cells[3]),
                             to_double(cells[4]), to_double(cells[5]), to_double(cells[6]),
                             static_cast<std::size_t>(to_integer(cells[7]))});
  }
  return out;
}

void write_ranks_csv(std::ostream& out, const RankTable& table) {
  out << "round";
  for (const auto& m : table.methods) {
    check_method_name(m);
    out << ',' << m;
  }
  out << '\n';
  if (table.methods.empty()) return;
  for (std::size_t s = 0; s < table.rounds.size(); ++s) {
    out << table.rounds[s];
    for (const auto& r : table.ranks[s]) out << ',' << fmt_opt(r);
    out << '\n';
  }
  out << "mean";
  for (double a : table.average) out << ',' << fmt(a);
  out << '\n';
  if (!out) throw Error("failed writing ranks CSV");
}

RankTable read_ranks_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw IntegrityError("empty ranks CSV");
  auto header = split_csv(strip_cr(line));
  if (header.empty() || header[0] != "round") throw IntegrityError("unexpected ranks CSV header");
  RankTable table;
  table.methods.assign(header.begin() + 1, header.end());
  while (std::getline(in, line)) {
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size()) throw IntegrityError("ranks CSV row width mismatch");
    if (cells[0] == "mean") {
      for (std::size_t k = 1; k < cells.size(); ++k) table.average.push_back(to_double(cells[k]));
      continue;
    }
    table.rounds.push_back(static_cast<int>(to_integer(cells[0])));
    std::vector<std::optional<double>> row;
    for (std::size_t k = 1; k < cells.size(); ++k) row.push_back(to_opt_double(cells[k]));
    table.ranks.push_back(std::move(row));
  }
  return table;
}

void write_improvements_csv(std::ostream& out, const std::vector<ImprovementSeries>& series) {
  out << "method,run,round,experiment_improvements,update_improvements,regressions,net_improvement,total_changed,"
         "experiment_share,update_share\n";
  for (const auto& s : series) {
    check_method_name(s.method);
    for (const auto& r : s.rows) {
      const auto& b = r.breakdown;
      out << s.method << ',' << s.run << ',' << r.round << ',' << b.experiment_improvements << ','
          << b.update_improvements << ',' << b.regressions << ',' << b.net_improvement << ',' << b.total_changed << ','
          << fmt_opt(r.experiment_share) << ',' << fmt_opt(r.update_share) << '\n';
    }
  }
  if (!out) throw Error("failed writing improvements CSV");
}

std::vector<ImprovementSeries> read_improvements_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || strip_cr(line).rfind("method,run,round,", 0) != 0) {
    throw IntegrityError("unexpected improvements CSV header");
  }
  std::vector<ImprovementSeries> out;
  while (std::getline(in, line)) {
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 10) throw IntegrityError("improvements CSV row width mismatch");
    const int run = static_cast<int>(to_integer(cells[1]));
    if (out.empty() || out.back().method != cells[0] || out.back().run != run) out.push_back({cells[0], run, {}});
    ImprovementRow row;
    row.round = static_cast<int>(to_integer(cells[2]));
    row.breakdown.experiment_improvements = static_cast<std::size_t>(to_integer(cells[3]));
    row.breakdown.update_improvements = static_cast<std::size_t>(to_integer(cells[4]));
    row.breakdown.regressions = static_cast<std::size_t>(to_integer(cells[5]));
    row.breakdown.net_improvement = to_integer(cells[6]);
    row.breakdown.total_changed = static_cast<std::size_t>(to_integer(cells[7]));
    row.experiment_share = to_opt_double(cells[8]);
    row.update_share = to_opt_double(cells[9]);
    out.back().rows.push_back(row);
  }
  return out;
}

}  // namespace igda
