#include "igda/runlog.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "igda/errors.hpp"

namespace igda {
namespace {

nlohmann::json pairs_to_json(const std::vector<EdgePair>& pairs) {
  auto out = nlohmann::json::array();
  for (const auto& p : pairs) out.push_back(pair_to_json(p));
  return out;
}

std::vector<EdgePair> pairs_from_json(const nlohmann::json& j) {
  std::vector<EdgePair> out;
  for (const auto& p : j) out.push_back(pair_from_json(p));
  return out;
}

void emit(std::ostream& out, const nlohmann::json& record) { out << record.dump() << '\n'; }

}  // namespace

GroundTruthGraph RunLog::truth_graph() const {
  GroundTruthGraph graph;
  for (std::size_t k = 0; k < header.variable_names.size(); ++k) {
    graph.variables.push_back({static_cast<NodeId>(k), header.variable_names[k], {}});
  }
  graph.edges_known = header.truth_edges.has_value();
  if (header.truth_edges) graph.edges.insert(header.truth_edges->begin(), header.truth_edges->end());
  return graph;
}

void write_jsonl(const RunLog& log, std::ostream& out) {
  nlohmann::json header{{"type", "run_header"},
                        {"graph_hash", log.header.graph_hash},
                        {"method", log.header.method},
                        {"config", log.header.config},
                        {"variables", log.header.variable_names},
                        {"initial_flagged", pairs_to_json(log.header.initial_flagged)}};
  header["seed"] = log.header.seed ? nlohmann::json(*log.header.seed) : nlohmann::json(nullptr);
  header["truth_edges"] = log.header.truth_edges ? pairs_to_json(*log.header.truth_edges) : nlohmann::json(nullptr);
  emit(out, header);

  const auto summary = [&](const RoundSummary& s) {
    nlohmann::json j{{"type", "round_summary"},
                     {"round", s.round},
                     {"experimented", s.experimented_count},
                     {"confidences", s.confidences}};
    j["metrics"] = s.metrics ? to_json(*s.metrics) : nlohmann::json(nullptr);
    j["breakdown"] = s.breakdown ? to_json(*s.breakdown) : nlohmann::json(nullptr);
    emit(out, j);
  };

  std::size_t exp_pos = 0;
  std::size_t upd_pos = 0;
  std::size_t sel_pos = 0;
  for (const auto& s : log.summaries) {
    for (; sel_pos < log.selections.size() && log.selections[sel_pos].round <= s.round; ++sel_pos) {
      const auto& sel = log.selections[sel_pos];
      emit(out, {{"type", "round_selection"},
                 {"round", sel.round},
                 {"policy", sel.policy},
                 {"pairs", pairs_to_json(sel.pairs)},
                 {"random_fill", sel.random_fill}});
    }
    for (; exp_pos < log.experiments.size() && log.experiments[exp_pos].round <= s.round; ++exp_pos) {
      const auto& e = log.experiments[exp_pos];
      emit(out, {{"type", "experiment"}, {"round", e.round}, {"pair", pair_to_json(e.pair)}, {"label", static_cast<int>(e.label)}});
    }
    for (; upd_pos < log.updates.size() && log.updates[upd_pos].round <= s.round; ++upd_pos) {
      const auto& u = log.updates[upd_pos];
      nlohmann::json j{{"type", "local_update"}, {"round", u.round},   {"target", pair_to_json(u.target)},
                       {"relation", u.relation}, {"prior", u.prior},   {"output", u.output},
                       {"skipped", u.skipped}};
      j["experiment"] = u.experiment ? pair_to_json(*u.experiment) : nlohmann::json(nullptr);
      emit(out, j);
    }
    summary(s);
  }
}

RunLog read_jsonl(std::istream& in) {
  RunLog log;
  bool have_header = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const auto type = j.at("type").get<std::string>();
      if (type == "run_header") {
        if (have_header) throw IntegrityError("second run_header");
        have_header = true;
        log.header.graph_hash = j.at("graph_hash").get<std::string>();
        log.header.method = j.at("method").get<std::string>();
        log.header.config = j.at("config");
        if (!j.at("seed").is_null()) log.header.seed = j["seed"].get<std::uint64_t>();
        log.header.variable_names = j.at("variables").get<std::vector<std::string>>();
        if (!j.at("truth_edges").is_null()) log.header.truth_edges = pairs_from_json(j["truth_edges"]);
        log.header.initial_flagged = pairs_from_json(j.at("initial_flagged"));
        continue;
      }
      if (!have_header) throw IntegrityError("record before run_header");
      if (type == "round_selection") {
        log.selections.push_back({j.at("round").get<int>(), j.at("policy").get<std::string>(),
                                  pairs_from_json(j.at("pairs")), j.at("random_fill").get<std::size_t>()});
      } else if (type == "experiment") {
        log.experiments.push_back({j.at("round").get<int>(), pair_from_json(j.at("pair")),
                                   label_from_bool(j.at("label").get<int>() != 0)});
      } else if (type == "local_update") {
        UpdateRecord u;
        u.round = j.at("round").get<int>();
        if (!j.at("experiment").is_null()) u.experiment = pair_from_json(j["experiment"]);
        u.target = pair_from_json(j.at("target"));
        u.relation = j.at("relation").get<std::string>();
        u.prior = j.at("prior").get<double>();
        u.output = j.at("output").get<double>();
        u.skipped = j.at("skipped").get<bool>();
        log.updates.push_back(std::move(u));
      } else if (type == "round_summary") {
        RoundSummary s;
        s.round = j.at("round").get<int>();
        s.experimented_count = j.at("experimented").get<std::size_t>();
        s.confidences = j.at("confidences").get<std::vector<double>>();
        if (!j.at("metrics").is_null()) s.metrics = metrics_from_json(j["metrics"]);
        if (!j.at("breakdown").is_null()) s.breakdown = breakdown_from_json(j["breakdown"]);
        if (!log.summaries.empty() && s.round != log.summaries.back().round + 1) {
          throw IntegrityError("round_summary rounds are not consecutive");
        }
        log.summaries.push_back(std::move(s));
      } else {
        throw IntegrityError("unknown record type '" + type + "'");
      }
    } catch (const nlohmann::json::exception& err) {
      throw IntegrityError("run log line " + std::to_string(line_no) + ": " + err.what());
    } catch (const IntegrityError& err) {
      throw IntegrityError("run log line " + std::to_string(line_no) + ": " + err.what());
    }
  }
  if (!have_header) throw IntegrityError("run log has no run_header");
  return log;
}

void save_runlog(const RunLog& log, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write run log " + path.string());
  write_jsonl(log, out);
  if (!out) throw Error("failed writing run log " + path.string());
}

RunLog load_runlog(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open run log " + path.string());
  return read_jsonl(in);
}

}  // namespace igda
