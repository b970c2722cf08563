#include "igda/session.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include "igda/errors.hpp"
#include "igda/log.hpp"

namespace igda {

struct SessionService::Session {
  std::string id;
  std::mutex mutex;
  std::unique_ptr<GroundTruthGraph> graph;
  DiscoveryConfig config;
  std::unique_ptr<Predictor> predictor;
  InitialPrediction initial;
  std::unique_ptr<DiscoveryRun> run;
  std::vector<std::vector<ExperimentResult>> committed;
  std::vector<ExperimentResult> pending;
  std::map<std::string, ApiResponse> replies;
};

namespace {

ApiResponse error_reply(int status, const std::string& message) { return {status, {{"error", message}}}; }

std::string new_session_id() {
  static std::mutex m;
  static std::mt19937_64 rng{std::random_device{}()};
  std::lock_guard lock(m);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(rng()));
  return buf;
}

nlohmann::json pair_json(const GroundTruthGraph& g, EdgePair p) {
  return {{"parent", p.parent}, {"child", p.child}, {"name", describe_pair(g, p)}};
}

NodeId node_from_json(const GroundTruthGraph& g, const nlohmann::json& j) {
  if (j.is_number_integer()) {
    const auto id = j.get<long long>();
    if (id < 0 || static_cast<std::size_t>(id) >= g.node_count()) throw DomainError("node id out of range");
    return static_cast<NodeId>(id);
  }
  if (j.is_string()) {
    if (const auto id = g.find(j.get<std::string>())) return *id;
    throw DomainError("unknown variable '" + j.get<std::string>() + "'");
  }
  throw DomainError("node must be an id or a name");
}

EdgePair parse_pair(const GroundTruthGraph& g, const nlohmann::json& j) {
  EdgePair p;
  if (j.is_array() && j.size() == 2) {
    p = {node_from_json(g, j[0]), node_from_json(g, j[1])};
  } else if (j.is_object()) {
    p = {node_from_json(g, j.at("parent")), node_from_json(g, j.at("child"))};
  } else if (j.is_string()) {
    const auto text = j.get<std::string>();
    const auto arrow = text.find("->");
    if (arrow == std::string::npos) throw DomainError("pair must look like A->B");
    p = {node_from_json(g, text.substr(0, arrow)), node_from_json(g, text.substr(arrow + 2))};
  } else {
    throw DomainError("missing or malformed pair");
  }
  check_pair(p, g.node_count());
  return p;
}

EdgeLabel parse_label(const nlohmann::json& j) {
  if (j.is_boolean()) return label_from_bool(j.get<bool>());
  if (j.is_number_integer()) {
    const auto v = j.get<long long>();
    if (v == 0 || v == 1) return label_from_bool(v == 1);
  }
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "present" || s == "yes" || s == "1" || s == "true") return EdgeLabel::Present;
    if (s == "absent" || s == "no" || s == "0" || s == "false") return EdgeLabel::Absent;
  }
  throw DomainError("label must be present/absent, true/false or 1/0");
}

nlohmann::json results_json(const std::vector<ExperimentResult>& results) {
  auto out = nlohmann::json::array();
  for (const auto& r : results) out.push_back({{"pair", pair_to_json(r.pair)}, {"label", is_present(r.label) ? 1 : 0}});
  return out;
}

std::vector<ExperimentResult> results_from_json(const nlohmann::json& j) {
  std::vector<ExperimentResult> out;
  for (const auto& r : j) out.push_back({pair_from_json(r.at("pair")), label_from_bool(r.at("label").get<int>() != 0)});
  return out;
}

nlohmann::json describe_state(const std::string& id, const GroundTruthGraph& g, DiscoveryRun& run,
                              const std::vector<ExperimentResult>& pending) {
  const auto& state = run.state();
  const bool finished = run.finished();
  nlohmann::json out{{"id", id},
                     {"rounds_completed", run.round()},
                     {"round", finished ? run.round() : run.round() + 1},
                     {"finished", finished},
                     {"experimented_count", state.experimented_count()},
                     {"pair_count", state.pair_count()},
                     {"method", method_label(run.config().policy, run.config().updates)}};
  auto proposals = nlohmann::json::array();
  auto awaiting = nlohmann::json::array();
  if (!finished) {
    for (const auto& p : run.proposals()) {
      auto entry = pair_json(g, p);
      nlohmann::json item{{"pair", entry}, {"confidence", state.confidence(p).value()}};
      const auto it = std::find_if(pending.begin(), pending.end(), [&](const ExperimentResult& r) { return r.pair == p; });
      if (it == pending.end()) {
        awaiting.push_back(entry);
        item["feedback"] = nullptr;
      } else {
        item["feedback"] = is_present(it->label) ? 1 : 0;
      }
      proposals.push_back(std::move(item));
    }
  }
  auto pending_json = nlohmann::json::array();
  for (const auto& r : pending) pending_json.push_back({{"pair", pair_json(g, r.pair)}, {"label", is_present(r.label) ? 1 : 0}});
  out["proposals"] = std::move(proposals);
  out["awaiting"] = std::move(awaiting);
  out["pending"] = std::move(pending_json);
  const auto& summaries = run.log().summaries;
  if (!summaries.empty() && summaries.back().metrics) {
    out["metrics"] = to_json(*summaries.back().metrics);
  } else {
    out["metrics"] = nullptr;
  }
  return out;
}

}  // namespace

SessionService::SessionService(SessionServiceOptions options) : options_(std::move(options)) {
  if (!options_.predictor_factory) throw ConfigError("session service needs a predictor factory");
  options_.default_config.validate();
  if (!options_.store_dir.empty()) std::filesystem::create_directories(options_.store_dir);
}

SessionService::~SessionService() = default;

std::shared_ptr<SessionService::Session> SessionService::find(const std::string& id) {
  std::lock_guard lock(mutex_);
  const auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

std::shared_ptr<SessionService::Session> SessionService::build(const std::string& id, GroundTruthGraph graph,
                                                               const DiscoveryConfig& config,
                                                               std::optional<InitialPrediction> initial) {
  auto s = std::make_shared<Session>();
  s->id = id;
  s->graph = std::make_unique<GroundTruthGraph>(std::move(graph));
  s->config = config;
  s->predictor = options_.predictor_factory(*s->graph, config);
  s->initial = initial ? std::move(*initial)
                       : igda::initialize(*s->graph, *s->predictor, config.zero_shot_samples,
                                          config.on_backend_error, config.workers);
  s->run = std::make_unique<DiscoveryRun>(*s->graph, config, *s->predictor, s->initial, config.seed);
  return s;
}

void SessionService::save(const Session& s) const {
  if (options_.store_dir.empty()) return;
  auto config = s.config.to_json();
  config["seed"] = s.config.seed;
  nlohmann::json rounds = nlohmann::json::array();
  for (const auto& r : s.committed) rounds.push_back(results_json(r));
  nlohmann::json replies = nlohmann::json::object();
  for (const auto& [rid, reply] : s.replies) replies[rid] = {{"status", reply.status}, {"body", reply.body}};
  const nlohmann::json doc{{"id", s.id},
                           {"graph", graph_to_json(*s.graph)},
                           {"config", config},
                           {"initial", s.initial.to_json()},
                           {"committed", rounds},
                           {"pending", results_json(s.pending)},
                           {"replies", replies}};
  const auto path = options_.store_dir / (s.id + ".json");
  const auto tmp = options_.store_dir / (s.id + ".json.tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << doc.dump(2) << '\n';
    if (!out) throw Error("cannot write session file " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::size_t SessionService::restore() {
  if (options_.store_dir.empty() || !std::filesystem::exists(options_.store_dir)) return 0;
  std::size_t loaded = 0;
  for (const auto& entry : std::filesystem::directory_iterator(options_.store_dir)) {
    if (entry.path().extension() != ".json") continue;
    try {
      std::ifstream in(entry.path(), std::ios::binary);
      const auto doc = nlohmann::json::parse(in);
      const auto id = doc.at("id").get<std::string>();
      auto config = DiscoveryConfig::from_json(doc.at("config"));
      auto s = build(id, graph_from_json(doc.at("graph")), config, InitialPrediction::from_json(doc.at("initial")));
      for (const auto& round : doc.at("committed")) {
        const auto results = results_from_json(round);
        s->run->proposals();
        s->run->commit(results);
        s->committed.push_back(results);
      }
      s->pending = results_from_json(doc.at("pending"));
      const auto& proposals = s->run->proposals();
      for (const auto& r : s->pending) {
        if (std::find(proposals.begin(), proposals.end(), r.pair) == proposals.end()) {
          throw IntegrityError("pending feedback does not match the replayed proposals");
        }
      }
      for (const auto& [rid, reply] : doc.at("replies").items()) {
        s->replies[rid] = {reply.at("status").get<int>(), reply.at("body")};
      }
      std::lock_guard lock(mutex_);
      sessions_[id] = std::move(s);
      ++loaded;
    } catch (const std::exception& err) {
      warn("skipping saved session " + entry.path().filename().string() + ": " + err.what());
    }
  }
  return loaded;
}

ApiResponse SessionService::create(const nlohmann::json& body, const std::string& request_id) {
  if (!request_id.empty()) {
    std::lock_guard lock(mutex_);
    if (const auto it = create_replies_.find(request_id); it != create_replies_.end()) return it->second;
  }
  ApiResponse reply;
  try {
    if (!body.is_object() && !body.is_null()) return error_reply(400, "request body must be a JSON object");
    GroundTruthGraph graph;
    if (body.is_object() && body.contains("graph")) {
      graph = graph_from_json(body.at("graph"));
    } else if (options_.default_graph) {
      graph = *options_.default_graph;
    } else {
      return error_reply(400, "no graph given and the server has no default graph");
    }
    auto config_json = options_.default_config.to_json();
    config_json["seed"] = options_.default_config.seed;
    config_json["workers"] = options_.default_config.workers;
    if (body.is_object() && body.contains("config")) {
      if (!body["config"].is_object()) return error_reply(400, "config must be an object");
      config_json.update(body["config"]);
    }
    const auto config = DiscoveryConfig::from_json(config_json);
    auto s = build(new_session_id(), std::move(graph), config, std::nullopt);
    std::lock_guard session_lock(s->mutex);
    reply = {201, describe_state(s->id, *s->graph, *s->run, s->pending)};
    save(*s);
    std::lock_guard lock(mutex_);
    sessions_[s->id] = s;
  } catch (const RequestRejectedError& err) {
    return error_reply(502, err.what());
  } catch (const TransportError& err) {
    return error_reply(502, err.what());
  } catch (const Error& err) {
    return error_reply(400, err.what());
  } catch (const nlohmann::json::exception& err) {
    return error_reply(400, err.what());
  }
  if (!request_id.empty()) {
    std::lock_guard lock(mutex_);
    create_replies_[request_id] = reply;
  }
  return reply;
}

ApiResponse SessionService::get(const std::string& id) {
  auto s = find(id);
  if (!s) return error_reply(404, "no session " + id);
  std::lock_guard lock(s->mutex);
  return {200, describe_state(s->id, *s->graph, *s->run, s->pending)};
}

ApiResponse SessionService::feedback(const std::string& id, const nlohmann::json& body, const std::string& request_id) {
  auto s = find(id);
  if (!s) return error_reply(404, "no session " + id);
  std::lock_guard lock(s->mutex);
  if (!request_id.empty()) {
    if (const auto it = s->replies.find(request_id); it != s->replies.end()) return it->second;
  }
  ApiResponse reply;
  try {
    if (!body.is_object() || !body.contains("pair") || !body.contains("label")) {
      return error_reply(400, "feedback needs \"pair\" and \"label\"");
    }
    const auto pair = parse_pair(*s->graph, body["pair"]);
    const auto label = parse_label(body["label"]);
    if (s->run->finished()) return error_reply(409, "session is finished");
    const auto& proposals = s->run->proposals();
    if (std::find(proposals.begin(), proposals.end(), pair) == proposals.end()) {
      return error_reply(409, describe_pair(*s->graph, pair) + " was not proposed this round");
    }
    const auto known = std::find_if(s->pending.begin(), s->pending.end(), [&](const auto& r) { return r.pair == pair; });
    if (known != s->pending.end()) {
      return error_reply(409, describe_pair(*s->graph, pair) + " already has feedback; undo it first");
    }
    s->pending.push_back({pair, label});
    std::optional<int> committed_round;
    if (s->pending.size() == proposals.size()) {
      try {
        s->run->commit(s->pending);
      } catch (...) {
        s->pending.pop_back();
        throw;
      }
      s->committed.push_back(std::move(s->pending));
      s->pending.clear();
      committed_round = s->run->round();
    }
    reply = {200, describe_state(s->id, *s->graph, *s->run, s->pending)};
    reply.body["committed_round"] = committed_round ? nlohmann::json(*committed_round) : nlohmann::json(nullptr);
  } catch (const RequestRejectedError& err) {
    return error_reply(502, err.what());
  } catch (const Error& err) {
    return error_reply(400, err.what());
  } catch (const nlohmann::json::exception& err) {
    return error_reply(400, err.what());
  }
  if (!request_id.empty()) s->replies[request_id] = reply;
  save(*s);
  return reply;
}

ApiResponse SessionService::undo(const std::string& id, const nlohmann::json& body, const std::string& request_id) {
  auto s = find(id);
  if (!s) return error_reply(404, "no session " + id);
  std::lock_guard lock(s->mutex);
  if (!request_id.empty()) {
    if (const auto it = s->replies.find(request_id); it != s->replies.end()) return it->second;
  }
  ApiResponse reply;
  try {
    if (s->pending.empty()) return error_reply(409, "no pending feedback to undo");
    if (body.is_object() && body.contains("pair")) {
      const auto pair = parse_pair(*s->graph, body["pair"]);
      const auto it = std::find_if(s->pending.begin(), s->pending.end(), [&](const auto& r) { return r.pair == pair; });
      if (it == s->pending.end()) return error_reply(409, describe_pair(*s->graph, pair) + " has no pending feedback");
      s->pending.erase(it);
    } else {
      s->pending.pop_back();
    }
    reply = {200, describe_state(s->id, *s->graph, *s->run, s->pending)};
  } catch (const Error& err) {
    return error_reply(400, err.what());
  } catch (const nlohmann::json::exception& err) {
    return error_reply(400, err.what());
  }
  if (!request_id.empty()) s->replies[request_id] = reply;
  save(*s);
  return reply;
}

ApiResponse SessionService::graph(const std::string& id) {
  auto s = find(id);
  if (!s) return error_reply(404, "no session " + id);
  std::lock_guard lock(s->mutex);
  const auto& g = *s->graph;
  const auto& state = s->run->state();
  const auto n = g.node_count();
  auto conf = nlohmann::json::array();
  auto labels = nlohmann::json::array();
  auto frozen = nlohmann::json::array();
  for (std::size_t i = 0; i < n; ++i) {
    auto crow = nlohmann::json::array();
    auto lrow = nlohmann::json::array();
    auto frow = nlohmann::json::array();
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) {
        crow.push_back(nullptr);
        lrow.push_back(nullptr);
        frow.push_back(nullptr);
        continue;
      }
      const EdgePair p{static_cast<NodeId>(i), static_cast<NodeId>(j)};
      crow.push_back(state.confidence(p).value());
      lrow.push_back(is_present(state.label(p)) ? 1 : 0);
      frow.push_back(state.experimented(p));
    }
    conf.push_back(std::move(crow));
    labels.push_back(std::move(lrow));
    frozen.push_back(std::move(frow));
  }
  nlohmann::json names = nlohmann::json::array();
  for (const auto& v : g.variables) names.push_back(v.name);
  return {200,
          {{"id", s->id},
           {"round", s->run->round()},
           {"variables", names},
           {"confidence", conf},
           {"label", labels},
           {"experimented", frozen}}};
}

ApiResponse SessionService::history(const std::string& id) {
  auto s = find(id);
  if (!s) return error_reply(404, "no session " + id);
  std::lock_guard lock(s->mutex);
  const auto& g = *s->graph;
  auto pairs = nlohmann::json::array();
  for (const auto& p : candidate_edges(g.node_count())) pairs.push_back(pair_json(g, p));
  auto snapshots = nlohmann::json::array();
  const auto& summaries = s->run->log().summaries;
  for (const auto& snap : s->run->state().history()) {
    nlohmann::json item{{"round", snap.round}, {"confidences", snap.confidences}, {"experimented", snap.experimented}};
    const auto k = static_cast<std::size_t>(snap.round);
    item["metrics"] = k < summaries.size() && summaries[k].metrics ? to_json(*summaries[k].metrics) : nlohmann::json(nullptr);
    snapshots.push_back(std::move(item));
  }
  auto rounds = nlohmann::json::array();
  for (std::size_t r = 0; r < s->committed.size(); ++r) {
    nlohmann::json feedback = nlohmann::json::array();
    for (const auto& e : s->committed[r]) feedback.push_back({{"pair", pair_json(g, e.pair)}, {"label", is_present(e.label) ? 1 : 0}});
    rounds.push_back({{"round", r + 1}, {"feedback", feedback}});
  }
  return {200, {{"id", s->id}, {"pairs", pairs}, {"snapshots", snapshots}, {"rounds", rounds}}};
}

ApiResponse SessionService::list() {
  std::lock_guard lock(mutex_);
  auto ids = nlohmann::json::array();
  for (const auto& [id, s] : sessions_) ids.push_back(id);
  return {200, {{"sessions", ids}}};
}

}  // namespace igda
