#include "igda/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <set>

#include "igda/analysis.hpp"
#include "igda/engine.hpp"
#include "igda/errors.hpp"
#include "igda/gateway.hpp"
#include "igda/hash.hpp"
#include "igda/log.hpp"
#include "igda/server.hpp"
#include "igda/session.hpp"
#include "igda/simulation.hpp"

namespace igda::cli {
namespace {

struct BackendOptions {
  std::string backend = "llm";
  GatewayConfig gateway;
  bool no_cache = false;
  std::string script;
  OracleParams sim;
  int workers = 4;
};

struct RunOptions {
  std::string graph;
  std::string out = "igda-out";
  int samples = 16;
  BackendOptions backend;
  DiscoveryConfig discovery;
  std::string policy = "uncertainty";
  std::string updates = "local";
  std::string adjacency = "same-role";
  std::string oracle = "truth";
  double sim_edge_prob = 0.15;
  bool init = false;
  bool exhaust = false;
  std::string on_backend_error = "mark";
  // analyze
  std::vector<std::string> logs;
  std::vector<std::string> labels;
  bool improvements = false;
  std::string spread = "stddev";
  // serve
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string static_dir;
};

struct Failure {
  int code;
  std::string message;
};

std::string hex8(const std::string& text) { return sha256_hex(text).substr(0, 8); }

std::string fmt_double(double v, const char* spec = "%.4f") {
  char buf[48];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string file_method(const std::string& method) {
  std::string out = method;
  for (auto& c : out) {
    if (c == '+') c = '_';
  }
  return out;
}

void add_backend_options(CLI::App* cmd, RunOptions& o) {
  auto& b = o.backend;
  cmd->add_option("--backend", b.backend, "Predictor backend")
      ->check(CLI::IsMember({"llm", "simulated", "scripted"}))
      ->capture_default_str();
  cmd->add_option("--base-url", b.gateway.base_url, "Chat-completions endpoint prefix")->capture_default_str();
  cmd->add_option("--model", b.gateway.model, "Model identifier")->capture_default_str();
  cmd->add_option("--temperature", b.gateway.temperature, "Sampling temperature")->capture_default_str();
  cmd->add_option("--max-tokens", b.gateway.max_tokens, "Completion token limit")->capture_default_str();
  cmd->add_option("--timeout", b.gateway.timeout_seconds, "Request timeout in seconds")->capture_default_str();
  cmd->add_option("--retries", b.gateway.max_retries, "Retries per request")->capture_default_str();
  cmd->add_option("--backoff-ms", b.gateway.backoff_base_ms, "Retry backoff base in ms")->capture_default_str();
  cmd->add_option("--max-in-flight", b.gateway.max_in_flight, "Concurrent requests")->capture_default_str();
  cmd->add_flag("--no-cache", b.no_cache, "Disable the completion cache");
  cmd->add_option("--script", b.script, "Scripted predictor definition (JSON)");
  cmd->add_option("--sim-accuracy", b.sim.zero_shot_accuracy, "Simulated zero-shot accuracy")->capture_default_str();
  cmd->add_option("--sim-gap", b.sim.calibration_gap, "Simulated calibration gap")->capture_default_str();
  cmd->add_option("--sim-fidelity", b.sim.update_fidelity, "Simulated update fidelity")->capture_default_str();
  cmd->add_option("--sim-step-lo", b.sim.step_lo, "Smallest simulated update step")->capture_default_str();
  cmd->add_option("--sim-step-hi", b.sim.step_hi, "Largest simulated update step")->capture_default_str();
  cmd->add_option("--sim-seed", b.sim.seed, "Seed of the simulated predictor")->capture_default_str();
  cmd->add_option("--workers", b.workers, "Threads for independent predictor calls")->capture_default_str();
  cmd->add_option("--samples,-K", o.samples, "Zero-shot samples per pair")->capture_default_str();
  cmd->add_option("--out", o.out, "Output directory")->capture_default_str();
}

void add_discovery_options(CLI::App* cmd, RunOptions& o) {
  auto& d = o.discovery;
  cmd->add_option("--policy", o.policy, "Selection policy")
      ->check(CLI::IsMember({"uncertainty", "random", "static", "llm-direct"}))
      ->capture_default_str();
  cmd->add_option("--updates", o.updates, "Update strategy")
      ->check(CLI::IsMember({"local", "none", "global"}))
      ->capture_default_str();
  cmd->add_option("--adjacency", o.adjacency, "Which pairs count as adjacent")
      ->check(CLI::IsMember({"same-role", "any-shared-node"}))
      ->capture_default_str();
  cmd->add_option("--rounds", d.rounds, "Rounds R")->capture_default_str();
  cmd->add_option("--per-round", d.per_round, "Experiments per round I")->capture_default_str();
  cmd->add_option("--update-samples", d.update_samples, "Samples per local update U")->capture_default_str();
  cmd->add_option("--runs", d.runs, "Independent runs")->capture_default_str();
  cmd->add_option("--seed", d.seed, "Base seed")->capture_default_str();
  cmd->add_flag("--exhaust", o.exhaust, "Ignore --rounds and run until every pair is experimented");
  cmd->add_option("--on-backend-error", o.on_backend_error, "Zero-shot failure handling")
      ->check(CLI::IsMember({"mark", "abort"}))
      ->capture_default_str();
}

/// Owns whatever the chosen backend needs and hands out predictors.
struct Backend {
  std::string kind;
  nlohmann::json identity;
  std::unique_ptr<ChatGateway> gateway;
  Script script;
  OracleParams sim;
  int workers = 1;

  std::unique_ptr<Predictor> predictor(const GroundTruthGraph& graph, std::optional<std::uint64_t> run_seed) const {
    if (kind == "llm") return std::make_unique<ChatPredictor>(graph, *gateway, SamplingPolicy{}, true);
    if (kind == "scripted") return std::make_unique<ScriptedPredictor>(graph, script);
    auto params = sim;
    if (run_seed) params.seed = mix64(sim.seed, *run_seed);
    return std::make_unique<SimulatedPredictor>(graph, params);
  }
};

Backend make_backend(const RunOptions& o, const GroundTruthGraph& graph, const std::filesystem::path& out_dir) {
  Backend b;
  b.kind = o.backend.backend;
  b.workers = o.backend.workers;
  if (b.workers < 1) throw ConfigError("--workers must be at least 1");
  if (b.kind == "llm") {
    auto cfg = o.backend.gateway;
    cfg.cache = !o.backend.no_cache;
    if (cfg.cache) cfg.cache_path = out_dir / "completions.jsonl";
    cfg.audit_path = out_dir / "audit.jsonl";
    b.gateway = std::make_unique<ChatGateway>(cfg);
    b.identity = {{"backend", "llm"}, {"model", cfg.model}, {"temperature", cfg.temperature},
                  {"max_tokens", cfg.max_tokens}};
  } else if (b.kind == "scripted") {
    nlohmann::json doc = nlohmann::json::object();
    if (!o.backend.script.empty()) {
      std::ifstream in(o.backend.script, std::ios::binary);
      if (!in) throw ConfigError("cannot open script " + o.backend.script);
      try {
        doc = nlohmann::json::parse(in);
      } catch (const nlohmann::json::exception& err) {
        throw ConfigError("script " + o.backend.script + " is not valid JSON: " + err.what());
      }
    }
    b.script = Script::from_json(doc, graph);
    b.identity = {{"backend", "scripted"}, {"script", sha256_hex(doc.dump())}};
  } else {
    b.sim = o.backend.sim;
    b.sim.validate();
    if (!graph.edges_known) throw ConfigError("the simulated backend needs a graph with truth edges");
    b.identity = {{"backend", "simulated"}, {"params", b.sim.to_json()}};
  }
  return b;
}

DiscoveryConfig resolve_discovery(const RunOptions& o) {
  auto c = o.discovery;
  c.policy = parse_policy(o.policy);
  c.updates = parse_strategy(o.updates);
  c.adjacency = parse_adjacency(o.adjacency);
  c.zero_shot_samples = o.samples;
  c.until_exhausted = o.exhaust;
  c.on_backend_error = o.on_backend_error == "abort" ? BackendFailure::Abort : BackendFailure::MarkNeutral;
  c.workers = o.backend.workers;
  c.validate();
  return c;
}

double backend_temperature(const RunOptions& o) { return o.backend.backend == "llm" ? o.backend.gateway.temperature : 0.0; }

std::filesystem::path initial_cache_path(const RunOptions& o, const GroundTruthGraph& graph, const Backend& b) {
  return std::filesystem::path(o.out) /
         initial_cache_name(graph_hash(graph), b.identity, o.samples, backend_temperature(o));
}

InitialPrediction compute_initial(const RunOptions& o, const GroundTruthGraph& graph, const Backend& b,
                                  std::ostream& out) {
  auto predictor = b.predictor(graph, std::nullopt);
  const auto mode = o.on_backend_error == "abort" ? BackendFailure::Abort : BackendFailure::MarkNeutral;
  auto initial = initialize(graph, *predictor, o.samples, mode, b.workers);
  if (initial.backend_failures == graph.pair_count()) {
    throw Failure{kBackendUnavailable, "every zero-shot request failed; is the backend reachable?"};
  }
  const auto path = initial_cache_path(o, graph, b);
  const nlohmann::json doc{{"graph_hash", graph_hash(graph)},
                           {"backend", b.identity},
                           {"samples", o.samples},
                           {"temperature", backend_temperature(o)},
                           {"initial", initial.to_json()}};
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  file << doc.dump(2) << '\n';
  if (!file) throw Failure{kInvalidInput, "cannot write " + path.string()};
  out << "zero-shot prediction: " << graph.pair_count() << " pairs, " << initial.flagged.size() << " flagged -> "
      << path.string() << '\n';
  return initial;
}

std::optional<InitialPrediction> load_initial(const std::filesystem::path& path, const GroundTruthGraph& graph) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  try {
    const auto doc = nlohmann::json::parse(in);
    auto initial = InitialPrediction::from_json(doc.at("initial"));
    if (initial.node_count != graph.node_count()) throw IntegrityError("node count differs from the graph");
    return initial;
  } catch (const std::exception& err) {
    throw Failure{kInvalidInput, "cached zero-shot prediction " + path.string() + " is unusable: " + err.what()};
  }
}

void print_metrics(std::ostream& out, const GraphMetrics& m) {
  out << "F1 vs truth: " << fmt_double(m.f1) << " (precision " << fmt_double(m.precision) << ", recall "
      << fmt_double(m.recall) << ")\n";
}

// ---------------------------------------------------------------- commands

int cmd_predict(const RunOptions& o, std::ostream& out) {
  const auto graph = load_graph(o.graph);
  std::filesystem::create_directories(o.out);
  const auto backend = make_backend(o, graph, o.out);
  const auto initial = compute_initial(o, graph, backend, out);
  if (graph.edges_known) {
    LabelMap labels;
    for (std::size_t k = 0; k < initial.confidences.size(); ++k) {
      labels.emplace(pair_at(k, graph.node_count()), label_from_bool(initial.confidences[k] >= 0.0));
    }
    print_metrics(out, compute_metrics(labels, graph));
  }
  if (backend.gateway) {
    out << "completions: " << backend.gateway->records().size() << " records, " << backend.gateway->network_calls()
        << " requests\n";
  }
  return kOk;
}

/// Asks for each experiment outcome on a text stream.
class StreamOracle final : public ExperimentOracle {
 public:
  StreamOracle(const GroundTruthGraph& graph, std::istream& in, std::ostream& out) : graph_(graph), in_(in), out_(out) {}

  EdgeLabel answer(EdgePair pair) override {
    for (;;) {
      out_ << "Is " << describe_pair(graph_, pair) << " a direct causal edge? [y/n] " << std::flush;
      std::string line;
      if (!std::getline(in_, line)) throw Error("experiment input ended");
      while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
      if (line == "y" || line == "yes" || line == "1" || line == "present") return EdgeLabel::Present;
      if (line == "n" || line == "no" || line == "0" || line == "absent") return EdgeLabel::Absent;
      out_ << "please answer y or n\n";
    }
  }

 private:
  const GroundTruthGraph& graph_;
  std::istream& in_;
  std::ostream& out_;
};

int cmd_discover(const RunOptions& o, std::ostream& out, std::istream& in) {
  auto graph = load_graph(o.graph);
  auto config = resolve_discovery(o);
  if (o.oracle == "simulated") {
    const auto synthetic = random_graph(graph.node_count(), o.sim_edge_prob, o.backend.sim.seed);
    graph.edges = synthetic.edges;
    graph.edges_known = true;
  } else if (o.oracle == "truth" && !graph.edges_known) {
    throw Failure{kInvalidInput, "--oracle truth needs a graph file with \"edges\""};
  }
  if (o.oracle == "session") config.runs = 1;

  std::filesystem::create_directories(o.out);
  const auto backend = make_backend(o, graph, o.out);
  const auto cache = initial_cache_path(o, graph, backend);
  auto initial = load_initial(cache, graph);
  if (!initial) {
    if (!o.init) {
      throw Failure{kInvalidInput, "no cached zero-shot prediction at " + cache.string() +
                                       "; run predict first or pass --init"};
    }
    initial = compute_initial(o, graph, backend, out);
  }

  std::unique_ptr<ExperimentOracle> oracle;
  if (o.oracle == "session") {
    oracle = std::make_unique<StreamOracle>(graph, in, out);
  } else {
    oracle = std::make_unique<TruthOracle>(graph);
  }

  const PredictorFactory factory = [&](std::uint64_t seed) { return backend.predictor(graph, seed); };
  auto batch = run_batch(graph, config, factory, *oracle, *initial);
  for (const auto& f : batch.failures) out << "run " << f.run << " failed: " << f.message << '\n';
  if (batch.logs.empty()) throw Failure{kInvalidInput, "every run failed"};

  const auto method = method_label(config.policy, config.updates);
  const auto g8 = graph_hash(graph).substr(0, 8);
  const auto c8 = hex8(config.to_json().dump() + backend.identity.dump());
  const auto runs_dir = std::filesystem::path(o.out) / "runs";
  std::filesystem::create_directories(runs_dir);
  for (std::size_t k = 0; k < batch.logs.size(); ++k) {
    auto& log = batch.logs[k];
    log.header.config["backend"] = backend.identity;
    log.header.config["zero_shot_samples"] = o.samples;
    const auto name = file_method(method) + "-" + g8 + "-" + c8 + "-s" + std::to_string(config.seed) + "-r" +
                      std::to_string(batch.run_indices[k]) + ".jsonl";
    save_runlog(log, runs_dir / name);
  }
  out << "wrote " << batch.logs.size() << " run logs to " << runs_dir.string() << '\n';

  if (graph.edges_known) {
    const auto curve = aggregate_logs(batch.logs);
    const auto csv = std::filesystem::path(o.out) / ("curves_" + g8 + "_" + c8 + ".csv");
    std::ofstream file(csv, std::ios::binary | std::ios::trunc);
    write_curves_csv(file, {{method, curve}});
    const auto& last = curve.back();
    out << "final mean F1: " << fmt_double(last.mean) << " (spread " << fmt_double(last.spread) << ", " << last.runs
        << " runs, " << fmt_double(100.0 * last.fraction, "%.1f") << "% of pairs experimented)\n";
  }
  return kOk;
}

int cmd_analyze(const RunOptions& o, std::ostream& out) {
  if (!o.labels.empty() && o.labels.size() != o.logs.size()) {
    throw Failure{kInvalidInput, "--labels needs one label per log"};
  }
  std::map<std::string, std::vector<RunLog>> groups;
  std::set<std::string> configs;
  for (std::size_t k = 0; k < o.logs.size(); ++k) {
    auto log = load_runlog(o.logs[k]);
    const auto label = o.labels.empty() ? log.header.method : o.labels[k];
    configs.insert(label + "\n" + log.header.config.dump());
    groups[label].push_back(std::move(log));
  }
  std::string graph;
  for (const auto& [label, logs] : groups) {
    for (const auto& log : logs) {
      if (graph.empty()) graph = log.header.graph_hash;
      if (log.header.graph_hash != graph) throw AlignmentError("logs come from different graphs");
    }
  }
  std::string config_material;
  for (const auto& c : configs) config_material += c + "\n";
  const auto suffix = graph.substr(0, 8) + "_" + hex8(config_material) + ".csv";
  const auto spread = o.spread == "envelope" ? SpreadStatistic::Envelope : SpreadStatistic::StdDev;

  std::map<std::string, AggregateCurve> curves;
  for (const auto& [label, logs] : groups) curves[label] = aggregate_logs(logs, spread);

  std::filesystem::create_directories(o.out);
  const auto write = [&](const std::string& stem, const auto& writer) {
    const auto path = std::filesystem::path(o.out) / (stem + "_" + suffix);
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw Failure{kInvalidInput, "cannot write " + path.string()};
    writer(file);
    out << "wrote " << path.string() << '\n';
  };
  write("curves", [&](std::ostream& f) { write_curves_csv(f, curves); });
  if (curves.size() >= 2) {
    const auto table = rank_methods(curves);
    write("ranks", [&](std::ostream& f) { write_ranks_csv(f, table); });
    for (std::size_t m = 0; m < table.methods.size(); ++m) {
      out << "average rank " << table.methods[m] << ": " << fmt_double(table.average[m], "%.3f") << '\n';
    }
  }
  if (o.improvements) {
    std::vector<ImprovementSeries> series;
    for (const auto& [label, logs] : groups) {
      for (std::size_t k = 0; k < logs.size(); ++k) series.push_back({label, static_cast<int>(k), improvement_series(logs[k])});
    }
    write("improvements", [&](std::ostream& f) { write_improvements_csv(f, series); });
  }
  for (const auto& [label, curve] : curves) {
    out << label << ": AUC " << fmt_double(area_under_curve(curve)) << ", final F1 " << fmt_double(curve.back().mean)
        << '\n';
  }
  return kOk;
}

int cmd_serve(const RunOptions& o, std::ostream& out) {
  std::optional<GroundTruthGraph> graph;
  if (!o.graph.empty()) graph = load_graph(o.graph);
  std::filesystem::create_directories(o.out);
  // One gateway serves every session; scripted and simulated predictors are
  // built per session against that session's graph.
  std::shared_ptr<Backend> shared;
  if (o.backend.backend == "llm") shared = std::make_shared<Backend>(make_backend(o, GroundTruthGraph{}, o.out));

  SessionServiceOptions options;
  options.default_graph = graph;
  options.default_config = resolve_discovery(o);
  options.store_dir = std::filesystem::path(o.out) / "sessions";
  options.predictor_factory = [shared, &o](const GroundTruthGraph& g, const DiscoveryConfig&) {
    if (shared) return shared->predictor(g, std::nullopt);
    return make_backend(o, g, o.out).predictor(g, std::nullopt);
  };
  SessionService service(options);
  const auto restored = service.restore();

  SessionHttpServer server(service, o.static_dir);
  if (!server.bind(o.host, o.port)) {
    throw Failure{kPortBusy, "cannot listen on " + o.host + ":" + std::to_string(o.port)};
  }
  out << "listening on http://" << o.host << ":" << server.port() << " (" << restored << " sessions restored)\n"
      << std::flush;
  server.serve();
  return kOk;
}

}  // namespace

std::string initial_cache_name(const std::string& graph_hash, const nlohmann::json& backend_identity, int samples,
                               double temperature) {
  const nlohmann::json key{{"graph", graph_hash}, {"backend", backend_identity}, {"samples", samples},
                           {"temperature", temperature}};
  return "g0-" + sha256_hex(key.dump()).substr(0, 16) + ".json";
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err, std::istream& in) {
  CLI::App app{"Interactive graph discovery with a language-model predictor"};
  app.set_config("--config", "", "Read options from a TOML/INI file (flags on the command line win)");
  app.require_subcommand(1);
  RunOptions o;

  auto* predict = app.add_subcommand("predict", "Zero-shot prediction of every pair; writes the cache");
  predict->add_option("--graph", o.graph, "Graph JSON file")->required();
  add_backend_options(predict, o);
  predict->add_option("--on-backend-error", o.on_backend_error, "Zero-shot failure handling")
      ->check(CLI::IsMember({"mark", "abort"}))
      ->capture_default_str();

  auto* discover = app.add_subcommand("discover", "Run the experiment loop");
  discover->add_option("--graph", o.graph, "Graph JSON file")->required();
  add_backend_options(discover, o);
  add_discovery_options(discover, o);
  discover->add_option("--oracle", o.oracle, "Source of experiment outcomes")
      ->check(CLI::IsMember({"truth", "simulated", "session"}))
      ->capture_default_str();
  discover->add_option("--sim-edge-prob", o.sim_edge_prob, "Edge probability of the simulated truth")
      ->capture_default_str();
  discover->add_flag("--init", o.init, "Compute the zero-shot prediction when it is not cached");

  auto* analyze = app.add_subcommand("analyze", "Curves, rank tables and improvement series from run logs");
  analyze->add_option("logs", o.logs, "Run log files")->required()->check(CLI::ExistingFile);
  analyze->add_option("--labels", o.labels, "Method label per log (defaults to the logged method)");
  analyze->add_flag("--improvements", o.improvements, "Also write the improvement series");
  analyze->add_option("--spread", o.spread, "Spread statistic")
      ->check(CLI::IsMember({"stddev", "envelope"}))
      ->capture_default_str();
  analyze->add_option("--out", o.out, "Output directory")->capture_default_str();

  auto* serve = app.add_subcommand("serve", "Host interactive sessions over HTTP");
  serve->add_option("--graph", o.graph, "Default graph for new sessions");
  add_backend_options(serve, o);
  add_discovery_options(serve, o);
  serve->add_option("--host", o.host, "Listen address")->capture_default_str();
  serve->add_option("--port", o.port, "Listen port")->capture_default_str();
  serve->add_option("--static-dir", o.static_dir, "Directory of browser assets to serve");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kInvalidInput;
  }

  try {
    if (*predict) return cmd_predict(o, out);
    if (*discover) return cmd_discover(o, out, in);
    if (*analyze) return cmd_analyze(o, out);
    if (*serve) return cmd_serve(o, out);
    return kInvalidInput;
  } catch (const Failure& f) {
    err << "error: " << f.message << '\n';
    return f.code;
  } catch (const AlignmentError& e) {
    err << "error: " << e.what() << '\n';
    return kGridMismatch;
  } catch (const TransportError& e) {
    err << "error: backend unreachable: " << e.what() << '\n';
    return kBackendUnavailable;
  } catch (const RequestRejectedError& e) {
    err << "error: backend rejected the request: " << e.what() << '\n';
    return kBackendUnavailable;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kInvalidInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInvalidInput;
  }
}

}  // namespace igda::cli
