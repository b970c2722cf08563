#include "igda/engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <set>
#include <sstream>

#include "igda/errors.hpp"
#include "igda/hash.hpp"
#include "igda/log.hpp"
#include "igda/parallel.hpp"

namespace igda {
namespace {

constexpr std::uint64_t kSelectionStream = 0x73656c656374ULL;

std::string pair_text(EdgePair p) {
  return "(" + std::to_string(p.parent) + "," + std::to_string(p.child) + ")";
}

bool by_uncertainty(EdgePair a, double ca, EdgePair b, double cb) {
  const double ma = std::fabs(ca);
  const double mb = std::fabs(cb);
  if (ma != mb) return ma < mb;
  return a < b;
}

}  // namespace

// ---------------------------------------------------------------- Ĝ_0

nlohmann::json InitialPrediction::to_json() const {
  auto flagged_json = nlohmann::json::array();
  for (const auto& p : flagged) flagged_json.push_back(pair_to_json(p));
  return {{"node_count", node_count},
          {"confidences", confidences},
          {"flagged", flagged_json},
          {"backend_failures", backend_failures}};
}

InitialPrediction InitialPrediction::from_json(const nlohmann::json& j) {
  InitialPrediction out;
  out.node_count = j.at("node_count").get<std::size_t>();
  out.confidences = j.at("confidences").get<std::vector<double>>();
  for (const auto& p : j.at("flagged")) out.flagged.push_back(pair_from_json(p));
  out.backend_failures = j.value("backend_failures", std::size_t{0});
  if (out.node_count < 2 || out.confidences.size() != out.node_count * (out.node_count - 1)) {
    throw IntegrityError("initial prediction does not cover every candidate pair");
  }
  return out;
}

InitialPrediction initialize(const GroundTruthGraph& graph, Predictor& predictor, int samples, BackendFailure on_error,
                             int workers) {
  if (samples < 1) throw ContractError("zero-shot sample count must be at least 1");
  const auto pairs = candidate_edges(graph.node_count());
  InitialPrediction out;
  out.node_count = graph.node_count();
  out.confidences.assign(pairs.size(), 0.0);
  std::vector<char> flagged(pairs.size(), 0);
  std::atomic<std::size_t> failures{0};

  parallel_for(pairs.size(), predictor.concurrent_calls() ? workers : 1, [&](std::size_t k) {
    try {
      const auto result = predictor.zero_shot(pairs[k], samples);
      out.confidences[k] = result.confidence.value();
      flagged[k] = result.flagged ? 1 : 0;
    } catch (const TransportError& err) {
      if (on_error == BackendFailure::Abort) throw;
      warn("zero-shot assessment of " + describe_pair(graph, pairs[k]) + " failed, using 0: " + err.what());
      out.confidences[k] = 0.0;
      flagged[k] = 1;
      ++failures;
    }
  });
  out.backend_failures = failures.load();
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    if (flagged[k]) out.flagged.push_back(pairs[k]);
  }
  return out;
}

// ---------------------------------------------------------------- state

PredictionState::PredictionState(const InitialPrediction& initial) : node_count_(initial.node_count) {
  if (node_count_ < 2) throw InvalidGraphError("a prediction needs at least 2 variables");
  const auto pairs = node_count_ * (node_count_ - 1);
  if (initial.confidences.size() != pairs) throw ContractError("initial prediction size does not match the graph");
  confidences_.reserve(pairs);
  for (double c : initial.confidences) confidences_.emplace_back(c);
  experimented_.assign(pairs, false);
  buffers_.resize(pairs);
  history_.push_back({0, confidence_values(), experimented_});
}

std::size_t PredictionState::index(EdgePair pair) const {
  check_pair(pair, node_count_);
  return pair_index(pair, node_count_);
}

SignedConfidence PredictionState::confidence(EdgePair pair) const { return confidences_[index(pair)]; }

bool PredictionState::experimented(EdgePair pair) const { return experimented_[index(pair)]; }

std::vector<double> PredictionState::confidence_values() const {
  std::vector<double> out;
  out.reserve(confidences_.size());
  for (const auto& c : confidences_) out.push_back(c.value());
  return out;
}

std::vector<EdgeLabel> PredictionState::label_vector() const {
  std::vector<EdgeLabel> out;
  out.reserve(confidences_.size());
  for (const auto& c : confidences_) out.push_back(c.label());
  return out;
}

LabelMap PredictionState::labels() const {
  LabelMap out;
  for (std::size_t k = 0; k < confidences_.size(); ++k) out.emplace(pair_at(k, node_count_), confidences_[k].label());
  return out;
}

std::vector<EdgePair> PredictionState::experimented_pairs() const {
  std::vector<EdgePair> out;
  for (std::size_t k = 0; k < experimented_.size(); ++k) {
    if (experimented_[k]) out.push_back(pair_at(k, node_count_));
  }
  return out;
}

std::vector<EdgePair> PredictionState::remaining_pairs() const {
  std::vector<EdgePair> out;
  out.reserve(remaining());
  for (std::size_t k = 0; k < experimented_.size(); ++k) {
    if (!experimented_[k]) out.push_back(pair_at(k, node_count_));
  }
  return out;
}

void PredictionState::set_confidence(EdgePair pair, SignedConfidence value) {
  const auto k = index(pair);
  if (experimented_[k]) throw ContractError("cannot change experimented pair " + pair_text(pair));
  confidences_[k] = value;
}

void PredictionState::freeze(EdgePair pair, EdgeLabel label) {
  const auto k = index(pair);
  if (experimented_[k]) throw ContractError("pair " + pair_text(pair) + " was already experimented");
  experimented_[k] = true;
  ++experimented_count_;
  confidences_[k] = SignedConfidence::certain(label);
  if (!buffers_[k].empty()) {
    buffers_[k].clear();
    --buffered_pairs_;
  }
}

void PredictionState::buffer_update(EdgePair pair, double value) {
  const auto k = index(pair);
  if (experimented_[k]) throw ContractError("update aimed at experimented pair " + pair_text(pair));
  if (buffers_[k].empty()) ++buffered_pairs_;
  buffers_[k].push_back(value);
}

std::size_t PredictionState::buffered(EdgePair pair) const { return buffers_[index(pair)].size(); }

bool PredictionState::buffers_empty() const noexcept { return buffered_pairs_ == 0; }

void PredictionState::aggregate_buffers() {
  for (std::size_t k = 0; k < buffers_.size(); ++k) {
    if (buffers_[k].empty()) continue;
    confidences_[k] = SignedConfidence(stable_mean(std::move(buffers_[k])));
    buffers_[k].clear();
  }
  buffered_pairs_ = 0;
}

void PredictionState::close_round() {
  if (!buffers_empty()) throw ContractError("round closed with unaggregated updates");
  ++round_;
  history_.push_back({round_, confidence_values(), experimented_});
}

// ---------------------------------------------------------------- selection

std::vector<EdgePair> select_uncertain(const PredictionState& state, std::size_t count) {
  auto pool = state.remaining_pairs();
  const auto take = std::min(count, pool.size());
  const auto cmp = [&](EdgePair a, EdgePair b) {
    return by_uncertainty(a, state.confidence(a).value(), b, state.confidence(b).value());
  };
  std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take), pool.end(), cmp);
  pool.resize(take);
  return pool;
}

std::vector<EdgePair> select_random(const PredictionState& state, std::size_t count, Rng& rng) {
  auto pool = state.remaining_pairs();
  const auto take = std::min(count, pool.size());
  for (std::size_t k = 0; k < take; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, pool.size() - 1);
    std::swap(pool[k], pool[pick(rng)]);
  }
  pool.resize(take);
  return pool;
}

std::vector<EdgePair> static_ranking(const InitialPrediction& initial) {
  auto pairs = candidate_edges(initial.node_count);
  std::stable_sort(pairs.begin(), pairs.end(), [&](EdgePair a, EdgePair b) {
    return by_uncertainty(a, initial.confidences[pair_index(a, initial.node_count)], b,
                          initial.confidences[pair_index(b, initial.node_count)]);
  });
  return pairs;
}

std::vector<EdgePair> select_static(const std::vector<EdgePair>& ranking, const PredictionState& state,
                                    std::size_t count) {
  std::vector<EdgePair> out;
  for (const auto& p : ranking) {
    if (out.size() >= count) break;
    if (!state.experimented(p)) out.push_back(p);
  }
  return out;
}

DirectSelection select_llm_direct(const PredictionState& state, Predictor& predictor, std::size_t count, Rng& rng,
                                  int round, int attempts, std::size_t max_pairs) {
  if (state.pair_count() > max_pairs) {
    throw PolicyUnavailableError("llm-direct selection supports at most " + std::to_string(max_pairs) +
                                 " candidate pairs, graph has " + std::to_string(state.pair_count()));
  }
  DirectSelection out;
  const auto want = std::min(count, state.remaining());
  std::set<EdgePair> accepted;
  const auto experimented = state.experimented_pairs();
  const auto labels = state.label_vector();

  for (int attempt = 0; attempt < attempts && out.pairs.size() < want; ++attempt) {
    ++out.attempts;
    DirectSelectionContext ctx{labels, experimented, want - out.pairs.size(), round, attempt};
    std::optional<std::vector<EdgePair>> proposed;
    try {
      proposed = predictor.propose_experiments(ctx);
    } catch (const TransportError& err) {
      warn(std::string("direct selection request failed: ") + err.what());
    }
    if (!proposed) continue;
    for (const auto& p : *proposed) {
      if (out.pairs.size() >= want) break;
      const bool valid = p.parent != p.child && p.parent >= 0 && p.child >= 0 &&
                         static_cast<std::size_t>(p.parent) < state.node_count() &&
                         static_cast<std::size_t>(p.child) < state.node_count();
      if (!valid || state.experimented(p) || accepted.contains(p)) {
        ++out.rejected;
        continue;
      }
      accepted.insert(p);
      out.pairs.push_back(p);
    }
  }

  if (out.pairs.size() < want) {
    std::vector<EdgePair> pool;
    for (const auto& p : state.remaining_pairs()) {
      if (!accepted.contains(p)) pool.push_back(p);
    }
    const auto fill = want - out.pairs.size();
    for (std::size_t k = 0; k < fill; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, pool.size() - 1);
      std::swap(pool[k], pool[pick(rng)]);
      out.pairs.push_back(pool[k]);
    }
    out.random_fill = fill;
    warn("direct selection filled " + std::to_string(fill) + " of " + std::to_string(want) + " pairs at random");
  }
  return out;
}

// ---------------------------------------------------------------- updates

std::vector<UpdateTarget> adjacent_update_targets(const PredictionState& state, EdgePair experiment,
                                                  AdjacencyScope scope) {
  const auto n = static_cast<NodeId>(state.node_count());
  check_pair(experiment, state.node_count());
  const NodeId i = experiment.parent;
  const NodeId j = experiment.child;
  std::vector<UpdateTarget> parent_side;
  std::vector<UpdateTarget> child_side;
  const auto eligible = [&](EdgePair p) { return !state.experimented(p) && !state.confidence(p).is_certain(); };

  for (NodeId k = 0; k < n; ++k) {
    if (k != i && k != j && eligible({i, k})) parent_side.push_back({{i, k}, UpdateRelation::SharesParent});
    if (k != i && k != j && eligible({k, j})) child_side.push_back({{k, j}, UpdateRelation::SharesChild});
  }
  if (scope == AdjacencyScope::AnySharedNode) {
    for (NodeId k = 0; k < n; ++k) {
      if (k != i && k != j && eligible({k, i})) parent_side.push_back({{k, i}, UpdateRelation::SharesParent});
      if (k != i && k != j && eligible({j, k})) child_side.push_back({{j, k}, UpdateRelation::SharesChild});
    }
    if (eligible({j, i})) parent_side.push_back({{j, i}, UpdateRelation::SharesParent});
    const auto by_pair = [](const UpdateTarget& a, const UpdateTarget& b) { return a.pair < b.pair; };
    std::sort(parent_side.begin(), parent_side.end(), by_pair);
    std::sort(child_side.begin(), child_side.end(), by_pair);
  }
  parent_side.insert(parent_side.end(), child_side.begin(), child_side.end());
  return parent_side;
}

std::vector<UpdateRecord> apply_feedback_and_update(PredictionState& state, std::span<const ExperimentResult> results,
                                                    Predictor& predictor, const UpdateOptions& options) {
  const std::vector<SignedConfidence> start = state.confidences();
  const auto at_start = [&](EdgePair p) { return start[pair_index(p, state.node_count())]; };

  for (const auto& r : results) state.freeze(r.pair, r.label);

  std::vector<UpdateRecord> records;
  if (options.strategy == UpdateStrategy::None) return records;

  if (options.strategy == UpdateStrategy::Global) {
    GlobalUpdateContext ctx{start, {}, options.round};
    for (const auto& r : results) ctx.feedback.push_back({r.pair, r.label});
    std::vector<EdgeRevision> revisions;
    try {
      revisions = predictor.global_update(ctx);
    } catch (const TransportError& err) {
      warn(std::string("global update failed, prediction left unchanged: ") + err.what());
    }
    for (const auto& rev : revisions) {
      if (state.experimented(rev.pair)) continue;
      state.buffer_update(rev.pair, rev.confidence.value());
      records.push_back({options.round, std::nullopt, rev.pair, "global", at_start(rev.pair).value(),
                         rev.confidence.value(), false});
    }
    state.aggregate_buffers();
    return records;
  }

  struct Job {
    LocalUpdateContext ctx;
    LocalUpdateResult result;
    bool failed = false;
  };
  std::vector<Job> jobs;
  for (const auto& r : results) {
    for (const auto& target : adjacent_update_targets(state, r.pair, options.adjacency)) {
      jobs.push_back({LocalUpdateContext{r.pair, r.label, at_start(r.pair), target.pair, at_start(target.pair),
                                         target.relation, options.round},
                      {},
                      false});
    }
  }

  parallel_for(jobs.size(), predictor.concurrent_calls() ? options.workers : 1, [&](std::size_t k) {
    auto& job = jobs[k];
    try {
      job.result = predictor.local_update(job.ctx, options.samples);
    } catch (const TransportError& err) {
      job.failed = true;
      warn(std::string("local update skipped: ") + err.what());
    }
  });

  records.reserve(jobs.size());
  for (const auto& job : jobs) {
    const bool skipped = job.failed || job.result.skipped;
    const double prior = job.ctx.target_confidence.value();
    const double output = skipped ? prior : job.result.confidence.value();
    if (!skipped) state.buffer_update(job.ctx.target, output);
    records.push_back({options.round, job.ctx.experiment, job.ctx.target, std::string(to_string(job.ctx.relation)),
                       prior, output, skipped});
  }
  state.aggregate_buffers();
  return records;
}

// ---------------------------------------------------------------- oracle

TruthOracle::TruthOracle(const GroundTruthGraph& graph) : graph_(graph) {
  if (!graph.edges_known) throw ConfigError("the graph carries no edge set to answer experiments from");
}

EdgeLabel TruthOracle::answer(EdgePair pair) { return label_of(graph_, pair.parent, pair.child); }

// ---------------------------------------------------------------- run

bool consumes_seed(const DiscoveryConfig& config) {
  return !(config.policy == SelectionPolicy::Static && config.updates == UpdateStrategy::None);
}

DiscoveryRun::DiscoveryRun(const GroundTruthGraph& graph, DiscoveryConfig config, Predictor& predictor,
                           const InitialPrediction& initial, std::uint64_t seed)
    : graph_(graph),
      config_(std::move(config)),
      predictor_(predictor),
      state_(initial),
      rng_(mix64(seed, kSelectionStream)) {
  config_.validate();
  if (initial.node_count != graph.node_count()) throw ContractError("initial prediction is for a different graph");
  config_.seed = seed;
  if (config_.policy == SelectionPolicy::Static) ranking_ = static_ranking(initial);

  log_.header.graph_hash = graph_hash(graph);
  log_.header.method = method_label(config_.policy, config_.updates);
  log_.header.config = config_.to_json();
  if (consumes_seed(config_)) log_.header.seed = seed;
  for (const auto& v : graph.variables) log_.header.variable_names.push_back(v.name);
  if (graph.edges_known) log_.header.truth_edges = std::vector<EdgePair>(graph.edges.begin(), graph.edges.end());
  log_.header.initial_flagged = initial.flagged;
  record_summary({}, {});
}

bool DiscoveryRun::finished() const noexcept {
  if (state_.remaining() == 0) return true;
  return !config_.until_exhausted && state_.round() >= config_.rounds;
}

const std::vector<EdgePair>& DiscoveryRun::proposals() {
  if (pending_) return *pending_;
  std::vector<EdgePair> picked;
  pending_fill_ = 0;
  if (!finished()) {
    const auto count = static_cast<std::size_t>(config_.per_round);
    switch (config_.policy) {
      case SelectionPolicy::Uncertainty:
        picked = select_uncertain(state_, count);
        break;
      case SelectionPolicy::Random:
        picked = select_random(state_, count, rng_);
        break;
      case SelectionPolicy::Static:
        picked = select_static(ranking_, state_, count);
        break;
      case SelectionPolicy::LlmDirect: {
        auto direct = select_llm_direct(state_, predictor_, count, rng_, state_.round() + 1, config_.direct_attempts,
                                        config_.direct_max_pairs);
        picked = std::move(direct.pairs);
        pending_fill_ = direct.random_fill;
        break;
      }
    }
  }
  pending_ = std::move(picked);
  return *pending_;
}

void DiscoveryRun::commit(std::span<const ExperimentResult> results) {
  const auto& expected = proposals();
  if (expected.empty()) throw ContractError("no round is pending");

  std::map<EdgePair, EdgeLabel> answers;
  for (const auto& r : results) {
    const auto [it, inserted] = answers.emplace(r.pair, r.label);
    if (!inserted && it->second != r.label) {
      throw OracleInconsistencyError("pair " + describe_pair(graph_, r.pair) + " was answered both ways");
    }
  }
  const std::set<EdgePair> wanted(expected.begin(), expected.end());
  for (const auto& [pair, label] : answers) {
    if (!wanted.contains(pair)) throw ContractError("result for unproposed pair " + describe_pair(graph_, pair));
  }
  if (answers.size() != wanted.size()) throw ContractError("results are missing for some proposed pairs");

  const int round = state_.round() + 1;
  std::vector<ExperimentResult> ordered;
  ordered.reserve(expected.size());
  for (const auto& p : expected) ordered.push_back({p, answers.at(p)});

  log_.selections.push_back({round, std::string(to_string(config_.policy)), expected, pending_fill_});
  for (const auto& r : ordered) log_.experiments.push_back({round, r.pair, r.label});

  const auto previous = state_.labels();
  UpdateOptions options{config_.updates, config_.adjacency, config_.update_samples, config_.workers, round};
  auto updates = apply_feedback_and_update(state_, ordered, predictor_, options);
  log_.updates.insert(log_.updates.end(), std::make_move_iterator(updates.begin()),
                      std::make_move_iterator(updates.end()));
  state_.close_round();
  pending_.reset();
  pending_fill_ = 0;
  record_summary(wanted, previous);
}

void DiscoveryRun::record_summary(const std::set<EdgePair>& experimented_now, const LabelMap& previous) {
  RoundSummary s;
  s.round = state_.round();
  s.experimented_count = state_.experimented_count();
  s.confidences = state_.confidence_values();
  if (graph_.edges_known) {
    const auto labels = state_.labels();
    s.metrics = compute_metrics(labels, graph_);
    if (s.round > 0) s.breakdown = diff_rounds(previous, labels, graph_, experimented_now);
  }
  log_.summaries.push_back(std::move(s));
}

RunLog run_discovery(const GroundTruthGraph& graph, const DiscoveryConfig& config, Predictor& predictor,
                     ExperimentOracle& oracle, const std::optional<InitialPrediction>& initial) {
  config.validate();
  validate(graph);
  if (graph.edges_known && graph.edges.empty()) {
    warn("the truth graph has no edges; F1 is 0 for every prediction");
  }
  const auto g0 = initial ? *initial
                          : initialize(graph, predictor, config.zero_shot_samples, config.on_backend_error,
                                       config.workers);
  DiscoveryRun run(graph, config, predictor, g0, config.seed);
  std::map<EdgePair, EdgeLabel> seen;
  while (!run.finished()) {
    const auto pairs = run.proposals();
    std::vector<ExperimentResult> results;
    results.reserve(pairs.size());
    for (const auto& p : pairs) {
      const auto label = oracle.answer(p);
      const auto [it, inserted] = seen.emplace(p, label);
      if (!inserted && it->second != label) {
        throw OracleInconsistencyError("oracle changed its answer for " + describe_pair(graph, p));
      }
      results.push_back({p, label});
    }
    run.commit(results);
  }
  return run.take_log();
}

BatchResult run_batch(const GroundTruthGraph& graph, const DiscoveryConfig& config, const PredictorFactory& factory,
                      ExperimentOracle& oracle, const InitialPrediction& initial) {
  config.validate();
  if (config.runs < 1) throw ContractError("run count must be at least 1");
  const auto runs = static_cast<std::size_t>(config.runs);
  std::vector<std::optional<RunLog>> logs(runs);
  std::vector<std::string> errors(runs);
  std::mutex oracle_mutex;

  // Oracles are not required to be thread-safe; calls are serialized.
  struct LockedOracle final : ExperimentOracle {
    ExperimentOracle& inner;
    std::mutex& m;
    LockedOracle(ExperimentOracle& o, std::mutex& mm) : inner(o), m(mm) {}
    EdgeLabel answer(EdgePair pair) override {
      std::lock_guard lock(m);
      return inner.answer(pair);
    }
  };

  auto per_run = config;
  per_run.workers = 1;
  parallel_for(runs, config.workers, [&](std::size_t k) {
    auto run_config = per_run;
    run_config.seed = derive_run_seed(config.seed, k);
    try {
      auto predictor = factory(run_config.seed);
      LockedOracle locked(oracle, oracle_mutex);
      logs[k] = run_discovery(graph, run_config, *predictor, locked, initial);
    } catch (const std::exception& err) {
      errors[k] = err.what();
      if (errors[k].empty()) errors[k] = "run failed";
    }
  });

  BatchResult out;
  for (std::size_t k = 0; k < runs; ++k) {
    if (logs[k]) {
      out.logs.push_back(std::move(*logs[k]));
      out.run_indices.push_back(static_cast<int>(k));
    } else {
      out.failures.push_back({static_cast<int>(k), errors[k]});
      warn("run " + std::to_string(k) + " aborted: " + errors[k]);
    }
  }
  if (!out.failures.empty() && !out.logs.empty()) {
    warn("aggregating over " + std::to_string(out.logs.size()) + " of " + std::to_string(runs) + " runs");
  }
  return out;
}

}  // namespace igda
