#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>
#include <tuple>

#include "fixtures.hpp"
#include "igda/engine.hpp"
#include "igda/errors.hpp"
#include "igda/hash.hpp"
#include "igda/log.hpp"

using namespace igda;
using igda::testing::golden_graph;
using igda::testing::golden_script;
using igda::testing::read_json;

namespace {

EdgePair as_pair(const nlohmann::json& j) { return {j[0].get<NodeId>(), j[1].get<NodeId>()}; }

InitialPrediction initial_from(std::size_t n, std::vector<double> values) {
  InitialPrediction init;
  init.node_count = n;
  init.confidences = std::move(values);
  return init;
}

DiscoveryConfig golden_config() {
  DiscoveryConfig config;
  config.rounds = 3;
  config.per_round = 2;
  config.zero_shot_samples = 1;
  config.policy = SelectionPolicy::Uncertainty;
  config.updates = UpdateStrategy::Local;
  config.runs = 1;
  return config;
}

struct QuietWarnings {
  QuietWarnings() { previous = set_warning_sink([this](std::string_view m) { messages.emplace_back(m); }); }
  ~QuietWarnings() { set_warning_sink(previous); }
  WarningSink previous;
  std::vector<std::string> messages;
};

}  // namespace

TEST_CASE("five-node trace matches the independently derived rounds exactly") {
  const auto graph = golden_graph();
  const auto trace = read_json("golden_trace.json");
  ScriptedPredictor predictor(graph, golden_script(graph));
  const auto initial = initialize(graph, predictor, 1);
  REQUIRE(initial.confidences == trace["initial"].get<std::vector<double>>());

  DiscoveryRun run(graph, golden_config(), predictor, initial, 0);
  TruthOracle oracle(graph);
  CHECK(run.log().summaries.at(0).metrics->f1 == trace["initial_metrics"]["f1"].get<double>());

  for (const auto& expected : trace["rounds"]) {
    REQUIRE_FALSE(run.finished());
    const int r = expected["round"].get<int>();
    CAPTURE(r);
    const auto proposals = run.proposals();
    std::vector<EdgePair> want;
    for (const auto& p : expected["selected"]) want.push_back(as_pair(p));
    REQUIRE(proposals == want);

    std::vector<ExperimentResult> results;
    for (std::size_t k = 0; k < proposals.size(); ++k) {
      const auto label = oracle.answer(proposals[k]);
      CHECK(static_cast<int>(label) == expected["labels"][k].get<int>());
      results.push_back({proposals[k], label});
    }
    const auto updates_before = run.log().updates.size();
    run.commit(results);

    // Individual local updates, compared as a set keyed by (experiment, target).
    using Key = std::tuple<EdgePair, EdgePair>;
    std::map<Key, std::tuple<std::string, double, double>> got, exp;
    for (std::size_t k = updates_before; k < run.log().updates.size(); ++k) {
      const auto& u = run.log().updates[k];
      CHECK(u.round == r);
      CHECK_FALSE(u.skipped);
      got[{*u.experiment, u.target}] = {u.relation, u.prior, u.output};
    }
    for (const auto& u : expected["updates"]) {
      exp[{as_pair(u["experiment"]), as_pair(u["target"])}] = {u["relation"].get<std::string>(),
                                                               u["prior"].get<double>(), u["output"].get<double>()};
    }
    CHECK(got == exp);

    // Buffer means become the new confidences.
    for (const auto& b : expected["buffers"]) {
      CHECK(run.state().confidence(as_pair(b["target"])).value() == b["mean"].get<double>());
    }
    CHECK(run.state().confidence_values() == expected["confidences"].get<std::vector<double>>());
    for (const auto& p : want) CHECK(run.state().experimented(p));

    const auto& summary = run.log().summaries.back();
    CHECK(summary.round == r);
    CHECK(summary.metrics->f1 == expected["metrics"]["f1"].get<double>());
    CHECK(summary.metrics->true_positives == expected["metrics"]["tp"].get<std::size_t>());
    CHECK(summary.metrics->false_positives == expected["metrics"]["fp"].get<std::size_t>());
    CHECK(summary.breakdown->experiment_improvements ==
          expected["breakdown"]["experiment_improvements"].get<std::size_t>());
    CHECK(summary.breakdown->update_improvements == expected["breakdown"]["update_improvements"].get<std::size_t>());
    CHECK(summary.breakdown->regressions == expected["breakdown"]["regressions"].get<std::size_t>());
  }
  CHECK(run.finished());
}

TEST_CASE("uncertainty selection: smallest magnitude first, ties by pair") {
  // n = 3 candidate order: (0,1) (0,2) (1,0) (1,2) (2,0) (2,1)
  PredictionState state(initial_from(3, {50, -10, 10, -90, 0, 30}));
  CHECK(select_uncertain(state, 3) == std::vector<EdgePair>{{2, 0}, {0, 2}, {1, 0}});
  state.freeze({2, 0}, EdgeLabel::Absent);
  CHECK(select_uncertain(state, 2) == std::vector<EdgePair>{{0, 2}, {1, 0}});
  CHECK(select_uncertain(state, 10).size() == 5);
}

TEST_CASE("random selection draws distinct unexperimented pairs and depends on the seed") {
  PredictionState state(initial_from(4, std::vector<double>(12, 0.0)));
  state.freeze({0, 1}, EdgeLabel::Present);
  Rng a(1), b(1), c(2);
  const auto pa = select_random(state, 5, a);
  CHECK(pa == select_random(state, 5, b));
  CHECK(pa != select_random(state, 5, c));
  std::set<EdgePair> distinct(pa.begin(), pa.end());
  CHECK(distinct.size() == 5);
  CHECK_FALSE(distinct.contains(EdgePair{0, 1}));
  Rng d(3);
  CHECK(select_random(state, 50, d).size() == 11);
}

TEST_CASE("static ranking is fixed from the initial prediction") {
  const auto init = initial_from(3, {50, -10, 10, -90, 0, 30});
  const auto ranking = static_ranking(init);
  CHECK(ranking == std::vector<EdgePair>{{2, 0}, {0, 2}, {1, 0}, {2, 1}, {0, 1}, {1, 2}});
  PredictionState state(init);
  state.set_confidence({1, 2}, SignedConfidence(1));  // later beliefs do not reorder static picks
  state.freeze({2, 0}, EdgeLabel::Absent);
  CHECK(select_static(ranking, state, 2) == std::vector<EdgePair>{{0, 2}, {1, 0}});
}

TEST_CASE("llm-direct selection drops bad proposals and fills at random") {
  const auto graph = golden_graph();
  auto script = golden_script(graph);
  script.direct_proposals = {{0, 1}, {0, 1}, {2, 3}};
  ScriptedPredictor predictor(graph, script);
  PredictionState state(initialize(graph, predictor, 1));
  state.freeze({2, 3}, EdgeLabel::Present);
  QuietWarnings quiet;
  Rng rng(5);
  const auto sel = select_llm_direct(state, predictor, 3, rng, 1);
  REQUIRE(sel.pairs.size() == 3);
  CHECK(sel.pairs.front() == EdgePair{0, 1});
  CHECK(sel.random_fill == 2);
  CHECK(sel.rejected >= 2);
  std::set<EdgePair> distinct(sel.pairs.begin(), sel.pairs.end());
  CHECK(distinct.size() == 3);
  CHECK_FALSE(distinct.contains(EdgePair{2, 3}));

  Rng rng2(5);
  CHECK_THROWS_AS(select_llm_direct(state, predictor, 3, rng2, 1, 4, 10), PolicyUnavailableError);
}

TEST_CASE("adjacent targets for an experiment on (i, j)") {
  // n = 4, experiment (0,1).
  PredictionState state(initial_from(4, std::vector<double>(12, 10.0)));
  const auto same = adjacent_update_targets(state, {0, 1});
  const std::vector<UpdateTarget> want{{{0, 2}, UpdateRelation::SharesParent},
                                       {{0, 3}, UpdateRelation::SharesParent},
                                       {{2, 1}, UpdateRelation::SharesChild},
                                       {{3, 1}, UpdateRelation::SharesChild}};
  CHECK(same == want);

  const auto any = adjacent_update_targets(state, {0, 1}, AdjacencyScope::AnySharedNode);
  std::set<EdgePair> pairs;
  for (const auto& t : any) pairs.insert(t.pair);
  CHECK(pairs == std::set<EdgePair>{{0, 2}, {0, 3}, {2, 1}, {3, 1}, {2, 0}, {3, 0}, {1, 2}, {1, 3}, {1, 0}});

  // Experimented and certain pairs are never targets.
  state.freeze({0, 2}, EdgeLabel::Present);
  state.set_confidence({3, 1}, SignedConfidence(-100));
  const auto fewer = adjacent_update_targets(state, {0, 1});
  CHECK(fewer == std::vector<UpdateTarget>{{{0, 3}, UpdateRelation::SharesParent}, {{2, 1}, UpdateRelation::SharesChild}});
}

TEST_CASE("buffered updates aggregate to their signed mean") {
  PredictionState state(initial_from(3, {0, 0, 0, 0, 0, 0}));
  state.buffer_update({0, 1}, 40);
  state.buffer_update({0, 1}, -10);
  state.buffer_update({1, 2}, -100);
  state.buffer_update({1, 2}, 100);
  state.buffer_update({2, 0}, 7.5);
  CHECK(state.buffered({0, 1}) == 2);
  state.aggregate_buffers();
  CHECK(state.buffers_empty());
  CHECK(state.confidence({0, 1}).value() == 15.0);
  CHECK(state.confidence({1, 2}).value() == 0.0);
  CHECK(state.label({1, 2}) == EdgeLabel::Present);
  CHECK(state.confidence({2, 0}).value() == 7.5);
  CHECK(state.confidence({0, 2}).value() == 0.0);
}

TEST_CASE("a pair adjacent to two experiments takes the mean of both updates") {
  // Scripted steps: +30 shares-parent, +20 shares-child (toward the label).
  // Experiments (0,1) present and (2,3) absent both touch (0,3):
  // from (0,1) it shares the parent: -20 + 30 = 10; from (2,3) the child: -20 - 20 = -40.
  GroundTruthGraph graph;
  for (int k = 0; k < 4; ++k) graph.variables.push_back({k, std::string(1, char('A' + k)), ""});
  Script script;
  script.default_zero_shot = -20;
  ScriptedPredictor predictor(graph, script);
  PredictionState state(initialize(graph, predictor, 1));
  const std::vector<ExperimentResult> results{{{0, 1}, EdgeLabel::Present}, {{2, 3}, EdgeLabel::Absent}};
  const auto records = apply_feedback_and_update(state, results, predictor, UpdateOptions{});
  CHECK(state.confidence({0, 3}).value() == -15.0);
  std::size_t hits = 0;
  for (const auto& r : records) hits += r.target == EdgePair{0, 3};
  CHECK(hits == 2);
}

TEST_CASE("experimented pairs are frozen and refuse further changes") {
  PredictionState state(initial_from(3, {5, 5, 5, 5, 5, 5}));
  state.freeze({0, 1}, EdgeLabel::Absent);
  CHECK(state.confidence({0, 1}).value() == -100.0);
  CHECK_THROWS_AS(state.freeze({0, 1}, EdgeLabel::Present), ContractError);
  CHECK_THROWS_AS(state.set_confidence({0, 1}, SignedConfidence(3)), ContractError);
  CHECK(state.remaining() == 5);
}

TEST_CASE("strategy none freezes without touching other pairs") {
  const auto graph = golden_graph();
  ScriptedPredictor predictor(graph, golden_script(graph));
  PredictionState state(initialize(graph, predictor, 1));
  const auto before = state.confidence_values();
  const std::vector<ExperimentResult> results{{{0, 1}, EdgeLabel::Present}};
  UpdateOptions options;
  options.strategy = UpdateStrategy::None;
  CHECK(apply_feedback_and_update(state, results, predictor, options).empty());
  auto after = state.confidence_values();
  after[pair_index({0, 1}, 5)] = before[pair_index({0, 1}, 5)];
  CHECK(after == before);
}

TEST_CASE("global strategy revises pairs through one call per round") {
  const auto graph = golden_graph();
  ScriptedPredictor predictor(graph, golden_script(graph));
  PredictionState state(initialize(graph, predictor, 1));
  const std::vector<ExperimentResult> results{{{0, 1}, EdgeLabel::Present}};
  UpdateOptions options;
  options.strategy = UpdateStrategy::Global;
  const auto records = apply_feedback_and_update(state, results, predictor, options);
  REQUIRE_FALSE(records.empty());
  for (const auto& r : records) {
    CHECK(r.relation == "global");
    CHECK_FALSE(r.experiment.has_value());
  }
  // (0,2): shares-parent, -50 -> -20 (A->C scripted at 10 -> 40)
  CHECK(state.confidence({0, 2}).value() == 40.0);
}

TEST_CASE("backend failures during initialization mark pairs neutral or abort") {
  const auto graph = golden_graph();
  auto script = golden_script(graph);
  script.failing = {{0, 1}, {4, 3}};
  ScriptedPredictor predictor(graph, script);
  QuietWarnings quiet;
  const auto init = initialize(graph, predictor, 4, BackendFailure::MarkNeutral, 4);
  CHECK(init.backend_failures == 2);
  CHECK(init.flagged == std::vector<EdgePair>{{0, 1}, {4, 3}});
  CHECK(init.confidences[pair_index({0, 1}, 5)] == 0.0);
  CHECK_THROWS_AS(initialize(graph, predictor, 4, BackendFailure::Abort), TransportError);
  CHECK(InitialPrediction::from_json(init.to_json()).confidences == init.confidences);
}

TEST_CASE("commit rejects outcomes that do not match the proposals") {
  const auto graph = golden_graph();
  ScriptedPredictor predictor(graph, golden_script(graph));
  DiscoveryRun run(graph, golden_config(), predictor, initialize(graph, predictor, 1), 0);
  const auto proposals = run.proposals();
  std::vector<ExperimentResult> partial{{proposals[0], EdgeLabel::Present}};
  CHECK_THROWS_AS(run.commit(partial), ContractError);
  std::vector<ExperimentResult> conflicting{{proposals[0], EdgeLabel::Present},
                                            {proposals[0], EdgeLabel::Absent},
                                            {proposals[1], EdgeLabel::Absent}};
  CHECK_THROWS_AS(run.commit(conflicting), OracleInconsistencyError);
  CHECK(run.round() == 0);
}

TEST_CASE("exhaustive runs end with a perfect prediction for every method") {
  const auto graph = random_graph(5, 0.3, 11);
  for (auto policy : {SelectionPolicy::Uncertainty, SelectionPolicy::Random, SelectionPolicy::Static,
                      SelectionPolicy::LlmDirect}) {
    for (auto strategy : {UpdateStrategy::Local, UpdateStrategy::None, UpdateStrategy::Global}) {
      DiscoveryConfig config;
      config.policy = policy;
      config.updates = strategy;
      config.per_round = 3;
      config.until_exhausted = true;
      config.zero_shot_samples = 2;
      config.seed = 9;
      OracleParams params;
      params.seed = 4;
      SimulatedPredictor predictor(graph, params);
      TruthOracle oracle(graph);
      const auto log = run_discovery(graph, config, predictor, oracle);
      CAPTURE(log.header.method);
      CHECK(log.summaries.back().metrics->f1 == 1.0);
      CHECK(log.summaries.back().experimented_count == graph.pair_count());
      CHECK(log.summaries.size() == 1 + 7);  // ceil(20 / 3) = 7 rounds
    }
  }
}

TEST_CASE("header seed is recorded only when the run consumes randomness") {
  const auto graph = golden_graph();
  ScriptedPredictor predictor(graph, golden_script(graph));
  const auto init = initialize(graph, predictor, 1);
  auto config = golden_config();
  config.policy = SelectionPolicy::Static;
  config.updates = UpdateStrategy::None;
  CHECK_FALSE(DiscoveryRun(graph, config, predictor, init, 3).log().header.seed.has_value());
  config.policy = SelectionPolicy::Random;
  CHECK(DiscoveryRun(graph, config, predictor, init, 3).log().header.seed == 3u);
}

TEST_CASE("batches derive one seed per run and are independent of worker count") {
  const auto graph = random_graph(6, 0.2, 3);
  DiscoveryConfig config;
  config.policy = SelectionPolicy::Random;
  config.rounds = 4;
  config.per_round = 3;
  config.runs = 4;
  config.seed = 77;
  config.zero_shot_samples = 2;
  OracleParams params;
  SimulatedPredictor base(graph, params);
  const auto init = initialize(graph, base, 2);
  const PredictorFactory factory = [&](std::uint64_t seed) {
    auto p = params;
    p.seed = mix64(params.seed, seed);
    return std::make_unique<SimulatedPredictor>(graph, p);
  };
  TruthOracle oracle(graph);
  config.workers = 1;
  const auto serial = run_batch(graph, config, factory, oracle, init);
  config.workers = 4;
  const auto threaded = run_batch(graph, config, factory, oracle, init);
  REQUIRE(serial.logs.size() == 4);
  REQUIRE(threaded.logs.size() == 4);
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(serial.logs[k].header.seed == derive_run_seed(77, k));
    CHECK(serial.logs[k].summaries.back().confidences == threaded.logs[k].summaries.back().confidences);
  }
  CHECK(serial.logs[0].selections[0].pairs != serial.logs[1].selections[0].pairs);
}
