#include "igda/simulation.hpp"

#include <algorithm>

#include "igda/errors.hpp"
#include "igda/hash.hpp"

namespace igda {
namespace {

bool bernoulli(Rng& rng, double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; }

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

std::uint64_t pair_key(EdgePair p) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(p.parent)) << 32) |
         static_cast<std::uint32_t>(p.child);
}

enum StreamKind : std::uint64_t { kZeroShot = 1, kUpdate = 2, kPropose = 3, kGlobal = 4 };

}  // namespace

void OracleParams::validate() const {
  if (!(zero_shot_accuracy >= 0.0 && zero_shot_accuracy <= 1.0)) {
    throw ContractError("zero-shot accuracy must lie in [0, 1]");
  }
  if (calibration_gap < 0 || calibration_gap > 99) throw ContractError("calibration gap must lie in [0, 99]");
  if (!(update_fidelity >= 0.0 && update_fidelity <= 1.0)) throw ContractError("update fidelity must lie in [0, 1]");
  if (step_lo < 1 || step_hi > 100 || step_lo > step_hi) {
    throw ContractError("update step range must satisfy 1 <= lo <= hi <= 100");
  }
}

nlohmann::json OracleParams::to_json() const {
  return {{"zero_shot_accuracy", zero_shot_accuracy}, {"calibration_gap", calibration_gap},
          {"update_fidelity", update_fidelity},       {"step_lo", step_lo},
          {"step_hi", step_hi},                       {"seed", seed}};
}

OracleParams OracleParams::from_json(const nlohmann::json& j) {
  OracleParams p;
  p.zero_shot_accuracy = j.value("zero_shot_accuracy", p.zero_shot_accuracy);
  p.calibration_gap = j.value("calibration_gap", p.calibration_gap);
  p.update_fidelity = j.value("update_fidelity", p.update_fidelity);
  p.step_lo = j.value("step_lo", p.step_lo);
  p.step_hi = j.value("step_hi", p.step_hi);
  p.seed = j.value("seed", p.seed);
  p.validate();
  return p;
}

EdgeAssessment sim_zero_shot(const OracleParams& params, EdgeLabel truth, Rng& rng) {
  const bool correct = bernoulli(rng, params.zero_shot_accuracy);
  const int gap = params.calibration_gap;
  const int magnitude = correct ? uniform_int(rng, 1 + gap, 100) : uniform_int(rng, 1, 100 - gap);
  const bool says_present = correct == is_present(truth);
  return EdgeAssessment{says_present ? Decision::Yes : Decision::No, magnitude, {}};
}

SignedConfidence sim_local_update(const OracleParams& params, EdgeLabel truth, SignedConfidence prior, Rng& rng) {
  const bool toward = bernoulli(rng, params.update_fidelity);
  const int step = uniform_int(rng, params.step_lo, params.step_hi);
  const double pole = is_present(truth) ? 1.0 : -1.0;
  return SignedConfidence(prior.value() + (toward ? pole : -pole) * step);
}

SimulatedPredictor::SimulatedPredictor(const GroundTruthGraph& truth, OracleParams params)
    : truth_(truth), params_(params) {
  params_.validate();
  if (!truth_.edges_known) throw ContractError("the simulated predictor needs a graph with known edges");
}

Rng SimulatedPredictor::stream(std::uint64_t kind, EdgePair a, EdgePair b, std::uint64_t extra) const {
  std::uint64_t key = mix64(params_.seed, kind);
  key = mix64(key, pair_key(a));
  key = mix64(key, pair_key(b));
  return Rng(mix64(key, extra));
}

ZeroShotResult SimulatedPredictor::zero_shot(EdgePair pair, int samples) {
  check_pair(pair, truth_.node_count());
  if (samples < 1) throw ContractError("zero-shot assessment needs at least one sample");
  auto rng = stream(kZeroShot, pair, pair, 0);
  const auto truth = label_from_bool(truth_.edges.contains(pair));
  ZeroShotResult result;
  for (int k = 0; k < samples; ++k) result.samples.push_back(sim_zero_shot(params_, truth, rng));
  result.confidence = aggregate_samples(result.samples);
  return result;
}

LocalUpdateResult SimulatedPredictor::local_update(const LocalUpdateContext& ctx, int samples) {
  check_update_context(ctx, truth_.node_count());
  if (samples < 1) throw ContractError("local update needs at least one sample");
  auto rng = stream(kUpdate, ctx.experiment, ctx.target, 0);
  const auto truth = label_from_bool(truth_.edges.contains(ctx.target));
  std::vector<double> values;
  for (int k = 0; k < samples; ++k) values.push_back(sim_local_update(params_, truth, ctx.target_confidence, rng).value());
  return {SignedConfidence(stable_mean(std::move(values))), false};
}

std::optional<std::vector<EdgePair>> SimulatedPredictor::propose_experiments(const DirectSelectionContext& ctx) {
  // Proposals ignore confidences: a uniform draw over the unexperimented pairs.
  const std::set<EdgePair> done(ctx.experimented.begin(), ctx.experimented.end());
  std::vector<EdgePair> open;
  for (const auto& pair : candidate_edges(truth_.node_count())) {
    if (!done.contains(pair)) open.push_back(pair);
  }
  auto rng = stream(kPropose, {}, {}, (static_cast<std::uint64_t>(ctx.round) << 8) | static_cast<std::uint64_t>(ctx.attempt));
  std::shuffle(open.begin(), open.end(), rng);
  open.resize(std::min(open.size(), ctx.count));
  return open;
}

std::vector<EdgeRevision> SimulatedPredictor::global_update(const GlobalUpdateContext& ctx) {
  const auto n = truth_.node_count();
  std::set<EdgePair> tested;
  for (const auto& f : ctx.feedback) tested.insert(f.pair);
  std::set<EdgePair> targets;
  for (const auto& f : ctx.feedback) {
    for (const auto& pair : candidate_edges(n)) {
      const bool adjacent = (pair.parent == f.pair.parent) != (pair.child == f.pair.child);
      if (adjacent && !tested.contains(pair) && !ctx.confidences[pair_index(pair, n)].is_certain()) targets.insert(pair);
    }
  }
  std::vector<EdgeRevision> revisions;
  for (const auto& pair : targets) {
    auto rng = stream(kGlobal, pair, pair, static_cast<std::uint64_t>(ctx.round));
    const auto truth = label_from_bool(truth_.edges.contains(pair));
    revisions.push_back({pair, sim_local_update(params_, truth, ctx.confidences[pair_index(pair, n)], rng)});
  }
  return revisions;
}

GroundTruthGraph random_graph(std::size_t node_count, double edge_probability, std::uint64_t seed) {
  GroundTruthGraph graph;
  graph.task_description = "Synthetic random graph.";
  for (std::size_t k = 0; k < node_count; ++k) {
    graph.variables.push_back({static_cast<NodeId>(k), "X" + std::to_string(k), "Synthetic variable " + std::to_string(k) + "."});
  }
  Rng rng(mix64(seed, 0x6752415048ULL));
  for (const auto& pair : candidate_edges(node_count)) {
    if (bernoulli(rng, edge_probability)) graph.edges.insert(pair);
  }
  return graph;
}

}  // namespace igda
