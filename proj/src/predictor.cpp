#include "igda/predictor.hpp"

#include "igda/errors.hpp"

namespace igda {

std::vector<SampleResult> ScriptedBackend::sample(std::string_view prompt, int count, int first_index) {
  std::vector<SampleResult> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    ++calls_;
    try {
      out.push_back({responder_(prompt, first_index + k), {}});
    } catch (const std::exception& err) {
      out.push_back({std::nullopt, err.what()});
    }
  }
  return out;
}

namespace {

[[noreturn]] void raise_slot_error(const SampleResult& slot, const std::string& what) {
  if (slot.fatal) throw RequestRejectedError(what + ": " + slot.error);
  throw TransportError(what + ": " + slot.error);
}

struct SampledAssessments {
  std::vector<EdgeAssessment> parsed;
  std::size_t dropped = 0;
};

/// Samples `count` responses and re-samples failed parses with fresh indices.
SampledAssessments sample_and_parse(CompletionBackend& backend, const std::string& prompt, int count,
                                    const SamplingPolicy& policy) {
  SampledAssessments out;
  int next_index = 0;
  int pending = count;
  for (int attempt = 0; attempt <= policy.parse_retries && pending > 0; ++attempt) {
    const auto slots = backend.sample(prompt, pending, next_index);
    if (slots.size() != static_cast<std::size_t>(pending)) {
      throw TransportError("backend returned " + std::to_string(slots.size()) + " slots for " +
                           std::to_string(pending) + " requested samples");
    }
    next_index += pending;
    int failed = 0;
    for (const auto& slot : slots) {
      if (!slot.ok()) raise_slot_error(slot, "sample failed");
      auto parsed = parse_assessment(*slot.text);
      if (auto* assessment = std::get_if<EdgeAssessment>(&parsed)) {
        out.parsed.push_back(std::move(*assessment));
      } else {
        ++failed;
      }
    }
    pending = failed;
  }
  out.dropped = static_cast<std::size_t>(pending);
  return out;
}

}  // namespace

ZeroShotResult zero_shot_assess(CompletionBackend& backend, const PromptContext& ctx, int samples,
                                const SamplingPolicy& policy) {
  if (samples < 1) throw ContractError("zero-shot assessment needs at least one sample");
  auto sampled = sample_and_parse(backend, render_zero_shot_prompt(ctx), samples, policy);
  ZeroShotResult result;
  result.dropped = sampled.dropped;
  if (sampled.parsed.empty()) {
    result.flagged = true;
    result.confidence = SignedConfidence(0.0);
    return result;
  }
  result.confidence = aggregate_samples(sampled.parsed);
  result.samples = std::move(sampled.parsed);
  return result;
}

LocalUpdateResult local_update_assess(CompletionBackend& backend, const GroundTruthGraph& graph,
                                      const LocalUpdateContext& ctx, int samples, const SamplingPolicy& policy) {
  if (samples < 1) throw ContractError("local update needs at least one sample");
  const auto sampled = sample_and_parse(backend, render_update_prompt(graph, ctx), samples, policy);
  if (sampled.parsed.empty()) return {ctx.target_confidence, true};
  return {aggregate_samples(sampled.parsed), false};
}

ChatPredictor::ChatPredictor(const GroundTruthGraph& graph, CompletionBackend& backend, SamplingPolicy policy,
                             bool concurrent)
    : graph_(graph), backend_(backend), policy_(policy), concurrent_(concurrent) {}

ZeroShotResult ChatPredictor::zero_shot(EdgePair pair, int samples) {
  return zero_shot_assess(backend_, make_prompt_context(graph_, pair), samples, policy_);
}

LocalUpdateResult ChatPredictor::local_update(const LocalUpdateContext& ctx, int samples) {
  return local_update_assess(backend_, graph_, ctx, samples, policy_);
}

std::optional<std::vector<EdgePair>> ChatPredictor::propose_experiments(const DirectSelectionContext& ctx) {
  const auto slots = backend_.sample(render_direct_selection_prompt(graph_, ctx), 1, ctx.attempt);
  if (slots.size() != 1) throw TransportError("direct selection: backend returned no sample");
  if (!slots.front().ok()) raise_slot_error(slots.front(), "direct selection sample failed");
  return parse_edge_list(*slots.front().text, graph_);
}

std::vector<EdgeRevision> ChatPredictor::global_update(const GlobalUpdateContext& ctx) {
  const auto slots = backend_.sample(render_global_update_prompt(graph_, ctx), 1, 0);
  if (slots.size() != 1) throw TransportError("global update: backend returned no sample");
  if (!slots.front().ok()) raise_slot_error(slots.front(), "global update sample failed");
  auto revisions = parse_revisions(*slots.front().text, graph_);
  return revisions.value_or(std::vector<EdgeRevision>{});
}

Script Script::from_json(const nlohmann::json& doc, const GroundTruthGraph& graph) {
  const auto resolve = [&](const std::string& edge) {
    const auto arrow = edge.find("->");
    const auto parent = arrow == std::string::npos ? std::nullopt : graph.find(edge.substr(0, arrow));
    const auto child = arrow == std::string::npos ? std::nullopt : graph.find(edge.substr(arrow + 2));
    if (!parent || !child || *parent == *child) throw InvalidGraphError("script names unknown edge '" + edge + "'");
    return EdgePair{*parent, *child};
  };
  Script script;
  try {
    if (doc.contains("zero_shot")) {
      for (const auto& [edge, value] : doc["zero_shot"].items()) script.zero_shot[resolve(edge)] = value.get<double>();
    }
    script.default_zero_shot = doc.value("default", script.default_zero_shot);
    script.parent_step = doc.value("parent_step", script.parent_step);
    script.child_step = doc.value("child_step", script.child_step);
    for (const auto& edge : doc.value("fail", std::vector<std::string>{})) script.failing.insert(resolve(edge));
    for (const auto& edge : doc.value("propose", std::vector<std::string>{})) script.direct_proposals.push_back(resolve(edge));
  } catch (const nlohmann::json::exception& err) {
    throw InvalidGraphError(std::string("malformed predictor script: ") + err.what());
  }
  return script;
}

ScriptedPredictor::ScriptedPredictor(const GroundTruthGraph& graph, Script script)
    : graph_(graph), script_(std::move(script)) {}

ZeroShotResult ScriptedPredictor::zero_shot(EdgePair pair, int samples) {
  check_pair(pair, graph_.node_count());
  if (samples < 1) throw ContractError("zero-shot assessment needs at least one sample");
  if (script_.failing.contains(pair)) throw TransportError("scripted failure for " + describe_pair(graph_, pair));
  const auto it = script_.zero_shot.find(pair);
  return ZeroShotResult{SignedConfidence(it == script_.zero_shot.end() ? script_.default_zero_shot : it->second), {}, 0,
                        false};
}

SignedConfidence ScriptedPredictor::rule(const LocalUpdateContext& ctx) const {
  const double step = ctx.relation == UpdateRelation::SharesParent ? script_.parent_step : script_.child_step;
  const double direction = is_present(ctx.revealed) ? 1.0 : -1.0;
  return SignedConfidence(ctx.target_confidence.value() + direction * step);
}

LocalUpdateResult ScriptedPredictor::local_update(const LocalUpdateContext& ctx, int samples) {
  check_update_context(ctx, graph_.node_count());
  if (samples < 1) throw ContractError("local update needs at least one sample");
  return {rule(ctx), false};
}

std::optional<std::vector<EdgePair>> ScriptedPredictor::propose_experiments(const DirectSelectionContext& ctx) {
  if (!script_.direct_proposals.empty()) return script_.direct_proposals;
  const std::set<EdgePair> done(ctx.experimented.begin(), ctx.experimented.end());
  std::vector<EdgePair> out;
  for (const auto& pair : candidate_edges(graph_.node_count())) {
    if (out.size() == ctx.count) break;
    if (!done.contains(pair)) out.push_back(pair);
  }
  return out;
}

std::vector<EdgeRevision> ScriptedPredictor::global_update(const GlobalUpdateContext& ctx) {
  const auto n = graph_.node_count();
  std::set<EdgePair> tested;
  for (const auto& f : ctx.feedback) tested.insert(f.pair);
  std::map<EdgePair, std::vector<double>> outputs;
  for (const auto& f : ctx.feedback) {
    for (const auto& target : candidate_edges(n)) {
      const bool shares_parent = target.parent == f.pair.parent && target.child != f.pair.child;
      const bool shares_child = target.child == f.pair.child && target.parent != f.pair.parent;
      if (!shares_parent && !shares_child) continue;
      const auto current = ctx.confidences[pair_index(target, n)];
      if (tested.contains(target) || current.is_certain()) continue;
      LocalUpdateContext local{f.pair, f.label, ctx.confidences[pair_index(f.pair, n)], target, current,
                               shares_parent ? UpdateRelation::SharesParent : UpdateRelation::SharesChild, ctx.round};
      outputs[target].push_back(rule(local).value());
    }
  }
  std::vector<EdgeRevision> revisions;
  for (auto& [pair, values] : outputs) revisions.push_back({pair, SignedConfidence(stable_mean(std::move(values)))});
  return revisions;
}

}  // namespace igda
