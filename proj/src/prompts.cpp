#include "igda/prompts.hpp"

#include <cctype>
#include <algorithm>
#include <cmath>

#include "igda/errors.hpp"
#include "prompt_assets.inc"

namespace igda {

namespace templates {
std::string_view zero_shot() { return assets::kZeroShot; }
std::string_view parent_update() { return assets::kParentUpdate; }
std::string_view child_update() { return assets::kChildUpdate; }
std::string_view direct_selection() { return assets::kDirectSelection; }
std::string_view global_update() { return assets::kGlobalUpdate; }
}  // namespace templates

namespace {

bool is_placeholder_char(char c) {
  return std::islower(static_cast<unsigned char>(c)) || c == '_';
}

}  // namespace

std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& values) {
  if (!tmpl.empty() && tmpl.back() == '\n') tmpl.remove_suffix(1);
  std::string out;
  out.reserve(tmpl.size() + 256);
  for (std::size_t i = 0; i < tmpl.size(); ++i) {
    const char c = tmpl[i];
    if (c == '\\' && i + 1 < tmpl.size() && tmpl[i + 1] == '\n') {
      ++i;
      continue;
    }
    if (c == '{') {
      std::size_t end = i + 1;
      while (end < tmpl.size() && is_placeholder_char(tmpl[end])) ++end;
      if (end < tmpl.size() && end > i + 1 && tmpl[end] == '}') {
        const std::string key(tmpl.substr(i + 1, end - i - 1));
        const auto it = values.find(key);
        if (it == values.end()) throw ContractError("no value for prompt placeholder {" + key + "}");
        out += it->second;
        i = end;
        continue;
      }
    }
    out.push_back(c);
  }
  return out;
}

std::string render_variables_info(const GroundTruthGraph& graph, const std::vector<NodeId>& excluded) {
  std::string out;
  for (const auto& v : graph.variables) {
    if (std::find(excluded.begin(), excluded.end(), v.id) != excluded.end()) continue;
    if (!out.empty()) out.push_back('\n');
    out += v.name;
    out += ": ";
    out += v.description;
  }
  return out;
}

std::string render_edge(const GroundTruthGraph& graph, EdgePair pair, SignedConfidence confidence) {
  const auto magnitude = std::to_string(static_cast<long>(std::lround(confidence.magnitude())));
  const auto edge = describe_pair(graph, pair);
  if (is_present(confidence.label())) return "(" + edge + "," + magnitude + ")";
  return "(NOT " + edge + ", " + magnitude + ")";
}

std::string render_edge_label(const GroundTruthGraph& graph, EdgePair pair, EdgeLabel label) {
  const auto edge = describe_pair(graph, pair);
  return is_present(label) ? "(" + edge + ")" : "(NOT " + edge + ")";
}

PromptContext make_prompt_context(const GroundTruthGraph& graph, EdgePair pair) {
  check_pair(pair, graph.node_count());
  return PromptContext{
      .task_description = graph.task_description,
      .target = graph.variable(pair.child),
      .parent = graph.variable(pair.parent),
      .variables_info = render_variables_info(graph, {pair.child, pair.parent}),
  };
}

std::string render_zero_shot_prompt(const PromptContext& ctx) {
  if (ctx.target.id == ctx.parent.id || ctx.target.name == ctx.parent.name) {
    throw ContractError("zero-shot prompt needs distinct target and parent, got '" + ctx.target.name + "' twice");
  }
  return render_template(templates::zero_shot(), {
                                                     {"task_description", ctx.task_description},
                                                     {"target", ctx.target.name},
                                                     {"parent", ctx.parent.name},
                                                     {"variables_info", ctx.variables_info},
                                                     {"target_info", ctx.target.description},
                                                     {"parent_info", ctx.parent.description},
                                                 });
}

std::string_view to_string(UpdateRelation relation) {
  return relation == UpdateRelation::SharesParent ? "shares-parent" : "shares-child";
}

void check_update_context(const LocalUpdateContext& ctx, std::size_t node_count) {
  check_pair(ctx.experiment, node_count);
  check_pair(ctx.target, node_count);
  if (ctx.target == ctx.experiment) throw ContractError("update target is the experimented pair itself");
  if (ctx.target_confidence.is_certain()) {
    throw ContractError("update target (" + std::to_string(ctx.target.parent) + "," +
                        std::to_string(ctx.target.child) + ") is already certain");
  }
  const auto touches = [&](NodeId node) { return ctx.target.parent == node || ctx.target.child == node; };
  const bool ok = ctx.relation == UpdateRelation::SharesParent ? touches(ctx.experiment.parent)
                                                                : touches(ctx.experiment.child);
  if (!ok) throw ContractError("update target does not share the " + std::string(to_string(ctx.relation)) + " endpoint");
}

std::string render_update_prompt(const GroundTruthGraph& graph, const LocalUpdateContext& ctx) {
  check_update_context(ctx, graph.node_count());
  std::map<std::string, std::string> values{
      {"variables_info", render_variables_info(graph)},
      {"experiment_feedback", render_edge(graph, ctx.experiment, SignedConfidence::certain(ctx.revealed))},
      {"experiment_prediction", render_edge(graph, ctx.experiment, ctx.experiment_prior)},
      {"other_edge_prediction", render_edge(graph, ctx.target, ctx.target_confidence)},
  };
  if (ctx.relation == UpdateRelation::SharesParent) {
    values["parent"] = graph.variable(ctx.experiment.parent).name;
    return render_template(templates::parent_update(), values);
  }
  values["child"] = graph.variable(ctx.experiment.child).name;
  return render_template(templates::child_update(), values);
}

std::string render_direct_selection_prompt(const GroundTruthGraph& graph, const DirectSelectionContext& ctx) {
  if (ctx.labels.size() != graph.pair_count()) throw ContractError("direct selection context does not cover every pair");
  std::string prediction;
  for (std::size_t k = 0; k < ctx.labels.size(); ++k) {
    if (!prediction.empty()) prediction.push_back('\n');
    prediction += render_edge_label(graph, pair_at(k, graph.node_count()), ctx.labels[k]);
  }
  std::string experimented;
  for (const auto& pair : ctx.experimented) {
    if (!experimented.empty()) experimented.push_back('\n');
    experimented += describe_pair(graph, pair);
  }
  if (experimented.empty()) experimented = "(none)";
  return render_template(templates::direct_selection(), {
                                                            {"variables_info", render_variables_info(graph)},
                                                            {"graph_prediction", prediction},
                                                            {"experimented_edges", experimented},
                                                            {"count", std::to_string(ctx.count)},
                                                        });
}

std::string render_global_update_prompt(const GroundTruthGraph& graph, const GlobalUpdateContext& ctx) {
  if (ctx.confidences.size() != graph.pair_count()) throw ContractError("global update context does not cover every pair");
  std::string prediction;
  for (std::size_t k = 0; k < ctx.confidences.size(); ++k) {
    if (!prediction.empty()) prediction.push_back('\n');
    prediction += render_edge(graph, pair_at(k, graph.node_count()), ctx.confidences[k]);
  }
  std::string feedback;
  for (const auto& f : ctx.feedback) {
    if (!feedback.empty()) feedback.push_back('\n');
    feedback += render_edge(graph, f.pair, SignedConfidence::certain(f.label));
  }
  return render_template(templates::global_update(), {
                                                         {"variables_info", render_variables_info(graph)},
                                                         {"graph_prediction", prediction},
                                                         {"experiment_feedback", feedback},
                                                     });
}

}  // namespace igda
