#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "igda/graph.hpp"

namespace igda {

/// Raw template assets, exactly as stored under assets/prompts.
namespace templates {
std::string_view zero_shot();
std::string_view parent_update();
std::string_view child_update();
std::string_view direct_selection();
std::string_view global_update();
}  // namespace templates

/// Substitutes every {name} placeholder in a single pass and joins
/// backslash-newline continuations. Throws ContractError for a placeholder
/// without a value.
std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& values);

/// One "name: description" line per variable in id order, skipping `excluded`.
std::string render_variables_info(const GroundTruthGraph& graph, const std::vector<NodeId>& excluded = {});

/// "(A->B,73)" when the confidence predicts presence, "(NOT A->B, 73)" otherwise.
/// The magnitude is rounded to an integer.
std::string render_edge(const GroundTruthGraph& graph, EdgePair pair, SignedConfidence confidence);

/// "(A->B)" / "(NOT A->B)", used where confidences are withheld.
std::string render_edge_label(const GroundTruthGraph& graph, EdgePair pair, EdgeLabel label);

struct PromptContext {
  std::string task_description;
  VariableSpec target;
  VariableSpec parent;
  /// All variables except target and parent.
  std::string variables_info;
};

/// Context asking whether pair.parent is a direct cause of pair.child.
PromptContext make_prompt_context(const GroundTruthGraph& graph, EdgePair pair);

std::string render_zero_shot_prompt(const PromptContext& ctx);

/// Which endpoint of the experimented pair the target shares.
enum class UpdateRelation { SharesParent, SharesChild };

std::string_view to_string(UpdateRelation relation);

struct LocalUpdateContext {
  EdgePair experiment;
  EdgeLabel revealed = EdgeLabel::Absent;
  /// The experimented pair's confidence before the experiment.
  SignedConfidence experiment_prior;
  EdgePair target;
  SignedConfidence target_confidence;
  UpdateRelation relation = UpdateRelation::SharesParent;
  int round = 0;
};

/// Throws ContractError if the target is the experiment itself, is already
/// certain (|c| = 100), or does not touch the shared endpoint.
void check_update_context(const LocalUpdateContext& ctx, std::size_t node_count);

/// Parent or child update prompt depending on ctx.relation. The variable
/// list covers every variable.
std::string render_update_prompt(const GroundTruthGraph& graph, const LocalUpdateContext& ctx);

struct ExperimentFeedback {
  EdgePair pair;
  EdgeLabel label = EdgeLabel::Absent;
};

struct DirectSelectionContext {
  /// Current label of every candidate pair, candidate order.
  std::vector<EdgeLabel> labels;
  std::vector<EdgePair> experimented;
  std::size_t count = 0;
  int round = 0;
  int attempt = 0;
};

std::string render_direct_selection_prompt(const GroundTruthGraph& graph, const DirectSelectionContext& ctx);

struct GlobalUpdateContext {
  /// Round-start confidence of every candidate pair, candidate order.
  std::vector<SignedConfidence> confidences;
  std::vector<ExperimentFeedback> feedback;
  int round = 0;
};

std::string render_global_update_prompt(const GroundTruthGraph& graph, const GlobalUpdateContext& ctx);

}  // namespace igda
