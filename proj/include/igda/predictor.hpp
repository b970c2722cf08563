#pragma once

#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "igda/assessment.hpp"
#include "igda/graph.hpp"
#include "igda/prompts.hpp"

namespace igda {

/// One sampled completion: either text or the terminal error for that slot.
struct SampleResult {
  std::optional<std::string> text;
  std::string error;
  /// The failure was a configuration problem (rejected request), not transport.
  bool fatal = false;

  bool ok() const noexcept { return text.has_value(); }
};

/// Text-level sampler. Implementations return exactly `count` slots for
/// sample indices first_index .. first_index + count - 1, in index order.
class CompletionBackend {
 public:
  virtual ~CompletionBackend() = default;
  virtual std::vector<SampleResult> sample(std::string_view prompt, int count, int first_index) = 0;
};

/// Deterministic backend driven by a callback (prompt, sample index) -> text.
/// A callback that throws yields an error slot.
class ScriptedBackend final : public CompletionBackend {
 public:
  using Responder = std::function<std::string(std::string_view prompt, int sample_index)>;

  explicit ScriptedBackend(Responder responder) : responder_(std::move(responder)) {}

  std::vector<SampleResult> sample(std::string_view prompt, int count, int first_index) override;
  std::size_t calls() const noexcept { return calls_.load(); }

 private:
  Responder responder_;
  std::atomic<std::size_t> calls_{0};
};

/// Per-sample retry policy for malformed responses.
struct SamplingPolicy {
  int parse_retries = 3;
};

struct ZeroShotResult {
  SignedConfidence confidence;
  std::vector<EdgeAssessment> samples;
  std::size_t dropped = 0;
  /// Every sample failed to parse; confidence is the neutral 0.
  bool flagged = false;
};

/// Samples `samples` completions of the zero-shot prompt, re-samples failed
/// parses up to policy.parse_retries times with fresh sample indices, and
/// aggregates the survivors. Throws TransportError when a slot fails at the
/// transport level.
ZeroShotResult zero_shot_assess(CompletionBackend& backend, const PromptContext& ctx, int samples,
                                const SamplingPolicy& policy = {});

struct LocalUpdateResult {
  SignedConfidence confidence;
  /// No sample parsed; confidence is the prior.
  bool skipped = false;
};

LocalUpdateResult local_update_assess(CompletionBackend& backend, const GroundTruthGraph& graph,
                                      const LocalUpdateContext& ctx, int samples,
                                      const SamplingPolicy& policy = {});

/// Everything the discovery loop asks of a predictor.
class Predictor {
 public:
  virtual ~Predictor() = default;

  virtual ZeroShotResult zero_shot(EdgePair pair, int samples) = 0;
  virtual LocalUpdateResult local_update(const LocalUpdateContext& ctx, int samples) = 0;
  /// Proposed experiments, or nullopt when the response was unusable.
  virtual std::optional<std::vector<EdgePair>> propose_experiments(const DirectSelectionContext& ctx) = 0;
  /// Revised confidences after a round's feedback; pairs not listed keep their value.
  virtual std::vector<EdgeRevision> global_update(const GlobalUpdateContext& ctx) = 0;

  /// True when calls may be issued from several threads at once.
  virtual bool concurrent_calls() const { return false; }
};

/// Predictor backed by a completion backend and the prompt templates.
class ChatPredictor final : public Predictor {
 public:
  ChatPredictor(const GroundTruthGraph& graph, CompletionBackend& backend, SamplingPolicy policy = {},
                bool concurrent = false);

  ZeroShotResult zero_shot(EdgePair pair, int samples) override;
  LocalUpdateResult local_update(const LocalUpdateContext& ctx, int samples) override;
  std::optional<std::vector<EdgePair>> propose_experiments(const DirectSelectionContext& ctx) override;
  std::vector<EdgeRevision> global_update(const GlobalUpdateContext& ctx) override;
  bool concurrent_calls() const override { return concurrent_; }

 private:
  const GroundTruthGraph& graph_;
  CompletionBackend& backend_;
  SamplingPolicy policy_;
  bool concurrent_;
};

/// Deterministic rule-based predictor for traces and tests.
///
/// Zero-shot: a fixed table with a default. Local update: the target moves
/// from its round-start value by `parent_step` (shares-parent) or
/// `child_step` (shares-child) in the direction of the revealed label.
/// Global update: the same rule averaged over every adjacent experiment.
/// Direct selection: `direct_proposals` if set, else the lexicographically
/// first unexperimented pairs.
struct Script {
  std::map<EdgePair, double> zero_shot;
  double default_zero_shot = -50.0;
  double parent_step = 30.0;
  double child_step = 20.0;
  /// Pairs whose zero-shot call throws TransportError.
  std::set<EdgePair> failing;
  std::vector<EdgePair> direct_proposals;

  /// Keys use variable names: {"zero_shot": {"A->B": 70}, "default": -50,
  /// "parent_step": 30, "child_step": 20, "fail": ["A->C"], "propose": ["A->B"]}.
  static Script from_json(const nlohmann::json& doc, const GroundTruthGraph& graph);
};

class ScriptedPredictor final : public Predictor {
 public:
  ScriptedPredictor(const GroundTruthGraph& graph, Script script);

  ZeroShotResult zero_shot(EdgePair pair, int samples) override;
  LocalUpdateResult local_update(const LocalUpdateContext& ctx, int samples) override;
  std::optional<std::vector<EdgePair>> propose_experiments(const DirectSelectionContext& ctx) override;
  std::vector<EdgeRevision> global_update(const GlobalUpdateContext& ctx) override;
  bool concurrent_calls() const override { return true; }

  /// The update rule alone.
  SignedConfidence rule(const LocalUpdateContext& ctx) const;

 private:
  const GroundTruthGraph& graph_;
  Script script_;
};

}  // namespace igda
