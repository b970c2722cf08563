#pragma once

#include <cstdint>
#include <random>

#include <nlohmann/json.hpp>

#include "igda/predictor.hpp"

namespace igda {

using Rng = std::mt19937_64;

/// Parameters of the simulated predictor.
///
/// A zero-shot sample is correct with probability `zero_shot_accuracy`.
/// Its magnitude is uniform on {1 + gap .. 100} when correct and on
/// {1 .. 100 - gap} when wrong, so correct samples are on average exactly
/// `calibration_gap` more confident. A local update moves toward the target's
/// true pole with probability `update_fidelity` (away otherwise) by a step
/// uniform on {step_lo .. step_hi}.
struct OracleParams {
  double zero_shot_accuracy = 0.7;
  int calibration_gap = 30;
  double update_fidelity = 0.8;
  int step_lo = 10;
  int step_hi = 30;
  std::uint64_t seed = 0;

  /// Throws ContractError when a parameter is out of range.
  void validate() const;
  nlohmann::json to_json() const;
  static OracleParams from_json(const nlohmann::json& j);
};

EdgeAssessment sim_zero_shot(const OracleParams& params, EdgeLabel truth, Rng& rng);

/// Moves `prior` toward (or away from) the pole of `truth`, clamped.
SignedConfidence sim_local_update(const OracleParams& params, EdgeLabel truth, SignedConfidence prior, Rng& rng);

/// Predictor answering from a known truth graph through the simulation above.
/// Each call draws from its own stream keyed by (seed, call identity), so
/// results do not depend on call order or threading.
class SimulatedPredictor final : public Predictor {
 public:
  SimulatedPredictor(const GroundTruthGraph& truth, OracleParams params);

  ZeroShotResult zero_shot(EdgePair pair, int samples) override;
  LocalUpdateResult local_update(const LocalUpdateContext& ctx, int samples) override;
  std::optional<std::vector<EdgePair>> propose_experiments(const DirectSelectionContext& ctx) override;
  std::vector<EdgeRevision> global_update(const GlobalUpdateContext& ctx) override;
  bool concurrent_calls() const override { return true; }

  const OracleParams& params() const noexcept { return params_; }

 private:
  Rng stream(std::uint64_t kind, EdgePair a, EdgePair b, std::uint64_t extra) const;

  const GroundTruthGraph& truth_;
  OracleParams params_;
};

/// Random simple digraph on `node_count` nodes with independent edge probability.
GroundTruthGraph random_graph(std::size_t node_count, double edge_probability, std::uint64_t seed);

}  // namespace igda
