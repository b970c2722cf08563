#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "igda/graph.hpp"

namespace igda {

enum class Decision { Yes, No };

/// One predictor sample: a decision plus a verbalized confidence.
struct EdgeAssessment {
  Decision decision = Decision::No;
  int confidence = 1;  // [1, 100]
  std::string raw_text;

  double signed_value() const noexcept {
    return decision == Decision::Yes ? confidence : -static_cast<double>(confidence);
  }
};

struct ParseFailure {
  std::string reason;
  std::string raw_text;
};

using ParseResult = std::variant<EdgeAssessment, ParseFailure>;

/// Reads the last complete <decision> and <confidence> tags. YES/PARENT mean
/// present, NO/NOT CAUSAL absent (case-insensitive). Confidence must be an
/// integer in [1, 100].
ParseResult parse_assessment(std::string_view text);

/// Well-formed response text for (decision, confidence); `update_vocabulary`
/// picks PARENT/NOT CAUSAL over YES/NO.
std::string format_assessment(Decision decision, int confidence, bool update_vocabulary = false);

/// Signed mean of the samples (YES -> +c, NO -> -c). Summation runs over the
/// sorted values, so the result does not depend on sample order.
/// Throws AggregationError for an empty list.
SignedConfidence aggregate_samples(std::span<const EdgeAssessment> samples);

/// Order-independent mean of signed values.
double stable_mean(std::vector<double> values);

/// Contents of each complete <name>...</name> element, in text order.
/// Tag names match case-insensitively and tolerate inner whitespace.
std::vector<std::string_view> find_tag_contents(std::string_view text, std::string_view name);

/// Edge list in the last <experiments> block: one "A->B" per line
/// (surrounding parentheses allowed). nullopt when the block is missing;
/// unknown names or malformed lines are skipped and counted in `rejected`.
std::optional<std::vector<EdgePair>> parse_edge_list(std::string_view text, const GroundTruthGraph& graph,
                                                     std::size_t* rejected = nullptr);

struct EdgeRevision {
  EdgePair pair;
  SignedConfidence confidence;
};

/// Revisions in the last <updates> block written in edge notation
/// "(A->B,CONF)" / "(NOT A->B, CONF)". Unparseable lines are skipped.
std::optional<std::vector<EdgeRevision>> parse_revisions(std::string_view text, const GroundTruthGraph& graph,
                                                         std::size_t* rejected = nullptr);

}  // namespace igda
