#include "igda/assessment.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

#include "igda/errors.hpp"

namespace igda {
namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::size_t skip_space(std::string_view text, std::size_t i) {
  while (i < text.size() && is_space(text[i])) ++i;
  return i;
}

std::size_t match_name(std::string_view text, std::size_t i, std::string_view name) {
  if (i + name.size() > text.size()) return std::string_view::npos;
  for (std::size_t k = 0; k < name.size(); ++k) {
    if (lower(text[i + k]) != lower(name[k])) return std::string_view::npos;
  }
  return i + name.size();
}

/// End of "<name>" starting at i, or npos.
std::size_t match_open(std::string_view text, std::size_t i, std::string_view name) {
  if (text[i] != '<') return std::string_view::npos;
  i = match_name(text, skip_space(text, i + 1), name);
  if (i == std::string_view::npos) return i;
  i = skip_space(text, i);
  return i < text.size() && text[i] == '>' ? i + 1 : std::string_view::npos;
}

/// End of "</name>" starting at i, or npos.
std::size_t match_close(std::string_view text, std::size_t i, std::string_view name) {
  if (text[i] != '<') return std::string_view::npos;
  i = skip_space(text, i + 1);
  if (i >= text.size() || text[i] != '/') return std::string_view::npos;
  i = match_name(text, skip_space(text, i + 1), name);
  if (i == std::string_view::npos) return i;
  i = skip_space(text, i);
  return i < text.size() && text[i] == '>' ? i + 1 : std::string_view::npos;
}

std::optional<int> parse_int(std::string_view s) {
  s = trim(s);
  if (s.empty() || s.size() > 6) return std::nullopt;
  int value = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  if (!std::all_of(s.begin(), s.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
    return std::nullopt;
  }
  return value;
}

std::string normalize_decision(std::string_view raw) {
  std::string out;
  bool pending_space = false;
  for (char c : trim(raw)) {
    if (c == '*' || c == '"' || c == '\'' || c == '`' || c == '.') continue;
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  }
  return out;
}

std::vector<std::string_view> lines_of(std::string_view block) {
  std::vector<std::string_view> lines;
  while (!block.empty()) {
    const auto nl = block.find('\n');
    const auto line = trim(block.substr(0, nl));
    if (!line.empty()) lines.push_back(line);
    if (nl == std::string_view::npos) break;
    block.remove_prefix(nl + 1);
  }
  return lines;
}

std::string_view strip_list_marker(std::string_view line) {
  if (!line.empty() && (line.front() == '-' || line.front() == '*')) return trim(line.substr(1));
  std::size_t k = 0;
  while (k < line.size() && std::isdigit(static_cast<unsigned char>(line[k]))) ++k;
  if (k > 0 && k < line.size() && (line[k] == '.' || line[k] == ')') && k + 1 < line.size() && is_space(line[k + 1])) {
    return trim(line.substr(k + 1));
  }
  return line;
}

bool starts_with_not(std::string_view s) {
  return s.size() > 4 && match_name(s, 0, "not") == 3 && is_space(s[3]);
}

std::optional<EdgePair> resolve_edge(std::string_view edge, const GroundTruthGraph& graph) {
  const auto arrow = edge.find("->");
  if (arrow == std::string_view::npos) return std::nullopt;
  const auto parent = graph.find(trim(edge.substr(0, arrow)));
  const auto child = graph.find(trim(edge.substr(arrow + 2)));
  if (!parent || !child || *parent == *child) return std::nullopt;
  return EdgePair{*parent, *child};
}

std::optional<std::string_view> last_block(std::string_view text, std::string_view tag) {
  const auto blocks = find_tag_contents(text, tag);
  if (blocks.empty()) return std::nullopt;
  return blocks.back();
}

}  // namespace

std::vector<std::string_view> find_tag_contents(std::string_view text, std::string_view name) {
  std::vector<std::string_view> found;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t open_end = std::string_view::npos;
    for (std::size_t i = text.find('<', pos); i != std::string_view::npos; i = text.find('<', i + 1)) {
      open_end = match_open(text, i, name);
      if (open_end != std::string_view::npos) break;
    }
    if (open_end == std::string_view::npos) break;
    bool closed = false;
    for (std::size_t j = text.find('<', open_end); j != std::string_view::npos; j = text.find('<', j + 1)) {
      if (const auto reopen = match_open(text, j, name); reopen != std::string_view::npos) {
        open_end = reopen;
        continue;
      }
      if (const auto close_end = match_close(text, j, name); close_end != std::string_view::npos) {
        found.push_back(text.substr(open_end, j - open_end));
        pos = close_end;
        closed = true;
        break;
      }
    }
    if (!closed) break;
  }
  return found;
}

ParseResult parse_assessment(std::string_view text) {
  const auto fail = [&](std::string reason) { return ParseFailure{std::move(reason), std::string(text)}; };
  const auto decision_tag = last_block(text, "decision");
  if (!decision_tag) return fail("missing <decision> tag");
  const auto confidence_tag = last_block(text, "confidence");
  if (!confidence_tag) return fail("missing <confidence> tag");

  EdgeAssessment out;
  const auto decision = normalize_decision(*decision_tag);
  if (decision == "YES" || decision == "PARENT") {
    out.decision = Decision::Yes;
  } else if (decision == "NO" || decision == "NOT CAUSAL") {
    out.decision = Decision::No;
  } else {
    return fail("unrecognized decision '" + std::string(trim(*decision_tag)) + "'");
  }
  const auto confidence = parse_int(*confidence_tag);
  if (!confidence) return fail("confidence '" + std::string(trim(*confidence_tag)) + "' is not an integer");
  if (*confidence < 1 || *confidence > 100) {
    return fail("confidence " + std::to_string(*confidence) + " outside [1, 100]");
  }
  out.confidence = *confidence;
  out.raw_text = std::string(text);
  return out;
}

std::string format_assessment(Decision decision, int confidence, bool update_vocabulary) {
  const char* word = decision == Decision::Yes ? (update_vocabulary ? "PARENT" : "YES")
                                               : (update_vocabulary ? "NOT CAUSAL" : "NO");
  return std::string("<decision>") + word + "</decision> <confidence>" + std::to_string(confidence) +
         "</confidence>";
}

double stable_mean(std::vector<double> values) {
  if (values.empty()) throw AggregationError("cannot average an empty list");
  std::sort(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

SignedConfidence aggregate_samples(std::span<const EdgeAssessment> samples) {
  if (samples.empty()) throw AggregationError("cannot aggregate zero samples");
  std::vector<double> values;
  values.reserve(samples.size());
  for (const auto& s : samples) values.push_back(s.signed_value());
  return SignedConfidence(stable_mean(std::move(values)));
}

std::optional<std::vector<EdgePair>> parse_edge_list(std::string_view text, const GroundTruthGraph& graph,
                                                     std::size_t* rejected) {
  const auto block = last_block(text, "experiments");
  if (!block) return std::nullopt;
  std::vector<EdgePair> pairs;
  std::size_t bad = 0;
  for (auto line : lines_of(*block)) {
    line = strip_list_marker(line);
    if (line.size() >= 2 && line.front() == '(' && line.back() == ')') line = trim(line.substr(1, line.size() - 2));
    const auto pair = starts_with_not(line) ? std::nullopt : resolve_edge(line, graph);
    if (pair) {
      pairs.push_back(*pair);
    } else {
      ++bad;
    }
  }
  if (rejected) *rejected = bad;
  return pairs;
}

std::optional<std::vector<EdgeRevision>> parse_revisions(std::string_view text, const GroundTruthGraph& graph,
                                                         std::size_t* rejected) {
  const auto block = last_block(text, "updates");
  if (!block) return std::nullopt;
  std::vector<EdgeRevision> revisions;
  std::size_t bad = 0;
  for (auto line : lines_of(*block)) {
    line = strip_list_marker(line);
    if (line.size() < 2 || line.front() != '(' || line.back() != ')') {
      ++bad;
      continue;
    }
    auto inner = trim(line.substr(1, line.size() - 2));
    const bool absent = starts_with_not(inner);
    if (absent) inner = trim(inner.substr(4));
    const auto comma = inner.rfind(',');
    const auto confidence = comma == std::string_view::npos ? std::nullopt : parse_int(inner.substr(comma + 1));
    const auto pair = comma == std::string_view::npos ? std::nullopt : resolve_edge(inner.substr(0, comma), graph);
    if (!pair || !confidence || *confidence < 1 || *confidence > 100) {
      ++bad;
      continue;
    }
    revisions.push_back({*pair, SignedConfidence(absent ? -*confidence : *confidence)});
  }
  if (rejected) *rejected = bad;
  return revisions;
}

}  // namespace igda
