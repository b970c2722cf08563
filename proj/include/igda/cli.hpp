#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include <nlohmann/json.hpp>

namespace igda::cli {

/// Process exit codes.
enum ExitCode : int {
  kOk = 0,
  /// Bad graph, config, arguments or missing Ĝ_0 cache.
  kInvalidInput = 1,
  /// The completion backend could not be reached or rejected the requests.
  kBackendUnavailable = 2,
  /// Logs given to analyze do not share a budget grid or graph.
  kGridMismatch = 3,
  kPortBusy = 4,
};

/// Runs one command line (argv[0] is the program name). `in` feeds the
/// interactive experiment oracle of `discover --oracle session`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err, std::istream& in);

/// File name of the cached Ĝ_0 for this graph, backend identity, K and
/// temperature: "g0-<16 hex>.json".
std::string initial_cache_name(const std::string& graph_hash, const nlohmann::json& backend_identity, int samples,
                               double temperature);

}  // namespace igda::cli
