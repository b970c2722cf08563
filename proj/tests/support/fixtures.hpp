#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "igda/graph.hpp"
#include "igda/predictor.hpp"

namespace igda::testing {

inline std::filesystem::path data_path(const std::string& name) { return std::filesystem::path(IGDA_TEST_DATA) / name; }

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline nlohmann::json read_json(const std::string& name) { return nlohmann::json::parse(read_text(data_path(name))); }

inline GroundTruthGraph golden_graph() { return load_graph(data_path("golden5.json")); }

inline Script golden_script(const GroundTruthGraph& graph) {
  return Script::from_json(read_json("golden5_script.json"), graph);
}

/// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("igda-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace igda::testing
