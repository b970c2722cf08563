#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "igda/predictor.hpp"

namespace igda {

struct GatewayConfig {
  /// Endpoint prefix; requests go to {base_url}/chat/completions.
  std::string base_url = "http://localhost:8000/v1";
  std::string model = "meta-llama/Meta-Llama-3-70B-Instruct";
  double temperature = 0.7;
  int max_tokens = 1024;
  double timeout_seconds = 120.0;
  int max_retries = 4;
  int backoff_base_ms = 500;
  int max_in_flight = 8;
  bool cache = true;
  /// Completion cache file (JSONL). Empty keeps the cache in memory only.
  std::filesystem::path cache_path;
  /// Audit log file (JSONL). Empty keeps records in memory only.
  std::filesystem::path audit_path;

  /// Throws ConfigError for out-of-range values or an unusable base_url.
  void validate() const;
  /// The API key is never part of the config.
  nlohmann::json to_json() const;
};

struct CompletionRecord {
  std::string prompt_hash;
  int sample_index = 0;
  std::string response;
  double latency_ms = 0.0;
  /// HTTP attempts issued; 0 for a cache hit.
  int attempts = 0;
  std::string timestamp;
  bool cached = false;
  /// Terminal error text; empty on success.
  std::string error;
  /// Sleep before each retry, in order.
  std::vector<long long> backoff_ms;

  nlohmann::json to_json() const;
};

/// Delay before retry `retry` (0-based): base * 2^retry plus jitter in
/// [0, base * 2^retry). Successive delays never decrease.
long long backoff_delay_ms(int base_ms, int retry, double jitter_unit);

/// Chat-completions client with retry, a global in-flight limit, a
/// completion cache and an audit log. Safe to share between threads.
class ChatGateway final : public CompletionBackend {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  /// The API key defaults to the IGDA_API_KEY environment variable.
  explicit ChatGateway(GatewayConfig config, std::optional<std::string> api_key = std::nullopt);
  ~ChatGateway() override;

  ChatGateway(const ChatGateway&) = delete;
  ChatGateway& operator=(const ChatGateway&) = delete;

  /// One sample. Throws TransportError once retries are exhausted and
  /// ConfigError for a rejected (non-retryable 4xx) request.
  std::string complete(std::string_view prompt, int sample_index);

  /// `count` samples with indices first_index.. in index order. Failures
  /// occupy their own slot.
  std::vector<SampleResult> complete_batch(std::string_view prompt, int count, int first_index = 0);

  std::vector<SampleResult> sample(std::string_view prompt, int count, int first_index) override {
    return complete_batch(prompt, count, first_index);
  }

  /// HTTP requests issued so far, retries included.
  std::size_t network_calls() const;
  std::vector<CompletionRecord> records() const;
  const GatewayConfig& config() const noexcept { return config_; }

  /// Replaces the retry sleep (tests use this to avoid real waiting).
  void set_sleeper(Sleeper sleeper) { sleeper_ = std::move(sleeper); }

  static std::string cache_key(const GatewayConfig& config, std::string_view prompt_hash, int sample_index);

 private:
  struct Outcome {
    std::optional<std::string> text;
    std::string error;
    bool fatal = false;
  };

  Outcome run_sample(std::string_view prompt, const std::string& prompt_hash, int sample_index);
  void acquire();
  void release();
  void append_record(const CompletionRecord& record);
  void load_cache();

  GatewayConfig config_;
  std::string api_key_;
  std::string origin_;
  std::string path_;
  Sleeper sleeper_;

  std::mutex slots_mutex_;
  std::condition_variable slots_cv_;
  int in_flight_ = 0;

  mutable std::mutex state_mutex_;
  std::size_t network_calls_ = 0;
  std::vector<CompletionRecord> records_;
  std::map<std::string, std::string> cache_;
  std::ofstream cache_out_;
  std::ofstream audit_out_;
};

}  // namespace igda
