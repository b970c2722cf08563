#include "igda/gateway.hpp"

#include <httplib.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <random>
#include <regex>
#include <thread>

#include "igda/errors.hpp"
#include "igda/hash.hpp"
#include "igda/parallel.hpp"

namespace igda {
namespace {

struct Endpoint {
  std::string origin;
  std::string path;
};

std::optional<Endpoint> split_base_url(const std::string& url) {
  static const std::regex pattern(R"(^(https?://[^/?#]+)(/[^?#]*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, pattern)) return std::nullopt;
  std::string prefix = m[2].matched ? m[2].str() : std::string();
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return Endpoint{m[1].str(), prefix + "/chat/completions"};
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const auto secs = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[40];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[48];
  std::snprintf(out, sizeof out, "%s.%03lldZ", buf, static_cast<long long>(ms));
  return out;
}

double jitter_draw() {
  thread_local std::mt19937_64 rng{std::random_device{}()};
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

bool retryable_status(int status) { return status == 429 || status >= 500; }

}  // namespace

void GatewayConfig::validate() const {
  if (!split_base_url(base_url)) throw ConfigError("base URL '" + base_url + "' is not an http(s) URL");
  if (model.empty()) throw ConfigError("model identifier is empty");
  if (!(temperature >= 0.0)) throw ConfigError("temperature must be >= 0");
  if (max_tokens < 1) throw ConfigError("max_tokens must be >= 1");
  if (!(timeout_seconds > 0.0)) throw ConfigError("timeout must be > 0");
  if (max_retries < 0) throw ConfigError("max retries must be >= 0");
  if (backoff_base_ms < 0) throw ConfigError("backoff base must be >= 0");
  if (max_in_flight < 1) throw ConfigError("max in-flight requests must be >= 1");
}

nlohmann::json GatewayConfig::to_json() const {
  return {{"base_url", base_url},         {"model", model},
          {"temperature", temperature},   {"max_tokens", max_tokens},
          {"timeout_seconds", timeout_seconds}, {"max_retries", max_retries},
          {"backoff_base_ms", backoff_base_ms}, {"max_in_flight", max_in_flight},
          {"cache", cache}};
}

nlohmann::json CompletionRecord::to_json() const {
  return {{"prompt_hash", prompt_hash}, {"sample_index", sample_index}, {"response", response},
          {"latency_ms", latency_ms},   {"attempts", attempts},         {"timestamp", timestamp},
          {"cached", cached},           {"error", error},               {"backoff_ms", backoff_ms}};
}

long long backoff_delay_ms(int base_ms, int retry, double jitter_unit) {
  const double step = static_cast<double>(base_ms) * std::ldexp(1.0, retry);
  const double jitter = std::clamp(jitter_unit, 0.0, 1.0) * step;
  // Keep the jitter strictly below one step so the next delay is never smaller.
  return static_cast<long long>(std::floor(step + std::min(jitter, std::nextafter(step, 0.0))));
}

ChatGateway::ChatGateway(GatewayConfig config, std::optional<std::string> api_key) : config_(std::move(config)) {
  config_.validate();
  const auto endpoint = split_base_url(config_.base_url);
  origin_ = endpoint->origin;
  path_ = endpoint->path;
  if (api_key) {
    api_key_ = *api_key;
  } else if (const char* env = std::getenv("IGDA_API_KEY")) {
    api_key_ = env;
  }
  sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  if (config_.cache && !config_.cache_path.empty()) {
    load_cache();
    cache_out_.open(config_.cache_path, std::ios::app | std::ios::binary);
    if (!cache_out_) throw ConfigError("cannot open completion cache " + config_.cache_path.string());
  }
  if (!config_.audit_path.empty()) {
    audit_out_.open(config_.audit_path, std::ios::app | std::ios::binary);
    if (!audit_out_) throw ConfigError("cannot open audit log " + config_.audit_path.string());
  }
}

ChatGateway::~ChatGateway() = default;

void ChatGateway::load_cache() {
  std::ifstream in(config_.cache_path, std::ios::binary);
  if (!in) return;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      cache_[j.at("key").get<std::string>()] = j.at("text").get<std::string>();
    } catch (const nlohmann::json::exception&) {
      // A torn final line from an interrupted run; the entry is simply refetched.
    }
  }
}

std::string ChatGateway::cache_key(const GatewayConfig& config, std::string_view prompt_hash, int sample_index) {
  char temp[40];
  std::snprintf(temp, sizeof temp, "%.17g", config.temperature);
  std::string material = config.model;
  material += '\x1f';
  material += temp;
  material += '\x1f';
  material += prompt_hash;
  material += '\x1f';
  material += std::to_string(sample_index);
  return sha256_hex(material);
}

void ChatGateway::acquire() {
  std::unique_lock lock(slots_mutex_);
  slots_cv_.wait(lock, [&] { return in_flight_ < config_.max_in_flight; });
  ++in_flight_;
}

void ChatGateway::release() {
  {
    std::lock_guard lock(slots_mutex_);
    --in_flight_;
  }
  slots_cv_.notify_one();
}

void ChatGateway::append_record(const CompletionRecord& record) {
  std::lock_guard lock(state_mutex_);
  records_.push_back(record);
  if (audit_out_.is_open()) {
    audit_out_ << record.to_json().dump() << '\n';
    audit_out_.flush();
  }
}

ChatGateway::Outcome ChatGateway::run_sample(std::string_view prompt, const std::string& prompt_hash,
                                             int sample_index) {
  CompletionRecord record;
  record.prompt_hash = prompt_hash;
  record.sample_index = sample_index;
  record.timestamp = utc_timestamp();

  const auto key = cache_key(config_, prompt_hash, sample_index);
  std::optional<std::string> hit;
  if (config_.cache) {
    std::lock_guard lock(state_mutex_);
    if (const auto it = cache_.find(key); it != cache_.end()) hit = it->second;
  }
  if (hit) {
    record.cached = true;
    record.response = *hit;
    append_record(record);
    return {std::move(hit), {}, false};
  }

  const nlohmann::json body{{"model", config_.model},
                            {"messages", nlohmann::json::array({{{"role", "user"}, {"content", std::string(prompt)}}})},
                            {"temperature", config_.temperature},
                            {"max_tokens", config_.max_tokens}};
  const auto payload = body.dump();
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  const auto started = std::chrono::steady_clock::now();
  const auto whole = static_cast<time_t>(config_.timeout_seconds);
  const auto micros = static_cast<time_t>((config_.timeout_seconds - static_cast<double>(whole)) * 1e6);

  Outcome outcome;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      const auto delay = backoff_delay_ms(config_.backoff_base_ms, attempt - 1, jitter_draw());
      record.backoff_ms.push_back(delay);
      sleeper_(std::chrono::milliseconds(delay));
    }
    ++record.attempts;
    {
      std::lock_guard lock(state_mutex_);
      ++network_calls_;
    }
    acquire();
    httplib::Result res{nullptr, httplib::Error::Unknown};
    {
      httplib::Client client(origin_);
      client.set_connection_timeout(whole, micros);
      client.set_read_timeout(whole, micros);
      client.set_write_timeout(whole, micros);
      res = client.Post(path_, headers, payload, "application/json");
    }
    release();

    if (!res) {
      outcome.error = "transport failure: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 200) {
      try {
        const auto reply = nlohmann::json::parse(res->body);
        const auto& content = reply.at("choices").at(0).at("message").at("content");
        outcome.text = content.get<std::string>();
        outcome.error.clear();
        break;
      } catch (const nlohmann::json::exception& err) {
        outcome.error = std::string("malformed completion body: ") + err.what();
        continue;
      }
    }
    outcome.error = "HTTP " + std::to_string(res->status);
    if (!res->body.empty()) outcome.error += ": " + res->body.substr(0, 300);
    if (!retryable_status(res->status)) {
      outcome.fatal = true;
      break;
    }
  }

  record.latency_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
  if (outcome.text) {
    if (config_.cache) {
      // Two identical requests may race; the first stored answer wins so
      // every caller, and every later replay, sees the same text.
      std::lock_guard lock(state_mutex_);
      const auto [it, fresh] = cache_.emplace(key, *outcome.text);
      if (!fresh) {
        outcome.text = it->second;
      } else if (cache_out_.is_open()) {
        cache_out_ << nlohmann::json{{"key", key}, {"text", *outcome.text}}.dump() << '\n';
        cache_out_.flush();
      }
    }
    record.response = *outcome.text;
  } else {
    record.error = outcome.error;
  }
  append_record(record);
  return outcome;
}

std::string ChatGateway::complete(std::string_view prompt, int sample_index) {
  if (prompt.empty()) throw ContractError("prompt is empty");
  auto outcome = run_sample(prompt, sha256_hex(prompt), sample_index);
  if (outcome.text) return std::move(*outcome.text);
  if (outcome.fatal) throw RequestRejectedError("completion request rejected: " + outcome.error);
  throw TransportError("completion failed after retries: " + outcome.error);
}

std::vector<SampleResult> ChatGateway::complete_batch(std::string_view prompt, int count, int first_index) {
  if (prompt.empty()) throw ContractError("prompt is empty");
  if (count < 1) throw ContractError("sample count must be at least 1");
  const auto hash = sha256_hex(prompt);
  std::vector<SampleResult> out(static_cast<std::size_t>(count));
  parallel_for(out.size(), config_.max_in_flight, [&](std::size_t k) {
    auto outcome = run_sample(prompt, hash, first_index + static_cast<int>(k));
    out[k].text = std::move(outcome.text);
    out[k].error = std::move(outcome.error);
    out[k].fatal = outcome.fatal;
  });
  return out;
}

std::size_t ChatGateway::network_calls() const {
  std::lock_guard lock(state_mutex_);
  return network_calls_;
}

std::vector<CompletionRecord> ChatGateway::records() const {
  std::lock_guard lock(state_mutex_);
  return records_;
}

}  // namespace igda
