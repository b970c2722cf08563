#include <doctest.h>

#include <atomic>
#include <thread>

#include "fixtures.hpp"
#include "mock_endpoint.hpp"
#include "igda/errors.hpp"
#include "igda/gateway.hpp"
#include "igda/hash.hpp"

using namespace igda;
using namespace std::chrono_literals;
using igda::testing::MockEndpoint;
using igda::testing::reply;

namespace {

GatewayConfig config_for(const MockEndpoint& endpoint) {
  GatewayConfig config;
  config.base_url = endpoint.base_url();
  config.model = "test-model";
  config.timeout_seconds = 5;
  config.max_retries = 3;
  config.backoff_base_ms = 10;
  return config;
}

/// Records requested sleeps instead of sleeping.
struct SleepLog {
  std::mutex mutex;
  std::vector<long long> sleeps;
  ChatGateway::Sleeper sleeper() {
    return [this](std::chrono::milliseconds d) {
      std::lock_guard lock(mutex);
      sleeps.push_back(d.count());
    };
  }
};

}  // namespace

TEST_CASE("a successful completion sends one user message") {
  MockEndpoint endpoint([](const httplib::Request&, httplib::Response& res, int) { reply(res, "hello"); });
  ChatGateway gateway(config_for(endpoint), "secret");
  CHECK(gateway.complete("Is rain a cause?", 0) == "hello");
  const auto body = nlohmann::json::parse(endpoint.bodies().at(0));
  CHECK(body["model"] == "test-model");
  CHECK(body["temperature"] == 0.7);
  CHECK(body["max_tokens"] == 1024);
  REQUIRE(body["messages"].is_array());
  REQUIRE(body["messages"].size() == 1);
  CHECK(body["messages"][0]["role"] == "user");
  CHECK(body["messages"][0]["content"] == "Is rain a cause?");
  CHECK(endpoint.auth() == "Bearer secret");
  const auto records = gateway.records();
  REQUIRE(records.size() == 1);
  CHECK(records[0].attempts == 1);
  CHECK(records[0].prompt_hash == sha256_hex("Is rain a cause?"));
  CHECK(records[0].response == "hello");
  CHECK_FALSE(records[0].cached);
}

TEST_CASE("rate limiting and server errors are retried with growing backoff") {
  MockEndpoint endpoint([](const httplib::Request&, httplib::Response& res, int call) {
    if (call == 0) {
      res.status = 429;
    } else if (call == 1) {
      res.status = 503;
    } else if (call == 2) {
      res.set_content("not json", "text/plain");
    } else {
      reply(res, "finally");
    }
  });
  ChatGateway gateway(config_for(endpoint), "");
  SleepLog log;
  gateway.set_sleeper(log.sleeper());
  CHECK(gateway.complete("p", 0) == "finally");
  CHECK(gateway.network_calls() == 4);
  const auto record = gateway.records().at(0);
  CHECK(record.attempts == 4);
  REQUIRE(record.backoff_ms.size() == 3);
  CHECK(record.backoff_ms == log.sleeps);
  for (std::size_t k = 1; k < record.backoff_ms.size(); ++k) CHECK(record.backoff_ms[k] >= record.backoff_ms[k - 1]);
  CHECK(record.backoff_ms[0] >= 10);
  CHECK(record.backoff_ms[0] < 20);
  CHECK(record.backoff_ms[2] >= 40);
}

TEST_CASE("persistent failures exhaust the retries") {
  MockEndpoint endpoint([](const httplib::Request&, httplib::Response& res, int) { res.status = 500; });
  auto config = config_for(endpoint);
  config.max_retries = 2;
  ChatGateway gateway(config, "");
  SleepLog log;
  gateway.set_sleeper(log.sleeper());
  CHECK_THROWS_AS(gateway.complete("p", 0), TransportError);
  CHECK(endpoint.calls() == 3);
  CHECK_FALSE(gateway.records().at(0).error.empty());

  const auto slots = gateway.complete_batch("q", 2);
  CHECK_FALSE(slots[0].ok());
  CHECK_FALSE(slots[0].fatal);
}

TEST_CASE("client errors are not retried") {
  MockEndpoint endpoint([](const httplib::Request&, httplib::Response& res, int) {
    res.status = 401;
    res.set_content("bad key", "text/plain");
  });
  ChatGateway gateway(config_for(endpoint), "");
  CHECK_THROWS_AS(gateway.complete("p", 0), RequestRejectedError);
  CHECK(endpoint.calls() == 1);
  const auto slots = gateway.complete_batch("p", 1, 5);
  CHECK(slots[0].fatal);
}

TEST_CASE("an unreachable endpoint is a transport error") {
  int port = 0;
  {
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }
  GatewayConfig config;
  config.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
  config.max_retries = 1;
  config.timeout_seconds = 1;
  ChatGateway gateway(config, "");
  gateway.set_sleeper([](std::chrono::milliseconds) {});
  CHECK_THROWS_AS(gateway.complete("p", 0), TransportError);
}

TEST_CASE("batches respect the in-flight limit and keep index order") {
  std::atomic<int> active{0}, peak{0};
  MockEndpoint endpoint([&](const httplib::Request& req, httplib::Response& res, int) {
    const int now = ++active;
    int seen = peak;
    while (now > seen && !peak.compare_exchange_weak(seen, now)) {
    }
    std::this_thread::sleep_for(40ms);
    --active;
    reply(res, nlohmann::json::parse(req.body)["messages"][0]["content"].get<std::string>());
  });
  auto config = config_for(endpoint);
  config.max_in_flight = 3;
  config.temperature = 1.0;
  ChatGateway gateway(config, "");
  const auto slots = gateway.complete_batch("echo", 12, 4);
  REQUIRE(slots.size() == 12);
  for (const auto& s : slots) CHECK(*s.text == "echo");
  CHECK(peak.load() <= 3);
  CHECK(peak.load() >= 2);
  std::set<int> indices;
  for (const auto& r : gateway.records()) indices.insert(r.sample_index);
  CHECK(indices == std::set<int>{4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15});
}

TEST_CASE("the completion cache replays without network calls") {
  igda::testing::TempDir dir("gateway");
  std::atomic<int> counter{0};
  MockEndpoint endpoint([&](const httplib::Request&, httplib::Response& res, int) {
    reply(res, "answer " + std::to_string(counter++));
  });
  auto config = config_for(endpoint);
  config.cache_path = dir.path() / "cache.jsonl";
  config.audit_path = dir.path() / "audit.jsonl";
  std::vector<SampleResult> first;
  {
    ChatGateway gateway(config, "");
    first = gateway.complete_batch("prompt", 5);
    CHECK(gateway.network_calls() == 5);
  }
  ChatGateway replay(config, "");
  const auto second = replay.complete_batch("prompt", 5);
  CHECK(replay.network_calls() == 0);
  for (std::size_t k = 0; k < 5; ++k) CHECK(*second[k].text == *first[k].text);
  for (const auto& r : replay.records()) {
    CHECK(r.cached);
    CHECK(r.attempts == 0);
  }
  // A new sample index or another temperature misses the cache.
  CHECK(replay.complete("prompt", 5).rfind("answer", 0) == 0);
  CHECK(replay.network_calls() == 1);
  auto hotter = config;
  hotter.temperature = 0.9;
  CHECK(ChatGateway::cache_key(hotter, "h", 0) != ChatGateway::cache_key(config, "h", 0));

  const auto audit = igda::testing::read_text(config.audit_path);
  CHECK(std::count(audit.begin(), audit.end(), '\n') == 11);

  auto uncached = config;
  uncached.cache = false;
  ChatGateway fresh(uncached, "");
  fresh.complete_batch("prompt", 2);
  CHECK(fresh.network_calls() == 2);
}

TEST_CASE("backoff delays never decrease") {
  for (int base : {0, 1, 10, 500}) {
    for (int retry = 0; retry < 8; ++retry) {
      const auto hi = backoff_delay_ms(base, retry, 1.0);
      const auto lo_next = backoff_delay_ms(base, retry + 1, 0.0);
      CHECK(lo_next >= hi);
      CHECK(backoff_delay_ms(base, retry, 0.0) <= hi);
    }
  }
}

TEST_CASE("gateway configuration is validated") {
  GatewayConfig c;
  c.base_url = "ftp://example.org";
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = GatewayConfig{};
  c.max_in_flight = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = GatewayConfig{};
  c.temperature = -1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_NOTHROW(GatewayConfig{}.validate());
  CHECK_FALSE(GatewayConfig{}.to_json().dump().empty());
}
