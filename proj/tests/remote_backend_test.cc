// Copyright 2026 The cob Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cob/remote_backend.hpp"

#include <cstdlib>
#include <mutex>
#include <thread>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <gtest/gtest.h>

#include "cob/error.hpp"

namespace cob::backend {
namespace {

// Local stand-in for a chat-completions endpoint.
class StubServer {
 public:
  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  explicit StubServer(Handler handler) : handler_(std::move(handler)) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      {
        std::lock_guard lock(mu_);
        bodies_.push_back(req.body);
        auth_.push_back(req.get_header_value("Authorization"));
      }
      handler_(req, res);
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }

  std::string endpoint() const {
    return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions";
  }
  std::vector<std::string> bodies() {
    std::lock_guard lock(mu_);
    return bodies_;
  }
  std::vector<std::string> auth() {
    std::lock_guard lock(mu_);
    return auth_;
  }

 private:
  Handler handler_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::mutex mu_;
  std::vector<std::string> bodies_;
  std::vector<std::string> auth_;
};

int FreePort() {
  const int fd = socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  socklen_t len = sizeof addr;
  bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
  getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  close(fd);
  return ntohs(addr.sin_port);
}

std::string Reply(const std::string& text, bool usage = true) {
  nlohmann::json j = {{"choices", {{{"message", {{"role", "assistant"}, {"content", text}}}}}}};
  if (usage) j["usage"] = {{"prompt_tokens", 600}, {"completion_tokens", 7}};
  return j.dump();
}

ModelRequest Request() {
  ModelRequest r;
  r.images.push_back(RequestImage::from_raster(Image(500, 300)));
  r.instruction = "What is the total?";
  r.decode.max_output_tokens = 64;
  return r;
}

RemoteConfig Config(const std::string& endpoint) {
  RemoteConfig c;
  c.endpoint = endpoint;
  c.model = "test-model";
  c.timeout_s = 5;
  c.backoff_initial_ms = 100;
  return c;
}

struct RecordedSleeps {
  std::vector<long long> ms;
  RemoteBackend::SleepFn fn() {
    return [this](std::chrono::milliseconds d) { ms.push_back(d.count()); };
  }
};

TEST(RemoteBackendTest, SendsChatRequestAndReadsUsage) {
  StubServer stub([](const httplib::Request&, httplib::Response& res) {
    res.set_content(Reply("$1,200.00"), "application/json");
  });
  ::setenv("COB_TEST_REMOTE_KEY", "k-123", 1);
  auto cfg = Config(stub.endpoint());
  cfg.api_key_env = "COB_TEST_REMOTE_KEY";
  RemoteBackend remote(cfg);
  const auto r = remote.invoke(Request());
  EXPECT_EQ(r.text, "$1,200.00");
  EXPECT_EQ(r.image_token_count, 512);
  EXPECT_EQ(r.prompt_token_count, 88);
  EXPECT_EQ(r.output_token_count, 7);
  EXPECT_FALSE(r.tokens_estimated);
  EXPECT_EQ(remote.last_attempts(), 1);
  EXPECT_EQ(remote.name(), "remote:test-model");

  const auto body = nlohmann::json::parse(stub.bodies().at(0));
  EXPECT_EQ(body["model"], "test-model");
  EXPECT_EQ(body["temperature"], 0);
  EXPECT_EQ(body["max_tokens"], 64);
  const auto& content = body["messages"][0]["content"];
  ASSERT_EQ(content.size(), 2u);
  EXPECT_EQ(content[0]["type"], "image_url");
  EXPECT_EQ(content[0]["image_url"]["url"].get<std::string>().rfind("data:image/png;base64,", 0), 0u);
  EXPECT_EQ(content[1]["text"], "What is the total?");
  EXPECT_EQ(stub.auth().at(0), "Bearer k-123");
}

TEST(RemoteBackendTest, EstimatesWhenUsageMissingAndJoinsParts) {
  StubServer stub([](const httplib::Request&, httplib::Response& res) {
    const nlohmann::json j = {
        {"choices",
         {{{"message",
            {{"content", {{{"type", "text"}, {"text", "12"}}, {{"type", "text"}, {"text", "34"}}}}}}}}}};
    res.set_content(j.dump(), "application/json");
  });
  RemoteBackend remote(Config(stub.endpoint()));
  const auto r = remote.invoke(Request());
  EXPECT_EQ(r.text, "1234");
  EXPECT_TRUE(r.tokens_estimated);
  EXPECT_EQ(r.output_token_count, 1);
  EXPECT_EQ(stub.auth().at(0), "");
}

TEST(RemoteBackendTest, RetriesTransientFailuresWithBackoff) {
  std::atomic<int> n{0};
  StubServer stub([&](const httplib::Request&, httplib::Response& res) {
    if (++n <= 2) {
      res.status = n == 1 ? 503 : 429;
      return;
    }
    res.set_content(Reply("ok"), "application/json");
  });
  RecordedSleeps sleeps;
  RemoteBackend remote(Config(stub.endpoint()), sleeps.fn());
  EXPECT_EQ(remote.invoke(Request()).text, "ok");
  EXPECT_EQ(remote.last_attempts(), 3);
  EXPECT_EQ(sleeps.ms, (std::vector<long long>{100, 200}));
  const auto bodies = stub.bodies();
  ASSERT_EQ(bodies.size(), 3u);
  EXPECT_EQ(bodies[0], bodies[1]);
  EXPECT_EQ(bodies[1], bodies[2]);
}

TEST(RemoteBackendTest, GivesUpAfterMaxAttempts) {
  StubServer stub([](const httplib::Request&, httplib::Response& res) { res.status = 500; });
  RecordedSleeps sleeps;
  RemoteBackend remote(Config(stub.endpoint()), sleeps.fn());
  try {
    remote.invoke(Request());
    FAIL();
  } catch (const BackendUnavailableError& e) {
    EXPECT_EQ(e.attempts(), 3);
  }
  EXPECT_EQ(stub.bodies().size(), 3u);
  EXPECT_EQ(sleeps.ms.size(), 2u);
}

TEST(RemoteBackendTest, UnreachableEndpointIsUnavailable) {
  const int port = FreePort();
  RecordedSleeps sleeps;
  auto cfg = Config("http://127.0.0.1:" + std::to_string(port) + "/v1");
  cfg.max_attempts = 2;
  cfg.timeout_s = 1;
  RemoteBackend remote(cfg, sleeps.fn());
  EXPECT_THROW(remote.invoke(Request()), BackendUnavailableError);
  EXPECT_EQ(remote.last_attempts(), 2);
}

TEST(RemoteBackendTest, ClientErrorsAreNotRetried) {
  StubServer stub([](const httplib::Request& req, httplib::Response& res) {
    res.status = 400;
    res.set_content("this model does not accept image input", "text/plain");
    (void)req;
  });
  RecordedSleeps sleeps;
  RemoteBackend remote(Config(stub.endpoint()), sleeps.fn());
  EXPECT_THROW(remote.invoke(Request()), CapabilityError);
  EXPECT_EQ(stub.bodies().size(), 1u);

  StubServer auth([](const httplib::Request&, httplib::Response& res) { res.status = 401; });
  RemoteBackend remote2(Config(auth.endpoint()), sleeps.fn());
  EXPECT_THROW(remote2.invoke(Request()), BackendError);
  EXPECT_EQ(auth.bodies().size(), 1u);
  EXPECT_TRUE(sleeps.ms.empty());
}

TEST(RemoteBackendTest, MalformedReplies) {
  StubServer stub([](const httplib::Request& req, httplib::Response& res) {
    res.set_content(req.body.find("shape") != std::string::npos ? R"({"choices": []})" : "not json",
                    "application/json");
  });
  RemoteBackend remote(Config(stub.endpoint()));
  EXPECT_THROW(remote.invoke(Request()), BackendError);
  auto r = Request();
  r.instruction = "shape";
  EXPECT_THROW(remote.invoke(r), BackendError);
}

TEST(RemoteBackendTest, BoundsConcurrentRequests) {
  std::atomic<int> in_flight{0};
  std::atomic<int> peak{0};
  StubServer stub([&](const httplib::Request&, httplib::Response& res) {
    const int now = ++in_flight;
    int prev = peak.load();
    while (now > prev && !peak.compare_exchange_weak(prev, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    --in_flight;
    res.set_content(Reply("ok"), "application/json");
  });
  auto cfg = Config(stub.endpoint());
  cfg.max_in_flight = 2;
  RemoteBackend remote(cfg);
  std::vector<std::thread> threads;
  for (int i = 0; i < 6; ++i) threads.emplace_back([&] { remote.invoke(Request()); });
  for (auto& t : threads) t.join();
  EXPECT_EQ(stub.bodies().size(), 6u);
  EXPECT_LE(peak.load(), 2);
}

TEST(RemoteBackendTest, ConfigValidation) {
  EXPECT_THROW(parse_endpoint("localhost:8000/v1"), ConfigError);
  EXPECT_THROW(parse_endpoint("ftp://host/v1"), ConfigError);
  EXPECT_THROW(parse_endpoint("http:///v1"), ConfigError);
  const auto p = parse_endpoint("https://api.example.com:8443/v1/chat/completions");
  EXPECT_EQ(p.scheme_host_port, "https://api.example.com:8443");
  EXPECT_EQ(p.path, "/v1/chat/completions");
  auto cfg = Config("http://127.0.0.1:1/v1");
  cfg.max_attempts = 0;
  EXPECT_THROW(RemoteBackend{cfg}, ConfigError);
  auto bad = Request();
  bad.decode.temperature = 0.7;
  RemoteBackend remote(Config("http://127.0.0.1:1/v1"));
  EXPECT_THROW(remote.invoke(bad), ParameterError);
}

}  // namespace
}  // namespace cob::backend
