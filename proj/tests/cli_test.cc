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

// Drives the `cob` binary against a scratch copy of the mini corpus.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <thread>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <gtest/gtest.h>

#include "cob/jsonl.hpp"
#include "httplib.h"
#include "json.hpp"
#include "test_util.hpp"

namespace cob {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string Quote(const std::string& s) {
  std::string q = "'";
  for (char c : s) {
    if (c == '\'') {
      q += "'\\''";
    } else {
      q += c;
    }
  }
  return q + "'";
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    corpus_ = dir_ / "corpus";
    fs::copy(testing::DataPath("mini_corpus"), corpus_, fs::copy_options::recursive);
  }

  RunResult Run(const std::vector<std::string>& args, bool with_config = true) {
    std::string cmd = Quote(COB_BINARY);
    if (with_config) cmd += " --config " + Quote(corpus_ + "/config.json");
    for (const auto& a : args) cmd += " " + Quote(a);
    const std::string out = dir_ / "stdout.txt";
    const std::string err = dir_ / "stderr.txt";
    cmd += " >" + Quote(out) + " 2>" + Quote(err);
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = testing::ReadAll(out);
    r.err = testing::ReadAll(err);
    return r;
  }

  std::vector<json> Lines(const std::string& path) {
    std::vector<json> out;
    for_each_jsonl_file(path, [&](const json& j, std::size_t) { out.push_back(j); });
    return out;
  }

  std::string C(const std::string& rel) { return corpus_ + "/" + rel; }

  testing::TempDir dir_;
  std::string corpus_;
};

TEST_F(CliTest, InferProducesExpectedAnswers) {
  const auto r = Run({"infer", "--dataset", "mini"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto sum = json::parse(r.out);
  EXPECT_EQ(sum["samples"], 12);
  EXPECT_EQ(sum["fallbacks"], 0);
  EXPECT_EQ(sum["calls"], 24);
  const auto preds = Lines(C("out/mini/predictions.jsonl"));
  const auto expected = Lines(C("expected_answers.jsonl"));
  ASSERT_EQ(preds.size(), expected.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    EXPECT_EQ(preds[i]["sample_id"], expected[i]["sample_id"]);
    EXPECT_EQ(preds[i]["answer"], expected[i]["answer"]);
  }
  // Two calls per sample, each with exactly one image.
  const auto calls = Lines(C("out/mini/calls.jsonl"));
  ASSERT_EQ(calls.size(), 24u);
  for (const auto& c : calls) EXPECT_EQ(c["images"].size(), 1u);
  EXPECT_NE(r.err.find("resolved config"), std::string::npos);
}

TEST_F(CliTest, GarbageSelectionFallsBack) {
  const auto r = Run({"infer", "--dataset", "mini", "--behavior", C("mock/garbage.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto garbage = json::parse(testing::ReadAll(C("garbage_questions.json")));
  std::set<std::string> hit(garbage.begin(), garbage.end());
  const auto expected = Lines(C("expected_answers.jsonl"));
  const auto traces = Lines(C("out/mini/traces.jsonl"));
  ASSERT_EQ(traces.size(), 12u);
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const auto& t = traces[i];
    const bool fell_back = !t["fallback_reason"].is_null();
    EXPECT_EQ(fell_back, hit.count(t["sample_id"].get<std::string>()) == 1) << t["sample_id"];
    if (fell_back) {
      EXPECT_EQ(t["fallback_reason"], "empty-selection");
      EXPECT_TRUE(t["s2"].is_null());
      EXPECT_FALSE(t["vanilla"].is_null());
    }
    EXPECT_EQ(t["answer"], expected[i]["answer"]);
  }
}

TEST_F(CliTest, VanillaModeUsesOneCallPerSample) {
  const auto r = Run({"infer", "--dataset", "mini", "--mode", "vanilla"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(json::parse(r.out)["calls"], 12);
  for (const auto& c : Lines(C("out/mini/calls.jsonl"))) {
    EXPECT_EQ(c["images"][0]["label"], "original");
  }
}

TEST_F(CliTest, RerunsAreByteIdentical) {
  ASSERT_EQ(Run({"infer", "--dataset", "mini", "--out", C("out/a")}).code, 0);
  ASSERT_EQ(Run({"infer", "--dataset", "mini", "--out", C("out/b")}).code, 0);
  EXPECT_EQ(testing::ReadAll(C("out/a/predictions.jsonl")),
            testing::ReadAll(C("out/b/predictions.jsonl")));
  EXPECT_EQ(testing::ReadAll(C("out/a/calls.jsonl")), testing::ReadAll(C("out/b/calls.jsonl")));
  auto strip = [&](const std::string& path) {
    auto lines = Lines(path);
    for (auto& l : lines) l.erase("wall_time_ms");
    return json(lines).dump();
  };
  EXPECT_EQ(strip(C("out/a/traces.jsonl")), strip(C("out/b/traces.jsonl")));
}

TEST_F(CliTest, EvalScoresAndReports) {
  ASSERT_EQ(Run({"infer", "--dataset", "mini"}).code, 0);
  auto r = Run({"eval", "--metric", "anls", "--predictions", C("out/mini/predictions.jsonl"),
                "--gold", C("gold.jsonl"), "--out", C("out/eval")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_DOUBLE_EQ(json::parse(r.out)["score"].get<double>(), 1.0);
  EXPECT_TRUE(fs::exists(C("out/eval/anls.tsv")));
  EXPECT_TRUE(fs::exists(C("out/eval/anls.summary.json")));
  r = Run({"eval", "--metric", "keybox-f1", "--predictions", C("out/mini/predictions.jsonl"),
           "--gold", C("gold.jsonl"), "--out", C("out/eval")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_DOUBLE_EQ(json::parse(r.out)["score"].get<double>(), 1.0);

  testing::WriteAll(C("stray.jsonl"), R"({"sample_id": "q99", "answer": "x"})" "\n");
  r = Run({"eval", "--metric", "anls", "--predictions", C("stray.jsonl"), "--gold", C("gold.jsonl"),
           "--out", C("out/eval")});
  EXPECT_EQ(r.code, 5);
  EXPECT_NE(r.err.find("q99"), std::string::npos);
  testing::WriteAll(C("empty.jsonl"), "");
  EXPECT_EQ(Run({"eval", "--metric", "anls", "--predictions", C("empty.jsonl"), "--gold",
                 C("gold.jsonl"), "--out", C("out/eval")})
                .code,
            5);
  EXPECT_EQ(Run({"eval", "--metric", "bleu", "--predictions", C("empty.jsonl"), "--gold",
                 C("gold.jsonl"), "--out", C("out/eval")})
                .code,
            2);
}

TEST_F(CliTest, GenerationRoutesAndIsRerunnable) {
  ASSERT_EQ(Run({"generate", "annotate", "--dataset", "mini"}).code, 0);
  auto r = Run({"generate", "qa", "--dataset", "mini"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto sum = json::parse(r.out);
  EXPECT_EQ(sum["accepted"], 10);
  EXPECT_EQ(sum["queued_for_review"], 2);
  EXPECT_EQ(sum["failed_checks"]["entailment"], 1);
  EXPECT_EQ(sum["failed_checks"]["no-ocr-text"], 1);
  EXPECT_EQ(sum["manifest"]["mean_key_boxes"], "3.00");
  const auto manifest = json::parse(testing::ReadAll(C("datasets/mini.manifest.json")));
  EXPECT_EQ(manifest["question_count"], 10);

  r = Run({"generate", "qa", "--dataset", "mini"});
  ASSERT_EQ(r.code, 0) << r.err;
  sum = json::parse(r.out);
  EXPECT_EQ(sum["accepted"], 0);
  EXPECT_EQ(sum["skipped"], 12);

  r = Run({"generate", "enabling-tasks", "--dataset", "mini"});
  ASSERT_EQ(r.code, 0) << r.err;
  sum = json::parse(r.out);
  EXPECT_EQ(sum["box_query"], 30);
  for (const auto& line : Lines(C("out/mini.enabling.jsonl"))) {
    EXPECT_EQ(line["input_image"], "s1_overlay");
  }
}

TEST_F(CliTest, LayoutAndRenderCommands) {
  auto r = Run({"layout", "cluster", "--tokens", C("tokens/doc1.tokens.jsonl"), "--image",
                C("images/doc1.png"), "--image-id", "doc1", "--out", C("out/doc1.clustered.jsonl")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_FALSE(Lines(C("out/doc1.clustered.jsonl")).empty());

  r = Run({"layout", "ingest", "--input", C("layouts/doc1.jsonl"), "--image", C("images/doc1.png"),
           "--image-id", "doc1", "--out", C("out/doc1.ingested.jsonl")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(Lines(C("out/doc1.ingested.jsonl")).size(), 7u);

  r = Run({"render", "s2", "--image-id", "doc1", "--keys", "4", "--out", C("out/k4.png")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(testing::ReadAll(C("out/k4.png")),
            testing::ReadAll(testing::DataPath("golden/doc1.s2.k4.png")));
  EXPECT_EQ(Run({"render", "s2", "--image-id", "doc1", "--keys", "42", "--out", C("out/x.png")}).code,
            5);
}

TEST_F(CliTest, ExitCodesByErrorClass) {
  EXPECT_EQ(Run({"infer", "--dataset", "mini"}, false).code, 2);
  EXPECT_EQ(Run({"infer", "--dataset", "nope"}).code, 2);
  testing::WriteAll(C("layouts/doc2.jsonl"), "{\"bbox\": [1, 2\n");
  EXPECT_EQ(Run({"infer", "--dataset", "mini"}).code, 3);

  // Unreachable remote endpoint.
  auto cfg = json::parse(testing::ReadAll(C("config.json")));
  cfg["backend"] = {{"kind", "remote"},
                    {"remote",
                     {{"endpoint", "http://127.0.0.1:9/v1/chat/completions"},
                      {"model", "m"},
                      {"timeout_s", 1},
                      {"max_attempts", 1}}}};
  fs::copy_file(testing::DataPath("mini_corpus/layouts/doc2.jsonl"), C("layouts/doc2.jsonl"),
                fs::copy_options::overwrite_existing);
  testing::WriteAll(C("config.json"), cfg.dump());
  const auto r = Run({"infer", "--dataset", "mini"});
  EXPECT_EQ(r.code, 4) << r.err;
}

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

TEST_F(CliTest, ServeAnswersAndShutsDownCleanly) {
  ASSERT_EQ(Run({"generate", "annotate", "--dataset", "mini"}).code, 0);
  ASSERT_EQ(Run({"generate", "qa", "--dataset", "mini"}).code, 0);
  const int port = FreePort();
  const std::string log = dir_ / "serve.log";
  const pid_t pid = fork();
  ASSERT_GE(pid, 0);
  if (pid == 0) {
    std::freopen(log.c_str(), "w", stderr);
    std::freopen("/dev/null", "w", stdout);
    const std::string cfg = corpus_ + "/config.json";
    const std::string p = std::to_string(port);
    execl(COB_BINARY, COB_BINARY, "--config", cfg.c_str(), "serve", "--dataset", "mini", "--port",
          p.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  httplib::Client client("127.0.0.1", port);
  client.set_connection_timeout(std::chrono::seconds(1));
  client.set_read_timeout(std::chrono::seconds(5));
  httplib::Result res;
  int status = 0;
  for (int i = 0; i < 200 && !res; ++i) {
    std::this_thread::sleep_for(std::chrono::milliseconds(25));
    if (waitpid(pid, &status, WNOHANG) == pid) break;
    res = client.Get("/review/next");
  }
  if (!res) {
    kill(pid, SIGKILL);
    waitpid(pid, &status, 0);
  }
  ASSERT_TRUE(res) << testing::ReadAll(log);
  const auto item = json::parse(res->body)["item"];
  EXPECT_EQ(item["item_id"], "q08");
  EXPECT_EQ(client.Get(item["images"]["s1_overlay"].get<std::string>())->status, 200);
  const json verdict = {{"status", "rejected"}, {"reviewer", "cli-test"}};
  EXPECT_EQ(client.Post("/review/q08/verdict", verdict.dump(), "application/json")->status, 200);

  kill(pid, SIGTERM);
  waitpid(pid, &status, 0);
  EXPECT_TRUE(WIFEXITED(status));
  EXPECT_EQ(WEXITSTATUS(status), 0) << testing::ReadAll(log);
  EXPECT_NE(testing::ReadAll(log).find("pending 1"), std::string::npos);
}

}  // namespace
}  // namespace cob
