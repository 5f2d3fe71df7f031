#pragma once

// Deterministic in-process endpoints for tests: chat completion, embeddings
// and scoring, plus a concurrency probe. All replies are pure functions of
// the request so pipelines are reproducible byte for byte.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <string>
#include <thread>

#include "forge/genclient.hpp"
#include "httplib.h"
#include "json.hpp"

namespace forgetest {

inline std::uint64_t fnv(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

class MockServer {
 public:
  enum class ChatMode { Echo, Fixed, Derived };
  enum class ScoreMode { Fixed, Derived, Unit, OutOfRange };

  ChatMode chat_mode = ChatMode::Derived;
  std::string fixed_reply = "OK";
  ScoreMode score_mode = ScoreMode::Fixed;
  double fixed_score = 85.5;
  int embed_dim = 8;
  int chat_delay_ms = 0;
  std::atomic<int> fail_429_remaining{0};

  MockServer() {
    server_.new_task_queue = [] { return new httplib::ThreadPool(16); };

    server_.Post("/v1/chat/completions", [this](const httplib::Request& req,
                                                httplib::Response& res) {
      int now = ++concurrent_;
      int seen = max_concurrent_.load();
      while (now > seen && !max_concurrent_.compare_exchange_weak(seen, now)) {
      }
      ++chat_calls_;
      if (chat_delay_ms > 0)
        std::this_thread::sleep_for(std::chrono::milliseconds(chat_delay_ms));

      if (fail_429_remaining.load() > 0) {
        --fail_429_remaining;
        res.status = 429;
        res.set_content("{\"error\":\"rate limited\"}", "application/json");
        --concurrent_;
        return;
      }
      nlohmann::json body = nlohmann::json::parse(req.body, nullptr, false);
      std::string prompt;
      if (!body.is_discarded() && body.contains("messages") && !body["messages"].empty())
        prompt = body["messages"].back().value("content", "");
      std::string reply;
      switch (chat_mode) {
        case ChatMode::Echo: reply = prompt; break;
        case ChatMode::Fixed: reply = fixed_reply; break;
        case ChatMode::Derived: {
          char buf[32];
          std::snprintf(buf, sizeof(buf), "mt-%016llx",
                        static_cast<unsigned long long>(fnv(prompt)));
          reply = buf;
          break;
        }
      }
      nlohmann::json out;
      out["choices"] = {{{"message", {{"content", reply}}}}};
      res.set_content(out.dump(), "application/json");
      --concurrent_;
    });

    server_.Post("/v1/embeddings", [this](const httplib::Request& req, httplib::Response& res) {
      nlohmann::json body = nlohmann::json::parse(req.body, nullptr, false);
      nlohmann::json data = nlohmann::json::array();
      if (!body.is_discarded() && body.contains("input")) {
        for (const auto& item : body["input"]) {
          std::string text = item.get<std::string>();
          std::vector<double> vec(embed_dim);
          for (int j = 0; j < embed_dim; ++j) {
            std::uint64_t h = fnv(text + "#" + std::to_string(j));
            vec[j] = static_cast<double>(h % 2001) / 1000.0 - 1.0;
          }
          data.push_back({{"embedding", vec}});
        }
      }
      nlohmann::json out;
      out["data"] = data;
      res.set_content(out.dump(), "application/json");
    });

    server_.Post("/score", [this](const httplib::Request& req, httplib::Response& res) {
      nlohmann::json body = nlohmann::json::parse(req.body, nullptr, false);
      nlohmann::json scores = nlohmann::json::array();
      if (!body.is_discarded() && body.contains("items")) {
        for (const auto& item : body["items"]) {
          std::string key = item.value("src", "") + "|" + item.value("mt", "");
          switch (score_mode) {
            case ScoreMode::Fixed: scores.push_back(fixed_score); break;
            case ScoreMode::Derived:
              scores.push_back(static_cast<double>(fnv(key) % 10000) / 100.0);
              break;
            case ScoreMode::Unit:
              scores.push_back(static_cast<double>(fnv(key) % 1000) / 1000.0);
              break;
            case ScoreMode::OutOfRange: scores.push_back(103.0); break;
          }
        }
      }
      nlohmann::json out;
      out["scores"] = scores;
      res.set_content(out.dump(), "application/json");
    });

    server_.Get("/stats", [this](const httplib::Request&, httplib::Response& res) {
      nlohmann::json out;
      out["max_concurrent"] = max_concurrent_.load();
      out["chat_calls"] = chat_calls_.load();
      res.set_content(out.dump(), "application/json");
    });

    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~MockServer() {
    // Drop this thread's pooled connections first, otherwise the server-side
    // keep-alive wait delays shutdown by its full timeout.
    forge::close_thread_connections();
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_); }
  int max_concurrent() const { return max_concurrent_.load(); }
  int chat_calls() const { return chat_calls_.load(); }
  void reset_stats() {
    max_concurrent_ = 0;
    chat_calls_ = 0;
  }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> concurrent_{0};
  std::atomic<int> max_concurrent_{0};
  std::atomic<int> chat_calls_{0};
};

}  // namespace forgetest
