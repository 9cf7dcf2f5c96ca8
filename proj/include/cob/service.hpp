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

// HTTP endpoints for the manual review workflow.
//
//   GET  /review/next                 next pending item or an empty marker
//   POST /review/{item_id}/verdict    {"status", "reviewer", "corrected"?}
//   GET  /review/stats                queue counters
//   GET  /images/{image_id}/{role}    PNG; role is original or s1_overlay
//
// Every JSON body carries "status": "ok" | "empty" | "error". Errors add
// {"error": {"code", "message", "failed_checks"?}}. When a token is
// configured, requests must send it in the X-Review-Token header.

#pragma once

#include <atomic>
#include <map>
#include <optional>
#include <string>
#include <sys/socket.h>

#include "cob/error.hpp"
#include "cob/image.hpp"
#include "cob/render.hpp"
#include "cob/store.hpp"
#include "httplib.h"
#include "json.hpp"

namespace cob::service {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  // 0 picks a free port.
  int port = 8080;
  // Shared secret; empty disables the check.
  std::string token;
  render::StyleSpec style;
};

struct RegisteredImage {
  std::string image_path;
  std::optional<layout::LayoutSet> layout;
};

// Images the service may serve besides those referenced by queue items.
using ImageRegistry = std::map<std::string, RegisteredImage>;

inline nlohmann::json error_body(std::string_view code, const std::string& message,
                                 const std::vector<std::string>& failed = {}) {
  nlohmann::json err = {{"code", code}, {"message", message}};
  if (!failed.empty()) err["failed_checks"] = failed;
  return {{"status", "error"}, {"error", err}};
}

// Review item as shown to a reviewer.
inline nlohmann::json item_payload(const store::ReviewItem& item) {
  nlohmann::json j = store::to_json(item);
  const auto& id = item.draft.image_id;
  j["image_id"] = id;
  j["question"] = item.draft.question;
  j["answers"] = item.draft.answers;
  j["draft_annotation"] = datagen::to_json(item.draft.annotation);
  j["images"] = {{"original", "/images/" + id + "/original"},
                 {"s1_overlay", "/images/" + id + "/s1_overlay"}};
  return j;
}

class ReviewService {
 public:
  ReviewService(store::ReviewQueue& queue, ServiceConfig config, ImageRegistry registry = {})
      : queue_(queue), config_(std::move(config)), registry_(std::move(registry)) {
    // No SO_REUSEPORT: a second server on the same port must fail to start.
    server_.set_socket_options([](socket_t sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
    });
    routes();
  }

  // Binds the listening socket; throws ServiceError when the address is
  // taken. Returns the bound port.
  int bind() {
    if (config_.port == 0) {
      port_ = server_.bind_to_any_port(config_.host);
      if (port_ < 0) throw ServiceError("cannot bind " + config_.host);
    } else {
      if (!server_.bind_to_port(config_.host, config_.port)) {
        throw ServiceError("cannot bind " + config_.host + ":" + std::to_string(config_.port) +
                           " (address in use?)");
      }
      port_ = config_.port;
    }
    return port_;
  }

  // Serves until stop(); requires bind().
  void run() { server_.listen_after_bind(); }

  void stop() { server_.stop(); }
  bool running() const { return server_.is_running(); }
  void wait_until_ready() { server_.wait_until_ready(); }
  int port() const { return port_; }
  httplib::Server& server() { return server_; }

 private:
  static void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  bool authorized(const httplib::Request& req, httplib::Response& res) const {
    if (config_.token.empty()) return true;
    if (req.get_header_value("X-Review-Token") == config_.token) return true;
    send_json(res, 401, error_body("unauthorized", "missing or wrong X-Review-Token"));
    return false;
  }

  std::optional<RegisteredImage> find_image(const std::string& image_id) const {
    for (const auto& item : queue_.items()) {
      if (item.draft.image_id == image_id) {
        return RegisteredImage{item.draft.image_path, item.layout};
      }
    }
    const auto it = registry_.find(image_id);
    if (it != registry_.end()) return it->second;
    return std::nullopt;
  }

  void routes() {
    server_.Get("/review/next", [this](const httplib::Request& req, httplib::Response& res) {
      if (!authorized(req, res)) return;
      const auto item = queue_.next_pending();
      if (!item) {
        send_json(res, 200, {{"status", "empty"}, {"item", nullptr}});
        return;
      }
      send_json(res, 200, {{"status", "ok"}, {"item", item_payload(*item)}});
    });

    server_.Get("/review/stats", [this](const httplib::Request& req, httplib::Response& res) {
      if (!authorized(req, res)) return;
      const auto c = queue_.counts();
      send_json(res, 200,
                {{"status", "ok"},
                 {"counts",
                  {{"enqueued", c.enqueued},
                   {"pending", c.pending},
                   {"accepted", c.accepted},
                   {"corrected", c.corrected},
                   {"rejected", c.rejected}}}});
    });

    server_.Post(R"(/review/([^/]+)/verdict)",
                 [this](const httplib::Request& req, httplib::Response& res) {
                   if (!authorized(req, res)) return;
                   handle_verdict(req.matches[1], req.body, res);
                 });

    server_.Get(R"(/images/([^/]+)/([^/]+))",
                [this](const httplib::Request& req, httplib::Response& res) {
                  if (!authorized(req, res)) return;
                  handle_image(req.matches[1], req.matches[2], res);
                });

    server_.set_exception_handler(
        [](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
          std::string what = "internal error";
          try {
            std::rethrow_exception(ep);
          } catch (const std::exception& e) {
            what = e.what();
          } catch (...) {
          }
          send_json(res, 500, error_body("internal", what));
        });
  }

  void handle_verdict(const std::string& item_id, const std::string& body,
                      httplib::Response& res) {
    store::Verdict verdict;
    try {
      const auto j = nlohmann::json::parse(body);
      if (!j.is_object() || !j.contains("status") || !j["status"].is_string()) {
        send_json(res, 400, error_body("bad_request", "body needs a string 'status'"));
        return;
      }
      verdict.status = store::parse_review_status(j["status"].get<std::string>());
      verdict.reviewer = j.value("reviewer", std::string());
      if (j.contains("corrected") && !j["corrected"].is_null()) {
        verdict.corrected = datagen::annotation_from_json(j["corrected"]);
      }
    } catch (const nlohmann::json::exception& e) {
      send_json(res, 400, error_body("bad_request", std::string("invalid JSON: ") + e.what()));
      return;
    } catch (const ValidationError& e) {
      send_json(res, 400, error_body("bad_request", e.what(), e.failed_checks()));
      return;
    }
    try {
      const auto item = queue_.submit_verdict(item_id, std::move(verdict));
      send_json(res, 200, {{"status", "ok"}, {"item", item_payload(item)}});
    } catch (const NotFoundError& e) {
      send_json(res, 404, error_body("not_found", e.what()));
    } catch (const ConflictError& e) {
      nlohmann::json body_json = error_body("conflict", e.what());
      if (const auto current = queue_.get(item_id)) body_json["item"] = item_payload(*current);
      send_json(res, 409, body_json);
    } catch (const StateError& e) {
      send_json(res, 409, error_body("conflict", e.what()));
    } catch (const ValidationError& e) {
      send_json(res, 422, error_body("validation", e.what(), e.failed_checks()));
    }
  }

  void handle_image(const std::string& image_id, const std::string& role,
                    httplib::Response& res) {
    if (role != "original" && role != "s1_overlay") {
      send_json(res, 404, error_body("not_found", "unknown image role '" + role + "'"));
      return;
    }
    const auto reg = find_image(image_id);
    if (!reg) {
      send_json(res, 404, error_body("not_found", "unknown image '" + image_id + "'"));
      return;
    }
    try {
      const Image img = read_image(reg->image_path);
      std::string png;
      if (role == "original") {
        png = encode_png(img);
      } else {
        if (!reg->layout) {
          send_json(res, 404, error_body("not_found", "no layout for '" + image_id + "'"));
          return;
        }
        const auto style = render::resolve_style(config_.style, img.width, img.height);
        png = render::render_s1_overlay(img, *reg->layout, style).png;
      }
      res.status = 200;
      res.set_content(png, "image/png");
    } catch (const FormatError& e) {
      send_json(res, 404, error_body("not_found", e.what()));
    }
  }

  store::ReviewQueue& queue_;
  ServiceConfig config_;
  ImageRegistry registry_;
  httplib::Server server_;
  int port_ = -1;
};

}  // namespace cob::service
