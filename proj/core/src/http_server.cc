/*
 * Copyright 2026 The ikp Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "ikp/http_server.h"

#include <string>

#include "absl/strings/escaping.h"
#include "absl/strings/str_cat.h"
#include "glog/logging.h"
#include "httplib.h"
#include "json.hpp"

namespace ikp {
namespace {

using nlohmann::json;

void SendJson(httplib::Response& res, int code, const json& body) {
  res.status = code;
  res.set_content(body.dump(), "application/json");
}

void SendError(httplib::Response& res, const absl::Status& status) {
  SendJson(res, HttpStatusFor(status),
           {{"error",
             {{"code", absl::StatusCodeToString(status.code())},
              {"message", std::string(status.message())}}}});
}

absl::StatusOr<json> ParseBody(const httplib::Request& req) {
  json body = json::parse(req.body, nullptr, /*allow_exceptions=*/false);
  if (body.is_discarded() || !body.is_object()) {
    return absl::InvalidArgumentError("request body must be a JSON object");
  }
  return body;
}

absl::StatusOr<std::string> ImageBytes(const httplib::Request& req) {
  if (req.is_multipart_form_data()) {
    if (!req.has_file("image")) {
      return absl::InvalidArgumentError("multipart upload needs an 'image' field");
    }
    return req.get_file_value("image").content;
  }
  auto body = ParseBody(req);
  if (!body.ok()) return body.status();
  if (!body->contains("image_base64") || !(*body)["image_base64"].is_string()) {
    return absl::InvalidArgumentError("missing string field 'image_base64'");
  }
  std::string bytes;
  if (!absl::Base64Unescape((*body)["image_base64"].get<std::string>(), &bytes)) {
    return absl::InvalidArgumentError("image_base64 is not valid base64");
  }
  return bytes;
}

}  // namespace

int HttpStatusFor(const absl::Status& status) {
  switch (status.code()) {
    case absl::StatusCode::kOk:
      return 200;
    case absl::StatusCode::kInvalidArgument:
    case absl::StatusCode::kOutOfRange:
      return 400;
    case absl::StatusCode::kNotFound:
      return 404;
    case absl::StatusCode::kFailedPrecondition:
      return 409;
    case absl::StatusCode::kResourceExhausted:
      return 429;
    case absl::StatusCode::kUnavailable:
      return 503;
    default:
      return 500;
  }
}

HttpServer::HttpServer(SessionManager& sessions, std::string version)
    : sessions_(sessions),
      version_(std::move(version)),
      server_(std::make_unique<httplib::Server>()) {
  httplib::Server& s = *server_;

  s.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
    auto bytes = ImageBytes(req);
    if (!bytes.ok()) return SendError(res, bytes.status());
    auto view = sessions_.CreateFromPng(*bytes);
    if (!view.ok()) return SendError(res, view.status());
    SendJson(res, 201, ToJson(*view, /*include_history=*/false));
  });

  s.Post(R"(/sessions/([0-9a-f]+)/clicks)",
         [this](const httplib::Request& req, httplib::Response& res) {
           auto body = ParseBody(req);
           if (!body.ok()) return SendError(res, body.status());
           const json& b = *body;
           if (!b.contains("index") || !b["index"].is_number_integer() ||
               !b.contains("x") || !b["x"].is_number() || !b.contains("y") ||
               !b["y"].is_number()) {
             return SendError(res, absl::InvalidArgumentError(
                                       "click needs integer 'index' and numeric 'x', 'y'"));
           }
           auto view = sessions_.Click(req.matches[1], b["index"].get<int>(),
                                       b["x"].get<double>(), b["y"].get<double>());
           if (!view.ok()) return SendError(res, view.status());
           SendJson(res, 200, ToJson(*view, false));
         });

  s.Post(R"(/sessions/([0-9a-f]+)/undo)",
         [this](const httplib::Request& req, httplib::Response& res) {
           bool undone = false;
           auto view = sessions_.Undo(req.matches[1], &undone);
           if (!view.ok()) return SendError(res, view.status());
           json j = ToJson(*view, false);
           j["undone"] = undone;
           SendJson(res, 200, j);
         });

  s.Get(R"(/sessions/([0-9a-f]+))",
        [this](const httplib::Request& req, httplib::Response& res) {
          auto view = sessions_.Get(req.matches[1]);
          if (!view.ok()) return SendError(res, view.status());
          SendJson(res, 200, ToJson(*view, /*include_history=*/true));
        });

  s.Delete(R"(/sessions/([0-9a-f]+))",
           [this](const httplib::Request& req, httplib::Response& res) {
             const bool existed = sessions_.Delete(req.matches[1]);
             SendJson(res, 200, {{"deleted", existed}});
           });

  s.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
    const HealthInfo h = sessions_.Health();
    SendJson(res, 200,
             {{"status", "ok"},
              {"version", version_},
              {"model_id", h.model_id},
              {"num_keypoints", h.num_keypoints},
              {"input", {{"width", h.input_width}, {"height", h.input_height}}},
              {"live_sessions", h.live_sessions}});
  });

  s.set_logger([](const httplib::Request& req, const httplib::Response& res) {
    VLOG(1) << req.method << " " << req.path << " -> " << res.status;
  });
}

HttpServer::~HttpServer() = default;

absl::StatusOr<int> HttpServer::Bind(const std::string& host, int port) {
  const int bound = port == 0 ? server_->bind_to_any_port(host)
                              : (server_->bind_to_port(host, port) ? port : -1);
  if (bound < 0) {
    return absl::UnavailableError(absl::StrCat("cannot bind ", host, ":", port));
  }
  return bound;
}

absl::Status HttpServer::Run() {
  if (!server_->listen_after_bind()) {
    return absl::UnavailableError("HTTP server stopped with an error");
  }
  return absl::OkStatus();
}

void HttpServer::Stop() { server_->stop(); }

}  // namespace ikp
