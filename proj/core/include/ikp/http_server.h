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

// HTTP/JSON binding of SessionManager.
//
//   POST   /sessions               image as JSON {"image_base64": ...} or
//                                  multipart/form-data field "image" (PNG)
//   POST   /sessions/{id}/clicks   {"index": n, "x": .., "y": ..}
//   POST   /sessions/{id}/undo
//   GET    /sessions/{id}
//   DELETE /sessions/{id}
//   GET    /healthz
//
// Coordinates are floats at the uploaded image's scale, origin top-left,
// x rightward, y downward. Errors are {"error": {"code": ..., "message": ...}}.

#ifndef IKP_HTTP_SERVER_H_
#define IKP_HTTP_SERVER_H_

#include <memory>
#include <string>

#include "absl/status/status.h"
#include "ikp/service.h"

namespace httplib {
class Server;
}

namespace ikp {

// HTTP status for a non-OK status.
int HttpStatusFor(const absl::Status& status);

class HttpServer {
 public:
  explicit HttpServer(SessionManager& sessions, std::string version = "0.1.0");
  ~HttpServer();

  // Binds; port 0 picks a free port. Returns the bound port.
  absl::StatusOr<int> Bind(const std::string& host, int port);
  // Serves until Stop(). Call after Bind.
  absl::Status Run();
  void Stop();

 private:
  SessionManager& sessions_;
  std::string version_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace ikp

#endif  // IKP_HTTP_SERVER_H_
