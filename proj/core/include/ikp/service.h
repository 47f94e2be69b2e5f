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

// Session management for the interactive refinement API. Transport-agnostic;
// see http_server.h for the HTTP binding.

#ifndef IKP_SERVICE_H_
#define IKP_SERVICE_H_

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "ikp/checkpoint.h"
#include "ikp/interaction_sim.h"
#include "ikp/types.h"
#include "json.hpp"

namespace ikp {

// Client-facing session state. All coordinates are at the uploaded image's
// native scale.
struct SessionView {
  std::string id;
  int num_keypoints = 0;
  int image_width = 0;
  int image_height = 0;
  int step = 0;
  std::vector<Point> keypoints;
  std::vector<Click> corrections;  // active, in click order
  std::vector<Click> history;      // applied clicks, oldest first
};

nlohmann::json ToJson(const SessionView& view, bool include_history);

struct SessionManagerOptions {
  std::chrono::seconds idle_ttl{1800};
  size_t max_sessions = 1024;
  // Injected for tests; defaults to steady_clock::now.
  std::function<std::chrono::steady_clock::time_point()> clock;
  uint64_t id_seed = 0;  // 0 = seed from std::random_device
};

struct HealthInfo {
  std::string model_id;
  int num_keypoints = 0;
  int input_width = 0;
  int input_height = 0;
  size_t live_sessions = 0;
};

class SessionManager {
 public:
  SessionManager(std::shared_ptr<const LoadedCheckpoint> checkpoint,
                 std::string model_id, SessionManagerOptions options = {});

  // Runs the automatic prediction on `image` (any size; resized internally).
  absl::StatusOr<SessionView> Create(const Image& image);
  // Decodes PNG bytes, then Create.
  absl::StatusOr<SessionView> CreateFromPng(const std::string& png);
  absl::StatusOr<SessionView> Click(const std::string& id, int index, double x,
                                    double y);
  // `undone` is false when there was nothing to undo.
  absl::StatusOr<SessionView> Undo(const std::string& id, bool* undone);
  absl::StatusOr<SessionView> Get(const std::string& id);
  // Idempotent; returns whether a live session was removed.
  bool Delete(const std::string& id);
  // Drops expired sessions and returns how many were removed.
  size_t Sweep();
  HealthInfo Health() const;

 private:
  struct Entry {
    explicit Entry(RevisionSession s) : session(std::move(s)) {}
    std::mutex mu;
    std::string id;
    RevisionSession session;
    int native_width = 0;
    int native_height = 0;
    // Native-scale clicks parallel to session.click_log().
    std::vector<ikp::Click> native_clicks;
    std::chrono::steady_clock::time_point last_used;
  };

  std::chrono::steady_clock::time_point Now() const;
  // Looks up a live entry; expired entries are erased and reported missing.
  absl::StatusOr<std::shared_ptr<Entry>> Find(const std::string& id);
  SessionView View(const Entry& entry) const;
  std::string NewId();

  std::shared_ptr<const LoadedCheckpoint> checkpoint_;
  std::string model_id_;
  SessionManagerOptions options_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::mt19937_64 id_rng_;
};

// Stable 64-bit FNV-1a digest of a file, as 16 hex digits.
absl::StatusOr<std::string> FileDigest(const std::filesystem::path& path);

}  // namespace ikp

#endif  // IKP_SERVICE_H_
