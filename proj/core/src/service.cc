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

#include "ikp/service.h"

#include <algorithm>
#include <fstream>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "ikp/data_io.h"
#include "ikp/keypoint_codec.h"

namespace ikp {

using nlohmann::json;

json ToJson(const SessionView& v, bool include_history) {
  auto clicks = [](const std::vector<Click>& cs) {
    json out = json::array();
    for (const Click& c : cs) {
      out.push_back({{"index", c.index}, {"x", c.position.x}, {"y", c.position.y}});
    }
    return out;
  };
  json kps = json::array();
  for (size_t i = 0; i < v.keypoints.size(); ++i) {
    kps.push_back({{"index", i}, {"x", v.keypoints[i].x}, {"y", v.keypoints[i].y}});
  }
  json j = {{"session_id", v.id},
            {"num_keypoints", v.num_keypoints},
            {"image", {{"width", v.image_width}, {"height", v.image_height}}},
            {"step", v.step},
            {"keypoints", kps},
            {"corrections", clicks(v.corrections)}};
  if (include_history) {
    j["history"] = clicks(v.history);
    j["history_length"] = v.history.size();
  }
  return j;
}

SessionManager::SessionManager(std::shared_ptr<const LoadedCheckpoint> checkpoint,
                               std::string model_id, SessionManagerOptions options)
    : checkpoint_(std::move(checkpoint)),
      model_id_(std::move(model_id)),
      options_(std::move(options)),
      id_rng_(options_.id_seed != 0 ? options_.id_seed : std::random_device{}()) {}

std::chrono::steady_clock::time_point SessionManager::Now() const {
  return options_.clock ? options_.clock() : std::chrono::steady_clock::now();
}

std::string SessionManager::NewId() {
  // Caller holds mu_.
  for (;;) {
    std::string id = absl::StrFormat("%016x%016x", id_rng_(), id_rng_());
    if (!sessions_.contains(id)) return id;
  }
}

SessionView SessionManager::View(const Entry& e) const {
  const ModelConfig& mc = checkpoint_->model->config();
  SessionView v;
  v.id = e.id;
  v.num_keypoints = mc.num_keypoints;
  v.image_width = e.native_width;
  v.image_height = e.native_height;
  v.step = e.session.step();
  const double sx = static_cast<double>(e.native_width) / mc.width;
  const double sy = static_cast<double>(e.native_height) / mc.height;
  for (const Point& p : e.session.keypoints().coords) {
    v.keypoints.push_back({std::clamp(p.x * sx, 0.0, e.native_width - 1.0),
                           std::clamp(p.y * sy, 0.0, e.native_height - 1.0)});
  }
  v.history = e.native_clicks;
  // Active corrections carry the latest native click per index, so pinned
  // keypoints come back exactly as sent.
  for (const ikp::Click& c : e.session.corrections()) {
    auto it = std::find_if(e.native_clicks.rbegin(), e.native_clicks.rend(),
                           [&](const ikp::Click& n) { return n.index == c.index; });
    v.corrections.push_back(*it);
    v.keypoints[c.index] = it->position;
  }
  return v;
}

absl::StatusOr<SessionView> SessionManager::Create(const Image& image) {
  if (checkpoint_ == nullptr || checkpoint_->model == nullptr) {
    return absl::UnavailableError("no model loaded");
  }
  const ModelConfig& mc = checkpoint_->model->config();
  if (image.channels != mc.image_channels) {
    return absl::InvalidArgumentError(absl::StrCat(
        "image has ", image.channels, " channels, model expects ", mc.image_channels));
  }
  auto resized = ResizeImage(image, mc.width, mc.height);
  if (!resized.ok()) return resized.status();
  auto session = RevisionSession::Start(*checkpoint_->model, std::move(*resized),
                                        checkpoint_->info.codec);
  if (!session.ok()) return session.status();
  auto entry = std::make_shared<Entry>(std::move(*session));
  entry->native_width = image.width;
  entry->native_height = image.height;
  entry->last_used = Now();

  std::lock_guard<std::mutex> lock(mu_);
  if (sessions_.size() >= options_.max_sessions) {
    return absl::ResourceExhaustedError(
        absl::StrCat("session limit of ", options_.max_sessions, " reached"));
  }
  entry->id = NewId();
  sessions_[entry->id] = entry;
  return View(*entry);
}

absl::StatusOr<SessionView> SessionManager::CreateFromPng(const std::string& png) {
  auto image = DecodePng(png);
  if (!image.ok()) {
    return absl::InvalidArgumentError(
        absl::StrCat("undecodable image: ", image.status().message()));
  }
  return Create(*image);
}

absl::StatusOr<std::shared_ptr<SessionManager::Entry>> SessionManager::Find(
    const std::string& id) {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) {
    return absl::NotFoundError(absl::StrCat("no session ", id));
  }
  // last_used is only written under the entry mutex; a racing reader at worst
  // keeps a session alive one request longer.
  std::shared_ptr<Entry> entry = it->second;
  std::unique_lock<std::mutex> entry_lock(entry->mu, std::try_to_lock);
  if (entry_lock.owns_lock() && Now() - entry->last_used > options_.idle_ttl) {
    sessions_.erase(it);
    return absl::NotFoundError(absl::StrCat("session ", id, " expired"));
  }
  return entry;
}

absl::StatusOr<SessionView> SessionManager::Click(const std::string& id, int index,
                                                  double x, double y) {
  auto entry = Find(id);
  if (!entry.ok()) return entry.status();
  Entry& e = **entry;
  std::lock_guard<std::mutex> lock(e.mu);
  const ModelConfig& mc = checkpoint_->model->config();
  if (!(x >= 0 && y >= 0 && x <= e.native_width - 1 && y <= e.native_height - 1)) {
    return absl::OutOfRangeError(absl::StrFormat(
        "click (%g, %g) outside the %dx%d image", x, y, e.native_width,
        e.native_height));
  }
  const Point model_pos{x * mc.width / e.native_width, y * mc.height / e.native_height};
  const ikp::Click click{index, {std::min(model_pos.x, mc.width - 1.0),
                            std::min(model_pos.y, mc.height - 1.0)}};
  if (auto s = e.session.Refine(click); !s.ok()) return s;
  e.native_clicks.push_back({index, {x, y}});
  e.last_used = Now();
  return View(e);
}

absl::StatusOr<SessionView> SessionManager::Undo(const std::string& id, bool* undone) {
  auto entry = Find(id);
  if (!entry.ok()) return entry.status();
  Entry& e = **entry;
  std::lock_guard<std::mutex> lock(e.mu);
  const bool did = e.session.Undo();
  if (did) e.native_clicks.pop_back();
  if (undone != nullptr) *undone = did;
  e.last_used = Now();
  return View(e);
}

absl::StatusOr<SessionView> SessionManager::Get(const std::string& id) {
  auto entry = Find(id);
  if (!entry.ok()) return entry.status();
  Entry& e = **entry;
  std::lock_guard<std::mutex> lock(e.mu);
  e.last_used = Now();
  return View(e);
}

bool SessionManager::Delete(const std::string& id) {
  std::lock_guard<std::mutex> lock(mu_);
  return sessions_.erase(id) > 0;
}

size_t SessionManager::Sweep() {
  std::lock_guard<std::mutex> lock(mu_);
  const auto now = Now();
  size_t removed = 0;
  for (auto it = sessions_.begin(); it != sessions_.end();) {
    std::unique_lock<std::mutex> entry_lock(it->second->mu, std::try_to_lock);
    if (entry_lock.owns_lock() && now - it->second->last_used > options_.idle_ttl) {
      entry_lock.unlock();
      it = sessions_.erase(it);
      ++removed;
    } else {
      ++it;
    }
  }
  return removed;
}

HealthInfo SessionManager::Health() const {
  HealthInfo h;
  h.model_id = model_id_;
  if (checkpoint_ != nullptr && checkpoint_->model != nullptr) {
    const ModelConfig& mc = checkpoint_->model->config();
    h.num_keypoints = mc.num_keypoints;
    h.input_width = mc.width;
    h.input_height = mc.height;
  }
  std::lock_guard<std::mutex> lock(mu_);
  h.live_sessions = sessions_.size();
  return h;
}

absl::StatusOr<std::string> FileDigest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return absl::NotFoundError(absl::StrCat("cannot open ", path.string()));
  uint64_t h = 0xcbf29ce484222325ull;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h = (h ^ static_cast<unsigned char>(buf[i])) * 0x100000001b3ull;
    }
  }
  return absl::StrFormat("%016x", h);
}

}  // namespace ikp
