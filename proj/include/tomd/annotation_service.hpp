// Copyright 2026 The tomd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// HTTP backend for superpixel annotation.
//
//   GET  /api/frames                      [{id, image_url, lux, annotated}]
//   GET  /api/frames/{id}/image.png
//   GET  /api/frames/{id}/superpixels     RLE labels + boundary polylines
//   GET  /api/frames/{id}/labels          {frame_id, selected, modified_ns, annotator}
//   POST /api/frames/{id}/labels          {selected, annotator?}
//   GET  /api/frames/{id}/mask.png        8-bit 0/255
//
// Sessions live in <sessions>/<id>.json and are rewritten on every POST.

#pragma once

#include <sys/socket.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

// Eigen must precede httplib: <resolv.h> defines a `_res` macro that
// collides with Eigen parameter names.
#include <Eigen/Dense>
#include <httplib.h>
#include <json.hpp>

#include "tomd/dataset.hpp"
#include "tomd/error.hpp"
#include "tomd/image_io.hpp"
#include "tomd/slic.hpp"

namespace tomd {

struct AnnotationSession {
  std::string frame_id;
  std::vector<int> selected;  // sorted, unique
  std::optional<std::int64_t> modified_ns;
  std::string annotator;

  friend bool operator==(const AnnotationSession&, const AnnotationSession&) = default;
};

inline nlohmann::json to_json(const AnnotationSession& s) {
  return {{"frame_id", s.frame_id},
          {"selected", s.selected},
          {"modified_ns", s.modified_ns ? nlohmann::json(*s.modified_ns) : nlohmann::json()},
          {"annotator", s.annotator}};
}

inline AnnotationSession session_from_json(const nlohmann::json& j) {
  AnnotationSession s;
  s.frame_id = j.at("frame_id").get<std::string>();
  s.selected = j.at("selected").get<std::vector<int>>();
  if (j.contains("modified_ns") && !j["modified_ns"].is_null()) {
    s.modified_ns = j["modified_ns"].get<std::int64_t>();
  }
  s.annotator = j.value("annotator", "");
  return s;
}

/// Frame data, lazily computed superpixels and on-disk sessions. Reads may
/// run concurrently; mutations of one frame are serialised by its mutex.
class AnnotationStore {
 public:
  AnnotationStore(std::filesystem::path manifest, std::filesystem::path sessions_dir,
                  SlicParams slic)
      : manifest_(std::move(manifest)),
        sessions_dir_(std::move(sessions_dir)),
        slic_(slic) {
    records_ = load_manifest(manifest_);
    std::filesystem::create_directories(sessions_dir_);
    for (std::size_t i = 0; i < records_.size(); ++i) {
      index_.emplace(records_[i].id, i);
      frames_.push_back(std::make_unique<FrameState>());
    }
  }

  const std::vector<FrameRecord>& records() const { return records_; }
  bool contains(const std::string& id) const { return index_.count(id) > 0; }

  const FrameRecord& record(const std::string& id) const { return records_[lookup(id)]; }

  std::filesystem::path image_path(const std::string& id) const {
    return resolve_path(manifest_, record(id).image_path);
  }

  std::filesystem::path session_path(const std::string& id) const {
    return sessions_dir_ / (id + ".json");
  }

  bool annotated(const std::string& id) const {
    lookup(id);
    return std::filesystem::exists(session_path(id));
  }

  std::shared_ptr<const SuperpixelMap> superpixels(const std::string& id) {
    FrameState& f = *frames_[lookup(id)];
    std::lock_guard lock(f.mutex);
    if (!f.superpixels) {
      const RgbImage image = png::read_rgb(image_path(id));
      SlicParams p = slic_;
      p.segments = std::clamp<int>(p.segments, 1, static_cast<int>(image.pixels()));
      f.superpixels = std::make_shared<SuperpixelMap>(slic_superpixels(image, p));
    }
    return f.superpixels;
  }

  AnnotationSession labels(const std::string& id) {
    FrameState& f = *frames_[lookup(id)];
    std::lock_guard lock(f.mutex);
    return read_session(id);
  }

  /// Validates ids against the frame's superpixels, persists and returns
  /// the new session. Last writer wins; the returned timestamp lets a
  /// client detect that someone else saved in between.
  AnnotationSession set_labels(const std::string& id, std::vector<int> selected,
                               std::string annotator) {
    const auto sp = superpixels(id);
    for (int s : selected) {
      require(s >= 0 && s < sp->count, ErrorCode::kUnknownSegmentId,
              "superpixel id " + std::to_string(s) + " not in [0, " +
                  std::to_string(sp->count) + ")");
    }
    std::sort(selected.begin(), selected.end());
    selected.erase(std::unique(selected.begin(), selected.end()), selected.end());

    FrameState& f = *frames_[lookup(id)];
    std::lock_guard lock(f.mutex);
    const AnnotationSession previous = read_session(id);
    AnnotationSession s;
    s.frame_id = id;
    s.selected = std::move(selected);
    s.annotator = std::move(annotator);
    std::int64_t now = std::chrono::duration_cast<std::chrono::nanoseconds>(
                           std::chrono::system_clock::now().time_since_epoch())
                           .count();
    if (previous.modified_ns && now <= *previous.modified_ns) now = *previous.modified_ns + 1;
    s.modified_ns = now;
    write_session(s);
    return s;
  }

  Mask mask(const std::string& id) {
    const auto sp = superpixels(id);
    const AnnotationSession s = labels(id);
    return labels_to_mask(*sp, s.selected);
  }

 private:
  struct FrameState {
    std::mutex mutex;
    std::shared_ptr<const SuperpixelMap> superpixels;
  };

  std::size_t lookup(const std::string& id) const {
    const auto it = index_.find(id);
    require(it != index_.end(), ErrorCode::kInvalidArgument, "unknown frame '" + id + "'");
    return it->second;
  }

  AnnotationSession read_session(const std::string& id) const {
    std::ifstream in(session_path(id));
    if (!in) return AnnotationSession{id, {}, std::nullopt, ""};
    try {
      return session_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::kParseError, session_path(id).string() + ": " + e.what());
    }
  }

  void write_session(const AnnotationSession& s) const {
    const auto target = session_path(s.frame_id);
    auto tmp = target;
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::trunc);
      require(static_cast<bool>(out), ErrorCode::kIoError, "cannot write " + tmp.string());
      out << to_json(s).dump(2) << '\n';
      require(static_cast<bool>(out), ErrorCode::kIoError, "short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, target);
  }

  std::filesystem::path manifest_;
  std::filesystem::path sessions_dir_;
  SlicParams slic_;
  std::vector<FrameRecord> records_;
  std::map<std::string, std::size_t> index_;
  std::vector<std::unique_ptr<FrameState>> frames_;
};

inline nlohmann::json superpixels_to_json(const std::string& id, const SuperpixelMap& sp) {
  nlohmann::json boundaries = nlohmann::json::array();
  for (const auto& loops : boundary_polylines(sp)) boundaries.push_back(loops);
  return {{"frame_id", id},
          {"width", sp.labels.width()},
          {"height", sp.labels.height()},
          {"count", sp.count},
          {"params", sp.params},
          {"rle", run_length_encode(sp.labels)},
          {"boundaries", std::move(boundaries)}};
}

class AnnotationServer {
 public:
  explicit AnnotationServer(AnnotationStore& store) : store_(store) { routes(); }

  ~AnnotationServer() { stop(); }

  AnnotationServer(const AnnotationServer&) = delete;
  AnnotationServer& operator=(const AnnotationServer&) = delete;

  /// Binds and serves on a background thread. Port 0 picks a free port.
  int start(const std::string& host, int port) {
    // httplib's defaults add SO_REUSEPORT, which would let a second server
    // share the port silently.
    server_.set_socket_options([](socket_t sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    if (port == 0) {
      port_ = server_.bind_to_any_port(host);
      require(port_ > 0, ErrorCode::kPortInUse, "cannot bind " + host);
    } else {
      require(server_.bind_to_port(host, port), ErrorCode::kPortInUse,
              "port " + std::to_string(port) + " on " + host + " is unavailable");
      port_ = port;
    }
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return port_;
  }

  /// Blocks until stop() is called from another thread or a signal.
  void wait() {
    if (thread_.joinable()) thread_.join();
  }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  int port() const { return port_; }

 private:
  static void json_error(httplib::Response& res, int status, const std::string& msg) {
    res.status = status;
    res.set_content(nlohmann::json{{"error", msg}}.dump(), "application/json");
  }

  /// Runs `body` for a known frame; maps unknown frames to 404 and library
  /// errors to 400 / 500.
  template <typename F>
  void with_frame(const httplib::Request& req, httplib::Response& res, F&& body) {
    const std::string id = req.matches[1];
    if (!store_.contains(id)) {
      json_error(res, 404, "unknown frame '" + id + "'");
      return;
    }
    try {
      body(id);
    } catch (const Error& e) {
      const bool client = e.code() == ErrorCode::kUnknownSegmentId ||
                          e.code() == ErrorCode::kInvalidArgument;
      json_error(res, client ? 400 : 500, e.what());
    } catch (const nlohmann::json::exception& e) {
      json_error(res, 400, e.what());
    }
  }

  void routes() {
    server_.Get("/api/frames", [this](const httplib::Request&, httplib::Response& res) {
      nlohmann::json out = nlohmann::json::array();
      for (const auto& r : store_.records()) {
        out.push_back({{"id", r.id},
                       {"image_url", "/api/frames/" + r.id + "/image.png"},
                       {"lux", r.lux ? nlohmann::json(*r.lux) : nlohmann::json()},
                       {"annotated", store_.annotated(r.id)}});
      }
      res.set_content(out.dump(), "application/json");
    });

    server_.Get(R"(/api/frames/([^/]+)/image\.png)",
                [this](const httplib::Request& req, httplib::Response& res) {
                  with_frame(req, res, [&](const std::string& id) {
                    const auto bytes = png::read_file_bytes(store_.image_path(id));
                    res.set_content(std::string(bytes.begin(), bytes.end()), "image/png");
                  });
                });

    server_.Get(R"(/api/frames/([^/]+)/superpixels)",
                [this](const httplib::Request& req, httplib::Response& res) {
                  with_frame(req, res, [&](const std::string& id) {
                    res.set_content(superpixels_to_json(id, *store_.superpixels(id)).dump(),
                                    "application/json");
                  });
                });

    server_.Get(R"(/api/frames/([^/]+)/labels)",
                [this](const httplib::Request& req, httplib::Response& res) {
                  with_frame(req, res, [&](const std::string& id) {
                    res.set_content(to_json(store_.labels(id)).dump(), "application/json");
                  });
                });

    server_.Post(R"(/api/frames/([^/]+)/labels)",
                 [this](const httplib::Request& req, httplib::Response& res) {
                   with_frame(req, res, [&](const std::string& id) {
                     const auto body = nlohmann::json::parse(req.body);
                     const auto previous = store_.labels(id).modified_ns;
                     auto session = store_.set_labels(
                         id, body.at("selected").get<std::vector<int>>(),
                         body.value("annotator", ""));
                     auto out = to_json(session);
                     out["previous_modified_ns"] =
                         previous ? nlohmann::json(*previous) : nlohmann::json();
                     res.set_content(out.dump(), "application/json");
                   });
                 });

    server_.Get(R"(/api/frames/([^/]+)/mask\.png)",
                [this](const httplib::Request& req, httplib::Response& res) {
                  with_frame(req, res, [&](const std::string& id) {
                    const auto bytes = png::encode_gray8(store_.mask(id));
                    res.set_content(std::string(bytes.begin(), bytes.end()), "image/png");
                  });
                });
  }

  AnnotationStore& store_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
};

}  // namespace tomd
