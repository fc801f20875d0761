#pragma once

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "json.hpp"
#include "mrs/mock_spotify.hpp"
#include "mrs/pipeline.hpp"
#include "mrs/recommender.hpp"
#include "mrs/spotify.hpp"

namespace httplib {
class Server;
}

namespace mrs {

inline constexpr int kResponseVersion = 1;
inline constexpr std::size_t kMaxImageBytes = 8u << 20;

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  ModelPaths models;
  std::filesystem::path cascade;
  std::filesystem::path playlist_table;
  // Offline mode answers playlist lookups from a bundled mock of the
  // streaming service seeded with this catalog; no credentials needed.
  bool offline = false;
  std::filesystem::path offline_catalog;
  std::string cors_origin = "*";
};

// Response bodies, exposed for contract tests.
nlohmann::json prediction_json(const PredictionTriple& p);
nlohmann::json playlist_json(const spotify::Playlist& p);
nlohmann::json error_json(const std::string& code, const std::string& message);

// The capture-to-playlist HTTP API. Construction validates configuration
// that must be right before the port opens (playlist table, credentials or
// offline catalog); models load afterwards so /healthz can report 503.
class Service {
 public:
  explicit Service(ServiceConfig config);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Loads the three models and the cascade named in the config.
  void load_models();
  void install(std::shared_ptr<const Predictor> predictor);
  bool ready() const { return ready_.load(); }

  // Binds the listening socket and returns the bound port.
  int bind();
  // Serves until stop(); call after bind().
  void run();
  void stop();
  void wait_until_ready() const;

  const PlaylistTable& table() const { return table_; }
  // The in-process mock in offline mode, else null.
  const spotify::MockServer* mock() const { return mock_.get(); }
  spotify::MockServer* mock() { return mock_.get(); }

 private:
  void routes();

  ServiceConfig config_;
  PlaylistTable table_;
  std::unique_ptr<spotify::MockServer> mock_;
  std::unique_ptr<spotify::Client> client_;
  std::unique_ptr<httplib::Server> server_;

  std::atomic<bool> ready_{false};
  std::shared_ptr<const Predictor> predictor_;
  mutable std::mutex predictor_mutex_;
};

}  // namespace mrs
