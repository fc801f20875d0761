#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "mrs/spotify.hpp"

namespace httplib {
class Server;
}

namespace mrs::spotify {

// Playlists the mock serves. A track entry without a value stands for a
// removed track, which the real API returns as {"track": null}.
struct MockPlaylist {
  std::string id;
  std::string name;
  std::vector<std::optional<Track>> tracks;
};

struct MockCatalog {
  std::map<std::string, MockPlaylist> playlists;
};

// {"version": 1, "playlists": [{"id", "name", "tracks": [{"id", "name",
// "artist": {"id", "name"}, "album": {"id", "name"}} | null]}]}
MockCatalog parse_mock_catalog(std::string_view json_text);
MockCatalog load_mock_catalog(const std::string& path);

struct MockOptions {
  std::string client_id = "mock-client";
  std::string client_secret = "mock-secret";
  std::int64_t expires_in = 3600;
  std::size_t page_size = 100;
};

// Local stand-in for the accounts and Web API hosts, bound to 127.0.0.1 on
// an ephemeral port. Every request is recorded in canonical form: request
// line, headers sorted by lower-cased name (minus Date, Host and the
// connection-address pseudo headers), blank line, body.
class MockServer {
 public:
  explicit MockServer(MockCatalog catalog, MockOptions options = {});
  ~MockServer();
  MockServer(const MockServer&) = delete;
  MockServer& operator=(const MockServer&) = delete;

  std::string base_url() const;
  const MockOptions& options() const { return options_; }

  // The next request whose path starts with `path_prefix` gets this reply.
  void enqueue_reply(std::string path_prefix, int status, std::string body,
                     std::vector<std::pair<std::string, std::string>> headers = {});
  // Tokens issued so far are rejected from now on.
  void revoke_tokens();

  std::vector<std::string> transcript() const;
  std::size_t request_count(std::string_view path_prefix = "") const;
  void clear_transcript();

 private:
  struct Scripted {
    std::string prefix;
    int status;
    std::string body;
    std::vector<std::pair<std::string, std::string>> headers;
  };

  MockCatalog catalog_;
  MockOptions options_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;

  mutable std::mutex mutex_;
  std::vector<std::pair<std::string, std::string>> log_;  // (path, canonical text)
  std::deque<Scripted> script_;
  std::set<std::string> live_tokens_;
  std::uint64_t issued_ = 0;
};

}  // namespace mrs::spotify
