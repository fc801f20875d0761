#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mrs::spotify {

struct Credentials {
  std::string client_id;
  std::string client_secret;

  // SPOTIFY_CLIENT_ID / SPOTIFY_CLIENT_SECRET; throws CredentialError if unset.
  static Credentials from_env();
};

struct Endpoints {
  std::string api_base = "https://api.spotify.com";
  std::string auth_base = "https://accounts.spotify.com";

  // SPOTIFY_API_BASE / SPOTIFY_AUTH_BASE override the defaults.
  static Endpoints from_env();
};

enum class EntityKind { Track, Artist, Album, Playlist };

// https://open.spotify.com/<kind>/<id>; throws ValidationError on empty id.
std::string entity_link(EntityKind kind, std::string_view id);

struct Track {
  std::string track_id, title;
  std::string artist_id, artist_name;
  std::string album_id, album_name;
  std::string track_url, artist_url, album_url;
};

struct Playlist {
  std::string playlist_id;
  std::string name;
  std::string url;
  std::vector<Track> tracks;  // API order
};

struct Token {
  std::string access_token;
  std::chrono::steady_clock::time_point expires_at;
};

struct HttpRequest {
  std::string method;
  std::string url;  // absolute
  std::vector<std::pair<std::string, std::string>> headers;
  std::string body;
};

struct HttpResponse {
  int status = 0;
  std::map<std::string, std::string> headers;  // lower-case names
  std::string body;
};

// Returns nullopt when no response arrived (connection refused, timeout).
using Transport = std::function<std::optional<HttpResponse>(const HttpRequest&)>;
Transport http_transport(std::chrono::milliseconds timeout = std::chrono::seconds(10));

struct ClientOptions {
  Transport transport;  // default: http_transport()
  std::function<void(std::chrono::milliseconds)> sleep;  // default: this_thread::sleep_for
  std::function<std::chrono::steady_clock::time_point()> now;  // default: steady_clock::now
  // Waits before each retry of a request that got no response or a 5xx.
  std::vector<std::chrono::milliseconds> backoff{std::chrono::milliseconds(500), std::chrono::milliseconds(1000),
                                                 std::chrono::milliseconds(2000)};
  std::chrono::seconds refresh_margin{30};
};

// Client-credentials access to the Web API. Safe to share between threads:
// token refresh is serialized, playlist fetches are independent.
class Client {
 public:
  Client(Credentials credentials, Endpoints endpoints, ClientOptions options = {});

  // Cached token, refreshed when within the margin of expiry. Throws
  // CredentialError (rejected credentials), TransportError, ProtocolError.
  Token token();

  // Follows pagination to the end. Throws PlaylistNotFoundError,
  // CredentialError (still 401 after one refresh), RateLimitError (second
  // 429), TransportError, ProtocolError.
  Playlist get_playlist(const std::string& playlist_id);

  // Token requests actually sent over the wire.
  std::size_t token_requests() const;

 private:
  HttpResponse send(const HttpRequest& request);
  Token fetch_token_locked();
  void invalidate(const std::string& stale_token);
  HttpResponse authorized_get(const std::string& url);

  Credentials credentials_;
  Endpoints endpoints_;
  ClientOptions options_;
  mutable std::mutex token_mutex_;
  std::optional<Token> token_;
  std::size_t token_requests_ = 0;
};

}  // namespace mrs::spotify
