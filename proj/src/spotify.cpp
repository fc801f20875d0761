#include "mrs/spotify.hpp"

#include <cstdlib>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "mrs/base64.hpp"
#include "mrs/errors.hpp"
#include "mrs/log.hpp"

namespace mrs::spotify {

using nlohmann::json;

namespace {

std::string env_or(const char* name, std::string fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : std::move(fallback);
}

std::string trim_slash(std::string s) {
  while (!s.empty() && s.back() == '/') s.pop_back();
  return s;
}

// Splits "scheme://host[:port]/path?query" into origin and path+query.
std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw ProtocolError("not an absolute URL: " + url);
  const auto path = url.find('/', scheme + 3);
  if (path == std::string::npos) return {url, "/"};
  return {url.substr(0, path), url.substr(path)};
}

std::string url_encode(std::string_view s) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : s) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
      out += static_cast<char>(c);
    } else {
      out += '%';
      out += kHex[c >> 4];
      out += kHex[c & 15];
    }
  }
  return out;
}

std::string kind_name(EntityKind k) {
  switch (k) {
    case EntityKind::Track: return "track";
    case EntityKind::Artist: return "artist";
    case EntityKind::Album: return "album";
    case EntityKind::Playlist: return "playlist";
  }
  return "";
}

json parse_body(const HttpResponse& r, const std::string& what) {
  try {
    return json::parse(r.body);
  } catch (const json::exception&) {
    throw ProtocolError(what + ": response body is not JSON (" + std::to_string(r.body.size()) + " bytes)");
  }
}

std::string string_or_empty(const json& j, const char* key) {
  const auto it = j.find(key);
  return it != j.end() && it->is_string() ? it->get<std::string>() : std::string();
}

// Maps one playlist item; skips removed or local tracks, which carry no ids.
std::optional<Track> to_track(const json& item) {
  if (!item.is_object()) return std::nullopt;
  const auto t = item.find("track");
  if (t == item.end() || !t->is_object()) return std::nullopt;
  Track tr;
  tr.track_id = string_or_empty(*t, "id");
  tr.title = string_or_empty(*t, "name");
  if (const auto a = t->find("artists"); a != t->end() && a->is_array() && !a->empty()) {
    tr.artist_id = string_or_empty(a->front(), "id");
    tr.artist_name = string_or_empty(a->front(), "name");
  }
  if (const auto al = t->find("album"); al != t->end() && al->is_object()) {
    tr.album_id = string_or_empty(*al, "id");
    tr.album_name = string_or_empty(*al, "name");
  }
  if (tr.track_id.empty() || tr.artist_id.empty() || tr.album_id.empty()) return std::nullopt;
  tr.track_url = entity_link(EntityKind::Track, tr.track_id);
  tr.artist_url = entity_link(EntityKind::Artist, tr.artist_id);
  tr.album_url = entity_link(EntityKind::Album, tr.album_id);
  return tr;
}

}  // namespace

Credentials Credentials::from_env() {
  Credentials c{env_or("SPOTIFY_CLIENT_ID", ""), env_or("SPOTIFY_CLIENT_SECRET", "")};
  if (c.client_id.empty() || c.client_secret.empty()) {
    throw CredentialError("SPOTIFY_CLIENT_ID and SPOTIFY_CLIENT_SECRET must be set");
  }
  return c;
}

Endpoints Endpoints::from_env() {
  Endpoints e;
  e.api_base = trim_slash(env_or("SPOTIFY_API_BASE", e.api_base));
  e.auth_base = trim_slash(env_or("SPOTIFY_AUTH_BASE", e.auth_base));
  return e;
}

std::string entity_link(EntityKind kind, std::string_view id) {
  if (id.empty()) throw ValidationError("entity id must not be empty");
  return "https://open.spotify.com/" + kind_name(kind) + "/" + std::string(id);
}

Transport http_transport(std::chrono::milliseconds timeout) {
  return [timeout](const HttpRequest& req) -> std::optional<HttpResponse> {
    const auto [origin, path] = split_url(req.url);
    httplib::Client cli(origin);
    cli.set_connection_timeout(timeout);
    cli.set_read_timeout(timeout);
    cli.set_write_timeout(timeout);
    httplib::Headers headers;
    std::string content_type;
    for (const auto& [k, v] : req.headers) {
      if (k == "Content-Type") content_type = v;
      else headers.emplace(k, v);
    }
    httplib::Result res = req.method == "POST" ? cli.Post(path, headers, req.body, content_type)
                                               : cli.Get(path, headers);
    if (!res) {
      log::debug("spotify", req.method + " " + origin + " failed: " + httplib::to_string(res.error()));
      return std::nullopt;
    }
    HttpResponse out;
    out.status = res->status;
    out.body = res->body;
    for (const auto& [k, v] : res->headers) {
      std::string lower = k;
      for (auto& ch : lower) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
      out.headers[lower] = v;
    }
    return out;
  };
}

Client::Client(Credentials credentials, Endpoints endpoints, ClientOptions options)
    : credentials_(std::move(credentials)), endpoints_(std::move(endpoints)), options_(std::move(options)) {
  endpoints_.api_base = trim_slash(endpoints_.api_base);
  endpoints_.auth_base = trim_slash(endpoints_.auth_base);
  if (!options_.transport) options_.transport = http_transport();
  if (!options_.sleep) options_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  if (!options_.now) options_.now = [] { return std::chrono::steady_clock::now(); };
  if (credentials_.client_id.empty() || credentials_.client_secret.empty()) {
    throw CredentialError("client id and secret must not be empty");
  }
}

std::size_t Client::token_requests() const {
  std::lock_guard lock(token_mutex_);
  return token_requests_;
}

HttpResponse Client::send(const HttpRequest& request) {
  const auto [origin, path] = split_url(request.url);
  for (std::size_t attempt = 0;; ++attempt) {
    std::optional<HttpResponse> r = options_.transport(request);
    const bool transient = !r || r->status >= 500;
    if (!transient) return *r;
    const std::string why = r ? "status " + std::to_string(r->status) : std::string("no response");
    if (attempt >= options_.backoff.size()) {
      throw TransportError(request.method + " " + origin + path + ": " + why + " after " +
                           std::to_string(attempt + 1) + " attempts");
    }
    log::warn("spotify", request.method + " " + origin + path + ": " + why + ", retrying in " +
                             std::to_string(options_.backoff[attempt].count()) + " ms");
    options_.sleep(options_.backoff[attempt]);
  }
}

Token Client::fetch_token_locked() {
  HttpRequest req;
  req.method = "POST";
  req.url = endpoints_.auth_base + "/api/token";
  req.headers = {
      {"Accept", "application/json"},
      {"Authorization", "Basic " + base64::encode(credentials_.client_id + ":" + credentials_.client_secret)},
      {"Content-Type", "application/x-www-form-urlencoded"},
  };
  req.body = "grant_type=client_credentials";
  log::info("spotify", "requesting access token for client " + log::redact(credentials_.client_id) + " (secret " +
                           log::redact(credentials_.client_secret) + ")");
  ++token_requests_;
  const auto sent_at = options_.now();
  const HttpResponse r = send(req);
  if (r.status == 400 || r.status == 401 || r.status == 403) {
    throw CredentialError("token endpoint rejected the client credentials (HTTP " + std::to_string(r.status) + ")");
  }
  if (r.status != 200) throw ProtocolError("token endpoint returned HTTP " + std::to_string(r.status));
  const json body = parse_body(r, "token endpoint");
  if (!body.is_object() || !body.contains("access_token") || !body["access_token"].is_string() ||
      !body.contains("expires_in") || !body["expires_in"].is_number()) {
    throw ProtocolError("token response lacks access_token/expires_in");
  }
  Token t{body["access_token"].get<std::string>(),
          sent_at + std::chrono::seconds(body["expires_in"].get<std::int64_t>())};
  if (t.access_token.empty()) throw ProtocolError("token response has an empty access_token");
  log::info("spotify", "received access token " + log::redact(t.access_token));
  return t;
}

Token Client::token() {
  std::lock_guard lock(token_mutex_);
  if (!token_ || options_.now() + options_.refresh_margin >= token_->expires_at) token_ = fetch_token_locked();
  return *token_;
}

void Client::invalidate(const std::string& stale) {
  std::lock_guard lock(token_mutex_);
  // Another thread may already have refreshed it.
  if (token_ && token_->access_token == stale) token_.reset();
}

HttpResponse Client::authorized_get(const std::string& url) {
  bool refreshed = false, waited = false;
  while (true) {
    const Token t = token();
    HttpRequest req;
    req.method = "GET";
    req.url = url;
    req.headers = {{"Accept", "application/json"}, {"Authorization", "Bearer " + t.access_token}};
    HttpResponse r = send(req);
    if (r.status == 401 && !refreshed) {
      log::info("spotify", "access token rejected, refreshing once");
      invalidate(t.access_token);
      refreshed = true;
      continue;
    }
    if (r.status == 401) throw CredentialError("API rejected a freshly issued access token");
    if (r.status == 429) {
      if (waited) throw RateLimitError("rate limited again after honoring Retry-After");
      long seconds = 1;
      if (const auto it = r.headers.find("retry-after"); it != r.headers.end()) {
        try {
          seconds = std::max(0L, std::stol(it->second));
        } catch (const std::exception&) {
          seconds = 1;
        }
      }
      log::warn("spotify", "rate limited, waiting " + std::to_string(seconds) + " s");
      options_.sleep(std::chrono::seconds(seconds));
      waited = true;
      continue;
    }
    return r;
  }
}

Playlist Client::get_playlist(const std::string& playlist_id) {
  if (playlist_id.empty()) throw ValidationError("playlist id must not be empty");
  const std::string first = endpoints_.api_base + "/v1/playlists/" + url_encode(playlist_id);
  HttpResponse r = authorized_get(first);
  if (r.status == 404) throw PlaylistNotFoundError(playlist_id);
  if (r.status != 200) throw ProtocolError("playlist request returned HTTP " + std::to_string(r.status));
  const json body = parse_body(r, "playlist");
  if (!body.is_object() || !body.contains("tracks") || !body["tracks"].is_object()) {
    throw ProtocolError("playlist response lacks a tracks object");
  }

  Playlist p;
  p.playlist_id = playlist_id;
  p.name = string_or_empty(body, "name");
  p.url = entity_link(EntityKind::Playlist, playlist_id);
  json page = body["tracks"];
  for (int pages = 1;; ++pages) {
    if (!page.contains("items") || !page["items"].is_array()) throw ProtocolError("track page lacks items");
    for (const auto& item : page["items"]) {
      if (auto t = to_track(item)) p.tracks.push_back(std::move(*t));
    }
    const auto next = page.find("next");
    if (next == page.end() || next->is_null()) break;
    if (!next->is_string()) throw ProtocolError("track page 'next' is not a URL");
    if (pages > 10000) throw ProtocolError("pagination does not terminate");
    // Stay on the configured API host so the bearer token goes nowhere else.
    const std::string url = endpoints_.api_base + split_url(next->get<std::string>()).second;
    r = authorized_get(url);
    if (r.status == 404) throw PlaylistNotFoundError(playlist_id);
    if (r.status != 200) throw ProtocolError("track page request returned HTTP " + std::to_string(r.status));
    page = parse_body(r, "track page");
    if (!page.is_object()) throw ProtocolError("track page is not an object");
  }
  return p;
}

}  // namespace mrs::spotify
