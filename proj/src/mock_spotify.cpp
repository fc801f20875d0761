#include "mrs/mock_spotify.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "httplib.h"
#include "json.hpp"
#include "mrs/base64.hpp"
#include "mrs/errors.hpp"

namespace mrs::spotify {

using nlohmann::json;

namespace {

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

bool volatile_header(const std::string& name) {
  const std::string n = lower(name);
  return n == "date" || n == "host" || n.rfind("remote_", 0) == 0 || n.rfind("local_", 0) == 0;
}

std::string canonical(const httplib::Request& req) {
  std::string target = req.path;
  // httplib splits the query off; put it back in the order it was sent.
  if (const auto q = req.target.find('?'); q != std::string::npos) target += req.target.substr(q);
  std::vector<std::pair<std::string, std::string>> headers;
  for (const auto& [k, v] : req.headers) {
    if (!volatile_header(k)) headers.emplace_back(lower(k), v);
  }
  std::stable_sort(headers.begin(), headers.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::string out = req.method + " " + target + "\n";
  for (const auto& [k, v] : headers) out += k + ": " + v + "\n";
  out += "\n" + req.body;
  return out;
}

Track parse_track(const json& j) {
  Track t;
  t.track_id = j.at("id").get<std::string>();
  t.title = j.at("name").get<std::string>();
  t.artist_id = j.at("artist").at("id").get<std::string>();
  t.artist_name = j.at("artist").at("name").get<std::string>();
  t.album_id = j.at("album").at("id").get<std::string>();
  t.album_name = j.at("album").at("name").get<std::string>();
  return t;
}

json track_item(const std::optional<Track>& t) {
  if (!t) return json{{"track", nullptr}};
  return json{{"track",
               {{"id", t->track_id},
                {"name", t->title},
                {"type", "track"},
                {"artists", json::array({{{"id", t->artist_id}, {"name", t->artist_name}}})},
                {"album", {{"id", t->album_id}, {"name", t->album_name}}}}}};
}

void reply_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void api_error(httplib::Response& res, int status, const std::string& message) {
  reply_json(res, status, {{"error", {{"status", status}, {"message", message}}}});
}

}  // namespace

MockCatalog parse_mock_catalog(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("mock catalog: ") + e.what(), e.byte);
  }
  try {
    if (doc.at("version").get<int>() != 1) throw ValidationError("mock catalog: unsupported version");
    MockCatalog c;
    for (const auto& p : doc.at("playlists")) {
      MockPlaylist pl{p.at("id").get<std::string>(), p.at("name").get<std::string>(), {}};
      for (const auto& t : p.at("tracks")) {
        pl.tracks.push_back(t.is_null() ? std::nullopt : std::optional<Track>(parse_track(t)));
      }
      const std::string id = pl.id;
      if (!c.playlists.emplace(id, std::move(pl)).second) {
        throw DuplicateKeyError("mock catalog: duplicate playlist " + id, id);
      }
    }
    return c;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("mock catalog: ") + e.what());
  }
}

MockCatalog load_mock_catalog(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open mock catalog " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_mock_catalog(ss.str());
}

MockServer::MockServer(MockCatalog catalog, MockOptions options)
    : catalog_(std::move(catalog)), options_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
  auto& srv = *server_;

  // Runs after the handler and before the reply is written, so the body has
  // been read and the client cannot observe the reply before the record.
  srv.set_post_routing_handler([this](const httplib::Request& req, httplib::Response&) {
    std::lock_guard lock(mutex_);
    log_.emplace_back(req.path, canonical(req));
  });

  // Serves a queued reply in place of the normal one.
  auto scripted = [this](const httplib::Request& req, httplib::Response& res) {
    std::lock_guard lock(mutex_);
    for (auto it = script_.begin(); it != script_.end(); ++it) {
      if (req.path.rfind(it->prefix, 0) != 0) continue;
      res.status = it->status;
      for (const auto& [k, v] : it->headers) res.set_header(k, v);
      res.set_content(it->body, "application/json");
      script_.erase(it);
      return true;
    }
    return false;
  };

  srv.Post("/api/token", [this, scripted](const httplib::Request& req, httplib::Response& res) {
    if (scripted(req, res)) return;
    const std::string expected =
        "Basic " + base64::encode(options_.client_id + ":" + options_.client_secret);
    if (req.get_header_value("Authorization") != expected) {
      reply_json(res, 401, {{"error", "invalid_client"}, {"error_description", "Invalid client"}});
      return;
    }
    if (req.body != "grant_type=client_credentials") {
      reply_json(res, 400, {{"error", "unsupported_grant_type"}});
      return;
    }
    std::string token;
    {
      std::lock_guard lock(mutex_);
      token = "mock-token-" + std::to_string(++issued_);
      live_tokens_.insert(token);
    }
    reply_json(res, 200, {{"access_token", token}, {"token_type", "Bearer"}, {"expires_in", options_.expires_in}});
  });

  auto authorized = [this](const httplib::Request& req) {
    const std::string h = req.get_header_value("Authorization");
    if (h.rfind("Bearer ", 0) != 0) return false;
    std::lock_guard lock(mutex_);
    return live_tokens_.count(h.substr(7)) > 0;
  };

  auto page = [this](const MockPlaylist& p, std::size_t offset, std::size_t limit) {
    json items = json::array();
    for (std::size_t i = offset; i < std::min(p.tracks.size(), offset + limit); ++i) items.push_back(track_item(p.tracks[i]));
    json next = nullptr;
    if (offset + limit < p.tracks.size()) {
      next = base_url() + "/v1/playlists/" + p.id + "/tracks?offset=" + std::to_string(offset + limit) +
             "&limit=" + std::to_string(limit);
    }
    return json{{"items", items}, {"limit", limit}, {"offset", offset}, {"total", p.tracks.size()}, {"next", next}};
  };

  srv.Get(R"(/v1/playlists/([^/]+))", [this, scripted, authorized, page](const httplib::Request& req, httplib::Response& res) {
    if (scripted(req, res)) return;
    if (!authorized(req)) return api_error(res, 401, "Invalid access token");
    const auto it = catalog_.playlists.find(req.matches[1]);
    if (it == catalog_.playlists.end()) return api_error(res, 404, "Resource not found");
    reply_json(res, 200,
               {{"id", it->second.id}, {"name", it->second.name}, {"type", "playlist"},
                {"tracks", page(it->second, 0, options_.page_size)}});
  });

  srv.Get(R"(/v1/playlists/([^/]+)/tracks)", [this, scripted, authorized, page](const httplib::Request& req,
                                                                                 httplib::Response& res) {
    if (scripted(req, res)) return;
    if (!authorized(req)) return api_error(res, 401, "Invalid access token");
    const auto it = catalog_.playlists.find(req.matches[1]);
    if (it == catalog_.playlists.end()) return api_error(res, 404, "Resource not found");
    std::size_t offset = 0, limit = options_.page_size;
    try {
      if (req.has_param("offset")) offset = std::stoul(req.get_param_value("offset"));
      if (req.has_param("limit")) limit = std::stoul(req.get_param_value("limit"));
    } catch (const std::exception&) {
      return api_error(res, 400, "Invalid paging parameters");
    }
    if (limit == 0 || limit > 100) return api_error(res, 400, "Invalid limit");
    reply_json(res, 200, page(it->second, offset, limit));
  });

  port_ = srv.bind_to_any_port("127.0.0.1");
  if (port_ <= 0) throw TransportError("mock server could not bind a local port");
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

MockServer::~MockServer() {
  server_->stop();
  if (thread_.joinable()) thread_.join();
}

std::string MockServer::base_url() const { return "http://127.0.0.1:" + std::to_string(port_); }

void MockServer::enqueue_reply(std::string path_prefix, int status, std::string body,
                               std::vector<std::pair<std::string, std::string>> headers) {
  std::lock_guard lock(mutex_);
  script_.push_back({std::move(path_prefix), status, std::move(body), std::move(headers)});
}

void MockServer::revoke_tokens() {
  std::lock_guard lock(mutex_);
  live_tokens_.clear();
}

std::vector<std::string> MockServer::transcript() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [path, text] : log_) out.push_back(text);
  return out;
}

std::size_t MockServer::request_count(std::string_view prefix) const {
  std::lock_guard lock(mutex_);
  return static_cast<std::size_t>(std::count_if(log_.begin(), log_.end(), [&](const auto& e) {
    return std::string_view(e.first).substr(0, prefix.size()) == prefix;
  }));
}

void MockServer::clear_transcript() {
  std::lock_guard lock(mutex_);
  log_.clear();
}

}  // namespace mrs::spotify
