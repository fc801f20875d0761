#include "mrs/service.hpp"

#include "httplib.h"
#include "mrs/base64.hpp"
#include "mrs/errors.hpp"
#include "mrs/log.hpp"

namespace mrs {

using nlohmann::json;

namespace {

// Bodies may carry base64, which inflates the image by a third.
constexpr std::size_t kMaxBodyBytes = kMaxImageBytes / 3 * 4 + 4096;

json box_json(const FaceBox& b) { return {{"x", b.x}, {"y", b.y}, {"width", b.w}, {"height", b.h}}; }

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json; charset=utf-8");
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
  send_json(res, status, error_json(code, message));
}

// Raw image bytes, or {"image": "<base64 or data URL>"} as JSON.
std::vector<std::uint8_t> image_bytes(const httplib::Request& req) {
  const std::string type = req.get_header_value("Content-Type");
  if (type.rfind("application/json", 0) != 0) return {req.body.begin(), req.body.end()};
  json doc;
  try {
    doc = json::parse(req.body);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("request body is not JSON: ") + e.what(), e.byte);
  }
  if (!doc.is_object() || !doc.contains("image") || !doc["image"].is_string()) {
    throw ParseError("JSON body needs a string field \"image\"");
  }
  std::string_view text = doc["image"].get_ref<const std::string&>();
  if (text.rfind("data:", 0) == 0) {
    const auto comma = text.find(',');
    if (comma == std::string_view::npos) throw ParseError("malformed data URL");
    text.remove_prefix(comma + 1);
  }
  return base64::decode(text);
}

}  // namespace

json prediction_json(const PredictionTriple& p) {
  json emotions = json::object(), ethnicities = json::object();
  for (Emotion e : kAllEmotions) emotions[std::string(token(e))] = p.emotion_probabilities[static_cast<int>(e)];
  for (Ethnicity e : kAllEthnicities) {
    ethnicities[std::string(token(e))] = p.ethnicity_probabilities[static_cast<int>(e)];
  }
  return {{"emotion", {{"label", token(p.emotion)}, {"probabilities", emotions}}},
          {"age", {{"years", p.age}, {"bucket", token(bucket_age(p.age))}}},
          {"ethnicity", {{"label", token(p.ethnicity)}, {"probabilities", ethnicities}}},
          {"face", box_json(p.face)}};
}

json playlist_json(const spotify::Playlist& p) {
  json tracks = json::array();
  for (const auto& t : p.tracks) {
    tracks.push_back({{"id", t.track_id},
                      {"title", t.title},
                      {"url", t.track_url},
                      {"artist", {{"id", t.artist_id}, {"name", t.artist_name}, {"url", t.artist_url}}},
                      {"album", {{"id", t.album_id}, {"name", t.album_name}, {"url", t.album_url}}}});
  }
  return {{"id", p.playlist_id}, {"name", p.name}, {"url", p.url}, {"tracks", tracks}};
}

json error_json(const std::string& code, const std::string& message) {
  return {{"version", kResponseVersion}, {"error", {{"code", code}, {"message", message}}}};
}

Service::Service(ServiceConfig config) : config_(std::move(config)), server_(std::make_unique<httplib::Server>()) {
  table_ = load_playlist_table_file(config_.playlist_table);
  if (config_.offline) {
    mock_ = std::make_unique<spotify::MockServer>(spotify::load_mock_catalog(config_.offline_catalog.string()));
    client_ = std::make_unique<spotify::Client>(
        spotify::Credentials{mock_->options().client_id, mock_->options().client_secret},
        spotify::Endpoints{mock_->base_url(), mock_->base_url()});
    log::info("service", "offline mode: playlists served from " + config_.offline_catalog.string());
  } else {
    try {
      client_ = std::make_unique<spotify::Client>(spotify::Credentials::from_env(), spotify::Endpoints::from_env());
    } catch (const CredentialError& e) {
      throw ConfigError(std::string(e.what()) + " (or run in offline mode)");
    }
  }
  routes();
}

Service::~Service() { stop(); }

void Service::install(std::shared_ptr<const Predictor> predictor) {
  {
    std::lock_guard lock(predictor_mutex_);
    predictor_ = std::move(predictor);
  }
  ready_ = true;
}

void Service::load_models() {
  install(std::make_shared<const Predictor>(Predictor::load(config_.models, config_.cascade)));
  log::info("service", "models loaded");
}

int Service::bind() {
  const int port = config_.port == 0 ? server_->bind_to_any_port(config_.host)
                                     : (server_->bind_to_port(config_.host, config_.port) ? config_.port : -1);
  if (port < 0) throw ConfigError("cannot listen on " + config_.host + ":" + std::to_string(config_.port));
  return port;
}

void Service::run() { server_->listen_after_bind(); }
void Service::stop() {
  if (server_) server_->stop();
}
void Service::wait_until_ready() const { server_->wait_until_ready(); }

void Service::routes() {
  auto& srv = *server_;
  srv.set_payload_max_length(kMaxBodyBytes);

  srv.set_post_routing_handler([this](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", config_.cors_origin);
    res.set_header("Vary", "Origin");
  });
  srv.Options(R"(/api/v1/.*|/healthz)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.set_header("Access-Control-Max-Age", "600");
    res.status = 204;
  });
  // Fills in bodies for errors httplib raises itself (404, 413 on oversized
  // uploads); handler-produced errors already carry one.
  srv.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return httplib::Server::HandlerResponse::Unhandled;
    if (res.status == 413) {
      send_error(res, 413, "payload_too_large", "images are limited to 8 MiB");
    } else if (res.status == 404) {
      send_error(res, 404, "not_found", "no such route");
    } else {
      send_error(res, res.status, "http_error", httplib::status_message(res.status));
    }
    return httplib::Server::HandlerResponse::Handled;
  });
  srv.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string what = "unexpected error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      what = e.what();
    } catch (...) {
    }
    log::error("service", what);
    send_error(res, 500, "internal", "internal error");
  });

  srv.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
    if (!ready_) {
      send_json(res, 503, {{"status", "loading"}, {"models_loaded", 0}});
      return;
    }
    send_json(res, 200, {{"status", "ok"}, {"models_loaded", 3}});
  });

  // Shared front half of both routes. Returns nullopt after writing an error.
  auto predict = [this](const httplib::Request& req, httplib::Response& res) -> std::optional<PredictionTriple> {
    std::shared_ptr<const Predictor> p;
    {
      std::lock_guard lock(predictor_mutex_);
      p = predictor_;
    }
    if (!ready_ || !p) {
      send_error(res, 503, "not_ready", "models are still loading");
      return std::nullopt;
    }
    std::vector<std::uint8_t> bytes;
    try {
      bytes = image_bytes(req);
    } catch (const ParseError& e) {
      send_error(res, 400, "bad_request", e.what());
      return std::nullopt;
    }
    if (bytes.size() > kMaxImageBytes) {
      send_error(res, 413, "payload_too_large", "images are limited to 8 MiB");
      return std::nullopt;
    }
    if (bytes.empty()) {
      send_error(res, 400, "undecodable_image", "empty request body");
      return std::nullopt;
    }
    try {
      return p->predict(bytes);
    } catch (const ImageDecodeError& e) {
      send_error(res, 400, "undecodable_image", e.what());
    } catch (const NoFaceError&) {
      send_error(res, 422, "no_face", "no face detected, please retake the photo");
    }
    return std::nullopt;
  };

  srv.Post("/api/v1/predict", [predict](const httplib::Request& req, httplib::Response& res) {
    const auto triple = predict(req, res);
    if (!triple) return;
    send_json(res, 200, {{"version", kResponseVersion}, {"prediction", prediction_json(*triple)}});
  });

  srv.Post("/api/v1/recommend", [this, predict](const httplib::Request& req, httplib::Response& res) {
    const auto triple = predict(req, res);
    if (!triple) return;
    const std::string& id = select_playlist(table_, triple->emotion, triple->age, triple->ethnicity);
    spotify::Playlist playlist;
    try {
      playlist = client_->get_playlist(id);
    } catch (const PlaylistNotFoundError& e) {
      json body = error_json("playlist_not_found", e.what());
      body["error"]["playlist_id"] = e.playlist_id();
      send_json(res, 502, body);
      return;
    } catch (const CredentialError& e) {
      log::error("service", e.what());
      send_error(res, 502, "upstream_auth", "the streaming service rejected our credentials");
      return;
    } catch (const RateLimitError& e) {
      send_error(res, 502, "upstream_rate_limited", e.what());
      return;
    } catch (const Error& e) {  // transport and protocol failures
      log::error("service", e.what());
      send_error(res, 502, "upstream_unavailable", "the streaming service could not be reached");
      return;
    }
    send_json(res, 200,
              {{"version", kResponseVersion},
               {"prediction", prediction_json(*triple)},
               {"playlist", playlist_json(playlist)}});
  });
}

}  // namespace mrs
