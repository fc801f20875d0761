#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "mrs/base64.hpp"
#include "mrs/errors.hpp"
#include "mrs/image.hpp"
#include "mrs/pipeline.hpp"
#include "mrs/serialize.hpp"
#include "mrs/service.hpp"

// After Eigen: <resolv.h>, pulled in here, defines a macro named _res.
#include "httplib.h"

using namespace mrs;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kRoot = MRS_SOURCE_DIR;

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ModelSpec small_spec(Task task) {
  ModelSpec s;
  s.name = "small-" + task_name(task);
  s.task = task;
  s.layers = {Conv2D{4}, ReLU{}, MaxPool2D{}, BatchNorm2D{}, MaxPool2D{}, MaxPool2D{}, Flatten{}, Dense{8}, ReLU{}};
  if (task == Task::Age) {
    s.layers.push_back(Dense{1});
    s.head = RegressionHead{};
    s.loss = LossKind::MeanSquaredError;
  } else {
    const Index k = task == Task::Emotion ? 4 : 5;
    s.layers.push_back(Dense{k});
    s.layers.push_back(Softmax{});
    s.head = ClassificationHead{k};
  }
  return s;
}

Cascade shipped_cascade() { return load_cascade(kRoot / "data/haarcascade_frontalface_default.xml"); }

std::shared_ptr<const Predictor> small_predictor() {
  return std::make_shared<const Predictor>(build_model<float>(small_spec(Task::Emotion), 1),
                                           build_model<float>(small_spec(Task::Age), 2),
                                           build_model<float>(small_spec(Task::Ethnicity), 3), shipped_cascade());
}

std::string portrait_bytes() { return read_text(kRoot / "tests/fixtures/portrait.png"); }

std::string blank_png() {
  const auto png = encode_png(GrayImage(160, 120, 128));
  return std::string(png.begin(), png.end());
}

ServiceConfig offline_config() {
  ServiceConfig c;
  c.port = 0;
  c.playlist_table = kRoot / "data/playlists.json";
  c.offline = true;
  c.offline_catalog = kRoot / "data/offline_catalog.json";
  c.cascade = kRoot / "data/haarcascade_frontalface_default.xml";
  c.cors_origin = "http://localhost:5173";
  return c;
}

// A running service on an ephemeral port.
struct Running {
  std::unique_ptr<Service> service;
  std::jthread thread;
  int port = 0;

  explicit Running(ServiceConfig config, std::shared_ptr<const Predictor> predictor = small_predictor())
      : service(std::make_unique<Service>(std::move(config))) {
    port = service->bind();
    thread = std::jthread([s = service.get()] { s->run(); });
    service->wait_until_ready();
    if (predictor) service->install(std::move(predictor));
  }
  ~Running() {
    service->stop();
    thread.join();
  }
  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port);
    c.set_read_timeout(std::chrono::seconds(60));
    return c;
  }
};

// Independent lookup straight from the table JSON with hand-written buckets.
std::string oracle_playlist(const std::string& emotion, int age, const std::string& ethnicity) {
  const std::string bucket = age <= 12 ? "child" : age <= 24 ? "youth" : age <= 44 ? "adult" : "senior";
  const json doc = json::parse(read_text(kRoot / "data/playlists.json"));
  for (const auto& e : doc["entries"]) {
    if (e["emotion"] == emotion && e["age_bucket"] == bucket && e["ethnicity"] == ethnicity) {
      return e["playlist_id"].get<std::string>();
    }
  }
  return "";
}

// Replaces every leaf with its JSON type name and truncates arrays to one
// element, leaving only the contract.
json shape_of(const json& j) {
  if (j.is_object()) {
    json out = json::object();
    for (auto it = j.begin(); it != j.end(); ++it) out[it.key()] = shape_of(it.value());
    return out;
  }
  if (j.is_array()) return j.empty() ? json::array() : json::array({shape_of(j.front())});
  if (j.is_number()) return "number";
  return j.type_name();
}

void expect_schema_golden(const std::string& name, const json& body) {
  const fs::path path = kRoot / "tests/golden" / name;
  const json actual = shape_of(body);
  if (const char* u = std::getenv("MRS_UPDATE_GOLDEN"); u && std::string(u) == "1") {
    std::ofstream(path) << actual.dump(2) << "\n";
  }
  ASSERT_TRUE(fs::exists(path)) << path;
  EXPECT_EQ(json::parse(read_text(path)), actual) << actual.dump(2);
}

void expect_distribution(const json& probs, std::size_t n) {
  ASSERT_EQ(probs.size(), n);
  double sum = 0;
  for (const auto& [k, v] : probs.items()) {
    EXPECT_GE(v.get<double>(), 0.0);
    sum += v.get<double>();
  }
  EXPECT_NEAR(sum, 1.0, 1e-6);
}

}  // namespace

// -- pipeline ---------------------------------------------------------------

TEST(Pipeline, ParallelEqualsSequential) {
  const auto p = small_predictor();
  const GrayImage frame = decode_gray(std::span(reinterpret_cast<const std::uint8_t*>(portrait_bytes().data()),
                                                portrait_bytes().size()));
  const PredictionTriple a = p->predict(frame, true);
  const PredictionTriple b = p->predict(frame, false);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.face, select_primary_face(p->detect(frame)));
  double se = 0, st = 0;
  for (double v : a.emotion_probabilities) se += v;
  for (double v : a.ethnicity_probabilities) st += v;
  EXPECT_NEAR(se, 1.0, 1e-6);
  EXPECT_NEAR(st, 1.0, 1e-6);
  EXPECT_GE(a.age, 0);
  EXPECT_LE(a.age, 116);
}

TEST(Pipeline, ConcurrentCallersAgree) {
  const auto p = small_predictor();
  const std::string bytes = portrait_bytes();
  const std::span<const std::uint8_t> span(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size());
  const PredictionTriple ref = p->predict(span);
  std::vector<PredictionTriple> got(6);
  {
    std::vector<std::jthread> threads;
    for (std::size_t i = 0; i < got.size(); ++i) threads.emplace_back([&, i] { got[i] = p->predict(span); });
  }
  for (const auto& g : got) EXPECT_EQ(g, ref);
}

TEST(Pipeline, BlankFrameHasNoFace) {
  const auto p = small_predictor();
  EXPECT_TRUE(p->detect(GrayImage(160, 120, 128)).empty());
  EXPECT_THROW(p->predict(GrayImage(160, 120, 128)), NoFaceError);
}

TEST(Pipeline, ModelsMustFitTheirSlots) {
  EXPECT_THROW(Predictor(build_model<float>(small_spec(Task::Ethnicity), 1),
                         build_model<float>(small_spec(Task::Age), 2),
                         build_model<float>(small_spec(Task::Ethnicity), 3), shipped_cascade()),
               ConfigError);
}

TEST(Pipeline, LoadErrorsNameTheFile) {
  const fs::path dir = fs::temp_directory_path() / "mrs_pipeline_load";
  fs::create_directories(dir);
  save_model(build_model<float>(small_spec(Task::Emotion), 1), dir / "emotion.mrsm");
  save_model(build_model<float>(small_spec(Task::Age), 1), dir / "age.mrsm");
  std::ofstream(dir / "ethnicity.mrsm", std::ios::binary) << "MRSM garbage";
  const ModelPaths paths{dir / "emotion.mrsm", dir / "age.mrsm", dir / "ethnicity.mrsm"};
  try {
    Predictor::load(paths, kRoot / "data/haarcascade_frontalface_default.xml");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("ethnicity.mrsm"), std::string::npos) << e.what();
  }
  // Right file format, wrong slot.
  save_model(build_model<float>(small_spec(Task::Emotion), 1), dir / "ethnicity.mrsm");
  try {
    Predictor::load(paths, kRoot / "data/haarcascade_frontalface_default.xml");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("ethnicity.mrsm"), std::string::npos) << e.what();
  }
  fs::remove_all(dir);
}

// -- service ----------------------------------------------------------------

TEST(Service, MissingTableRefusesToStart) {
  ServiceConfig c = offline_config();
  c.playlist_table = kRoot / "tests/fixtures/does_not_exist.json";
  EXPECT_THROW(Service{c}, ConfigError);
}

TEST(Service, OnlineModeWithoutCredentialsRefusesToStart) {
  ::unsetenv("SPOTIFY_CLIENT_ID");
  ::unsetenv("SPOTIFY_CLIENT_SECRET");
  ServiceConfig c = offline_config();
  c.offline = false;
  EXPECT_THROW(Service{c}, ConfigError);
}

TEST(Service, HealthReports503UntilModelsAreInstalled) {
  Running r(offline_config(), nullptr);
  auto cli = r.client();
  auto res = cli.Get("/healthz");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 503);
  auto pred = cli.Post("/api/v1/predict", portrait_bytes(), "image/png");
  ASSERT_TRUE(pred);
  EXPECT_EQ(pred->status, 503);
  EXPECT_EQ(json::parse(pred->body)["error"]["code"], "not_ready");

  r.service->install(small_predictor());
  res = cli.Get("/healthz");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  const json body = json::parse(res->body);
  EXPECT_EQ(body["status"], "ok");
  EXPECT_EQ(body["models_loaded"], 3);
}

TEST(Service, PredictContract) {
  Running r(offline_config());
  auto cli = r.client();
  auto res = cli.Post("/api/v1/predict", portrait_bytes(), "image/png");
  ASSERT_TRUE(res);
  ASSERT_EQ(res->status, 200) << res->body;
  EXPECT_EQ(res->get_header_value("Content-Type"), "application/json; charset=utf-8");
  const json body = json::parse(res->body);
  EXPECT_EQ(body["version"], 1);
  const json& p = body["prediction"];
  expect_distribution(p["emotion"]["probabilities"], 4);
  expect_distribution(p["ethnicity"]["probabilities"], 5);
  const int age = p["age"]["years"];
  EXPECT_GE(age, 0);
  EXPECT_LE(age, 116);
  expect_schema_golden("predict_response.schema.json", body);
}

TEST(Service, RecommendMatchesIndependentLookup) {
  Running r(offline_config());
  auto cli = r.client();
  auto res = cli.Post("/api/v1/recommend", portrait_bytes(), "image/png");
  ASSERT_TRUE(res);
  ASSERT_EQ(res->status, 200) << res->body;
  const json body = json::parse(res->body);
  const json& p = body["prediction"];
  const std::string expected = oracle_playlist(p["emotion"]["label"], p["age"]["years"], p["ethnicity"]["label"]);
  ASSERT_FALSE(expected.empty());
  EXPECT_EQ(body["playlist"]["id"], expected);
  EXPECT_EQ(body["playlist"]["url"], "https://open.spotify.com/playlist/" + expected);
  ASSERT_FALSE(body["playlist"]["tracks"].empty());
  for (const auto& t : body["playlist"]["tracks"]) {
    EXPECT_EQ(t["url"], "https://open.spotify.com/track/" + t["id"].get<std::string>());
    EXPECT_EQ(t["artist"]["url"], "https://open.spotify.com/artist/" + t["artist"]["id"].get<std::string>());
    EXPECT_EQ(t["album"]["url"], "https://open.spotify.com/album/" + t["album"]["id"].get<std::string>());
  }
  expect_schema_golden("recommend_response.schema.json", body);
}

TEST(Service, IdenticalRequestsIdenticalResponses) {
  Running r(offline_config());
  auto cli = r.client();
  const auto a = cli.Post("/api/v1/recommend", portrait_bytes(), "image/png");
  const auto b = cli.Post("/api/v1/recommend", portrait_bytes(), "image/png");
  ASSERT_TRUE(a && b);
  EXPECT_EQ(a->body, b->body);
}

TEST(Service, Base64JsonVariantMatchesRawBody) {
  Running r(offline_config());
  auto cli = r.client();
  const std::string raw = portrait_bytes();
  const auto a = cli.Post("/api/v1/predict", raw, "image/png");
  const auto b = cli.Post("/api/v1/predict", json{{"image", base64::encode(raw)}}.dump(), "application/json");
  const auto c = cli.Post("/api/v1/predict", json{{"image", "data:image/png;base64," + base64::encode(raw)}}.dump(),
                          "application/json");
  ASSERT_TRUE(a && b && c);
  EXPECT_EQ(a->status, 200);
  EXPECT_EQ(a->body, b->body);
  EXPECT_EQ(a->body, c->body);
  const auto bad = cli.Post("/api/v1/predict", R"({"picture": 1})", "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);
}

TEST(Service, BlankImageIs422WithoutUpstreamCall) {
  Running r(offline_config());
  auto cli = r.client();
  const auto res = cli.Post("/api/v1/recommend", blank_png(), "image/png");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 422);
  const json body = json::parse(res->body);
  EXPECT_EQ(body["error"]["code"], "no_face");
  EXPECT_EQ(body["version"], 1);
  EXPECT_EQ(r.service->mock()->request_count(), 0u);
  expect_schema_golden("error_response.schema.json", body);
}

TEST(Service, UndecodableAndOversizedBodies) {
  Running r(offline_config());
  auto cli = r.client();
  auto res = cli.Post("/api/v1/predict", "this is not an image", "application/octet-stream");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);
  EXPECT_EQ(json::parse(res->body)["error"]["code"], "undecodable_image");

  res = cli.Post("/api/v1/predict", std::string(kMaxImageBytes + 1, 'x'), "application/octet-stream");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 413);
  EXPECT_EQ(json::parse(res->body)["error"]["code"], "payload_too_large");

  // Well past what even a base64 body may carry: rejected by the server core.
  res = cli.Post("/api/v1/predict", std::string(16u << 20, 'x'), "application/octet-stream");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 413);
  EXPECT_EQ(json::parse(res->body)["error"]["code"], "payload_too_large");
}

TEST(Service, PlaylistNotFoundIs502WithId) {
  // A table whose every entry points at an id the catalog lacks.
  json doc = json::parse(read_text(kRoot / "data/playlists.json"));
  for (auto& e : doc["entries"]) e["playlist_id"] = "gone-" + e["playlist_id"].get<std::string>();
  const fs::path table = fs::temp_directory_path() / "mrs_service_gone.json";
  std::ofstream(table) << doc.dump();
  ServiceConfig c = offline_config();
  c.playlist_table = table;
  Running r(c);
  auto cli = r.client();
  const auto res = cli.Post("/api/v1/recommend", portrait_bytes(), "image/png");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 502);
  const json body = json::parse(res->body);
  EXPECT_EQ(body["error"]["code"], "playlist_not_found");
  EXPECT_EQ(body["error"]["playlist_id"].get<std::string>().rfind("gone-", 0), 0u);
  fs::remove(table);
}

TEST(Service, UpstreamAuthFailureIs502) {
  Running r(offline_config());
  r.service->mock()->enqueue_reply("/api/token", 401, R"({"error":"invalid_client"})");
  auto cli = r.client();
  const auto res = cli.Post("/api/v1/recommend", portrait_bytes(), "image/png");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 502);
  EXPECT_EQ(json::parse(res->body)["error"]["code"], "upstream_auth");
}

TEST(Service, CorsHeadersAndPreflight) {
  Running r(offline_config());
  auto cli = r.client();
  auto res = cli.Get("/healthz");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->get_header_value("Access-Control-Allow-Origin"), "http://localhost:5173");
  res = cli.Options("/api/v1/recommend");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 204);
  EXPECT_NE(res->get_header_value("Access-Control-Allow-Methods").find("POST"), std::string::npos);
  EXPECT_EQ(res->get_header_value("Access-Control-Allow-Headers"), "Content-Type");
  res = cli.Get("/nowhere");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 404);
  EXPECT_EQ(json::parse(res->body)["error"]["code"], "not_found");
}

TEST(Service, ConcurrentRequestsShareOneToken) {
  Running r(offline_config());
  std::vector<int> status(8);
  {
    std::vector<std::jthread> threads;
    for (std::size_t i = 0; i < status.size(); ++i) {
      threads.emplace_back([&, i] {
        auto cli = r.client();
        const auto res = cli.Post("/api/v1/recommend", portrait_bytes(), "image/png");
        status[i] = res ? res->status : -1;
      });
    }
  }
  for (int s : status) EXPECT_EQ(s, 200);
  EXPECT_EQ(r.service->mock()->request_count("/api/token"), 1u);
}
