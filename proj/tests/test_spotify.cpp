#include <gtest/gtest.h>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "mrs/base64.hpp"
#include "mrs/errors.hpp"
#include "mrs/log.hpp"
#include "mrs/mock_spotify.hpp"
#include "mrs/recommender.hpp"
#include "mrs/spotify.hpp"

using namespace mrs;
using namespace mrs::spotify;
using namespace std::chrono_literals;
using Clock = std::chrono::steady_clock;

namespace {

Track make_track(int i) {
  const std::string n = std::to_string(i);
  return Track{"t" + n, "Song " + n, "ar" + n, "Artist " + n, "al" + n, "Album " + n, "", "", ""};
}

MockPlaylist make_playlist(const std::string& id, int n) {
  MockPlaylist p{id, "List " + id, {}};
  for (int i = 0; i < n; ++i) p.tracks.emplace_back(make_track(i));
  return p;
}

MockCatalog catalog(std::initializer_list<MockPlaylist> lists) {
  MockCatalog c;
  for (const auto& p : lists) c.playlists[p.id] = p;
  return c;
}

// Manual clock plus a sleeper that advances it and records every wait.
struct FakeTime {
  Clock::time_point now = Clock::time_point{} + 1000h;
  std::vector<std::chrono::milliseconds> waits;

  ClientOptions options() {
    ClientOptions o;
    o.now = [this] { return now; };
    o.sleep = [this](std::chrono::milliseconds d) {
      waits.push_back(d);
      now += d;
    };
    return o;
  }
};

Client client_for(const MockServer& server, FakeTime& time, ClientOptions base = {}) {
  ClientOptions o = time.options();
  if (base.transport) o.transport = base.transport;
  return Client(Credentials{server.options().client_id, server.options().client_secret},
                Endpoints{server.base_url(), server.base_url()}, o);
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Compares against a checked-in transcript; MRS_UPDATE_GOLDEN=1 rewrites it.
void expect_golden(const std::string& name, const std::string& actual) {
  const std::filesystem::path path = std::filesystem::path(MRS_SOURCE_DIR) / "tests/golden" / name;
  if (const char* u = std::getenv("MRS_UPDATE_GOLDEN"); u && std::string(u) == "1") {
    std::ofstream(path, std::ios::binary) << actual;
  }
  ASSERT_TRUE(std::filesystem::exists(path)) << path;
  EXPECT_EQ(read_file(path), actual) << "transcript differs from " << path;
}

std::string decoded(std::string_view text) {
  const auto bytes = base64::decode(text);
  return std::string(bytes.begin(), bytes.end());
}

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (const auto& p : parts) out += p + "\n----\n";
  return out;
}

}  // namespace

TEST(EntityLink, FormatsEachKind) {
  EXPECT_EQ(entity_link(EntityKind::Track, "abc"), "https://open.spotify.com/track/abc");
  EXPECT_EQ(entity_link(EntityKind::Playlist, "p1"), "https://open.spotify.com/playlist/p1");
  EXPECT_EQ(entity_link(EntityKind::Artist, "x"), "https://open.spotify.com/artist/x");
  EXPECT_EQ(entity_link(EntityKind::Album, "y"), "https://open.spotify.com/album/y");
  EXPECT_THROW(entity_link(EntityKind::Track, ""), ValidationError);
}

TEST(Base64, KnownVectorsAndRoundTrip) {
  EXPECT_EQ(base64::encode(""), "");
  EXPECT_EQ(base64::encode("f"), "Zg==");
  EXPECT_EQ(base64::encode("fo"), "Zm8=");
  EXPECT_EQ(base64::encode("foo"), "Zm9v");
  EXPECT_EQ(base64::encode("foobar"), "Zm9vYmFy");
  EXPECT_EQ(base64::encode("Aladdin:open sesame"), "QWxhZGRpbjpvcGVuIHNlc2FtZQ==");
  std::string all;
  for (int i = 0; i < 256; ++i) all += static_cast<char>(i);
  EXPECT_EQ(decoded(base64::encode(all)), all);
  EXPECT_EQ(decoded("Zm9v\nYmFy"), "foobar");
  EXPECT_THROW(base64::decode("Zm9v*"), ParseError);
  EXPECT_THROW(base64::decode("Zm9vY"), ParseError);
}

TEST(Credentials, FromEnvRequiresBoth) {
  ::unsetenv("SPOTIFY_CLIENT_ID");
  ::unsetenv("SPOTIFY_CLIENT_SECRET");
  EXPECT_THROW(Credentials::from_env(), CredentialError);
  ::setenv("SPOTIFY_CLIENT_ID", "id", 1);
  EXPECT_THROW(Credentials::from_env(), CredentialError);
  ::setenv("SPOTIFY_CLIENT_SECRET", "sec", 1);
  const auto c = Credentials::from_env();
  EXPECT_EQ(c.client_id, "id");
  EXPECT_EQ(c.client_secret, "sec");
  ::unsetenv("SPOTIFY_CLIENT_ID");
  ::unsetenv("SPOTIFY_CLIENT_SECRET");
}

TEST(Endpoints, DefaultsAndOverrides) {
  ::unsetenv("SPOTIFY_API_BASE");
  ::unsetenv("SPOTIFY_AUTH_BASE");
  auto e = Endpoints::from_env();
  EXPECT_EQ(e.api_base, "https://api.spotify.com");
  EXPECT_EQ(e.auth_base, "https://accounts.spotify.com");
  ::setenv("SPOTIFY_API_BASE", "http://127.0.0.1:9/", 1);
  e = Endpoints::from_env();
  EXPECT_EQ(e.api_base, "http://127.0.0.1:9");
  ::unsetenv("SPOTIFY_API_BASE");
}

TEST(Token, ParsesTokenAndExpiry) {
  MockServer server(MockCatalog{});
  server.enqueue_reply("/api/token", 200, R"({"access_token":"t","token_type":"Bearer","expires_in":3600})");
  FakeTime time;
  const auto start = time.now;
  Client c = client_for(server, time);
  const Token t = c.token();
  EXPECT_EQ(t.access_token, "t");
  EXPECT_EQ(t.expires_at, start + 3600s);
}

TEST(Token, CachedUntilWithinRefreshMargin) {
  MockServer server(MockCatalog{});
  FakeTime time;
  Client c = client_for(server, time);
  const Token first = c.token();
  EXPECT_EQ(c.token().access_token, first.access_token);
  time.now += 3600s - 31s;
  EXPECT_EQ(c.token().access_token, first.access_token);
  EXPECT_EQ(server.request_count("/api/token"), 1u);
  time.now += 2s;  // 29 s left: inside the margin
  EXPECT_NE(c.token().access_token, first.access_token);
  EXPECT_EQ(server.request_count("/api/token"), 2u);
  EXPECT_EQ(c.token_requests(), 2u);
}

TEST(Token, RejectedCredentialsAreNotRetried) {
  MockServer server(MockCatalog{});
  FakeTime time;
  Client c(Credentials{"mock-client", "wrong"}, Endpoints{server.base_url(), server.base_url()}, time.options());
  EXPECT_THROW(c.token(), CredentialError);
  EXPECT_EQ(server.request_count("/api/token"), 1u);
  EXPECT_TRUE(time.waits.empty());
}

TEST(Token, MalformedBodyIsProtocolError) {
  MockServer server(MockCatalog{});
  FakeTime time;
  Client c = client_for(server, time);
  server.enqueue_reply("/api/token", 200, "<html>not json</html>");
  EXPECT_THROW(c.token(), ProtocolError);
  server.enqueue_reply("/api/token", 200, R"({"token_type":"Bearer"})");
  EXPECT_THROW(c.token(), ProtocolError);
  server.enqueue_reply("/api/token", 200, R"({"access_token":"x","expires_in":"soon"})");
  EXPECT_THROW(c.token(), ProtocolError);
}

TEST(Token, NetworkFailureUsesBackoffBudget) {
  FakeTime time;
  ClientOptions o = time.options();
  // Nothing listens on port 1 of the loopback interface.
  Client c(Credentials{"a", "b"}, Endpoints{"http://127.0.0.1:1", "http://127.0.0.1:1"}, o);
  EXPECT_THROW(c.token(), TransportError);
  const std::vector<std::chrono::milliseconds> expected{500ms, 1000ms, 2000ms};
  EXPECT_EQ(time.waits, expected);
}

TEST(Token, ServerErrorsRetriedThenSucceed) {
  MockServer server(MockCatalog{});
  FakeTime time;
  Client c = client_for(server, time);
  server.enqueue_reply("/api/token", 503, "{}");
  server.enqueue_reply("/api/token", 500, "{}");
  EXPECT_EQ(c.token().access_token, "mock-token-1");
  EXPECT_EQ(server.request_count("/api/token"), 3u);
  const std::vector<std::chrono::milliseconds> expected{500ms, 1000ms};
  EXPECT_EQ(time.waits, expected);
}

TEST(Token, SingleRefreshUnderConcurrentCallers) {
  MockServer server(MockCatalog{});
  std::atomic<int> in_flight{0}, peak{0};
  ClientOptions o;
  const Transport http = http_transport();
  o.transport = [&](const HttpRequest& r) {
    const bool tok = r.url.find("/api/token") != std::string::npos;
    if (tok) {
      const int now = ++in_flight;
      int p = peak.load();
      while (now > p && !peak.compare_exchange_weak(p, now)) {
      }
      std::this_thread::sleep_for(20ms);  // widen the race window
    }
    auto res = http(r);
    if (tok) --in_flight;
    return res;
  };
  Client c(Credentials{"mock-client", "mock-secret"}, Endpoints{server.base_url(), server.base_url()}, o);
  std::vector<std::jthread> threads;
  std::vector<std::string> seen(16);
  for (int i = 0; i < 16; ++i) threads.emplace_back([&, i] { seen[i] = c.token().access_token; });
  threads.clear();
  EXPECT_EQ(peak.load(), 1);
  EXPECT_EQ(server.request_count("/api/token"), 1u);
  EXPECT_EQ(std::set<std::string>(seen.begin(), seen.end()).size(), 1u);
}

TEST(Playlist, ThreeItemsInResponseOrder) {
  MockServer server(catalog({make_playlist("p3", 3)}));
  FakeTime time;
  Client c = client_for(server, time);
  const Playlist p = c.get_playlist("p3");
  EXPECT_EQ(p.playlist_id, "p3");
  EXPECT_EQ(p.name, "List p3");
  EXPECT_EQ(p.url, "https://open.spotify.com/playlist/p3");
  ASSERT_EQ(p.tracks.size(), 3u);
  for (int i = 0; i < 3; ++i) {
    const Track expected = make_track(i);
    EXPECT_EQ(p.tracks[i].track_id, expected.track_id);
    EXPECT_EQ(p.tracks[i].title, expected.title);
    EXPECT_EQ(p.tracks[i].artist_name, expected.artist_name);
    EXPECT_EQ(p.tracks[i].album_name, expected.album_name);
    EXPECT_EQ(p.tracks[i].track_url, "https://open.spotify.com/track/t" + std::to_string(i));
    EXPECT_EQ(p.tracks[i].artist_url, "https://open.spotify.com/artist/ar" + std::to_string(i));
    EXPECT_EQ(p.tracks[i].album_url, "https://open.spotify.com/album/al" + std::to_string(i));
  }
}

TEST(Playlist, EmptyPlaylistIsNotAnError) {
  MockServer server(catalog({make_playlist("empty", 0)}));
  FakeTime time;
  Client c = client_for(server, time);
  EXPECT_TRUE(c.get_playlist("empty").tracks.empty());
}

TEST(Playlist, NotFoundCarriesId) {
  MockServer server(MockCatalog{});
  FakeTime time;
  Client c = client_for(server, time);
  try {
    c.get_playlist("nope");
    FAIL() << "expected PlaylistNotFoundError";
  } catch (const PlaylistNotFoundError& e) {
    EXPECT_EQ(e.playlist_id(), "nope");
  }
}

TEST(Playlist, PaginationFollowedToExhaustion) {
  MockPlaylist big = make_playlist("big", 7);
  big.tracks.insert(big.tracks.begin() + 3, std::nullopt);  // removed track
  MockOptions mo;
  mo.page_size = 3;
  MockServer server(catalog({big}), mo);
  FakeTime time;
  Client c = client_for(server, time);
  const Playlist p = c.get_playlist("big");
  ASSERT_EQ(p.tracks.size(), 7u);
  for (int i = 0; i < 7; ++i) EXPECT_EQ(p.tracks[i].track_id, "t" + std::to_string(i));
  EXPECT_EQ(server.request_count("/v1/playlists/big"), 3u);  // 8 items, pages of 3
}

TEST(Playlist, MaximumPageSizeMeansOneRequestPerHundred) {
  MockServer server(catalog({make_playlist("h", 250)}));
  FakeTime time;
  Client c = client_for(server, time);
  EXPECT_EQ(c.get_playlist("h").tracks.size(), 250u);
  EXPECT_EQ(server.request_count("/v1/"), 3u);
  const auto log = server.transcript();
  EXPECT_NE(log.back().find("GET /v1/playlists/h/tracks?offset=200&limit=100\n"), std::string::npos);
}

TEST(Playlist, ExpiredTokenRefreshedOnceThenRetried) {
  MockServer server(catalog({make_playlist("p", 2)}));
  FakeTime time;
  Client c = client_for(server, time);
  c.token();
  server.revoke_tokens();
  EXPECT_EQ(c.get_playlist("p").tracks.size(), 2u);
  EXPECT_EQ(server.request_count("/api/token"), 2u);
  EXPECT_EQ(server.request_count("/v1/"), 2u);
}

TEST(Playlist, PersistentUnauthorizedFails) {
  MockServer server(catalog({make_playlist("p", 2)}));
  FakeTime time;
  Client c = client_for(server, time);
  server.enqueue_reply("/v1/", 401, R"({"error":{"status":401}})");
  server.enqueue_reply("/v1/", 401, R"({"error":{"status":401}})");
  EXPECT_THROW(c.get_playlist("p"), CredentialError);
  EXPECT_EQ(server.request_count("/v1/"), 2u);
  EXPECT_EQ(server.request_count("/api/token"), 2u);
}

TEST(Playlist, RateLimitHonoredOnceThenFails) {
  MockServer server(catalog({make_playlist("p", 1)}));
  FakeTime time;
  Client c = client_for(server, time);
  server.enqueue_reply("/v1/", 429, "{}", {{"Retry-After", "3"}});
  EXPECT_EQ(c.get_playlist("p").tracks.size(), 1u);
  const std::vector<std::chrono::milliseconds> one{3000ms};
  EXPECT_EQ(time.waits, one);

  server.enqueue_reply("/v1/", 429, "{}", {{"Retry-After", "1"}});
  server.enqueue_reply("/v1/", 429, "{}", {{"Retry-After", "1"}});
  EXPECT_THROW(c.get_playlist("p"), RateLimitError);
}

TEST(Playlist, MalformedPlaylistBodyIsProtocolError) {
  MockServer server(catalog({make_playlist("p", 1)}));
  FakeTime time;
  Client c = client_for(server, time);
  server.enqueue_reply("/v1/", 200, R"({"name":"x"})");
  EXPECT_THROW(c.get_playlist("p"), ProtocolError);
  server.enqueue_reply("/v1/", 200, "garbage");
  EXPECT_THROW(c.get_playlist("p"), ProtocolError);
}

TEST(Transcript, TokenRequestMatchesGolden) {
  MockServer server(MockCatalog{});
  FakeTime time;
  Client c = client_for(server, time);
  c.token();
  const auto log = server.transcript();
  ASSERT_EQ(log.size(), 1u);
  expect_golden("token_request.txt", log[0]);
  // Basic credentials decode to id:secret.
  const std::string marker = "authorization: Basic ";
  const auto at = log[0].find(marker);
  ASSERT_NE(at, std::string::npos);
  const auto end = log[0].find('\n', at);
  EXPECT_EQ(decoded(log[0].substr(at + marker.size(), end - at - marker.size())), "mock-client:mock-secret");
}

TEST(Transcript, PlaylistRequestsMatchGolden) {
  MockOptions mo;
  mo.page_size = 2;
  MockServer server(catalog({make_playlist("golden", 3)}), mo);
  FakeTime time;
  Client c = client_for(server, time);
  c.get_playlist("golden");
  expect_golden("playlist_requests.txt", join(server.transcript()));
}

TEST(Transcript, ReproducibleAcrossRuns) {
  auto run = [] {
    MockServer server(catalog({make_playlist("r", 5)}));
    FakeTime time;
    Client c = client_for(server, time);
    c.get_playlist("r");
    return server.transcript();
  };
  EXPECT_EQ(run(), run());
}

TEST(Redaction, SecretsNeverReachLogsOrErrors) {
  const std::string secret = "s3cr3t-value-that-must-not-leak";
  MockOptions mo;
  mo.client_secret = secret;
  MockServer server(catalog({make_playlist("p", 2)}), mo);
  std::vector<std::string> lines;
  std::mutex m;
  auto previous = log::set_sink([&](log::Level, std::string_view comp, std::string_view msg) {
    std::lock_guard lock(m);
    lines.emplace_back(std::string(comp) + ": " + std::string(msg));
  });
  log::set_min_level(log::Level::Debug);
  std::vector<std::string> errors;
  std::set<std::string> tokens;
  {
    FakeTime time;
    Client c = client_for(server, time);
    tokens.insert(c.token().access_token);
    server.revoke_tokens();
    c.get_playlist("p");
    tokens.insert(c.token().access_token);
    server.enqueue_reply("/v1/", 500, "{}");
    server.enqueue_reply("/v1/", 429, "{}", {{"Retry-After", "0"}});
    c.get_playlist("p");
    try {
      c.get_playlist("missing");
    } catch (const Error& e) {
      errors.emplace_back(e.what());
    }
    Client bad(Credentials{"mock-client", secret + "x"}, Endpoints{server.base_url(), server.base_url()},
               time.options());
    try {
      bad.token();
    } catch (const Error& e) {
      errors.emplace_back(e.what());
    }
  }
  log::set_sink(previous);
  log::set_min_level(log::Level::Info);

  ASSERT_EQ(tokens.size(), 2u);
  EXPECT_FALSE(lines.empty());
  bool saw_redacted = false;
  for (const auto& line : lines) {
    EXPECT_EQ(line.find(secret), std::string::npos) << line;
    for (const auto& t : tokens) EXPECT_EQ(line.find(t), std::string::npos) << line;
    saw_redacted |= line.find("<redacted:") != std::string::npos;
  }
  EXPECT_TRUE(saw_redacted);
  ASSERT_EQ(errors.size(), 2u);
  for (const auto& e : errors) {
    EXPECT_EQ(e.find(secret), std::string::npos) << e;
    for (const auto& t : tokens) EXPECT_EQ(e.find(t), std::string::npos) << e;
  }
}

TEST(MockCatalog, BundledCatalogCoversEveryTableEntry) {
  const auto root = std::filesystem::path(MRS_SOURCE_DIR) / "data";
  const MockCatalog cat = load_mock_catalog((root / "offline_catalog.json").string());
  const PlaylistTable table = load_playlist_table_file(root / "playlists.json");
  std::set<std::string> ids;
  for (const auto& key : all_playlist_keys()) {
    const std::string& id = table.at(key);
    ids.insert(id);
    ASSERT_TRUE(cat.playlists.count(id)) << key_name(key);
    EXPECT_FALSE(cat.playlists.at(id).tracks.empty());
  }
  EXPECT_EQ(ids.size(), kPlaylistKeyCount);
}

TEST(MockCatalog, RejectsDuplicatesAndBadVersions) {
  EXPECT_THROW(parse_mock_catalog(R"({"version":2,"playlists":[]})"), ValidationError);
  EXPECT_THROW(parse_mock_catalog(R"({"version":1,"playlists":[{"id":"a","name":"","tracks":[]},)"
                                  R"({"id":"a","name":"","tracks":[]}]})"),
               DuplicateKeyError);
  EXPECT_THROW(parse_mock_catalog("{"), ParseError);
}
