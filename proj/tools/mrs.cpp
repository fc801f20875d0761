// Operator CLI: train, evaluate, sweep, predict, validate-table, serve.
// stdout carries only JSON or CSV; progress and logs go to stderr.

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "mrs/errors.hpp"
#include "mrs/evaluate.hpp"
#include "mrs/experiment.hpp"
#include "mrs/log.hpp"
#include "mrs/pipeline.hpp"
#include "mrs/recommender.hpp"
#include "mrs/serialize.hpp"
#include "mrs/service.hpp"
#include "mrs/sweep.hpp"
#include "mrs/train.hpp"

using namespace mrs;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kDataDir = MRS_DEFAULT_DATA_DIR;

std::string error_kind(const std::exception& e) {
#define KIND(T) \
  if (dynamic_cast<const T*>(&e)) return #T;
  KIND(MissingKeyError)
  KIND(DuplicateKeyError)
  KIND(ValidationError)
  KIND(PlaylistNotFoundError)
  KIND(CredentialError)
  KIND(TransportError)
  KIND(ProtocolError)
  KIND(RateLimitError)
  KIND(ParseError)
  KIND(RangeError)
  KIND(ImageDecodeError)
  KIND(NoFaceError)
  KIND(ArchitectureError)
  KIND(DatasetError)
  KIND(FormatError)
  KIND(TruncationError)
  KIND(ShapeMismatchError)
  KIND(DimensionError)
  KIND(ParameterError)
  KIND(DegenerateBatchError)
  KIND(LabelError)
  KIND(NumericalError)
  KIND(ConfigError)
  KIND(Error)
#undef KIND
  return "InternalError";
}

void print_json(const json& j) {
  std::cout << j.dump(2) << "\n";
  std::cout.flush();
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json metrics_json(const Metrics& m) {
  json per_class = json::array();
  for (double f : m.per_class_f1) per_class.push_back(std::isnan(f) ? json(nullptr) : json(f));
  return {{"accuracy", optional_json(m.accuracy)},
          {"f1_macro", optional_json(m.f1_macro)},
          {"mse", optional_json(m.mse)},
          {"mae", optional_json(m.mae)},
          {"per_class_f1", per_class}};
}

Dataset maybe_limit(const Dataset& d, std::size_t limit, std::uint64_t seed) {
  return limit > 0 && limit < d.size() ? limit_samples(d, limit, seed) : d;
}

struct TrainFlags {
  std::string task = "emotion";
  fs::path data;
  TrainConfig config;
  std::size_t limit = 0;
  std::uint64_t split_seed = kDefaultSplitSeed;
  std::string optimizer = "adam";
};

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
  cmd->add_option("--model", f.task, "emotion | age | ethnicity")
      ->required()
      ->check(CLI::IsMember({"emotion", "age", "ethnicity"}));
  cmd->add_option("--data", f.data, "FER-2013 CSV/directory (emotion) or age/ethnicity CSV")->required();
  cmd->add_option("--epochs", f.config.epochs, "training epochs")->capture_default_str();
  cmd->add_option("--batch", f.config.batch_size, "mini-batch size")->capture_default_str();
  cmd->add_option("--lr", f.config.learning_rate, "learning rate")->capture_default_str();
  cmd->add_option("--optimizer", f.optimizer, "adam | sgd")->check(CLI::IsMember({"adam", "sgd"}))->capture_default_str();
  cmd->add_option("--seed", f.config.seed, "initialization and shuffling seed")->capture_default_str();
  cmd->add_option("--validation", f.config.validation_fraction, "held-out share for per-epoch validation")
      ->capture_default_str();
  cmd->add_option("--limit", f.limit, "train on a deterministic subsample of N rows (0 = all)");
  cmd->add_option("--split-seed", f.split_seed, "seed of the age/ethnicity train/test split")->capture_default_str();
}

void finish_train_flags(TrainFlags& f) {
  f.config.optimizer = f.optimizer == "sgd" ? OptimizerKind::Sgd : OptimizerKind::Adam;
}

void log_epoch(const EpochRecord& r) {
  char buf[256];
  std::string val;
  if (r.validation) {
    const Metrics& m = *r.validation;
    if (m.accuracy) val += " val_acc=" + std::to_string(*m.accuracy);
    if (m.mae) val += " val_mae=" + std::to_string(*m.mae);
  }
  std::snprintf(buf, sizeof buf, "epoch %d loss=%.5f%s (%.1fs)", r.epoch, r.train_loss, val.c_str(), r.seconds);
  log::info("train", buf);
}

int cmd_train(const TrainFlags& f, const fs::path& out) {
  const Task task = parse_task(f.task);
  const TaskData data = load_task_data(task, f.data, f.split_seed);
  const Dataset train_set = maybe_limit(data.train, f.limit, f.config.seed);
  log::info("train", task_name(task) + ": " + std::to_string(train_set.size()) + " training samples");
  Model<float> model = build_model<float>(default_spec(task), f.config.seed);
  const History h = train(model, train_set, f.config, log_epoch);
  save_model(model, out);
  json history = json::array();
  for (const auto& r : h) {
    json row = {{"epoch", r.epoch}, {"train_loss", r.train_loss}, {"train_accuracy", optional_json(r.train_accuracy)}};
    if (r.validation) row["validation"] = metrics_json(*r.validation);
    history.push_back(row);
  }
  print_json({{"model", model.spec().name},
              {"out", out.string()},
              {"train_samples", train_set.size()},
              {"parameters", model.parameter_count()},
              {"history", history}});
  return 0;
}

int cmd_evaluate(const fs::path& model_file, const fs::path& data, const std::string& split_name, std::size_t limit,
                 std::uint64_t split_seed) {
  const Model<float> model = load_model(model_file);
  const TaskData td = load_task_data(model.spec().task, data, split_seed);
  const Dataset& chosen = split_name == "train" ? td.train : td.test;
  if (chosen.empty()) throw DatasetError(data.string() + " has no " + split_name + " rows");
  const Dataset eval_set = maybe_limit(chosen, limit, split_seed);
  const Metrics m = evaluate(model, eval_set);
  print_json({{"model", model.spec().name},
              {"task", task_name(model.spec().task)},
              {"split", split_name},
              {"samples", eval_set.size()},
              {"metrics", metrics_json(m)}});
  return 0;
}

int cmd_sweep(const TrainFlags& f, const std::string& trials_text, const fs::path& out) {
  const Task task = parse_task(f.task);
  const std::vector<Trial> trials = trials_text.empty() ? paper_trials(task) : parse_trials(trials_text);
  const TaskData data = load_task_data(task, f.data, f.split_seed);
  const Dataset train_set = maybe_limit(data.train, f.limit, f.config.seed);
  if (data.test.empty()) throw DatasetError(f.data.string() + " has no test rows");
  const auto rows = layer_sweep(task, trials, train_set, data.test, f.config, [](const SweepRow& r) {
    log::info("sweep", "trial " + std::to_string(r.trial) + " (" + std::to_string(r.shape.n_conv) + ":" +
                           std::to_string(r.shape.n_pool) + ") " + (r.metrics ? "done" : "infeasible: " + r.note));
  });
  const std::string csv = sweep_csv(rows);
  if (out.empty()) {
    std::cout << csv;
  } else {
    std::ofstream file(out, std::ios::binary);
    if (!(file << csv)) throw ConfigError("cannot write " + out.string());
  }
  return 0;
}

int cmd_predict(const fs::path& model_dir, const fs::path& image, const fs::path& cascade) {
  const Predictor p = Predictor::load(
      {model_dir / "emotion.mrsm", model_dir / "age.mrsm", model_dir / "ethnicity.mrsm"}, cascade);
  const auto bytes = read_file_bytes(image);
  print_json({{"version", kResponseVersion}, {"prediction", prediction_json(p.predict(bytes))}});
  return 0;
}

int cmd_validate_table(const fs::path& table) {
  const PlaylistTable t = load_playlist_table_file(table);
  std::set<std::string> distinct;
  for (const auto& k : all_playlist_keys()) distinct.insert(t.at(k));
  print_json({{"table", table.string()}, {"valid", true}, {"entries", t.size()}, {"distinct_playlists", distinct.size()}});
  return 0;
}

// Defaults < config file < environment < flags.
struct ServeFlags {
  fs::path config;
  std::optional<std::string> host, cors;
  std::optional<int> port;
  std::optional<fs::path> model_dir, cascade, table, catalog;
  bool offline = false, online = false;
};

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

ServiceConfig service_config(const ServeFlags& f) {
  ServiceConfig c;
  fs::path model_dir = "models";
  c.cascade = kDataDir / "haarcascade_frontalface_default.xml";
  c.playlist_table = kDataDir / "playlists.json";
  c.offline_catalog = kDataDir / "offline_catalog.json";
  c.models = {model_dir / "emotion.mrsm", model_dir / "age.mrsm", model_dir / "ethnicity.mrsm"};

  if (!f.config.empty()) {
    std::ifstream in(f.config);
    if (!in) throw ConfigError("cannot open config " + f.config.string());
    json j;
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError(f.config.string() + ": " + e.what());
    }
    const fs::path base = f.config.parent_path();
    try {
      c.host = j.value("host", c.host);
      c.port = j.value("port", c.port);
      c.offline = j.value("offline", c.offline);
      c.cors_origin = j.value("cors_origin", c.cors_origin);
      if (j.contains("model_dir")) {
        const fs::path d = resolve(base, j["model_dir"].get<std::string>());
        c.models = {d / "emotion.mrsm", d / "age.mrsm", d / "ethnicity.mrsm"};
      }
      if (j.contains("models")) {
        const auto& m = j["models"];
        if (m.contains("emotion")) c.models.emotion = resolve(base, m["emotion"].get<std::string>());
        if (m.contains("age")) c.models.age = resolve(base, m["age"].get<std::string>());
        if (m.contains("ethnicity")) c.models.ethnicity = resolve(base, m["ethnicity"].get<std::string>());
      }
      if (j.contains("cascade")) c.cascade = resolve(base, j["cascade"].get<std::string>());
      if (j.contains("playlist_table")) c.playlist_table = resolve(base, j["playlist_table"].get<std::string>());
      if (j.contains("offline_catalog")) c.offline_catalog = resolve(base, j["offline_catalog"].get<std::string>());
    } catch (const json::exception& e) {
      throw ConfigError(f.config.string() + ": " + e.what());
    }
  }

  auto env = [](const char* name) -> std::optional<std::string> {
    const char* v = std::getenv(name);
    return v && *v ? std::optional<std::string>(v) : std::nullopt;
  };
  if (auto v = env("MRS_HOST")) c.host = *v;
  if (auto v = env("MRS_PORT")) {
    try {
      c.port = std::stoi(*v);
    } catch (const std::exception&) {
      throw ConfigError("MRS_PORT is not a number: " + *v);
    }
  }
  if (auto v = env("MRS_MODEL_DIR")) {
    const fs::path d = *v;
    c.models = {d / "emotion.mrsm", d / "age.mrsm", d / "ethnicity.mrsm"};
  }
  if (auto v = env("MRS_CASCADE")) c.cascade = *v;
  if (auto v = env("MRS_PLAYLIST_TABLE")) c.playlist_table = *v;
  if (auto v = env("MRS_OFFLINE_CATALOG")) c.offline_catalog = *v;
  if (auto v = env("MRS_CORS_ORIGIN")) c.cors_origin = *v;
  if (auto v = env("MRS_OFFLINE")) c.offline = *v == "1" || *v == "true";

  if (f.host) c.host = *f.host;
  if (f.port) c.port = *f.port;
  if (f.model_dir) c.models = {*f.model_dir / "emotion.mrsm", *f.model_dir / "age.mrsm", *f.model_dir / "ethnicity.mrsm"};
  if (f.cascade) c.cascade = *f.cascade;
  if (f.table) c.playlist_table = *f.table;
  if (f.catalog) c.offline_catalog = *f.catalog;
  if (f.cors) c.cors_origin = *f.cors;
  if (f.offline) c.offline = true;
  if (f.online) c.offline = false;
  return c;
}

int cmd_serve(const ServeFlags& f) {
  const ServiceConfig config = service_config(f);

  // Signals are taken synchronously by the main thread, so block them
  // before any worker thread exists.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  Service service(config);
  const int port = service.bind();
  std::jthread server([&service] { service.run(); });
  service.wait_until_ready();
  print_json({{"listening", "http://" + config.host + ":" + std::to_string(port)}, {"offline", config.offline}});
  log::info("serve", "listening on " + config.host + ":" + std::to_string(port) + ", loading models");
  try {
    service.load_models();
  } catch (...) {
    service.stop();
    throw;
  }
  int sig = 0;
  sigwait(&signals, &sig);
  log::info("serve", "shutting down");
  service.stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Emotion, age and ethnicity aware music recommendation"};
  app.require_subcommand(1, 1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "debug logging on stderr");

  TrainFlags train_flags;
  fs::path train_out;
  auto* train_cmd = app.add_subcommand("train", "train one model and save it");
  add_train_flags(train_cmd, train_flags);
  train_cmd->add_option("--out", train_out, "model file to write")->required();

  fs::path eval_model, eval_data;
  std::string eval_split = "test";
  std::size_t eval_limit = 0;
  std::uint64_t eval_split_seed = kDefaultSplitSeed;
  auto* eval_cmd = app.add_subcommand("evaluate", "score a saved model; prints metrics as JSON");
  eval_cmd->add_option("--model-file", eval_model, "model file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--data", eval_data, "dataset")->required();
  eval_cmd->add_option("--split", eval_split, "test | train")->check(CLI::IsMember({"test", "train"}))->capture_default_str();
  eval_cmd->add_option("--limit", eval_limit, "score a deterministic subsample of N rows (0 = all)");
  eval_cmd->add_option("--split-seed", eval_split_seed, "seed of the age/ethnicity train/test split")
      ->capture_default_str();

  TrainFlags sweep_flags;
  std::string trials;
  fs::path sweep_out;
  auto* sweep_cmd = app.add_subcommand("sweep", "train and score one model per conv:pool trial; writes CSV");
  add_train_flags(sweep_cmd, sweep_flags);
  sweep_cmd->add_option("--trials", trials, "comma list of conv:pool pairs (default: the paper's table rows)");
  sweep_cmd->add_option("--out", sweep_out, "CSV file (default: stdout)");

  fs::path model_dir = "models", image, cascade = kDataDir / "haarcascade_frontalface_default.xml";
  auto* predict_cmd = app.add_subcommand("predict", "run the full pipeline on one image; prints JSON");
  predict_cmd->add_option("--model-dir", model_dir, "directory with emotion/age/ethnicity.mrsm")->capture_default_str();
  predict_cmd->add_option("--image", image, "PNG, JPEG or PGM file")->required()->check(CLI::ExistingFile);
  predict_cmd->add_option("--cascade", cascade, "Haar cascade XML")->capture_default_str();

  fs::path table = kDataDir / "playlists.json";
  auto* table_cmd = app.add_subcommand("validate-table", "check that a playlist table covers all 80 keys");
  table_cmd->add_option("--table", table, "playlist table JSON")->capture_default_str();

  ServeFlags serve_flags;
  auto* serve_cmd = app.add_subcommand("serve", "start the HTTP service");
  serve_cmd->add_option("--config", serve_flags.config, "JSON config file");
  serve_cmd->add_option("--host", serve_flags.host, "listen address");
  serve_cmd->add_option("--port", serve_flags.port, "listen port (0 = any free port)");
  serve_cmd->add_option("--model-dir", serve_flags.model_dir, "directory with emotion/age/ethnicity.mrsm");
  serve_cmd->add_option("--cascade", serve_flags.cascade, "Haar cascade XML");
  serve_cmd->add_option("--table", serve_flags.table, "playlist table JSON");
  serve_cmd->add_option("--catalog", serve_flags.catalog, "offline playlist catalog JSON");
  serve_cmd->add_option("--cors-origin", serve_flags.cors, "allowed web UI origin");
  auto* off = serve_cmd->add_flag("--offline", serve_flags.offline, "serve playlists from the bundled catalog");
  serve_cmd->add_flag("--online", serve_flags.online, "use the real streaming service")->excludes(off);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  if (verbose) log::set_min_level(log::Level::Debug);

  try {
    if (*train_cmd) {
      finish_train_flags(train_flags);
      return cmd_train(train_flags, train_out);
    }
    if (*eval_cmd) return cmd_evaluate(eval_model, eval_data, eval_split, eval_limit, eval_split_seed);
    if (*sweep_cmd) {
      finish_train_flags(sweep_flags);
      return cmd_sweep(sweep_flags, trials, sweep_out);
    }
    if (*predict_cmd) return cmd_predict(model_dir, image, cascade);
    if (*table_cmd) return cmd_validate_table(table);
    if (*serve_cmd) return cmd_serve(serve_flags);
  } catch (const std::exception& e) {
    json err = {{"error", {{"kind", error_kind(e)}, {"message", e.what()}}}};
    if (const auto* m = dynamic_cast<const MissingKeyError*>(&e)) err["error"]["key"] = m->key();
    if (const auto* d = dynamic_cast<const DuplicateKeyError*>(&e)) err["error"]["key"] = d->key();
    std::cerr << err.dump() << std::endl;
    return 1;
  }
  return 2;
}
