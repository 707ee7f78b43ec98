#include "viref/runconfig.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

namespace viref {

namespace {

const std::vector<std::string> kClassPool = {
    "car", "van", "truck", "bus", "bike", "scooter", "tractor", "jeep"};
const std::vector<std::string> kColorPool = {
    "red", "blue", "white", "black", "green", "yellow", "silver", "gray"};
const std::vector<std::string> kMotionPool = {
    "parked", "moving", "turning", "stopping", "reversing", "circling"};
const std::vector<std::string> kRelationPool = {
    "near", "behind", "beside", "leading", "facing", "trailing"};

std::vector<std::string> pool_prefix(const std::vector<std::string>& pool,
                                     int n, const char* what) {
  if (n < 1 || n > static_cast<int>(pool.size()))
    fail(ErrorKind::config, std::string("world: ") + what + " count must be "
                                "in [1, " +
                                std::to_string(pool.size()) + "]");
  return {pool.begin(), pool.begin() + n};
}

struct Parser {
  std::map<std::string, std::string> kv;
  std::map<std::string, bool> used;

  bool has(const std::string& key) { return kv.count(key) != 0; }

  template <typename T, typename Fn>
  void get(const std::string& key, T& out, Fn parse) {
    auto it = kv.find(key);
    if (it == kv.end()) return;
    used[key] = true;
    try {
      out = parse(it->second);
    } catch (const Error&) {
      throw;
    } catch (const std::exception&) {
      fail(ErrorKind::config, "config: bad value for " + key + ": '" +
                                  it->second + "'");
    }
  }

  void get_int(const std::string& key, int& out) {
    get(key, out, [](const std::string& s) { return std::stoi(s); });
  }
  void get_long(const std::string& key, long& out) {
    get(key, out, [](const std::string& s) { return std::stol(s); });
  }
  void get_u64(const std::string& key, uint64_t& out) {
    get(key, out, [](const std::string& s) { return std::stoull(s); });
  }
  void get_double(const std::string& key, double& out) {
    get(key, out, [](const std::string& s) { return std::stod(s); });
  }
  void get_string(const std::string& key, std::string& out) {
    get(key, out, [](const std::string& s) { return s; });
  }
  void get_bool(const std::string& key, bool& out) {
    get(key, out, [&](const std::string& s) {
      if (s == "true" || s == "1" || s == "on") return true;
      if (s == "false" || s == "0" || s == "off") return false;
      fail(ErrorKind::config, "config: bad boolean for " + key);
    });
  }

  void finish() const {
    for (const auto& [key, value] : kv)
      if (!used.count(key))
        fail(ErrorKind::config, "config: unknown key '" + key + "'");
  }
};

}  // namespace

std::map<std::string, std::string> load_config_file(const std::string& path) {
  if (!std::filesystem::exists(path))
    fail(ErrorKind::missing_file, "config file not found: " + path);
  std::ifstream is(path);
  if (!is) fail(ErrorKind::missing_file, "cannot open config: " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  int line_no = 0;
  auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    const auto b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
  };
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorKind::config, "config line " + std::to_string(line_no) +
                                  ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      fail(ErrorKind::config,
           "config line " + std::to_string(line_no) + ": empty key");
    kv[key] = value;
  }
  return kv;
}

VirefConfig RunConfig::model_config(int stream_dim, int vocab_size) const {
  VirefConfig cfg;
  cfg.encoder_layers = encoder_layers;
  cfg.decoder_layers = decoder_layers;
  cfg.hidden_dim = hidden_dim;
  cfg.stream_dim = stream_dim;
  cfg.vocab_size = vocab_size;
  cfg.embed_dim = embed_dim;
  cfg.dropout_p = dropout_p;
  cfg.fan_hidden1 = fan_hidden1;
  cfg.fan_hidden2 = fan_hidden2;
  cfg.wen_hidden1 = wen_hidden1;
  cfg.wen_hidden2 = wen_hidden2;
  cfg.fpn_hidden1 = fpn_hidden1;
  cfg.fpn_hidden2 = fpn_hidden2;
  cfg.validate();
  return cfg;
}

RunConfig parse_run_config(const std::map<std::string, std::string>& kv) {
  Parser p{kv, {}};
  RunConfig rc;

  p.get_u64("seed", rc.seed);
  std::string variant = variant_name(rc.variant);
  p.get_string("variant", variant);
  rc.variant = parse_variant(variant);

  p.get_int("world.video_count", rc.world.video_count);
  p.get_int("world.pairs_per_video", rc.world.pairs_per_video);
  p.get_int("world.frame_count_min", rc.world.frame_count_min);
  p.get_int("world.frame_count_max", rc.world.frame_count_max);
  p.get_int("world.feature_dim", rc.world.feature_dim);
  p.get_double("world.noise_std", rc.world.noise_std);
  int classes = static_cast<int>(rc.world.classes.size());
  int colors = static_cast<int>(rc.world.colors.size());
  int motions = static_cast<int>(rc.world.motions.size());
  int relations = static_cast<int>(rc.world.relations.size());
  p.get_int("world.classes", classes);
  p.get_int("world.colors", colors);
  p.get_int("world.motions", motions);
  p.get_int("world.relations", relations);
  rc.world.classes = pool_prefix(kClassPool, classes, "class");
  rc.world.colors = pool_prefix(kColorPool, colors, "color");
  rc.world.motions = pool_prefix(kMotionPool, motions, "motion");
  rc.world.relations = pool_prefix(kRelationPool, relations, "relation");

  p.get_int("model.encoder_layers", rc.encoder_layers);
  p.get_int("model.decoder_layers", rc.decoder_layers);
  p.get_int("model.hidden_dim", rc.hidden_dim);
  p.get_int("model.embed_dim", rc.embed_dim);
  p.get_double("model.dropout", rc.dropout_p);
  p.get_int("model.fan_hidden1", rc.fan_hidden1);
  p.get_int("model.fan_hidden2", rc.fan_hidden2);
  p.get_int("model.wen_hidden1", rc.wen_hidden1);
  p.get_int("model.wen_hidden2", rc.wen_hidden2);
  p.get_int("model.fpn_hidden1", rc.fpn_hidden1);
  p.get_int("model.fpn_hidden2", rc.fpn_hidden2);

  p.get_double("train.lr", rc.train.lr);
  p.get_int("train.batch_size", rc.train.batch_size);
  p.get_int("train.max_epochs", rc.train.max_epochs);
  p.get_int("train.patience", rc.train.patience);
  p.get_int("train.max_len", rc.train.max_len);
  p.get_bool("train.dropout", rc.train.dropout_enabled);
  p.get_long("train.max_steps", rc.train.max_steps);

  p.get_int("eval.beam", rc.beam);
  p.get_int("eval.max_len", rc.max_len);

  p.get_string("paths.manifest", rc.manifest);
  p.get_string("paths.vocab", rc.vocab_path);
  p.get_string("paths.embeddings", rc.embeddings);
  p.get_string("paths.checkpoint", rc.checkpoint);
  p.get_string("paths.out", rc.out_dir);
  p.get_string("paths.queries", rc.queries);
  p.get_string("generate.pair_ids", rc.pair_ids);

  p.finish();

  rc.world.seed = rc.seed;
  rc.train.seed = rc.seed;
  return rc;
}

}  // namespace viref
