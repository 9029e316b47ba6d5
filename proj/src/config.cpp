#include "mcdbn/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "mcdbn/errors.hpp"

namespace mcdbn {
namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::vector<std::string>& allowed,
                const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const auto& key : allowed) known = known || key == it.key();
    if (!known) throw ConfigError("unknown key '" + it.key() + "' in " + where);
  }
}

const json& field(const json& obj, const std::string& key) { return obj.at(key); }

double get_double(const json& obj, const std::string& key, double fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = field(obj, key);
  if (!v.is_number()) throw ConfigError("'" + key + "' must be a number");
  return v.get<double>();
}

long long get_int(const json& obj, const std::string& key, long long fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = field(obj, key);
  if (!v.is_number_integer()) throw ConfigError("'" + key + "' must be an integer");
  return v.get<long long>();
}

std::uint64_t get_u64(const json& obj, const std::string& key, std::uint64_t fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = field(obj, key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
    throw ConfigError("'" + key + "' must be a non-negative integer");
  return v.get<std::uint64_t>();
}

bool get_bool(const json& obj, const std::string& key, bool fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = field(obj, key);
  if (!v.is_boolean()) throw ConfigError("'" + key + "' must be a boolean");
  return v.get<bool>();
}

std::string get_string(const json& obj, const std::string& key,
                       const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = field(obj, key);
  if (!v.is_string()) throw ConfigError("'" + key + "' must be a string");
  return v.get<std::string>();
}

VisibleKind visible_kind_from_string(const std::string& name) {
  if (name == "bernoulli") return VisibleKind::kBernoulliProb;
  if (name == "gaussian") return VisibleKind::kGaussianStandardized;
  throw ConfigError("unknown visible_kind '" + name + "' (bernoulli|gaussian)");
}

void parse_model(const json& obj, ModelShape& shape) {
  check_keys(obj,
             {"encoder_hidden", "decoder_x", "decoder_y", "decoder_dim", "decoder_heads",
              "heads", "d_k", "d_fusion", "task", "classes", "visible_kind"},
             "model");
  if (obj.contains("encoder_hidden")) {
    const json& arr = field(obj, "encoder_hidden");
    if (!arr.is_array() || arr.empty())
      throw ConfigError("'encoder_hidden' must be a non-empty array");
    shape.encoder_hidden.clear();
    for (const json& v : arr) {
      if (!v.is_number_integer() || v.get<long long>() <= 0)
        throw ConfigError("'encoder_hidden' entries must be positive integers");
      shape.encoder_hidden.push_back(static_cast<Eigen::Index>(v.get<long long>()));
    }
  }
  shape.decoder_x =
      decoder_kind_from_string(get_string(obj, "decoder_x", to_string(shape.decoder_x)));
  shape.decoder_y =
      decoder_kind_from_string(get_string(obj, "decoder_y", to_string(shape.decoder_y)));
  shape.task = task_kind_from_string(get_string(obj, "task", to_string(shape.task)));
  shape.decoder_dim = get_int(obj, "decoder_dim", shape.decoder_dim);
  shape.decoder_heads = get_int(obj, "decoder_heads", shape.decoder_heads);
  shape.heads = get_int(obj, "heads", shape.heads);
  shape.d_k = get_int(obj, "d_k", shape.d_k);
  shape.d_fusion = get_int(obj, "d_fusion", shape.d_fusion);
  shape.classes = get_int(obj, "classes", shape.classes);
  if (obj.contains("visible_kind"))
    shape.visible_kind = visible_kind_from_string(get_string(obj, "visible_kind", ""));
}

void parse_synthetic(const json& obj, SyntheticSpec& spec) {
  check_keys(obj,
             {"t_steps", "d_x", "d_y", "instruments", "phi", "noise", "classes", "seed"},
             "synthetic");
  spec.t_steps = get_int(obj, "t_steps", spec.t_steps);
  spec.d_x = get_int(obj, "d_x", spec.d_x);
  spec.d_y = get_int(obj, "d_y", spec.d_y);
  spec.instruments = static_cast<int>(get_int(obj, "instruments", spec.instruments));
  spec.phi = get_double(obj, "phi", spec.phi);
  spec.noise = get_double(obj, "noise", spec.noise);
  spec.classes = get_int(obj, "classes", spec.classes);
  spec.seed = get_u64(obj, "seed", spec.seed);
}

void parse_missing(const json& obj, MissingnessSpec& spec) {
  check_keys(obj, {"mechanism", "rate", "seed", "target"}, "missing");
  spec.mechanism =
      mechanism_from_string(get_string(obj, "mechanism", to_string(spec.mechanism)));
  spec.target =
      missing_target_from_string(get_string(obj, "target", to_string(spec.target)));
  spec.rate = get_double(obj, "rate", spec.rate);
  spec.seed = get_u64(obj, "seed", spec.seed);
  if (spec.rate < 0.0 || spec.rate > 1.0)
    throw ConfigError("'missing.rate' must lie in [0, 1]");
}

}  // namespace

std::uint64_t fnv1a_hash(const std::string& text) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

Config parse_config_json(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("top-level JSON value must be an object");
  check_keys(root,
             {"seed", "lr", "epochs", "batch_size", "cd_k", "pretrain_epochs",
              "pretrain_lr", "loss", "model", "synthetic", "missing", "methods", "data"},
             "the top level");

  Config config;
  config.train.seed = get_u64(root, "seed", config.train.seed);
  config.train.lr = get_double(root, "lr", config.train.lr);
  config.train.epochs = static_cast<int>(get_int(root, "epochs", config.train.epochs));
  config.train.batch_size =
      static_cast<int>(get_int(root, "batch_size", config.train.batch_size));
  config.train.cd_k = static_cast<int>(get_int(root, "cd_k", config.train.cd_k));
  config.train.pretrain_epochs =
      static_cast<int>(get_int(root, "pretrain_epochs", config.train.pretrain_epochs));
  config.train.pretrain_lr = get_double(root, "pretrain_lr", config.train.pretrain_lr);

  if (root.contains("loss")) {
    const json& loss = field(root, "loss");
    if (!loss.is_object()) throw ConfigError("'loss' must be an object");
    check_keys(loss, {"use_modal_x", "use_modal_y"}, "loss");
    config.train.switches.use_modal_x =
        get_bool(loss, "use_modal_x", config.train.switches.use_modal_x);
    config.train.switches.use_modal_y =
        get_bool(loss, "use_modal_y", config.train.switches.use_modal_y);
  }
  if (root.contains("model")) {
    const json& model = field(root, "model");
    if (!model.is_object()) throw ConfigError("'model' must be an object");
    parse_model(model, config.train.shape);
  }
  if (root.contains("synthetic")) {
    const json& synth = field(root, "synthetic");
    if (!synth.is_object()) throw ConfigError("'synthetic' must be an object");
    parse_synthetic(synth, config.synth);
  }
  if (root.contains("missing")) {
    const json& missing = field(root, "missing");
    if (!missing.is_object()) throw ConfigError("'missing' must be an object");
    parse_missing(missing, config.missing);
  }
  if (root.contains("methods")) {
    const json& methods = field(root, "methods");
    if (!methods.is_array() || methods.empty())
      throw ConfigError("'methods' must be a non-empty array");
    config.methods.clear();
    for (const json& v : methods) {
      if (!v.is_string()) throw ConfigError("'methods' entries must be strings");
      config.methods.push_back(v.get<std::string>());
    }
  }
  if (root.contains("data")) {
    const json& data = field(root, "data");
    if (!data.is_object()) throw ConfigError("'data' must be an object");
    check_keys(data, {"x_csv", "y_csv", "labels_csv"}, "data");
    config.x_csv = get_string(data, "x_csv", "");
    config.y_csv = get_string(data, "y_csv", "");
    config.labels_csv = get_string(data, "labels_csv", "");
    if (config.x_csv.empty() != config.y_csv.empty())
      throw ConfigError("'data' must name both x_csv and y_csv or neither");
  }

  // Canonical form: nlohmann objects iterate key-sorted, dump() adds no
  // whitespace, so formatting and key order never change the hash.
  config.config_hash = fnv1a_hash(root.dump());
  return config;
}

Config load_config(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream text;
  text << file.rdbuf();
  return parse_config_json(text.str());
}

void resolve_seed(Config& config, long long flag_seed) {
  if (flag_seed >= 0) {
    config.train.seed = static_cast<std::uint64_t>(flag_seed);
    return;
  }
  const char* env = std::getenv("MCDBN_SEED");
  if (env == nullptr || *env == '\0') return;
  char* end = nullptr;
  unsigned long long value = std::strtoull(env, &end, 10);
  if (end == env || *end != '\0')
    throw ConfigError(std::string("MCDBN_SEED is not a valid seed: '") + env + "'");
  config.train.seed = value;
}

}  // namespace mcdbn
