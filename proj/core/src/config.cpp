#include "recourse/config.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "recourse/errors.hpp"

namespace recourse::config {

using nlohmann::json;
using training::TrainConfig;

namespace {

template <typename T>
T get(const json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type");
  }
}

std::vector<std::size_t> widths(const json& j, const std::string& key) {
  if (!j.is_array()) throw ConfigError("config key '" + key + "' must be an array of widths");
  std::vector<std::size_t> out;
  for (const auto& v : j) {
    if (!v.is_number_integer() || v.get<long long>() < 1)
      throw ConfigError("config key '" + key + "' must contain positive integers");
    out.push_back(v.get<std::size_t>());
  }
  return out;
}

void reject_unknown(const json& j, std::initializer_list<std::string_view> known, const std::string& prefix) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (auto k : known) ok = ok || it.key() == k;
    if (!ok) throw ConfigError("unknown config key '" + prefix + it.key() + "'");
  }
}

}  // namespace

TrainConfig parse(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(j,
                 {"epochs", "batch_size", "lr", "lambda1", "lambda2", "lambda3", "E", "T", "K", "norm", "optimizer",
                  "dropout", "epsilon_schedule", "mode", "seed", "test_fraction", "dims", "hard_validity_target",
                  "first_order", "vanillacf"},
                 "");

  TrainConfig c;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const json& v = it.value();
    if (k == "epochs") c.epochs = get<int>(v, k);
    else if (k == "batch_size") {
      if (!v.is_number_integer() || v.get<long long>() < 1) throw ConfigError("batch_size must be >= 1");
      c.batch_size = v.get<std::size_t>();
    } else if (k == "lr") c.lr = get<double>(v, k);
    else if (k == "lambda1") c.lambda1 = get<double>(v, k);
    else if (k == "lambda2") c.lambda2 = get<double>(v, k);
    else if (k == "lambda3") c.lambda3 = get<double>(v, k);
    else if (k == "E") c.max_epsilon = get<double>(v, k);
    else if (k == "T") c.attack_steps = get<int>(v, k);
    else if (k == "K") c.unroll = get<int>(v, k);
    else if (k == "norm") c.norm = vds::parse_norm(get<std::string>(v, k));
    else if (k == "optimizer") c.optimizer = optim::parse_kind(get<std::string>(v, k));
    else if (k == "dropout") c.dropout = get<double>(v, k);
    else if (k == "epsilon_schedule") c.schedule = training::parse_schedule(get<std::string>(v, k));
    else if (k == "mode") c.mode = training::parse_mode(get<std::string>(v, k));
    else if (k == "seed") {
      if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
        throw ConfigError("seed must be a non-negative integer");
      c.seed = v.get<std::uint64_t>();
    } else if (k == "test_fraction") c.test_fraction = get<double>(v, k);
    else if (k == "hard_validity_target") c.hard_validity_target = get<bool>(v, k);
    else if (k == "first_order") c.first_order = get<bool>(v, k);
    else if (k == "dims") {
      if (!v.is_object()) throw ConfigError("config key 'dims' must be an object");
      reject_unknown(v, {"encoder", "predictor", "generator"}, "dims.");
      if (v.contains("encoder")) c.dims.encoder = widths(v["encoder"], "dims.encoder");
      if (v.contains("predictor")) c.dims.predictor = widths(v["predictor"], "dims.predictor");
      if (v.contains("generator")) c.dims.generator = widths(v["generator"], "dims.generator");
    } else if (k == "vanillacf") {
      if (!v.is_object()) throw ConfigError("config key 'vanillacf' must be an object");
      reject_unknown(v, {"steps", "lr", "lambda"}, "vanillacf.");
      if (v.contains("steps")) c.vanilla.steps = get<int>(v["steps"], "vanillacf.steps");
      if (v.contains("lr")) c.vanilla.lr = get<double>(v["lr"], "vanillacf.lr");
      if (v.contains("lambda")) c.vanilla.lambda = get<double>(v["lambda"], "vanillacf.lambda");
    }
  }
  c.validate();
  return c;
}

TrainConfig load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string to_json(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["lr"] = c.lr;
  j["lambda1"] = c.lambda1;
  j["lambda2"] = c.lambda2;
  j["lambda3"] = c.lambda3;
  j["E"] = c.max_epsilon;
  j["T"] = c.attack_steps;
  j["K"] = c.unroll;
  j["norm"] = std::string(vds::to_string(c.norm));
  j["optimizer"] = std::string(optim::to_string(c.optimizer));
  j["dropout"] = c.dropout;
  j["epsilon_schedule"] = std::string(training::to_string(c.schedule));
  j["mode"] = std::string(training::to_string(c.mode));
  j["seed"] = c.seed;
  j["test_fraction"] = c.test_fraction;
  j["dims"] = {{"encoder", c.dims.encoder}, {"predictor", c.dims.predictor}, {"generator", c.dims.generator}};
  j["hard_validity_target"] = c.hard_validity_target;
  j["first_order"] = c.first_order;
  j["vanillacf"] = {{"steps", c.vanilla.steps}, {"lr", c.vanilla.lr}, {"lambda", c.vanilla.lambda}};
  return j.dump(2) + "\n";
}

model::Dims default_dims(std::size_t input_dim) { return {{input_dim, 32, 16}, {16, 16}, {16, 16}}; }

void resolve_dims(TrainConfig& cfg, std::size_t input_dim) {
  const auto d = default_dims(input_dim);
  if (cfg.dims.encoder.empty()) cfg.dims.encoder = d.encoder;
  const std::size_t latent = cfg.dims.encoder.back();
  if (cfg.dims.predictor.empty()) cfg.dims.predictor = {latent, 16};
  if (cfg.dims.generator.empty()) cfg.dims.generator = {latent, 16};
}

TrainConfig loan_preset() {
  TrainConfig c;
  c.lr = 0.003;
  c.batch_size = 128;
  c.lambda1 = 1.0;
  c.lambda2 = 0.2;
  c.lambda3 = 0.1;
  c.dims = {{110, 200, 10}, {10, 10}, {10, 10}};
  return c;
}

TrainConfig german_credit_preset() {
  TrainConfig c;
  c.lr = 0.003;
  c.batch_size = 256;
  c.lambda1 = 1.0;
  c.lambda2 = 1.0;
  c.lambda3 = 0.1;
  c.dims = {{19, 100, 10}, {10, 20}, {10, 20}};
  return c;
}

}  // namespace recourse::config
