#include "recourse/checkpoint.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "recourse/errors.hpp"

namespace recourse::checkpoint {

using nlohmann::ordered_json;

namespace {

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_block(ordered_json& tensors, const ad::ParamBlock& block) {
  for (std::size_t i = 0; i < block.size(); ++i) {
    const auto& v = block[i];
    for (double x : v.data())
      if (!std::isfinite(x)) throw NumericError("tensor '" + block.name(i) + "' holds a non-finite value");
    ordered_json t;
    t["shape"] = {v.shape().rows, v.shape().cols};
    t["data"] = std::vector<double>(v.data().begin(), v.data().end());
    tensors[block.name(i)] = std::move(t);
  }
}

void read_block(ad::ParamBlock& block, const ordered_json& tensors, std::size_t& used) {
  ad::ParamBlock out;
  for (std::size_t i = 0; i < block.size(); ++i) {
    const auto& name = block.name(i);
    if (!tensors.contains(name)) throw DataError("checkpoint is missing tensor '" + name + "'");
    const auto& t = tensors.at(name);
    const auto shape = block[i].shape();
    Matrix m;
    try {
      auto s = t.at("shape").get<std::vector<std::size_t>>();
      if (s.size() != 2 || s[0] != shape.rows || s[1] != shape.cols)
        throw DataError("checkpoint tensor '" + name + "' has the wrong shape");
      m.rows = s[0];
      m.cols = s[1];
      m.data = t.at("data").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
      throw DataError("checkpoint tensor '" + name + "' is malformed: " + e.what());
    }
    if (m.data.size() != m.rows * m.cols) throw DataError("checkpoint tensor '" + name + "' has the wrong length");
    out.add(name, ad::Value::variable(std::move(m)));
    ++used;
  }
  block = std::move(out);
}

}  // namespace

std::string to_json(const model::ModelParams& params, training::Mode mode) {
  ordered_json j;
  j["format"] = kFormat;
  j["version"] = kVersion;
  j["mode"] = std::string(training::to_string(mode));
  const auto& d = params.arch.dims();
  j["dims"] = {{"encoder", d.encoder}, {"predictor", d.predictor}, {"generator", d.generator}};
  j["schema"] = ordered_json::parse(data::schema_json(params.schema));
  j["schema_hash"] = hex(data::schema_hash(params.schema));
  ordered_json tensors = ordered_json::object();
  write_block(tensors, params.encoder);
  write_block(tensors, params.predictor);
  write_block(tensors, params.generator);
  j["tensors"] = std::move(tensors);
  return j.dump(1) + "\n";
}

Checkpoint parse(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  Checkpoint ck;
  model::Dims dims;
  data::FeatureSchema schema;
  try {
    if (j.at("format").get<std::string>() != kFormat) throw DataError("not a recourse checkpoint");
    if (j.at("version").get<int>() != kVersion) throw DataError("unsupported checkpoint version");
    ck.mode = training::parse_mode(j.at("mode").get<std::string>());
    const auto& jd = j.at("dims");
    dims.encoder = jd.at("encoder").get<std::vector<std::size_t>>();
    dims.predictor = jd.at("predictor").get<std::vector<std::size_t>>();
    dims.generator = jd.at("generator").get<std::vector<std::size_t>>();
    schema = data::parse_schema_json(j.at("schema").dump());
    if (j.at("schema_hash").get<std::string>() != hex(data::schema_hash(schema)))
      throw DataError("checkpoint schema hash does not match its schema");
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint is malformed: ") + e.what());
  }
  const bool with_generator = !dims.generator.empty();
  ck.params = model::init_params(dims, schema, 0, with_generator);
  const auto& tensors = j.at("tensors");
  std::size_t used = 0;
  read_block(ck.params.encoder, tensors, used);
  read_block(ck.params.predictor, tensors, used);
  read_block(ck.params.generator, tensors, used);
  if (used != tensors.size()) throw DataError("checkpoint holds tensors not used by its dims");
  return ck;
}

void save(const std::filesystem::path& path, const model::ModelParams& params, training::Mode mode) {
  const std::string text = to_json(params, mode);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  out << text;
  if (!out) throw Error("failed writing checkpoint " + path.string());
}

Checkpoint load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

}  // namespace recourse::checkpoint
