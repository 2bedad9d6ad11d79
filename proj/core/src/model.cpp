#include "recourse/model.hpp"

#include <cmath>
#include <string>

#include "recourse/errors.hpp"

namespace recourse::model {

using ad::ParamBlock;
using ad::Value;

namespace {

std::string widths(const std::vector<std::size_t>& w) {
  std::string s = "[";
  for (std::size_t i = 0; i < w.size(); ++i) s += (i ? "," : "") + std::to_string(w[i]);
  return s + "]";
}

Value linear(const Value& x, const Value& w, const Value& b) { return ad::add_row(ad::matmul(x, w), b); }

Value dropout(const Value& h, const ForwardOptions& opts) {
  if (opts.dropout <= 0.0) return h;
  if (!opts.rng) throw Error("dropout requested without a random generator");
  const double keep = 1.0 - opts.dropout;
  Matrix mask(h.rows(), h.cols());
  for (auto& m : mask.data) m = uniform(*opts.rng, 0.0, 1.0) < keep ? 1.0 / keep : 0.0;
  return ad::mul(h, Value::constant(std::move(mask)));
}

Value hidden(const Value& x, const Value& w, const Value& b, const ForwardOptions& opts) {
  return dropout(ad::leaky_relu(linear(x, w, b), kLeakySlope), opts);
}

void add_layer(ParamBlock& block, const std::string& prefix, std::size_t index, std::size_t in, std::size_t out,
               Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  Matrix w(in, out), b(1, out);
  for (auto& v : w.data) v = uniform(rng, -bound, bound);
  for (auto& v : b.data) v = uniform(rng, -bound, bound);
  const std::string base = prefix + "." + std::to_string(index);
  block.add(base + ".weight", Value::variable(std::move(w)));
  block.add(base + ".bias", Value::variable(std::move(b)));
}

Value broadcast_constant(const Matrix& row, std::size_t rows) {
  Matrix m(rows, row.cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < row.cols; ++j) m(i, j) = row(0, j);
  return Value::constant(std::move(m));
}

}  // namespace

Architecture::Architecture(Dims dims, const data::FeatureSchema& schema)
    : dims_(std::move(dims)),
      input_dim_(schema.encoded_dim()),
      spans_(schema.group_spans()),
      continuous_mask_(schema.continuous_mask()) {
  if (dims_.encoder.size() < 2) throw ShapeError("encoder dims need at least input and output widths");
  if (dims_.encoder.front() != input_dim_) {
    throw ShapeError("encoder input width " + std::to_string(dims_.encoder.front()) +
                     " does not match encoded feature width " + std::to_string(input_dim_));
  }
  const std::size_t latent = dims_.encoder.back();
  if (dims_.predictor.empty() || dims_.predictor.front() != latent)
    throw ShapeError("predictor dims " + widths(dims_.predictor) + " must start at encoder output width " +
                     std::to_string(latent));
  if (!dims_.generator.empty() && dims_.generator.front() != latent)
    throw ShapeError("generator dims " + widths(dims_.generator) + " must start at encoder output width " +
                     std::to_string(latent));
  for (auto w : dims_.encoder)
    if (w == 0) throw ShapeError("encoder dims contain a zero width");
  for (auto w : dims_.predictor)
    if (w == 0) throw ShapeError("predictor dims contain a zero width");
  for (auto w : dims_.generator)
    if (w == 0) throw ShapeError("generator dims contain a zero width");
}

Value Architecture::encode(std::span<const Value> t, const Value& x, const ForwardOptions& opts) const {
  Value h = x;
  for (std::size_t i = 0; i + 1 < dims_.encoder.size(); ++i) h = hidden(h, t[2 * i], t[2 * i + 1], opts);
  return h;
}

Value Architecture::head(std::span<const Value> t, const Value& z, const ForwardOptions& opts) const {
  Value h = z;
  const std::size_t hidden_layers = dims_.predictor.size() - 1;
  for (std::size_t i = 0; i < hidden_layers; ++i) h = hidden(h, t[2 * i], t[2 * i + 1], opts);
  return ad::sigmoid(linear(h, t[2 * hidden_layers], t[2 * hidden_layers + 1]));
}

Value Architecture::predict(const ParamBlock& theta_f, const Value& x, const ForwardOptions& opts) const {
  const std::size_t expected = encoder_tensors() + 2 * dims_.predictor.size();
  if (theta_f.size() != expected)
    throw ShapeError("predict: expected " + std::to_string(expected) + " tensors in theta_f, got " +
                     std::to_string(theta_f.size()));
  auto values = theta_f.values();
  Value z = encode(values.first(encoder_tensors()), x, opts);
  return head(values.subspan(encoder_tensors()), z, opts);
}

Architecture::Output Architecture::forward(const ParamBlock& theta_f, const ParamBlock& theta_g, const Value& x,
                                           const ForwardOptions& opts) const {
  if (dims_.generator.empty()) throw ShapeError("forward: this architecture has no generator");
  const std::size_t expected_g = 2 * dims_.generator.size();
  if (theta_g.size() != expected_g)
    throw ShapeError("forward: expected " + std::to_string(expected_g) + " generator tensors, got " +
                     std::to_string(theta_g.size()));
  auto values = theta_f.values();
  Value z = encode(values.first(encoder_tensors()), x, opts);
  Value p = head(values.subspan(encoder_tensors()), z, opts);

  auto g = theta_g.values();
  Value h = ad::concat_cols(z, p);
  const std::size_t hidden_layers = dims_.generator.size() - 1;
  for (std::size_t i = 0; i < hidden_layers; ++i) h = hidden(h, g[2 * i], g[2 * i + 1], opts);
  Value raw = linear(h, g[2 * hidden_layers], g[2 * hidden_layers + 1]);

  // Sigmoid on continuous slots, softmax within each categorical group.
  Value cont = ad::mul(ad::sigmoid(raw), broadcast_constant(continuous_mask_, raw.rows()));
  Value cf = spans_.empty() ? cont : ad::add(cont, ad::group_softmax(raw, spans_));
  return {p, cf};
}

void ModelParams::set_theta_f(const ParamBlock& theta_f) {
  auto [enc, pred] = theta_f.split(arch.encoder_tensors());
  encoder = std::move(enc);
  predictor = std::move(pred);
}

ModelParams init_params(const Dims& dims, const data::FeatureSchema& schema, std::uint64_t seed,
                        bool with_generator) {
  ModelParams p;
  Dims d = dims;
  if (!with_generator) d.generator.clear();
  p.arch = Architecture(d, schema);
  p.schema = schema;
  Rng rng(derive_seed(seed, stream::kInit));
  for (std::size_t i = 0; i + 1 < d.encoder.size(); ++i)
    add_layer(p.encoder, "encoder", i, d.encoder[i], d.encoder[i + 1], rng);
  for (std::size_t i = 0; i + 1 < d.predictor.size(); ++i)
    add_layer(p.predictor, "predictor", i, d.predictor[i], d.predictor[i + 1], rng);
  add_layer(p.predictor, "predictor", d.predictor.size() - 1, d.predictor.back(), 1, rng);
  if (with_generator && !d.generator.empty()) {
    std::size_t in = d.generator.front() + 1;
    for (std::size_t i = 0; i + 1 < d.generator.size(); ++i) {
      add_layer(p.generator, "generator", i, in, d.generator[i + 1], rng);
      in = d.generator[i + 1];
    }
    add_layer(p.generator, "generator", d.generator.size() - 1, in, schema.encoded_dim(), rng);
  }
  return p;
}

std::vector<double> predict_proba(const Architecture& arch, const ParamBlock& theta_f, const Matrix& x) {
  ad::NoGradGuard guard;
  Value p = arch.predict(theta_f, Value::constant(x));
  return {p.data().begin(), p.data().end()};
}

std::vector<double> predict_proba(const ModelParams& params, const Matrix& x) {
  return predict_proba(params.arch, params.theta_f(), x);
}

Matrix generate_cf(const ModelParams& params, const Matrix& x) {
  ad::NoGradGuard guard;
  return params.arch.forward(params.theta_f(), params.generator, Value::constant(x)).cf.matrix();
}

Value validity_target(const Architecture& arch, const ParamBlock& theta_f, const Value& x, bool hard) {
  ad::NoGradGuard guard;
  Matrix p = arch.predict(theta_f, x.detach()).matrix();
  for (auto& v : p.data) v = 1.0 - (hard ? static_cast<double>(predicted_class(v)) : v);
  return Value::constant(std::move(p));
}

Losses compute_losses(const Architecture& arch, const ParamBlock& theta_f, const ParamBlock& validity_model,
                      const Value& x, const Value& y, const Value& x_cf, bool hard_target) {
  Losses out;
  out.prediction = ad::mse(arch.predict(theta_f, x), y);
  out.validity = ad::mse(arch.predict(validity_model, x_cf), validity_target(arch, theta_f, x, hard_target));
  out.proximity = ad::mse(x, x_cf);
  return out;
}

Value column(const std::vector<double>& values) { return Value::constant(Matrix(values.size(), 1, values)); }

}  // namespace recourse::model
