#include "recourse/baselines.hpp"

#include <algorithm>
#include <vector>

#include "recourse/errors.hpp"

namespace recourse::baselines {

using ad::Value;

void project_simplex(std::span<double> v) {
  if (v.empty()) return;
  std::vector<double> u(v.begin(), v.end());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumsum = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    cumsum += u[j];
    const double t = (cumsum - 1.0) / static_cast<double>(j + 1);
    if (u[j] - t > 0.0) theta = t;
  }
  for (auto& x : v) x = std::max(x - theta, 0.0);
}

namespace {

void project_feasible(Matrix& cf, const std::vector<ad::ColumnSpan>& spans) {
  std::vector<bool> in_group(cf.cols, false);
  for (const auto& s : spans)
    for (std::size_t j = 0; j < s.length; ++j) in_group[s.start + j] = true;
  for (std::size_t i = 0; i < cf.rows; ++i) {
    auto row = cf.row(i);
    for (std::size_t j = 0; j < cf.cols; ++j)
      if (!in_group[j]) row[j] = std::clamp(row[j], 0.0, 1.0);
    for (const auto& s : spans) project_simplex(row.subspan(s.start, s.length));
  }
}

Matrix harden_spans(Matrix m, const std::vector<ad::ColumnSpan>& spans) {
  for (std::size_t i = 0; i < m.rows; ++i) {
    for (const auto& s : spans) {
      std::size_t best = 0;
      for (std::size_t j = 1; j < s.length; ++j)
        if (m(i, s.start + j) > m(i, s.start + best)) best = j;
      for (std::size_t j = 0; j < s.length; ++j) m(i, s.start + j) = j == best ? 1.0 : 0.0;
    }
  }
  return m;
}

}  // namespace

VanillaCfResult vanilla_cf(const Matrix& x, const Predictor& predict, const std::vector<ad::ColumnSpan>& spans,
                           const VanillaCfConfig& config) {
  const Value xv = Value::constant(x);
  Matrix target;
  {
    ad::NoGradGuard guard;
    target = predict(xv).matrix();
  }
  for (auto& v : target.data) v = 1.0 - v;
  const Value tv = Value::constant(std::move(target));
  const auto rows = static_cast<double>(x.rows);

  Matrix cf = x;
  for (int step = 0; step < config.steps && x.rows > 0; ++step) {
    Value c = Value::variable(cf);
    // Sum of per-row objectives, so each row descends on its own loss.
    Value loss = ad::scale(ad::add(ad::mse(predict(c), tv), ad::scale(ad::mse(xv, c), config.lambda)), rows);
    Value g = ad::grad(loss, c);
    auto gd = g.data();
    for (std::size_t i = 0; i < cf.data.size(); ++i) cf.data[i] -= config.lr * gd[i];
    project_feasible(cf, spans);
  }
  Matrix hard = harden_spans(cf, spans);
  return {std::move(cf), std::move(hard)};
}

VanillaCfResult vanilla_cf(const Matrix& x, const model::Architecture& arch, const ad::ParamBlock& theta_f,
                           const VanillaCfConfig& config) {
  if (x.cols != arch.input_dim())
    throw ShapeError("vanilla_cf: input has " + std::to_string(x.cols) + " columns, model expects " +
                     std::to_string(arch.input_dim()));
  const ad::ParamBlock frozen = theta_f.detached();
  return vanilla_cf(x, [&](const Value& v) { return arch.predict(frozen, v); }, arch.group_spans(), config);
}

}  // namespace recourse::baselines
