#include "recourse/vds.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "recourse/errors.hpp"
#include "recourse/random.hpp"

namespace recourse::vds {

using ad::ParamBlock;
using ad::Value;

Norm parse_norm(std::string_view name) {
  if (name == "linf") return Norm::kLinf;
  if (name == "l2") return Norm::kL2;
  throw ConfigError("unknown norm '" + std::string(name) + "' (expected linf or l2)");
}

std::string_view to_string(Norm norm) { return norm == Norm::kLinf ? "linf" : "l2"; }

double AttackConfig::step_size() const {
  if (alpha) return *alpha;
  if (steps <= 0) return 0.0;
  return 2.5 * epsilon / static_cast<double>(steps);
}

void AttackConfig::validate() const {
  if (!(epsilon >= 0.0)) throw ConfigError("attack epsilon must be >= 0");
  if (steps < 0) throw ConfigError("attack steps T must be >= 0");
  if (unroll < 1) throw ConfigError("unroll steps K must be >= 1");
  if (!(eta > 0.0)) throw ConfigError("unroll learning rate must be > 0");
  if (alpha && !(*alpha >= 0.0)) throw ConfigError("attack step size must be >= 0");
}

Matrix project(Matrix delta, double epsilon, Norm norm) {
  if (norm == Norm::kLinf) {
    for (auto& v : delta.data) v = std::clamp(v, -epsilon, epsilon);
    return delta;
  }
  for (std::size_t r = 0; r < delta.rows; ++r) {
    auto row = delta.row(r);
    double sq = 0.0;
    for (double v : row) sq += v * v;
    const double n = std::sqrt(sq);
    if (n <= epsilon) continue;
    double k = epsilon / n;
    auto scaled_norm = [&row](double f) {
      double acc = 0.0;
      for (double v : row) acc += (v * f) * (v * f);
      return std::sqrt(acc);
    };
    while (scaled_norm(k) > epsilon) k = std::nextafter(k, 0.0);
    for (auto& v : row) v *= k;
  }
  return delta;
}

bool feasible(const Matrix& delta, double epsilon, Norm norm, double tol) {
  for (std::size_t r = 0; r < delta.rows; ++r) {
    auto row = delta.row(r);
    if (norm == Norm::kLinf) {
      for (double v : row)
        if (std::abs(v) > epsilon + tol) return false;
    } else {
      double sq = 0.0;
      for (double v : row) sq += v * v;
      if (std::sqrt(sq) > epsilon + tol) return false;
    }
  }
  return true;
}

UnrollResult unrolled_delta_gradient(const ParamBlock& start, const Matrix& delta, const Matrix& x, const Matrix& y,
                                     const Matrix& x_cf, const Matrix& target, int unroll, double eta,
                                     const PredictFn& predict, bool first_order) {
  Value d = Value::variable(delta);
  Value shifted_x = ad::add(Value::constant(x), d);
  Value labels = Value::constant(y);

  ParamBlock theta = start.as_variables();
  for (int k = 0; k < unroll; ++k) {
    Value inner = ad::mse(predict(theta, shifted_x), labels);
    theta = ad::functional_step(theta, inner, eta, first_order);
  }
  Value outer = ad::mse(predict(theta, Value::constant(x_cf)), Value::constant(target));
  Value g = ad::grad(outer, d);
  return {g.matrix(), theta.detached(), outer.item()};
}

AttackOutcome virtual_data_shift(const Matrix& x, const std::vector<double>& y, const Matrix& x_cf,
                                 const ParamBlock& theta_f, const AttackConfig& config, const PredictFn& predict,
                                 const std::function<void(int, const Matrix&)>& on_iteration) {
  config.validate();
  if (x.rows != y.size() || x.rows != x_cf.rows || x.cols != x_cf.cols)
    throw ShapeError("virtual_data_shift: x, y and x_cf must have matching rows and widths");

  Rng rng(derive_seed(config.seed, stream::kAttack));
  Matrix delta(x.rows, x.cols);
  for (auto& v : delta.data) v = uniform(rng, -config.epsilon, config.epsilon);
  if (config.norm == Norm::kL2) delta = project(std::move(delta), config.epsilon, config.norm);

  Matrix target;
  {
    ad::NoGradGuard guard;
    target = predict(theta_f.detached(), Value::constant(x)).matrix();
  }
  for (auto& v : target.data) v = 1.0 - (config.hard_target ? (v >= 0.5 ? 1.0 : 0.0) : v);
  const Matrix labels(y.size(), 1, y);
  const double alpha = config.step_size();

  ParamBlock shifted = theta_f.detached();
  for (int i = 0; i < config.steps; ++i) {
    UnrollResult r = unrolled_delta_gradient(shifted, delta, x, labels, x_cf, target, config.unroll, config.eta,
                                             predict, config.first_order);
    shifted = std::move(r.shifted);
    if (config.norm == Norm::kLinf) {
      for (std::size_t j = 0; j < delta.size(); ++j) {
        const double g = r.delta_grad.data[j];
        delta.data[j] += alpha * static_cast<double>((g > 0.0) - (g < 0.0));
      }
    } else {
      for (std::size_t row = 0; row < delta.rows; ++row) {
        auto grow = r.delta_grad.row(row);
        double sq = 0.0;
        for (double g : grow) sq += g * g;
        const double n = std::sqrt(sq);
        if (n == 0.0) continue;
        auto drow = delta.row(row);
        for (std::size_t c = 0; c < drow.size(); ++c) drow[c] += alpha * grow[c] / n;
      }
    }
    delta = project(std::move(delta), config.epsilon, config.norm);
    if (on_iteration) on_iteration(i, delta);
  }
  return {std::move(delta), shifted.as_variables()};
}

}  // namespace recourse::vds
