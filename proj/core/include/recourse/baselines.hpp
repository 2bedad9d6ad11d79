#pragma once

#include <functional>
#include <span>
#include <vector>

#include "recourse/autodiff.hpp"
#include "recourse/matrix.hpp"
#include "recourse/model.hpp"

namespace recourse::baselines {

struct VanillaCfConfig {
  int steps = 1000;
  double lr = 0.05;
  double lambda = 0.1;
};

struct VanillaCfResult {
  Matrix cf;        // final iterate, continuous slots in [0,1], groups on the simplex
  Matrix hardened;  // groups rounded to one-hot
};

using Predictor = std::function<ad::Value(const ad::Value&)>;

// Post-hoc counterfactual search against a frozen predictor: gradient descent
// from x_cf = x on MSE(f(x_cf), 1 - f(x)) + lambda * MSE(x, x_cf), projecting
// onto the feasible encoded box after every step. `spans` are the categorical
// groups (projected onto the simplex); every other column is clamped to [0,1].
VanillaCfResult vanilla_cf(const Matrix& x, const Predictor& predict, const std::vector<ad::ColumnSpan>& spans,
                           const VanillaCfConfig& config);

VanillaCfResult vanilla_cf(const Matrix& x, const model::Architecture& arch, const ad::ParamBlock& theta_f,
                           const VanillaCfConfig& config);

// Euclidean projection of v onto {w >= 0, sum w = 1}.
void project_simplex(std::span<double> v);

}  // namespace recourse::baselines
