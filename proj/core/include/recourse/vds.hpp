#pragma once

// Virtual data shift attack: searches per-row input shifts delta inside a
// norm ball such that a predictor briefly retrained on (x + delta, y)
// invalidates a fixed set of counterfactuals.

#include <cstdint>
#include <functional>
#include <optional>
#include <string_view>

#include "recourse/autodiff.hpp"
#include "recourse/matrix.hpp"

namespace recourse::vds {

enum class Norm { kLinf, kL2 };

Norm parse_norm(std::string_view name);
std::string_view to_string(Norm norm);

struct AttackConfig {
  double epsilon = 0.1;
  int steps = 13;   // outer attack iterations T
  int unroll = 2;   // inner gradient steps K per outer iteration
  double eta = 0.003;  // inner learning rate
  std::optional<double> alpha;  // defaults to 2.5 * epsilon / steps
  Norm norm = Norm::kLinf;
  std::uint64_t seed = 0;
  bool first_order = false;  // detach inner gradients
  bool hard_target = false;  // round 1 - f(x) before using it as the target

  double step_size() const;
  void validate() const;
};

struct AttackOutcome {
  Matrix delta;              // [rows, features]
  ad::ParamBlock shifted;    // theta'_f as leaf variables
};

// Maps (theta_f, x) to class-1 probabilities [rows, 1].
using PredictFn = std::function<ad::Value(const ad::ParamBlock&, const ad::Value&)>;

// Row-wise projection onto the feasible region: coordinate clamp for linf,
// radial rescale of rows longer than epsilon for l2.
Matrix project(Matrix delta, double epsilon, Norm norm);
bool feasible(const Matrix& delta, double epsilon, Norm norm, double tol = 1e-12);

struct UnrollResult {
  Matrix delta_grad;        // d(outer loss)/d(delta)
  ad::ParamBlock shifted;   // theta' after the K inner steps (detached)
  double outer_loss = 0.0;
};

// One outer iteration without the delta update: starting from `start`, takes
// `unroll` plain gradient steps on MSE(f(x + delta), y), then differentiates
// MSE(f(x_cf; theta'), target) with respect to delta through all K steps.
UnrollResult unrolled_delta_gradient(const ad::ParamBlock& start, const Matrix& delta, const Matrix& x,
                                     const Matrix& y, const Matrix& x_cf, const Matrix& target, int unroll,
                                     double eta, const PredictFn& predict, bool first_order = false);

// The full attack. `theta_f` is not modified; x_cf is treated as constant.
// When `on_iteration` is set it sees delta after every projection.
AttackOutcome virtual_data_shift(const Matrix& x, const std::vector<double>& y, const Matrix& x_cf,
                                 const ad::ParamBlock& theta_f, const AttackConfig& config, const PredictFn& predict,
                                 const std::function<void(int, const Matrix&)>& on_iteration = {});

}  // namespace recourse::vds
