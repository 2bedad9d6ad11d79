#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "recourse/autodiff.hpp"
#include "recourse/data.hpp"
#include "recourse/random.hpp"

namespace recourse::model {

// Layer widths for the three blocks.
//   encoder   [input, hidden..., latent]   every layer followed by the activation
//   predictor [latent, hidden...]          then a width-1 sigmoid output layer
//   generator [latent, hidden...]          input is latent plus the predicted
//                                          probability; output is encoded_dim wide
struct Dims {
  std::vector<std::size_t> encoder;
  std::vector<std::size_t> predictor;
  std::vector<std::size_t> generator;

  bool operator==(const Dims&) const = default;
};

inline constexpr double kLeakySlope = 0.01;

// Training-time options for a forward pass.
struct ForwardOptions {
  double dropout = 0.0;
  Rng* rng = nullptr;  // required when dropout > 0
};

// Shape information of the joint predictor / counterfactual-generator network,
// independent of any particular weights.
class Architecture {
 public:
  Architecture() = default;
  Architecture(Dims dims, const data::FeatureSchema& schema);

  const Dims& dims() const { return dims_; }
  std::size_t input_dim() const { return input_dim_; }
  const std::vector<ad::ColumnSpan>& group_spans() const { return spans_; }
  const Matrix& continuous_mask() const { return continuous_mask_; }

  // Number of tensors at the front of theta_f that belong to the encoder.
  std::size_t encoder_tensors() const { return 2 * (dims_.encoder.size() - 1); }

  // Probability of class 1, shape [rows, 1].
  ad::Value predict(const ad::ParamBlock& theta_f, const ad::Value& x, const ForwardOptions& opts = {}) const;

  struct Output {
    ad::Value prob;  // [rows, 1]
    ad::Value cf;    // [rows, input_dim]
  };
  // One encoder pass feeding both heads.
  Output forward(const ad::ParamBlock& theta_f, const ad::ParamBlock& theta_g, const ad::Value& x,
                 const ForwardOptions& opts = {}) const;

 private:
  ad::Value encode(std::span<const ad::Value> tensors, const ad::Value& x, const ForwardOptions& opts) const;
  ad::Value head(std::span<const ad::Value> tensors, const ad::Value& z, const ForwardOptions& opts) const;

  Dims dims_;
  std::size_t input_dim_ = 0;
  std::vector<ad::ColumnSpan> spans_;
  Matrix continuous_mask_;
};

struct ModelParams {
  Architecture arch;
  data::FeatureSchema schema;
  ad::ParamBlock encoder;    // theta_h
  ad::ParamBlock predictor;  // theta_m
  ad::ParamBlock generator;  // theta_g; empty for predictor-only models

  // theta_f = {theta_h, theta_m}
  ad::ParamBlock theta_f() const { return ad::ParamBlock::concat(encoder, predictor); }
  void set_theta_f(const ad::ParamBlock& theta_f);
  bool has_generator() const { return !generator.empty(); }
};

// Uniform fan-in initialization: W, b ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
ModelParams init_params(const Dims& dims, const data::FeatureSchema& schema, std::uint64_t seed,
                        bool with_generator = true);

// Convenience wrappers on constant inputs; no graph is recorded.
std::vector<double> predict_proba(const ModelParams& params, const Matrix& x);
std::vector<double> predict_proba(const Architecture& arch, const ad::ParamBlock& theta_f, const Matrix& x);
Matrix generate_cf(const ModelParams& params, const Matrix& x);

inline int predicted_class(double p) { return p >= 0.5 ? 1 : 0; }

struct Losses {
  ad::Value prediction;  // L1
  ad::Value validity;    // L2
  ad::Value proximity;   // L3
};

// L1 = MSE(f(x; theta_f), y)
// L2 = MSE(f(x_cf; validity_model), 1 - f(x; theta_f)), target detached
// L3 = MSE(x, x_cf)
Losses compute_losses(const Architecture& arch, const ad::ParamBlock& theta_f, const ad::ParamBlock& validity_model,
                      const ad::Value& x, const ad::Value& y, const ad::Value& x_cf, bool hard_target = false);

// 1 - f(x; theta_f) as a constant; rounded first when `hard` is set.
ad::Value validity_target(const Architecture& arch, const ad::ParamBlock& theta_f, const ad::Value& x, bool hard);

// Column vector [n, 1] from labels.
ad::Value column(const std::vector<double>& values);

}  // namespace recourse::model
