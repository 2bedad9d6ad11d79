#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "recourse/data.hpp"
#include "recourse/model.hpp"
#include "recourse/training.hpp"
#include "recourse/vds.hpp"

namespace recourse::eval {

// Fraction of rows whose counterfactual receives the opposite class from the
// input under `theta_f`.
double validity(const Matrix& cf, const Matrix& x, const model::Architecture& arch, const ad::ParamBlock& theta_f);

// Mean over rows of the fraction of `shifted` models under which the
// counterfactual receives the opposite of the original model's class for x.
double robust_validity(const Matrix& cf, const Matrix& x, const model::Architecture& arch,
                       const ad::ParamBlock& theta_f, std::span<const ad::ParamBlock> shifted);

// Mean over rows of the l1 distance in encoded space.
double proximity(const Matrix& cf, const Matrix& x);

struct MetricsRecord {
  std::string subset;
  double validity = 0.0;
  double robust_validity = 0.0;
  double proximity = 0.0;
  double accuracy = 0.0;
  std::size_t n_instances = 0;
  std::size_t n_shifted_models = 0;
  // Population standard deviations across subsets (aggregates only).
  double validity_std = 0.0;
  double robust_validity_std = 0.0;
  double proximity_std = 0.0;
  double accuracy_std = 0.0;
};

// Mean and std across per-subset records; counts are summed.
MetricsRecord aggregate(std::span<const MetricsRecord> per_subset);

enum class Method { kRoCourseNet, kCounterNet, kVanillaCf };

Method parse_method(std::string_view name);
std::string_view to_string(Method method);

struct ProtocolReport {
  Method method = Method::kRoCourseNet;
  std::string dataset;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::vector<MetricsRecord> per_subset;
  MetricsRecord aggregate;
};

// Predictor-only model per subset, trained on that subset's train split with
// the base config's dims, optimizer and epochs. Entry j serves as a shifted
// model for every subset other than j.
std::vector<model::ModelParams> train_shifted_models(const data::ShiftedDataset& ds,
                                                     const training::TrainConfig& config);

// Counterfactuals of `params` on `x`, hardened. Predictor-only models get
// VanillaCF counterfactuals.
Matrix counterfactuals(const model::ModelParams& params, const Matrix& x, const baselines::VanillaCfConfig& vanilla);

// Leave-one-subset-out evaluation: model i is trained on D_i train, produces
// counterfactuals for D_i test, and is scored against the shifted models of
// every other subset.
ProtocolReport loo_protocol(const data::ShiftedDataset& ds, const training::TrainConfig& config, Method method,
                            std::span<const model::ModelParams> shifted_models, const std::string& dataset_name = "");
ProtocolReport loo_protocol(const data::ShiftedDataset& ds, const training::TrainConfig& config, Method method,
                            const std::string& dataset_name = "");

struct SweepRow {
  int steps = 0;       // T
  double epsilon = 0;  // E
  vds::Norm norm = vds::Norm::kLinf;
  double robust_validity = 0.0;
  double proximity = 0.0;
  std::uint64_t seed = 0;
};

struct SweepOptions {
  std::vector<int> steps_grid;
  std::vector<double> epsilon_grid;
  vds::Norm norm = vds::Norm::kLinf;
  int unroll = 2;
  double eta = 0.003;
  std::size_t batch_size = 128;
  std::uint64_t seed = 0;
};

// Attacks the frozen model's predictor on (x, y) at every grid point and
// scores its counterfactuals against the shifted weights of each batch.
std::vector<SweepRow> attack_sweep(const model::ModelParams& params, const Matrix& x, const std::vector<double>& y,
                                   const Matrix& cf, const SweepOptions& options);

struct AblationRow {
  double max_epsilon = 0.0;
  std::uint64_t seed = 0;
  double linear_robust_validity = 0.0;
  double static_robust_validity = 0.0;
  double difference = 0.0;  // linear - static
};

struct AblationSummary {
  double max_epsilon = 0.0;
  double mean_difference = 0.0;
  double std_difference = 0.0;
  double mean_linear = 0.0;
  double mean_static = 0.0;
};

struct AblationReport {
  std::vector<AblationRow> rows;
  std::vector<AblationSummary> summary;
};

// Matched pairs of robust trainings that differ only in the epsilon schedule,
// scored by protocol robust validity.
AblationReport scheduler_ablation(const data::ShiftedDataset& ds, const training::TrainConfig& config,
                                  std::span<const double> epsilon_grid);
AblationReport summarize(std::vector<AblationRow> rows);

}  // namespace recourse::eval
