#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "recourse/baselines.hpp"
#include "recourse/model.hpp"
#include "recourse/optim.hpp"
#include "recourse/vds.hpp"

namespace recourse::training {

enum class Mode {
  kRobust,         // tri-level training against the data-shift attacker
  kCounterNet,     // same block-wise descent, validity scored on the unshifted predictor
  kPredictorOnly,  // encoder + predictor only, prediction loss only
};

enum class EpsilonSchedule { kLinear, kStatic };

Mode parse_mode(std::string_view name);
std::string_view to_string(Mode mode);
EpsilonSchedule parse_schedule(std::string_view name);
std::string_view to_string(EpsilonSchedule schedule);

struct TrainConfig {
  int epochs = 50;
  std::size_t batch_size = 128;
  double lr = 0.003;
  double lambda1 = 1.0;
  double lambda2 = 0.2;
  double lambda3 = 0.1;
  double max_epsilon = 0.1;  // E
  int attack_steps = 13;     // T
  int unroll = 2;            // K
  vds::Norm norm = vds::Norm::kLinf;
  optim::Kind optimizer = optim::Kind::kAdam;
  double dropout = 0.0;
  EpsilonSchedule schedule = EpsilonSchedule::kLinear;
  Mode mode = Mode::kRobust;
  std::uint64_t seed = 0;
  double test_fraction = 0.2;
  model::Dims dims;
  bool hard_validity_target = false;
  bool first_order = false;
  baselines::VanillaCfConfig vanilla;

  void validate() const;
};

// Attacker radius for `epoch` in 1..epochs.
double epsilon_schedule(int epoch, int epochs, double max_epsilon,
                        EpsilonSchedule schedule = EpsilonSchedule::kLinear);

struct StepMetrics {
  double l1 = 0.0;
  double l2 = 0.0;
  double l3 = 0.0;
  double epsilon = 0.0;
};

// Owns the optimizer state for one model and runs block-wise coordinate
// descent steps on it:
//   1. update theta_f on lambda1 * L1
//   2. (robust mode) attack the updated theta_f, get shifted weights theta'_f
//   3. update theta_g on lambda2 * L2(theta*) + lambda3 * L3, theta* frozen
class Trainer {
 public:
  Trainer(model::ModelParams& params, const TrainConfig& config);

  StepMetrics step(const Matrix& x, const std::vector<double>& y, double epsilon, int epoch = 0,
                   std::size_t batch = 0);

  const model::ModelParams& params() const { return params_; }

 private:
  model::ModelParams& params_;
  TrainConfig config_;
  std::unique_ptr<optim::Optimizer> opt_f_;
  std::unique_ptr<optim::Optimizer> opt_g_;
  Rng dropout_rng_;
};

struct EpochRecord {
  int epoch = 0;
  double epsilon = 0.0;
  double l1 = 0.0;
  double l2 = 0.0;
  double l3 = 0.0;
  double train_accuracy = 0.0;
};

struct TrainResult {
  model::ModelParams params;
  std::vector<EpochRecord> log;
};

TrainResult train(const Matrix& x, const std::vector<double>& y, const data::FeatureSchema& schema,
                  const TrainConfig& config);

// One JSON object per line.
std::string log_jsonl(const std::vector<EpochRecord>& log);

double accuracy(const std::vector<double>& prob, const std::vector<double>& y);

}  // namespace recourse::training
