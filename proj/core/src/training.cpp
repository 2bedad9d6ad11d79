#include "recourse/training.hpp"

#include <cmath>
#include <sstream>

#include "json.hpp"
#include "recourse/errors.hpp"

namespace recourse::training {

using ad::ParamBlock;
using ad::Value;

Mode parse_mode(std::string_view name) {
  if (name == "robust") return Mode::kRobust;
  if (name == "counternet_baseline") return Mode::kCounterNet;
  if (name == "predictor_only") return Mode::kPredictorOnly;
  throw ConfigError("unknown mode '" + std::string(name) +
                    "' (expected robust, counternet_baseline or predictor_only)");
}

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::kRobust:
      return "robust";
    case Mode::kCounterNet:
      return "counternet_baseline";
    case Mode::kPredictorOnly:
      return "predictor_only";
  }
  return "robust";
}

EpsilonSchedule parse_schedule(std::string_view name) {
  if (name == "linear") return EpsilonSchedule::kLinear;
  if (name == "static") return EpsilonSchedule::kStatic;
  throw ConfigError("unknown epsilon_schedule '" + std::string(name) + "' (expected linear or static)");
}

std::string_view to_string(EpsilonSchedule schedule) {
  return schedule == EpsilonSchedule::kLinear ? "linear" : "static";
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
  if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0) || !(lambda3 >= 0.0)) throw ConfigError("lambdas must be >= 0");
  if (!(max_epsilon >= 0.0)) throw ConfigError("E must be >= 0");
  if (attack_steps < 0) throw ConfigError("T must be >= 0");
  if (unroll < 1) throw ConfigError("K must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("test_fraction must lie in (0, 1)");
  if (vanilla.steps < 0) throw ConfigError("vanillacf steps must be >= 0");
  if (!(vanilla.lr > 0.0)) throw ConfigError("vanillacf lr must be > 0");
  if (!(vanilla.lambda >= 0.0)) throw ConfigError("vanillacf lambda must be >= 0");
}

double epsilon_schedule(int epoch, int epochs, double max_epsilon, EpsilonSchedule schedule) {
  if (schedule == EpsilonSchedule::kStatic) return max_epsilon;
  return max_epsilon * static_cast<double>(epoch) / static_cast<double>(epochs);
}

double accuracy(const std::vector<double>& prob, const std::vector<double>& y) {
  if (y.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < y.size(); ++i) hits += model::predicted_class(prob[i]) == static_cast<int>(y[i]);
  return static_cast<double>(hits) / static_cast<double>(y.size());
}

Trainer::Trainer(model::ModelParams& params, const TrainConfig& config)
    : params_(params),
      config_(config),
      opt_f_(optim::make(config.optimizer, config.lr)),
      opt_g_(optim::make(config.optimizer, config.lr)),
      dropout_rng_(derive_seed(config.seed, stream::kDropout)) {
  config_.validate();
  if (config_.mode != Mode::kPredictorOnly && !params_.has_generator())
    throw ConfigError("mode '" + std::string(to_string(config_.mode)) + "' needs a model with a generator");
}

StepMetrics Trainer::step(const Matrix& x, const std::vector<double>& y, double epsilon, int epoch,
                          std::size_t batch) {
  const auto& arch = params_.arch;
  const model::ForwardOptions opts{config_.dropout, &dropout_rng_};
  const Value xv = Value::constant(x);
  const Value yv = model::column(y);
  const bool joint = config_.mode != Mode::kPredictorOnly;

  auto check = [&](const StepMetrics& m) {
    if (!std::isfinite(m.l1) || !std::isfinite(m.l2) || !std::isfinite(m.l3)) {
      std::ostringstream msg;
      msg << "non-finite loss at epoch " << epoch << ", batch " << batch << ": L1=" << m.l1 << " L2=" << m.l2
          << " L3=" << m.l3;
      throw NumericError(msg.str());
    }
  };

  StepMetrics metrics;
  metrics.epsilon = epsilon;

  // (1) prediction loss; only theta_f receives a gradient.
  ParamBlock theta_f = params_.theta_f();
  Matrix cf_snapshot;
  Value l1;
  if (joint) {
    auto out = arch.forward(theta_f, params_.generator, xv, opts);
    l1 = ad::mse(out.prob, yv);
    cf_snapshot = out.cf.matrix();
  } else {
    l1 = ad::mse(arch.predict(theta_f, xv, opts), yv);
  }
  metrics.l1 = l1.item();
  check(metrics);
  auto g1 = ad::grad(ad::scale(l1, config_.lambda1), theta_f);
  opt_f_->apply(theta_f, g1);
  params_.set_theta_f(theta_f);
  if (!joint) return metrics;

  // (2) worst-case shifted predictor for the current theta_f.
  ParamBlock validity_model = theta_f.detached();
  if (config_.mode == Mode::kRobust) {
    vds::AttackConfig attack;
    attack.epsilon = epsilon;
    attack.steps = config_.attack_steps;
    attack.unroll = config_.unroll;
    attack.eta = config_.lr;
    attack.norm = config_.norm;
    attack.first_order = config_.first_order;
    attack.hard_target = config_.hard_validity_target;
    attack.seed = derive_seed(derive_seed(config_.seed, stream::kAttack),
                              (static_cast<std::uint64_t>(epoch) << 32) ^ static_cast<std::uint64_t>(batch));
    auto predict = [&arch](const ParamBlock& p, const Value& v) { return arch.predict(p, v); };
    auto outcome = vds::virtual_data_shift(x, y, cf_snapshot, theta_f.detached(), attack, predict);
    validity_model = outcome.shifted.detached();
  }

  // (3) counterfactual quality; only theta_g receives a gradient.
  ParamBlock theta_g = params_.generator;
  auto out = arch.forward(theta_f.detached(), theta_g, xv, opts);
  Value target = model::validity_target(arch, theta_f, xv, config_.hard_validity_target);
  Value l2 = ad::mse(arch.predict(validity_model, out.cf), target);
  Value l3 = ad::mse(xv, out.cf);
  metrics.l2 = l2.item();
  metrics.l3 = l3.item();
  check(metrics);
  if (config_.lambda2 != 0.0 || config_.lambda3 != 0.0) {
    Value loss = ad::add(ad::scale(l2, config_.lambda2), ad::scale(l3, config_.lambda3));
    auto g3 = ad::grad(loss, theta_g);
    opt_g_->apply(theta_g, g3);
    params_.generator = std::move(theta_g);
  }
  return metrics;
}

TrainResult train(const Matrix& x, const std::vector<double>& y, const data::FeatureSchema& schema,
                  const TrainConfig& config) {
  config.validate();
  if (x.rows == 0 || x.rows != y.size()) throw DataError("training set is empty or labels do not match rows");

  TrainResult result;
  result.params = model::init_params(config.dims, schema, config.seed, config.mode != Mode::kPredictorOnly);
  Trainer trainer(result.params, config);
  Rng shuffle_rng(derive_seed(config.seed, stream::kShuffle));

  std::vector<std::size_t> order(x.rows);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const double eps = epsilon_schedule(epoch, config.epochs, config.max_epsilon, config.schedule);
    shuffle(order, shuffle_rng);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.epsilon = eps;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::span<const std::size_t> idx(order.data() + start, end - start);
      Matrix xb = gather_rows(x, idx);
      std::vector<double> yb;
      yb.reserve(idx.size());
      for (auto i : idx) yb.push_back(y[i]);
      auto m = trainer.step(xb, yb, eps, epoch, batch_index);
      const double w = static_cast<double>(idx.size()) / static_cast<double>(order.size());
      rec.l1 += w * m.l1;
      rec.l2 += w * m.l2;
      rec.l3 += w * m.l3;
    }
    rec.train_accuracy = accuracy(model::predict_proba(result.params, x), y);
    result.log.push_back(rec);
  }
  return result;
}

std::string log_jsonl(const std::vector<EpochRecord>& log) {
  std::string out;
  for (const auto& r : log) {
    nlohmann::ordered_json j;
    j["epoch"] = r.epoch;
    j["epsilon"] = r.epsilon;
    j["L1"] = r.l1;
    j["L2"] = r.l2;
    j["L3"] = r.l3;
    j["train_accuracy"] = r.train_accuracy;
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace recourse::training
