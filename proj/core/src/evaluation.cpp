#include "recourse/evaluation.hpp"

#include <cmath>
#include <numeric>

#include "recourse/errors.hpp"

namespace recourse::eval {

using ad::ParamBlock;

namespace {

std::vector<int> classes(const model::Architecture& arch, const ParamBlock& theta_f, const Matrix& x) {
  auto p = model::predict_proba(arch, theta_f, x);
  std::vector<int> c(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) c[i] = model::predicted_class(p[i]);
  return c;
}

void check_rows(const Matrix& cf, const Matrix& x, const char* what) {
  if (cf.rows != x.rows || cf.cols != x.cols)
    throw ShapeError(std::string(what) + ": counterfactuals and inputs differ in shape");
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

MeanStd mean_std(const std::vector<double>& v) {
  if (v.empty()) return {};
  const double n = static_cast<double>(v.size());
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return {m, std::sqrt(ss / n)};
}

training::TrainConfig with_mode(training::TrainConfig c, training::Mode mode) {
  c.mode = mode;
  return c;
}

}  // namespace

double validity(const Matrix& cf, const Matrix& x, const model::Architecture& arch, const ParamBlock& theta_f) {
  check_rows(cf, x, "validity");
  if (x.rows == 0) return 0.0;
  auto cx = classes(arch, theta_f, x);
  auto ccf = classes(arch, theta_f, cf);
  std::size_t valid = 0;
  for (std::size_t i = 0; i < cx.size(); ++i) valid += ccf[i] == 1 - cx[i];
  return static_cast<double>(valid) / static_cast<double>(x.rows);
}

double robust_validity(const Matrix& cf, const Matrix& x, const model::Architecture& arch, const ParamBlock& theta_f,
                       std::span<const ParamBlock> shifted) {
  check_rows(cf, x, "robust_validity");
  if (shifted.empty()) throw Error("robust_validity: at least one shifted model is required");
  if (x.rows == 0) return 0.0;
  auto cx = classes(arch, theta_f, x);
  std::vector<std::size_t> hits(x.rows, 0);
  for (const auto& model : shifted) {
    auto c = classes(arch, model, cf);
    for (std::size_t i = 0; i < c.size(); ++i) hits[i] += c[i] == 1 - cx[i];
  }
  double total = 0.0;
  for (auto h : hits) total += static_cast<double>(h) / static_cast<double>(shifted.size());
  return total / static_cast<double>(x.rows);
}

double proximity(const Matrix& cf, const Matrix& x) {
  check_rows(cf, x, "proximity");
  if (x.rows == 0) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < cf.data.size(); ++i) total += std::abs(cf.data[i] - x.data[i]);
  return total / static_cast<double>(x.rows);
}

MetricsRecord aggregate(std::span<const MetricsRecord> per_subset) {
  MetricsRecord out;
  out.subset = "aggregate";
  std::vector<double> v, rv, prox, acc;
  for (const auto& r : per_subset) {
    v.push_back(r.validity);
    rv.push_back(r.robust_validity);
    prox.push_back(r.proximity);
    acc.push_back(r.accuracy);
    out.n_instances += r.n_instances;
    out.n_shifted_models += r.n_shifted_models;
  }
  auto a = mean_std(v), b = mean_std(rv), c = mean_std(prox), d = mean_std(acc);
  out.validity = a.mean;
  out.validity_std = a.std;
  out.robust_validity = b.mean;
  out.robust_validity_std = b.std;
  out.proximity = c.mean;
  out.proximity_std = c.std;
  out.accuracy = d.mean;
  out.accuracy_std = d.std;
  return out;
}

Method parse_method(std::string_view name) {
  if (name == "rocoursenet") return Method::kRoCourseNet;
  if (name == "counternet") return Method::kCounterNet;
  if (name == "vanillacf") return Method::kVanillaCf;
  throw ConfigError("unknown method '" + std::string(name) + "' (expected rocoursenet, counternet or vanillacf)");
}

std::string_view to_string(Method method) {
  switch (method) {
    case Method::kRoCourseNet:
      return "rocoursenet";
    case Method::kCounterNet:
      return "counternet";
    case Method::kVanillaCf:
      return "vanillacf";
  }
  return "rocoursenet";
}

std::vector<model::ModelParams> train_shifted_models(const data::ShiftedDataset& ds,
                                                     const training::TrainConfig& config) {
  const auto cfg = with_mode(config, training::Mode::kPredictorOnly);
  std::vector<model::ModelParams> out;
  for (std::size_t j = 0; j < ds.k(); ++j) {
    auto c = cfg;
    c.seed = derive_seed(config.seed, 1000 + j);
    const auto& s = ds.subsets[j];
    out.push_back(training::train(s.x_train, s.y_train, ds.schema, c).params);
  }
  return out;
}

Matrix counterfactuals(const model::ModelParams& params, const Matrix& x, const baselines::VanillaCfConfig& vanilla) {
  if (params.has_generator()) return data::harden(model::generate_cf(params, x), params.schema);
  return baselines::vanilla_cf(x, params.arch, params.theta_f(), vanilla).hardened;
}

ProtocolReport loo_protocol(const data::ShiftedDataset& ds, const training::TrainConfig& config, Method method,
                            std::span<const model::ModelParams> shifted_models, const std::string& dataset_name) {
  if (ds.k() < 2) throw DataError("leave-one-subset-out protocol needs k >= 2");
  if (shifted_models.size() != ds.k())
    throw Error("loo_protocol: expected " + std::to_string(ds.k()) + " shifted models, got " +
                std::to_string(shifted_models.size()));

  training::Mode mode = training::Mode::kRobust;
  if (method == Method::kCounterNet) mode = training::Mode::kCounterNet;
  if (method == Method::kVanillaCf) mode = training::Mode::kPredictorOnly;
  const auto cfg = with_mode(config, mode);

  ProtocolReport report;
  report.method = method;
  report.dataset = dataset_name;
  report.k = ds.k();
  report.seed = config.seed;

  for (std::size_t i = 0; i < ds.k(); ++i) {
    const auto& s = ds.subsets[i];
    auto c = cfg;
    c.seed = derive_seed(config.seed, i);
    auto trained = training::train(s.x_train, s.y_train, ds.schema, c).params;
    const ParamBlock theta_f = trained.theta_f();
    const Matrix cf = counterfactuals(trained, s.x_test, config.vanilla);

    std::vector<ParamBlock> shifted;
    for (std::size_t j = 0; j < ds.k(); ++j)
      if (j != i) shifted.push_back(shifted_models[j].theta_f());

    MetricsRecord r;
    r.subset = s.key;
    r.validity = validity(cf, s.x_test, trained.arch, theta_f);
    r.robust_validity = robust_validity(cf, s.x_test, trained.arch, theta_f, shifted);
    r.proximity = proximity(cf, s.x_test);
    r.accuracy = training::accuracy(model::predict_proba(trained, s.x_test), s.y_test);
    r.n_instances = s.x_test.rows;
    r.n_shifted_models = shifted.size();
    report.per_subset.push_back(std::move(r));
  }
  report.aggregate = aggregate(report.per_subset);
  return report;
}

ProtocolReport loo_protocol(const data::ShiftedDataset& ds, const training::TrainConfig& config, Method method,
                            const std::string& dataset_name) {
  auto shifted = train_shifted_models(ds, config);
  return loo_protocol(ds, config, method, shifted, dataset_name);
}

std::vector<SweepRow> attack_sweep(const model::ModelParams& params, const Matrix& x, const std::vector<double>& y,
                                   const Matrix& cf, const SweepOptions& options) {
  check_rows(cf, x, "attack_sweep");
  if (x.rows != y.size()) throw ShapeError("attack_sweep: labels do not match rows");
  const auto& arch = params.arch;
  const ParamBlock theta_f = params.theta_f().detached();
  const auto cx = classes(arch, theta_f, x);
  const double prox = proximity(cf, x);
  auto predict = [&arch](const ParamBlock& p, const ad::Value& v) { return arch.predict(p, v); };
  const std::size_t batch = std::max<std::size_t>(1, options.batch_size);

  std::vector<SweepRow> rows;
  for (double eps : options.epsilon_grid) {
    for (int steps : options.steps_grid) {
      std::size_t valid = 0;
      std::size_t batch_index = 0;
      for (std::size_t start = 0; start < x.rows; start += batch, ++batch_index) {
        const std::size_t end = std::min(x.rows, start + batch);
        std::vector<std::size_t> idx(end - start);
        std::iota(idx.begin(), idx.end(), start);
        Matrix xb = gather_rows(x, idx);
        Matrix cfb = gather_rows(cf, idx);
        std::vector<double> yb(y.begin() + static_cast<std::ptrdiff_t>(start),
                               y.begin() + static_cast<std::ptrdiff_t>(end));
        vds::AttackConfig attack;
        attack.epsilon = eps;
        attack.steps = steps;
        attack.unroll = options.unroll;
        attack.eta = options.eta;
        attack.norm = options.norm;
        attack.seed = derive_seed(options.seed, batch_index);
        auto outcome = vds::virtual_data_shift(xb, yb, cfb, theta_f, attack, predict);
        auto shifted_classes = classes(arch, outcome.shifted, cfb);
        for (std::size_t i = 0; i < idx.size(); ++i) valid += shifted_classes[i] == 1 - cx[start + i];
      }
      SweepRow row;
      row.steps = steps;
      row.epsilon = eps;
      row.norm = options.norm;
      row.robust_validity = x.rows ? static_cast<double>(valid) / static_cast<double>(x.rows) : 0.0;
      row.proximity = prox;
      row.seed = options.seed;
      rows.push_back(row);
    }
  }
  return rows;
}

AblationReport summarize(std::vector<AblationRow> rows) {
  AblationReport report;
  std::vector<double> grid;
  for (const auto& r : rows)
    if (std::find(grid.begin(), grid.end(), r.max_epsilon) == grid.end()) grid.push_back(r.max_epsilon);
  for (double e : grid) {
    std::vector<double> diff, lin, stat;
    for (const auto& r : rows) {
      if (r.max_epsilon != e) continue;
      diff.push_back(r.difference);
      lin.push_back(r.linear_robust_validity);
      stat.push_back(r.static_robust_validity);
    }
    auto d = mean_std(diff);
    report.summary.push_back({e, d.mean, d.std, mean_std(lin).mean, mean_std(stat).mean});
  }
  report.rows = std::move(rows);
  return report;
}

AblationReport scheduler_ablation(const data::ShiftedDataset& ds, const training::TrainConfig& config,
                                  std::span<const double> epsilon_grid) {
  const auto shifted = train_shifted_models(ds, config);
  std::vector<AblationRow> rows;
  for (double e : epsilon_grid) {
    auto lin = config;
    lin.max_epsilon = e;
    lin.schedule = training::EpsilonSchedule::kLinear;
    auto stat = lin;
    stat.schedule = training::EpsilonSchedule::kStatic;
    const double a = loo_protocol(ds, lin, Method::kRoCourseNet, shifted).aggregate.robust_validity;
    const double b = loo_protocol(ds, stat, Method::kRoCourseNet, shifted).aggregate.robust_validity;
    rows.push_back({e, config.seed, a, b, a - b});
  }
  return summarize(std::move(rows));
}

}  // namespace recourse::eval
