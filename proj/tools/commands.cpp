#include "commands.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "recourse/checkpoint.hpp"
#include "recourse/config.hpp"
#include "recourse/data.hpp"
#include "recourse/errors.hpp"
#include "recourse/evaluation.hpp"
#include "recourse/report.hpp"
#include "recourse/training.hpp"

namespace recourse::cli {

namespace fs = std::filesystem;

namespace {

void write_file(const std::string& path, const std::string& text) {
  const fs::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(p.parent_path(), ec);
  }
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
  if (!out) throw Error("failed writing " + path);
}

std::string dataset_name(const std::string& dir) {
  fs::path p(dir);
  if (!p.has_filename()) p = p.parent_path();
  return p.filename().string();
}

training::TrainConfig load_config(const std::string& path, std::optional<std::uint64_t> seed) {
  auto cfg = config::load(path);
  if (seed) cfg.seed = *seed;
  return cfg;
}

void fit_dims(training::TrainConfig& cfg, const data::ShiftedDataset& ds) {
  config::resolve_dims(cfg, ds.schema.encoded_dim());
  if (cfg.dims.encoder.front() != ds.schema.encoded_dim())
    throw ConfigError("dims.encoder[0] is " + std::to_string(cfg.dims.encoder.front()) + " but the data encodes to " +
                      std::to_string(ds.schema.encoded_dim()) + " columns");
}

std::vector<std::size_t> select_subsets(const data::ShiftedDataset& ds, const std::optional<std::string>& subset) {
  std::vector<std::size_t> which;
  if (!subset) {
    for (std::size_t i = 0; i < ds.k(); ++i) which.push_back(i);
    return which;
  }
  for (std::size_t i = 0; i < ds.k(); ++i)
    if (ds.subsets[i].key == *subset) return {i};
  std::string keys;
  for (const auto& s : ds.subsets) keys += (keys.empty() ? "" : ", ") + s.key;
  throw ConfigError("unknown subset '" + *subset + "' (available: " + keys + ")");
}

}  // namespace

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find(',', start);
    if (end == std::string::npos) end = text.size();
    std::string item = text.substr(start, end - start);
    while (!item.empty() && item.front() == ' ') item.erase(item.begin());
    while (!item.empty() && item.back() == ' ') item.pop_back();
    if (!item.empty()) out.push_back(item);
    start = end + 1;
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& text, const std::string& what) {
  std::vector<int> out;
  for (const auto& s : split_list(text)) {
    int v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || v < 0)
      throw ConfigError(what + ": '" + s + "' is not a non-negative integer");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError(what + " is empty");
  return out;
}

std::vector<double> parse_double_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  for (const auto& s : split_list(text)) {
    double v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || !(v >= 0.0))
      throw ConfigError(what + ": '" + s + "' is not a non-negative number");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError(what + " is empty");
  return out;
}

void run_synth(const SynthArgs& a) {
  if (a.k < 2) throw ConfigError("--k must be at least 2");
  if (a.n < 40) throw ConfigError("--n must be at least 40");
  data::MoonsOptions opts;
  opts.k = a.k;
  opts.n = a.n;
  opts.rotation_deg = a.rotation;
  opts.noise = a.noise;
  opts.seed = a.seed;
  data::write_moons_dir(a.out, opts);
  std::cout << "wrote " << a.k << " subsets to " << a.out << "\n";
}

void run_train(const TrainArgs& a) {
  auto cfg = load_config(a.config, a.seed);
  if (a.mode) cfg.mode = training::parse_mode(*a.mode);
  const auto ds = data::load_dataset_dir(a.data, cfg.test_fraction, cfg.seed);
  fit_dims(cfg, ds);
  const auto which = select_subsets(ds, a.subset);
  auto [x, y] = data::stack_train(ds, which);
  auto result = training::train(x, y, ds.schema, cfg);
  checkpoint::save(a.out, result.params, cfg.mode);
  write_file(a.log.value_or(a.out + ".log.jsonl"), training::log_jsonl(result.log));

  auto [xt, yt] = data::stack_test(ds, which);
  const auto& last = result.log.back();
  std::cout << "mode " << training::to_string(cfg.mode) << ": " << cfg.epochs << " epochs, train accuracy "
            << last.train_accuracy << ", test accuracy "
            << training::accuracy(model::predict_proba(result.params, xt), yt) << "\n";
}

void run_evaluate(const EvaluateArgs& a) {
  auto cfg = load_config(a.config, a.seed);
  std::vector<eval::Method> methods;
  for (const auto& m : split_list(a.methods)) methods.push_back(eval::parse_method(m));
  if (methods.empty()) throw ConfigError("--methods is empty");
  const auto ds = data::load_dataset_dir(a.data, cfg.test_fraction, cfg.seed);
  fit_dims(cfg, ds);
  const auto shifted = eval::train_shifted_models(ds, cfg);
  std::vector<eval::ProtocolReport> reports;
  for (auto m : methods) {
    reports.push_back(eval::loo_protocol(ds, cfg, m, shifted, dataset_name(a.data)));
    const auto& agg = reports.back().aggregate;
    std::cout << eval::to_string(m) << ": validity " << agg.validity << ", robust validity " << agg.robust_validity
              << ", proximity " << agg.proximity << ", accuracy " << agg.accuracy << "\n";
  }
  write_file(a.out, report::protocol_array_json(reports));
}

void run_attack(const AttackArgs& a) {
  eval::SweepOptions opts;
  opts.steps_grid = parse_int_list(a.t_grid, "--T-grid");
  opts.epsilon_grid = parse_double_list(a.e_grid, "--E-grid");
  opts.norm = vds::parse_norm(a.norm);
  if (a.unroll < 1) throw ConfigError("--K must be at least 1");
  if (!(a.eta > 0.0)) throw ConfigError("--eta must be positive");
  if (a.batch_size < 1) throw ConfigError("--batch-size must be at least 1");
  if (!(a.test_fraction > 0.0 && a.test_fraction < 1.0)) throw ConfigError("--test-fraction must lie in (0, 1)");
  opts.unroll = a.unroll;
  opts.eta = a.eta;
  opts.batch_size = a.batch_size;
  opts.seed = a.seed;

  const auto ck = checkpoint::load(a.ckpt);
  const auto ds = data::load_dataset_dir(a.data, a.test_fraction, a.seed);
  if (!(ds.schema == ck.params.schema))
    throw DataError("dataset schema differs from the one stored in " + a.ckpt);
  auto [x, y] = data::stack_test(ds, select_subsets(ds, a.subset));
  const Matrix cf = eval::counterfactuals(ck.params, x, {});
  auto rows = eval::attack_sweep(ck.params, x, y, cf, opts);
  write_file(a.out, report::sweep_csv(rows));
  std::cout << "wrote " << rows.size() << " sweep rows to " << a.out << "\n";
}

void run_ablation(const AblationArgs& a) {
  auto cfg = load_config(a.config, a.seed);
  cfg.mode = training::Mode::kRobust;
  const auto grid = parse_double_list(a.e_grid, "--E-grid");
  std::vector<std::uint64_t> seeds;
  for (int s : parse_int_list(a.seeds, "--seeds")) seeds.push_back(static_cast<std::uint64_t>(s));
  std::vector<eval::AblationRow> rows;
  for (auto s : seeds) {
    auto c = cfg;
    c.seed = derive_seed(cfg.seed, s);
    const auto ds = data::load_dataset_dir(a.data, c.test_fraction, c.seed);
    fit_dims(c, ds);
    auto part = eval::scheduler_ablation(ds, c, grid);
    for (auto& r : part.rows) rows.push_back(r);
  }
  const auto report = eval::summarize(std::move(rows));
  for (const auto& s : report.summary)
    std::cout << "E=" << s.max_epsilon << ": linear - static = " << s.mean_difference << " (std "
              << s.std_difference << ")\n";
  write_file(a.out, report::ablation_json(report));
}

}  // namespace recourse::cli
