// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails. argv[1] is the path to the CLI binary.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include "json.hpp"
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "recourse/evaluation.hpp"
#include "recourse/vds.hpp"
#include "support/reference_mlp.hpp"

namespace fs = std::filesystem;
using namespace recourse;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size()); }

vds::PredictFn ref_predict() {
  return [](const ad::ParamBlock& p, const ad::Value& x) { return testing::mlp_predict(p, x); };
}

Outcome gradient_oracles() {
  const auto t0 = Clock::now();
  Outcome out;
  std::size_t checked = 0, bad = 0;
  Rng rng(4242);
  const double h = 1e-5;
  for (int net = 0; net < 20; ++net) {
    std::vector<std::size_t> widths{2 + rng() % 4};
    for (int d = 0; d < net % 3; ++d) widths.push_back(2 + rng() % 5);
    widths.push_back(1);
    const auto ref = testing::RefMlp::random(widths, rng);
    const std::size_t n = 3 + rng() % 4;
    const Matrix x = testing::random_matrix(n, widths[0], rng);
    const auto y = testing::random_labels(n, rng);

    auto block = ref.to_block();
    auto loss = ad::mse(testing::mlp_predict(block, ad::Value::constant(x)), ad::Value::constant(Matrix(n, 1, y)));
    const auto g = testing::flatten(ad::grad(loss, block.values()));
    const auto flat = ref.flat();
    for (std::size_t i = 0; i < flat.size(); ++i) {
      auto p = flat, m = flat;
      p[i] += h;
      m[i] -= h;
      auto rp = ref, rm = ref;
      rp.set_flat(p);
      rm.set_flat(m);
      ++checked;
      bad += !testing::grad_close(g[i], (rp.mse(x, y) - rm.mse(x, y)) / (2 * h));
    }

    const Matrix delta = testing::random_matrix(n, widths[0], rng, -0.1, 0.1);
    const Matrix cf = testing::random_matrix(n, widths[0], rng);
    std::vector<double> target(n);
    for (auto& t : target) t = uniform(rng, 0.0, 1.0);
    for (int unroll : {1, 2}) {
      auto r = vds::unrolled_delta_gradient(ref.to_block(), delta, x, Matrix(n, 1, y), cf, Matrix(n, 1, target),
                                            unroll, 0.5, ref_predict());
      for (std::size_t i = 0; i < delta.data.size(); ++i) {
        Matrix p = delta, m = delta;
        p.data[i] += h;
        m.data[i] -= h;
        const double fd = (testing::ref_unrolled_outer(ref, x, p, y, cf, target, unroll, 0.5) -
                           testing::ref_unrolled_outer(ref, x, m, y, cf, target, unroll, 0.5)) /
                          (2 * h);
        ++checked;
        bad += !testing::grad_close(r.delta_grad.data[i], fd);
      }
    }
  }
  const double secs = seconds_since(t0);
  out.pass = bad == 0 && secs < 60.0;
  out.detail = std::to_string(checked) + " entries, " + std::to_string(bad) + " mismatches, " + fmt("%.2fs", secs);
  return out;
}

Outcome hand_check() {
  const double w = 0.8, eta = 0.3, n = 3.0;
  const std::vector<double> xs{0.2, 0.9, 0.5}, ds{0.05, -0.02, 0.01}, ys{0.0, 1.0, 1.0};
  const std::vector<double> cs{0.7, 0.1, 0.4}, ts{0.3, 0.6, 0.2};
  double inner = 0.0;
  for (int i = 0; i < 3; ++i) inner += (w * (xs[i] + ds[i]) - ys[i]) * (xs[i] + ds[i]);
  const double w1 = w - eta * 2.0 / n * inner;
  double G = 0.0;
  for (int j = 0; j < 3; ++j) G += 2.0 / n * (w1 * cs[j] - ts[j]) * cs[j];

  ad::ParamBlock theta;
  theta.add("w", ad::Value::variable(Matrix(1, 1, w)));
  auto linear = [](const ad::ParamBlock& p, const ad::Value& x) { return ad::matmul(x, p[0]); };
  auto r = vds::unrolled_delta_gradient(theta, Matrix(3, 1, ds), Matrix(3, 1, xs), Matrix(3, 1, ys), Matrix(3, 1, cs),
                                        Matrix(3, 1, ts), 1, eta, linear);
  double worst = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double expected = G * (-eta * 2.0 / n * (2.0 * w * (xs[i] + ds[i]) - ys[i]));
    worst = std::max(worst, std::abs(r.delta_grad.data[i] - expected));
  }
  return {worst <= 1e-6, fmt("max error %.3g", worst)};
}

double row_norm(const Matrix& m, std::size_t r, vds::Norm norm) {
  double acc = 0.0;
  for (double v : m.row(r)) acc = norm == vds::Norm::kLinf ? std::max(acc, std::abs(v)) : acc + v * v;
  return norm == vds::Norm::kLinf ? acc : std::sqrt(acc);
}

Outcome projection_properties() {
  Rng rng(99);
  std::size_t cases = 0, bad = 0;
  for (auto norm : {vds::Norm::kLinf, vds::Norm::kL2}) {
    for (int trial = 0; trial < 1000; ++trial, ++cases) {
      const double eps = uniform(rng, 0.0, 2.0);
      const std::size_t rows = 1 + rng() % 4, cols = 1 + rng() % 6;
      const Matrix d = testing::random_matrix(rows, cols, rng, -3.0, 3.0);
      const Matrix p = vds::project(d, eps, norm);
      bool ok = vds::feasible(p, eps, norm) && vds::project(p, eps, norm) == p;
      Matrix inside = d;
      for (std::size_t r = 0; r < rows; ++r) {
        const double nr = row_norm(d, r, norm);
        const double k = nr > 0 ? uniform(rng, 0.0, 0.999) * eps / nr : 0.0;
        for (auto& v : inside.row(r)) v *= k;
      }
      ok = ok && vds::project(inside, eps, norm) == inside;
      bad += !ok;
    }
  }
  return {bad == 0, std::to_string(cases) + " cases, " + std::to_string(bad) + " failures"};
}

training::TrainConfig base_config(std::uint64_t seed) {
  training::TrainConfig c;
  c.epochs = 20;
  c.batch_size = 64;
  c.lr = 0.01;
  c.max_epsilon = 0.3;
  c.attack_steps = 5;
  c.unroll = 2;
  c.seed = seed;
  c.dims = {{2, 32, 16}, {16, 16}, {16, 16}};
  c.vanilla.steps = 300;
  return c;
}

data::ShiftedDataset moons(std::uint64_t seed) {
  data::MoonsOptions o;
  o.k = 3;
  o.n = 400;
  o.rotation_deg = 30.0;
  o.seed = seed;
  return data::synth_shifted_moons(o, 0.2);
}

std::vector<std::size_t> all_subsets(const data::ShiftedDataset& ds) {
  std::vector<std::size_t> v(ds.k());
  std::iota(v.begin(), v.end(), 0);
  return v;
}

struct Attacked {
  double validity = 0.0;
  double attacked = 0.0;
  bool identities = true;
};

Attacked attack_counternet(std::uint64_t seed) {
  const auto ds = moons(seed);
  auto cfg = base_config(seed);
  cfg.mode = training::Mode::kCounterNet;
  const auto [xtr, ytr] = data::stack_train(ds, all_subsets(ds));
  const auto params = training::train(xtr, ytr, ds.schema, cfg).params;
  const auto [xte, yte] = data::stack_test(ds, all_subsets(ds));
  const Matrix cf = eval::counterfactuals(params, xte, cfg.vanilla);

  eval::SweepOptions opts;
  opts.steps_grid = {0, 20};
  opts.epsilon_grid = {0.5};
  opts.seed = seed;
  const auto rows = eval::attack_sweep(params, xte, yte, cf, opts);

  Attacked a;
  const auto theta = params.theta_f();
  a.validity = eval::validity(cf, xte, params.arch, theta);
  a.attacked = rows[1].robust_validity;
  const std::vector<ad::ParamBlock> self{theta};
  a.identities = eval::robust_validity(cf, xte, params.arch, theta, self) == a.validity &&
                 rows[0].robust_validity == a.validity;
  for (auto norm : {vds::Norm::kL2}) {
    opts.norm = norm;
    opts.steps_grid = {0};
    a.identities = a.identities && eval::attack_sweep(params, xte, yte, cf, opts)[0].robust_validity == a.validity;
  }
  return a;
}

struct ProtocolRun {
  double robust_rv = 0.0;
  double robust_validity = 0.0;
  double robust_accuracy = 0.0;
  double counter_rv = 0.0;
  double predictor_accuracy = 0.0;
  std::vector<double> proximity_by_e;
};

ProtocolRun protocol_run(std::uint64_t seed, const std::vector<double>& e_grid) {
  const auto ds = moons(seed);
  const auto cfg = base_config(seed);
  const auto shifted = eval::train_shifted_models(ds, cfg);
  ProtocolRun run;
  for (double e : e_grid) {
    auto c = cfg;
    c.max_epsilon = e;
    const auto r = eval::loo_protocol(ds, c, eval::Method::kRoCourseNet, shifted);
    run.proximity_by_e.push_back(r.aggregate.proximity);
    if (e == cfg.max_epsilon) {
      run.robust_rv = r.aggregate.robust_validity;
      run.robust_validity = r.aggregate.validity;
      run.robust_accuracy = r.aggregate.accuracy;
    }
  }
  run.counter_rv = eval::loo_protocol(ds, cfg, eval::Method::kCounterNet, shifted).aggregate.robust_validity;

  // Same data, splits and per-subset seeds as the protocol, predictor only.
  std::vector<double> acc;
  for (std::size_t i = 0; i < ds.k(); ++i) {
    auto c = cfg;
    c.mode = training::Mode::kPredictorOnly;
    c.seed = derive_seed(seed, i);
    const auto& s = ds.subsets[i];
    const auto p = training::train(s.x_train, s.y_train, ds.schema, c).params;
    acc.push_back(training::accuracy(model::predict_proba(p, s.x_test), s.y_test));
  }
  run.predictor_accuracy = mean(acc);
  return run;
}

class Cli {
 public:
  Cli(std::string exe, fs::path dir) : exe_(std::move(exe)), dir_(std::move(dir)) {}

  bool run(const std::string& args) const {
    const std::string cmd = exe_ + " " + args + " > " + (dir_ / "cli.log").string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) && WEXITSTATUS(status) == 0;
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string read(const std::string& name) const {
    std::ifstream in(dir_ / name, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

 private:
  std::string exe_;
  fs::path dir_;
};

void write_config(const Cli& cli, const std::string& name, int epochs) {
  std::ofstream(cli.path(name)) << R"({"epochs": )" << epochs
                                << R"(, "batch_size": 64, "lr": 0.01, "E": 0.3, "T": 5, "K": 2, "seed": 0, )"
                                << R"("dims": {"encoder": [2, 32, 16], "predictor": [16, 16], "generator": [16, 16]}, )"
                                << R"("vanillacf": {"steps": 300}})";
}

Outcome ablation(const Cli& cli) {
  const auto t0 = Clock::now();
  write_config(cli, "ablation.json", 20);
  if (!cli.run("synth-data --out " + cli.path("moons") + " --k 3 --n 400 --rotation 30 --seed 0"))
    return {false, "synth-data failed"};
  if (!cli.run("ablation --data " + cli.path("moons") + " --config " + cli.path("ablation.json") +
               " --E-grid 0.05,0.1,0.3 --seeds 0,1,2,3,4 --out " + cli.path("ablation_report.json")))
    return {false, "ablation command failed: " + cli.read("cli.log")};
  const auto report = nlohmann::json::parse(cli.read("ablation_report.json"));
  std::vector<double> diff;
  for (const auto& r : report.at("rows")) diff.push_back(r.at("difference").get<double>());
  const bool emitted = diff.size() == 15 && report.at("summary").size() == 3;
  const double m = diff.empty() ? 0.0 : mean(diff);
  return {emitted && m >= -0.01,
          fmt("mean linear - static %+.4f", m) + " over " + std::to_string(diff.size()) + " rows, " +
              fmt("%.1fs", seconds_since(t0))};
}

Outcome determinism(const Cli& cli) {
  write_config(cli, "det.json", 4);
  const std::string data = cli.path("det_data");
  std::vector<std::pair<std::string, std::string>> outputs;
  for (const std::string tag : {"a", "b"}) {
    const std::string d = data + "_a";
    const std::string ck = cli.path("det_" + tag + ".ckpt.json");
    const bool ok =
        cli.run("synth-data --out " + data + "_" + tag + " --k 3 --n 120 --rotation 30 --seed 3") &&
        cli.run("train --config " + cli.path("det.json") + " --data " + d + " --out " + ck + " --seed 3") &&
        cli.run("train --config " + cli.path("det.json") + " --data " + d + " --mode predictor_only --out " +
                cli.path("det_po_" + tag + ".ckpt.json") + " --seed 3") &&
        cli.run("evaluate --data " + d + " --config " + cli.path("det.json") + " --out " +
                cli.path("det_eval_" + tag + ".json") + " --seed 3") &&
        cli.run("attack --ckpt " + ck + " --data " + d + " --T-grid 0,5 --E-grid 0.1,0.5 --out " +
                cli.path("det_attack_" + tag + ".csv") + " --seed 3") &&
        cli.run("ablation --data " + d + " --config " + cli.path("det.json") + " --E-grid 0.1 --seeds 0 --out " +
                cli.path("det_ablation_" + tag + ".json") + " --seed 3");
    if (!ok) return {false, "command failed: " + cli.read("cli.log")};
  }
  std::size_t compared = 0;
  for (const std::string stem :
       {"det_%.ckpt.json", "det_%.ckpt.json.log.jsonl", "det_po_%.ckpt.json", "det_eval_%.json", "det_attack_%.csv",
        "det_ablation_%.json", "det_data_%/subset_1.csv", "det_data_%/schema.json"}) {
    auto name = [&](const char* tag) {
      std::string s = stem;
      s.replace(s.find('%'), 1, tag);
      return s;
    };
    const auto a = cli.read(name("a")), b = cli.read(name("b"));
    if (a.empty() || a != b) return {false, name("a") + " differs between runs"};
    ++compared;
  }
  return {true, std::to_string(compared) + " artifacts byte-identical"};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: acceptance <path-to-recourse-cli>\n";
    return 2;
  }
  const fs::path dir = fs::temp_directory_path() / "recourse_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const Cli cli(argv[1], dir);

  std::vector<Outcome> results(10);
  auto report = [&](int n, const Outcome& o) {
    results[n - 1] = o;
    std::cout << "criterion " << n << ": " << (o.pass ? "PASS" : "FAIL") << " (" << o.detail << ")" << std::endl;
  };
  auto guarded = [&](int n, const std::function<Outcome()>& f) {
    try {
      report(n, f());
    } catch (const std::exception& e) {
      report(n, {false, std::string("exception: ") + e.what()});
    }
  };

  guarded(1, gradient_oracles);
  guarded(2, hand_check);
  guarded(3, projection_properties);

  std::vector<Attacked> attacked;
  double attack_secs = 0.0;
  guarded(4, [&] {
    const auto t0 = Clock::now();
    for (std::uint64_t s = 0; s < 5; ++s) attacked.push_back(attack_counternet(s));
    attack_secs = seconds_since(t0);
    bool ok = true;
    for (const auto& a : attacked) ok = ok && a.identities;
    return Outcome{ok, "self-scored robust validity and T=0 rows equal validity on 5 models, linf and l2"};
  });
  guarded(5, [&] {
    if (attacked.size() != 5) return Outcome{false, "attack runs missing"};
    std::vector<double> v, a;
    for (const auto& r : attacked) {
      v.push_back(r.validity);
      a.push_back(r.attacked);
    }
    const double drop = mean(v) - mean(a);
    return Outcome{drop >= 0.10 && attack_secs < 300.0,
                   fmt("validity %.4f", mean(v)) + fmt(", attacked %.4f", mean(a)) + fmt(", drop %.4f", drop) +
                       fmt(", %.1fs", attack_secs)};
  });

  const std::vector<double> e_grid{0.05, 0.1, 0.3};
  std::vector<ProtocolRun> runs;
  double protocol_secs = 0.0;
  guarded(6, [&] {
    const auto t0 = Clock::now();
    for (std::uint64_t s = 0; s < 3; ++s) runs.push_back(protocol_run(s, e_grid));
    protocol_secs = seconds_since(t0);
    std::vector<double> rob, cn, val;
    for (const auto& r : runs) {
      rob.push_back(r.robust_rv);
      cn.push_back(r.counter_rv);
      val.push_back(r.robust_validity);
    }
    const double gap = mean(rob) - mean(cn);
    return Outcome{gap >= 0.05 && mean(val) >= 0.9 && protocol_secs < 900.0,
                   fmt("robust %.4f", mean(rob)) + fmt(", counternet %.4f", mean(cn)) + fmt(", gap %.4f", gap) +
                       fmt(", validity %.4f", mean(val)) + fmt(", %.1fs", protocol_secs)};
  });
  guarded(7, [&] {
    if (runs.size() != 3) return Outcome{false, "protocol runs missing"};
    std::vector<double> prox(e_grid.size());
    for (std::size_t e = 0; e < e_grid.size(); ++e) {
      std::vector<double> v;
      for (const auto& r : runs) v.push_back(r.proximity_by_e[e]);
      prox[e] = mean(v);
    }
    bool ok = true;
    for (std::size_t e = 1; e < prox.size(); ++e) ok = ok && prox[e] >= prox[e - 1] * 0.95;
    std::string detail = "proximity";
    for (std::size_t e = 0; e < prox.size(); ++e) detail += fmt(" E=%g:", e_grid[e]) + fmt("%.4f", prox[e]);
    return Outcome{ok, detail};
  });
  guarded(8, [&] {
    if (runs.size() != 3) return Outcome{false, "protocol runs missing"};
    std::vector<double> rob, po;
    for (const auto& r : runs) {
      rob.push_back(r.robust_accuracy);
      po.push_back(r.predictor_accuracy);
    }
    const double diff = std::abs(mean(rob) - mean(po));
    return Outcome{diff <= 0.03, fmt("robust %.4f", mean(rob)) + fmt(", predictor_only %.4f", mean(po))};
  });
  guarded(9, [&] { return ablation(cli); });
  guarded(10, [&] { return determinism(cli); });

  fs::remove_all(dir);
  bool all = true;
  for (const auto& r : results) all = all && r.pass;
  std::cout << (all ? "all criteria passed" : "some criteria failed") << std::endl;
  return all ? 0 : 1;
}
