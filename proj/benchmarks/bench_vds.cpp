#include <benchmark/benchmark.h>

#include "common.hpp"
#include "recourse/vds.hpp"

namespace recourse::bench {
namespace {

struct Problem {
  model::ModelParams params;
  Matrix x;
  std::vector<double> y;
  Matrix cf;
};

Problem problem(std::size_t rows) {
  const auto ds = moons();
  auto params = model::init_params(dims(), ds.schema, 1);
  Matrix x = head(ds.subsets[0].x_train, rows);
  std::vector<double> y(ds.subsets[0].y_train.begin(), ds.subsets[0].y_train.begin() + static_cast<std::ptrdiff_t>(x.rows));
  Matrix cf = model::generate_cf(params, x);
  return {std::move(params), std::move(x), std::move(y), std::move(cf)};
}

void BM_UnrolledDeltaGradient(benchmark::State& state) {
  const auto p = problem(128);
  const auto theta = p.params.theta_f();
  const int unroll = static_cast<int>(state.range(0));
  const Matrix delta(p.x.rows, p.x.cols, 0.01);
  Matrix target(p.x.rows, 1, 0.5);
  auto predict = [&arch = p.params.arch](const ad::ParamBlock& t, const ad::Value& v) { return arch.predict(t, v); };
  for (auto _ : state)
    benchmark::DoNotOptimize(vds::unrolled_delta_gradient(theta, delta, p.x, Matrix(p.x.rows, 1, p.y), p.cf, target,
                                                          unroll, 0.003, predict));
}
BENCHMARK(BM_UnrolledDeltaGradient)->Arg(1)->Arg(2)->Arg(4);

void BM_VirtualDataShift(benchmark::State& state) {
  const auto p = problem(128);
  const auto theta = p.params.theta_f();
  vds::AttackConfig cfg;
  cfg.epsilon = 0.1;
  cfg.steps = static_cast<int>(state.range(0));
  cfg.norm = state.range(1) ? vds::Norm::kL2 : vds::Norm::kLinf;
  auto predict = [&arch = p.params.arch](const ad::ParamBlock& t, const ad::Value& v) { return arch.predict(t, v); };
  for (auto _ : state) benchmark::DoNotOptimize(vds::virtual_data_shift(p.x, p.y, p.cf, theta, cfg, predict));
}
BENCHMARK(BM_VirtualDataShift)->Args({5, 0})->Args({13, 0})->Args({13, 1});

}  // namespace
}  // namespace recourse::bench
