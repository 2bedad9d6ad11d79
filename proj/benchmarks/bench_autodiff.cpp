#include <benchmark/benchmark.h>

#include "common.hpp"

namespace recourse::bench {
namespace {

void BM_PredictorGradient(benchmark::State& state) {
  const auto ds = moons();
  const auto params = model::init_params(dims(), ds.schema, 1);
  const auto theta = params.theta_f();
  const Matrix x = head(ds.subsets[0].x_train, static_cast<std::size_t>(state.range(0)));
  const ad::Value y = model::column(std::vector<double>(
      ds.subsets[0].y_train.begin(), ds.subsets[0].y_train.begin() + static_cast<std::ptrdiff_t>(x.rows)));
  for (auto _ : state) {
    auto loss = ad::mse(params.arch.predict(theta, ad::Value::constant(x)), y);
    benchmark::DoNotOptimize(ad::grad(loss, theta.values()));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(x.rows));
}
BENCHMARK(BM_PredictorGradient)->Arg(32)->Arg(128)->Arg(320);

void BM_GenerateCounterfactuals(benchmark::State& state) {
  const auto ds = moons();
  const auto params = model::init_params(dims(), ds.schema, 1);
  const Matrix x = head(ds.subsets[0].x_train, 128);
  for (auto _ : state) benchmark::DoNotOptimize(model::generate_cf(params, x));
}
BENCHMARK(BM_GenerateCounterfactuals);

}  // namespace
}  // namespace recourse::bench
