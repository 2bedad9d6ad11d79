#include <benchmark/benchmark.h>

#include "common.hpp"
#include "recourse/training.hpp"

namespace recourse::bench {
namespace {

void BM_TrainerStep(benchmark::State& state) {
  const auto ds = moons();
  training::TrainConfig cfg;
  cfg.mode = static_cast<training::Mode>(state.range(0));
  cfg.dims = dims();
  cfg.attack_steps = 5;
  auto params = model::init_params(dims(), ds.schema, 1, cfg.mode != training::Mode::kPredictorOnly);
  training::Trainer trainer(params, cfg);
  const Matrix x = head(ds.subsets[0].x_train, 128);
  std::vector<double> y(ds.subsets[0].y_train.begin(), ds.subsets[0].y_train.begin() + static_cast<std::ptrdiff_t>(x.rows));
  for (auto _ : state) benchmark::DoNotOptimize(trainer.step(x, y, 0.1));
}
BENCHMARK(BM_TrainerStep)
    ->Arg(static_cast<int>(training::Mode::kRobust))
    ->Arg(static_cast<int>(training::Mode::kCounterNet))
    ->Arg(static_cast<int>(training::Mode::kPredictorOnly));

}  // namespace
}  // namespace recourse::bench
