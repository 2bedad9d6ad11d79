#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "recourse/baselines.hpp"
#include "recourse/errors.hpp"
#include "support/reference_mlp.hpp"

namespace recourse {
namespace {

using ad::Value;

double sig(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// f(u) = sigmoid(w (u - 0.5)) written with primitives.
baselines::Predictor logistic(double w) {
  return [w](const Value& u) { return ad::sigmoid(ad::scale(ad::add_scalar(u, -0.5), w)); };
}

TEST(VanillaCf, OneDimensionalLogisticWithoutProximityTerm) {
  // f(0.75) = sigmoid(1); the target 1 - sigmoid(1) = sigmoid(-1) is reached at u = 0.25.
  baselines::VanillaCfConfig cfg{.steps = 4000, .lr = 1.0, .lambda = 0.0};
  auto r = baselines::vanilla_cf(Matrix(1, 1, 0.75), logistic(4.0), {}, cfg);
  EXPECT_NEAR(r.cf(0, 0), 0.25, 1e-3);
}

TEST(VanillaCf, OneDimensionalLogisticMatchesGridMinimum) {
  const double w = 4.0, x = 0.75, lambda = 0.1;
  const double t = 1 - sig(w * (x - 0.5));
  double best_u = 0, best = 1e9;
  for (int i = 0; i <= 1000000; ++i) {
    const double u = i / 1e6;
    const double h = std::pow(sig(w * (u - 0.5)) - t, 2) + lambda * std::pow(u - x, 2);
    if (h < best) best = h, best_u = u;
  }
  baselines::VanillaCfConfig cfg{.steps = 5000, .lr = 1.0, .lambda = lambda};
  auto r = baselines::vanilla_cf(Matrix(1, 1, x), logistic(w), {}, cfg);
  EXPECT_NEAR(r.cf(0, 0), best_u, 1e-3);
}

TEST(VanillaCf, RowsAreIndependent) {
  baselines::VanillaCfConfig cfg{.steps = 300, .lr = 0.5, .lambda = 0.1};
  Matrix both(2, 1, std::vector<double>{0.75, 0.3});
  auto joint = baselines::vanilla_cf(both, logistic(4.0), {}, cfg);
  auto a = baselines::vanilla_cf(Matrix(1, 1, 0.75), logistic(4.0), {}, cfg);
  auto b = baselines::vanilla_cf(Matrix(1, 1, 0.3), logistic(4.0), {}, cfg);
  EXPECT_NEAR(joint.cf(0, 0), a.cf(0, 0), 1e-12);
  EXPECT_NEAR(joint.cf(1, 0), b.cf(0, 0), 1e-12);
}

TEST(VanillaCf, StaysFeasibleAndHardens) {
  Rng rng(4);
  auto ref = testing::RefMlp::random({5, 6, 1}, rng);
  const auto block = ref.to_block();
  const std::vector<ad::ColumnSpan> spans{{1, 3}};
  Matrix x(4, 5, 0.0);
  for (std::size_t r = 0; r < 4; ++r) {
    x(r, 0) = uniform(rng, 0, 1);
    x(r, 1 + r % 3) = 1.0;
    x(r, 4) = uniform(rng, 0, 1);
  }
  auto result = baselines::vanilla_cf(x, [&](const Value& v) { return testing::mlp_predict(block, v); }, spans,
                                      {.steps = 200, .lr = 0.5, .lambda = 0.05});
  for (std::size_t r = 0; r < 4; ++r) {
    EXPECT_GE(result.cf(r, 0), 0.0);
    EXPECT_LE(result.cf(r, 4), 1.0);
    double total = 0, hard_total = 0;
    for (std::size_t j = 1; j < 4; ++j) {
      EXPECT_GE(result.cf(r, j), 0.0);
      total += result.cf(r, j);
      EXPECT_TRUE(result.hardened(r, j) == 0.0 || result.hardened(r, j) == 1.0);
      hard_total += result.hardened(r, j);
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
    EXPECT_EQ(hard_total, 1.0);
    EXPECT_EQ(result.hardened(r, 0), result.cf(r, 0));
  }
}

TEST(ProjectSimplex, Properties) {
  Rng rng(8);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> v(1 + rng() % 6);
    for (auto& e : v) e = uniform(rng, -2, 2);
    auto p = v;
    baselines::project_simplex(p);
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-12);
    for (double e : p) EXPECT_GE(e, 0.0);
    auto q = p;
    baselines::project_simplex(q);
    for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(q[i], p[i], 1e-15);
    // Optimality: p - v is constant on the support of p.
    double shift = 0;
    bool have = false;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (p[i] <= 0) continue;
      if (!have) shift = v[i] - p[i], have = true;
      EXPECT_NEAR(v[i] - p[i], shift, 1e-12);
    }
  }
  std::vector<double> v{0.5, 0.5, 0.5};
  baselines::project_simplex(v);
  for (double e : v) EXPECT_NEAR(e, 1.0 / 3, 1e-15);
}

TEST(VanillaCf, ModelOverloadChecksWidth) {
  std::istringstream in("a,b\n0,1\n1,2\n");
  auto t = parse_csv(in);
  auto schema = data::fit_schema(t, {{"a", data::ColumnKind::kContinuous}, {"b", data::ColumnKind::kContinuous}});
  auto params = model::init_params({{2, 4}, {4}, {}}, schema, 1, false);
  EXPECT_THROW(baselines::vanilla_cf(Matrix(1, 3, 0.5), params.arch, params.theta_f(), {}), ShapeError);
  EXPECT_NO_THROW(baselines::vanilla_cf(Matrix(1, 2, 0.5), params.arch, params.theta_f(), {.steps = 2}));
}

}  // namespace
}  // namespace recourse
