#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "recourse/autodiff.hpp"
#include "recourse/errors.hpp"
#include "support/reference_mlp.hpp"

namespace recourse {
namespace {

using ad::ColumnSpan;
using ad::Value;
using testing::grad_close;
using testing::random_matrix;

using UnaryOp = std::function<Value(const Value&)>;

// Checks d/dx sum(op(x) * r) against central differences of the op itself.
void check_unary(const std::string& label, const UnaryOp& op, const Matrix& x0, Rng& rng) {
  Matrix r;
  {
    ad::NoGradGuard guard;
    Value probe = op(Value::constant(x0));
    r = random_matrix(probe.rows(), probe.cols(), rng, -1.0, 1.0);
  }
  const Value weights = Value::constant(r);
  auto objective = [&](const Matrix& x) {
    ad::NoGradGuard guard;
    return ad::sum(ad::mul(op(Value::constant(x)), weights)).item();
  };
  Value xv = Value::variable(x0);
  Value g = ad::grad(ad::sum(ad::mul(op(xv), weights)), xv);
  const double h = 1e-5;
  for (std::size_t i = 0; i < x0.data.size(); ++i) {
    Matrix plus = x0, minus = x0;
    plus.data[i] += h;
    minus.data[i] -= h;
    const double fd = (objective(plus) - objective(minus)) / (2 * h);
    EXPECT_TRUE(grad_close(g.data()[i], fd)) << label << " entry " << i << ": autodiff " << g.data()[i] << " fd " << fd;
  }
}

TEST(AutodiffPrimitives, MatchCentralDifferences) {
  Rng rng(11);
  const Matrix x = random_matrix(3, 5, rng, -1.0, 1.0);
  const Value w = Value::constant(random_matrix(5, 4, rng, -1.0, 1.0));
  const Value row = Value::constant(random_matrix(1, 5, rng, -1.0, 1.0));
  const Value other = Value::constant(random_matrix(3, 5, rng, -1.0, 1.0));
  const std::vector<ColumnSpan> spans{{0, 2}, {3, 2}};

  check_unary("matmul", [&](const Value& v) { return ad::matmul(v, w); }, x, rng);
  check_unary("matmul-right", [&](const Value& v) { return ad::matmul(ad::transpose(w), ad::transpose(v)); }, x, rng);
  check_unary("add", [&](const Value& v) { return ad::add(v, other); }, x, rng);
  check_unary("sub", [&](const Value& v) { return ad::sub(other, v); }, x, rng);
  check_unary("mul", [&](const Value& v) { return ad::mul(v, v); }, x, rng);
  check_unary("neg-scale", [&](const Value& v) { return ad::scale(ad::neg(v), 2.5); }, x, rng);
  check_unary("add_scalar", [&](const Value& v) { return ad::mul(ad::add_scalar(v, 0.3), v); }, x, rng);
  check_unary("add_row", [&](const Value& v) { return ad::add_row(v, row); }, x, rng);
  check_unary("add_row-bias", [&](const Value& v) { return ad::add_row(other, ad::sum_rows(v)); }, x, rng);
  check_unary("broadcast_rows", [&](const Value& v) { return ad::broadcast_rows(ad::sum_rows(v), 4); }, x, rng);
  check_unary("broadcast", [&](const Value& v) { return ad::broadcast(ad::sum(ad::mul(v, v)), {2, 2}); }, x, rng);
  check_unary("mean", [&](const Value& v) { return ad::mean(ad::mul(v, other)); }, x, rng);
  check_unary("leaky_relu", [&](const Value& v) { return ad::leaky_relu(v, 0.1); }, x, rng);
  check_unary("sigmoid", [&](const Value& v) { return ad::sigmoid(v); }, x, rng);
  check_unary("abs", [&](const Value& v) { return ad::abs(v); }, x, rng);
  check_unary("clamp", [&](const Value& v) { return ad::clamp(v, -0.5, 0.5); }, x, rng);
  check_unary("concat", [&](const Value& v) { return ad::concat_cols(v, ad::mul(v, v)); }, x, rng);
  check_unary("slice", [&](const Value& v) { return ad::slice_cols(v, 1, 3); }, x, rng);
  check_unary("pad", [&](const Value& v) { return ad::pad_cols(v, 2, 9); }, x, rng);
  check_unary("group_softmax", [&](const Value& v) { return ad::group_softmax(v, spans); }, x, rng);
  check_unary("group_sum", [&](const Value& v) { return ad::group_sum(ad::mul(v, v), spans); }, x, rng);
  check_unary("mse", [&](const Value& v) { return ad::mse(v, other); }, x, rng);
  check_unary("l1_distance", [&](const Value& v) { return ad::l1_distance(v, other); }, x, rng);
}

TEST(AutodiffPrimitives, SecondOrderMatchesDifferencesOfGradients) {
  Rng rng(12);
  const Matrix x0 = random_matrix(2, 3, rng, -1.0, 1.0);
  const Value w = Value::constant(random_matrix(3, 2, rng, -1.0, 1.0));
  const Value v = Value::constant(random_matrix(2, 3, rng, -1.0, 1.0));
  auto f = [&](const Value& x) { return ad::sum(ad::mul(ad::sigmoid(ad::matmul(x, w)), ad::sigmoid(ad::matmul(x, w)))); };
  auto first = [&](const Matrix& x) {
    Value xv = Value::variable(x);
    return ad::grad(f(xv), xv).matrix();
  };
  // Hessian-vector product via double backward.
  Value xv = Value::variable(x0);
  Value g = ad::grad(f(xv), xv, {.create_graph = true});
  Value hv = ad::grad(ad::sum(ad::mul(g, v)), xv);
  const double h = 1e-5;
  Matrix plus = x0, minus = x0;
  for (std::size_t i = 0; i < x0.data.size(); ++i) {
    plus.data[i] += h * v.data()[i];
    minus.data[i] -= h * v.data()[i];
  }
  const Matrix gp = first(plus), gm = first(minus);
  for (std::size_t i = 0; i < x0.data.size(); ++i) {
    const double fd = (gp.data[i] - gm.data[i]) / (2 * h);
    EXPECT_TRUE(grad_close(hv.data()[i], fd)) << i << ": " << hv.data()[i] << " vs " << fd;
  }
}

TEST(AutodiffMlp, TwentyRandomNetsMatchFiniteDifferencesAndManualBackprop) {
  Rng rng(2024);
  for (int net = 0; net < 20; ++net) {
    const std::size_t depth = 1 + static_cast<std::size_t>(net % 3);
    std::vector<std::size_t> widths{2 + rng() % 4};
    for (std::size_t d = 1; d < depth; ++d) widths.push_back(2 + rng() % 5);
    widths.push_back(1);
    auto ref = testing::RefMlp::random(widths, rng);
    const std::size_t n = 3 + rng() % 4;
    const Matrix x = random_matrix(n, widths[0], rng);
    const auto y = testing::random_labels(n, rng);

    ad::ParamBlock block = ref.to_block();
    Value xv = Value::variable(x);
    Value loss = ad::mse(testing::mlp_predict(block, xv), Value::constant(Matrix(n, 1, y)));
    EXPECT_NEAR(loss.item(), ref.mse(x, y), 1e-12);

    std::vector<Value> wrt(block.values().begin(), block.values().end());
    wrt.push_back(xv);
    const auto grads = ad::grad(loss, wrt);
    const auto flat = testing::flatten(std::span(grads).first(block.size()));
    const Matrix gx = grads.back().matrix();

    std::vector<double> manual;
    Matrix manual_dx;
    ref.mse_grad(x, y, &manual, &manual_dx);

    const double h = 1e-5;
    auto params = ref.flat();
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto p = params, m = params;
      p[i] += h;
      m[i] -= h;
      auto rp = ref, rm = ref;
      rp.set_flat(p);
      rm.set_flat(m);
      const double fd = (rp.mse(x, y) - rm.mse(x, y)) / (2 * h);
      EXPECT_TRUE(grad_close(flat[i], fd)) << "net " << net << " param " << i << ": " << flat[i] << " vs " << fd;
      EXPECT_NEAR(flat[i], manual[i], 1e-12);
    }
    for (std::size_t i = 0; i < x.data.size(); ++i) {
      Matrix p = x, m = x;
      p.data[i] += h;
      m.data[i] -= h;
      const double fd = (ref.mse(p, y) - ref.mse(m, y)) / (2 * h);
      EXPECT_TRUE(grad_close(gx.data[i], fd)) << "net " << net << " input " << i;
      EXPECT_NEAR(gx.data[i], manual_dx.data[i], 1e-12);
    }
  }
}

TEST(AutodiffChainRule, OneDimensionalHandDerivation) {
  // f(x) = sigmoid(3x + 1)^2, f'(x) = 2 s^2 (1 - s) * 3
  const double x = 0.2;
  Value xv = Value::variable(Matrix(1, 1, x));
  Value s = ad::sigmoid(ad::add_scalar(ad::scale(xv, 3.0), 1.0));
  Value g = ad::grad(ad::mul(s, s), xv);
  const double sv = 1.0 / (1.0 + std::exp(-(3 * x + 1)));
  EXPECT_NEAR(g.item(), 2 * sv * sv * (1 - sv) * 3, 1e-12);
}

TEST(AutodiffGroupSoftmax, RowsSumToOnePerGroup) {
  Rng rng(5);
  const std::vector<ColumnSpan> spans{{1, 3}, {5, 2}};
  for (int trial = 0; trial < 50; ++trial) {
    Matrix x = random_matrix(4, 8, rng, -20.0, 20.0);
    Value y = ad::group_softmax(Value::constant(x), spans);
    for (std::size_t r = 0; r < 4; ++r) {
      for (const auto& s : spans) {
        double total = 0.0;
        for (std::size_t j = 0; j < s.length; ++j) {
          const double v = y(r, s.start + j);
          EXPECT_GE(v, 0.0);
          total += v;
        }
        EXPECT_NEAR(total, 1.0, 1e-12);
      }
      for (std::size_t c : {0u, 4u, 7u}) EXPECT_EQ(y(r, c), 0.0);
    }
  }
}

TEST(AutodiffGrad, NonScalarLossIsShapeError) {
  Value x = Value::variable(Matrix(2, 2, 1.0));
  EXPECT_THROW(ad::grad(x, x), ShapeError);
}

TEST(AutodiffGrad, DisconnectedInputsGetZeros) {
  Value a = Value::variable(Matrix(1, 2, 1.0));
  Value b = Value::variable(Matrix(2, 3, 1.0));
  auto g = ad::grad(ad::sum(ad::mul(a, a)), std::vector<Value>{a, b});
  EXPECT_EQ(g[1].shape(), b.shape());
  for (double v : g[1].data()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(g[0].data()[0], 2.0);
}

TEST(AutodiffGrad, MismatchedShapesAreRejected) {
  Value a = Value::variable(Matrix(2, 3, 1.0));
  Value b = Value::variable(Matrix(2, 2, 1.0));
  EXPECT_THROW(ad::add(a, b), ShapeError);
  EXPECT_THROW(ad::matmul(a, b), ShapeError);
}

TEST(AutodiffGrad, NoGradGuardRecordsNothing) {
  Value a = Value::variable(Matrix(1, 1, 2.0));
  ad::NoGradGuard guard;
  Value b = ad::mul(a, a);
  EXPECT_FALSE(b.requires_grad());
}

TEST(AutodiffGrad, NanPropagates) {
  Value a = Value::variable(Matrix(1, 2, std::vector<double>{std::nan(""), 1.0}));
  Value w = Value::constant(Matrix(2, 1, std::vector<double>{0.0, 1.0}));
  Value out = ad::matmul(a, w);
  EXPECT_TRUE(std::isnan(out.item()));
}

TEST(AutodiffFunctionalStep, SecondOrderPathDependsOnFlag) {
  // loss(w) = (w d)^2 ; w' = w - eta * 2 w d^2 ; outer = w'
  // d outer / d d = -eta * 4 w d with the graph kept, 0 when first_order.
  const double w0 = 0.7, d0 = 0.3, eta = 0.1;
  for (bool first_order : {false, true}) {
    Value d = Value::variable(Matrix(1, 1, d0));
    ad::ParamBlock p;
    p.add("w", Value::variable(Matrix(1, 1, w0)));
    Value inner = ad::mul(ad::mul(p[0], d), ad::mul(p[0], d));
    auto stepped = ad::functional_step(p, inner, eta, first_order);
    EXPECT_NEAR(stepped[0].item(), w0 - eta * 2 * w0 * d0 * d0, 1e-15);
    Value g = ad::grad(ad::sum(stepped[0]), d);
    EXPECT_NEAR(g.item(), first_order ? 0.0 : -eta * 4 * w0 * d0, 1e-15);
  }
}

TEST(ParamBlockTest, ConcatSplitRoundTrip) {
  ad::ParamBlock a, b;
  a.add("a", Value::variable(Matrix(1, 1, 1.0)));
  b.add("b", Value::variable(Matrix(1, 2, 2.0)));
  b.add("c", Value::variable(Matrix(2, 1, 3.0)));
  auto joined = ad::ParamBlock::concat(a, b);
  ASSERT_EQ(joined.size(), 3u);
  auto [left, right] = joined.split(1);
  EXPECT_TRUE(left.same_data(a));
  EXPECT_TRUE(right.same_data(b));
  EXPECT_FALSE(right.same_data(a));
}

}  // namespace
}  // namespace recourse
