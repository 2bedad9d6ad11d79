#include "recourse/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <unordered_map>
#include <unordered_set>

#include "recourse/errors.hpp"

namespace recourse::ad {

namespace {

thread_local bool t_grad_enabled = true;

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + a.str() + " and " + b.str());
}

[[noreturn]] void shape_error(const char* op, const Shape& a, const std::string& why) {
  throw ShapeError(std::string(op) + ": shape " + a.str() + " " + why);
}

bool needs(std::uint32_t mask, std::size_t i) { return (mask >> i) & 1U; }

template <typename F>
Value unary_map(const char* op, const Value& a, F f, BackwardFn backward) {
  std::vector<double> out(a.numel());
  auto in = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
  return make_value(op, a.shape(), std::move(out), {a}, std::move(backward));
}

// Elementwise derivative pattern of a piecewise-linear function, as a constant.
template <typename F>
Value derivative_mask(const Value& a, F f) {
  std::vector<double> out(a.numel());
  auto in = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
  return Value::constant(Matrix(a.rows(), a.cols(), std::move(out)));
}

void check_same(const char* op, const Value& a, const Value& b) {
  if (a.shape() != b.shape()) shape_error(op, a.shape(), b.shape());
}

void check_spans(const char* op, const Value& a, std::span<const ColumnSpan> spans) {
  for (const auto& s : spans) {
    if (s.start + s.length > a.cols()) shape_error(op, a.shape(), "does not contain the requested column span");
  }
}

}  // namespace

std::string Shape::str() const { return "[" + std::to_string(rows) + "," + std::to_string(cols) + "]"; }

// ---- Value ----------------------------------------------------------------

Value Value::constant(Matrix m) {
  Value v;
  v.shape_ = {m.rows, m.cols};
  v.data_ = std::make_shared<const std::vector<double>>(std::move(m.data));
  return v;
}

Value Value::constant(Shape shape, double fill) { return constant(Matrix(shape.rows, shape.cols, fill)); }

Value Value::scalar(double v) { return constant(Matrix(1, 1, v)); }

Value Value::variable(Matrix m) {
  Value v = constant(std::move(m));
  v.node_ = std::make_shared<Node>();
  return v;
}

std::span<const double> Value::data() const {
  if (!data_) return {};
  return {data_->data(), data_->size()};
}

double Value::item() const {
  if (numel() != 1) shape_error("item", shape_, "is not a scalar");
  return (*data_)[0];
}

Matrix Value::matrix() const { return Matrix(shape_.rows, shape_.cols, data_ ? *data_ : std::vector<double>{}); }

Value Value::detach() const {
  Value v;
  v.shape_ = shape_;
  v.data_ = data_;
  return v;
}

Value Value::as_variable() const {
  Value v = detach();
  v.node_ = std::make_shared<Node>();
  return v;
}

Value make_value(const char* op, Shape shape, std::vector<double> data, std::vector<Value> inputs,
                 BackwardFn backward) {
  Value v;
  v.shape_ = shape;
  v.data_ = std::make_shared<const std::vector<double>>(std::move(data));
  const bool track = t_grad_enabled && std::any_of(inputs.begin(), inputs.end(),
                                                   [](const Value& in) { return in.requires_grad(); });
  if (track) {
    auto node = std::make_shared<Node>();
    node->op = op;
    node->inputs = std::move(inputs);
    node->backward = std::move(backward);
    v.node_ = std::move(node);
  }
  return v;
}

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

// ---- primitives -----------------------------------------------------------

Value matmul(const Value& a, const Value& b) {
  if (a.cols() != b.rows()) shape_error("matmul", a.shape(), b.shape());
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(m * n, 0.0);
  auto A = a.data();
  auto B = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = A[i * k + p];
      const double* brow = B.data() + p * n;
      double* orow = out.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  }
  return make_value("matmul", {m, n}, std::move(out), {a, b},
                    [](const std::vector<Value>& in, const Value& g, std::uint32_t mask) {
                      std::vector<Value> r(2);
                      if (needs(mask, 0)) r[0] = matmul(g, transpose(in[1]));
                      if (needs(mask, 1)) r[1] = matmul(transpose(in[0]), g);
                      return r;
                    });
}

Value transpose(const Value& a) {
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(m * n);
  auto A = a.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = A[i * n + j];
  return make_value("transpose", {n, m}, std::move(out), {a},
                    [](const std::vector<Value>&, const Value& g, std::uint32_t) {
                      return std::vector<Value>{transpose(g)};
                    });
}

Value add(const Value& a, const Value& b) {
  check_same("add", a, b);
  std::vector<double> out(a.numel());
  auto A = a.data();
  auto B = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] + B[i];
  return make_value("add", a.shape(), std::move(out), {a, b},
                    [](const std::vector<Value>&, const Value& g, std::uint32_t) {
                      return std::vector<Value>{g, g};
                    });
}

Value sub(const Value& a, const Value& b) {
  check_same("sub", a, b);
  std::vector<double> out(a.numel());
  auto A = a.data();
  auto B = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] - B[i];
  return make_value("sub", a.shape(), std::move(out), {a, b},
                    [](const std::vector<Value>&, const Value& g, std::uint32_t mask) {
                      std::vector<Value> r(2);
                      r[0] = g;
                      if (needs(mask, 1)) r[1] = neg(g);
                      return r;
                    });
}

Value mul(const Value& a, const Value& b) {
  check_same("mul", a, b);
  std::vector<double> out(a.numel());
  auto A = a.data();
  auto B = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] * B[i];
  return make_value("mul", a.shape(), std::move(out), {a, b},
                    [](const std::vector<Value>& in, const Value& g, std::uint32_t mask) {
                      std::vector<Value> r(2);
                      if (needs(mask, 0)) r[0] = mul(g, in[1]);
                      if (needs(mask, 1)) r[1] = mul(g, in[0]);
                      return r;
                    });
}

Value neg(const Value& a) { return scale(a, -1.0); }

Value scale(const Value& a, double k) {
  return unary_map("scale", a, [k](double x) { return k * x; },
                   [k](const std::vector<Value>&, const Value& g, std::uint32_t) {
                     return std::vector<Value>{scale(g, k)};
                   });
}

Value add_scalar(const Value& a, double k) {
  return unary_map("add_scalar", a, [k](double x) { return x + k; },
                   [](const std::vector<Value>&, const Value& g, std::uint32_t) { return std::vector<Value>{g}; });
}

Value add_row(const Value& a, const Value& bias) {
  if (bias.rows() != 1 || bias.cols() != a.cols()) shape_error("add_row", a.shape(), bias.shape());
  std::vector<double> out(a.numel());
  auto A = a.data();
  auto B = bias.data();
  const std::size_t n = a.cols();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] + B[i % n];
  return make_value("add_row", a.shape(), std::move(out), {a, bias},
                    [](const std::vector<Value>&, const Value& g, std::uint32_t mask) {
                      std::vector<Value> r(2);
                      r[0] = g;
                      if (needs(mask, 1)) r[1] = sum_rows(g);
                      return r;
                    });
}

Value sum_rows(const Value& a) {
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(n, 0.0);
  auto A = a.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j] += A[i * n + j];
  return make_value("sum_rows", {1, n}, std::move(out), {a},
                    [m](const std::vector<Value>&, const Value& g, std::uint32_t) {
                      return std::vector<Value>{broadcast_rows(g, m)};
                    });
}

Value broadcast_rows(const Value& a, std::size_t rows) {
  if (a.rows() != 1) shape_error("broadcast_rows", a.shape(), "must have exactly one row");
  const std::size_t n = a.cols();
  std::vector<double> out(rows * n);
  auto A = a.data();
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = A[j];
  return make_value("broadcast_rows", {rows, n}, std::move(out), {a},
                    [](const std::vector<Value>&, const Value& g, std::uint32_t) {
                      return std::vector<Value>{sum_rows(g)};
                    });
}

Value sum(const Value& a) {
  double total = 0.0;
  for (double x : a.data()) total += x;
  const Shape shape = a.shape();
  return make_value("sum", {1, 1}, {total}, {a}, [shape](const std::vector<Value>&, const Value& g, std::uint32_t) {
    return std::vector<Value>{broadcast(g, shape)};
  });
}

Value broadcast(const Value& s, Shape shape) {
  if (s.numel() != 1) shape_error("broadcast", s.shape(), "is not a scalar");
  std::vector<double> out(shape.numel(), s.data()[0]);
  return make_value("broadcast", shape, std::move(out), {s},
                    [](const std::vector<Value>&, const Value& g, std::uint32_t) {
                      return std::vector<Value>{sum(g)};
                    });
}

Value mean(const Value& a) {
  if (a.numel() == 0) shape_error("mean", a.shape(), "is empty");
  return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Value leaky_relu(const Value& a, double slope) {
  return unary_map("leaky_relu", a, [slope](double x) { return x > 0.0 ? x : slope * x; },
                   [slope](const std::vector<Value>& in, const Value& g, std::uint32_t) {
                     auto d = derivative_mask(in[0], [slope](double x) { return x > 0.0 ? 1.0 : slope; });
                     return std::vector<Value>{mul(g, d)};
                   });
}

namespace {
double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}
}  // namespace

Value sigmoid(const Value& a) {
  return unary_map("sigmoid", a, logistic, [](const std::vector<Value>& in, const Value& g, std::uint32_t) {
    // d sigmoid = s * (1 - s), rebuilt from the input so it stays differentiable.
    Value s = sigmoid(in[0]);
    Value ds = mul(s, add_scalar(neg(s), 1.0));
    return std::vector<Value>{mul(g, ds)};
  });
}

Value abs(const Value& a) {
  return unary_map("abs", a, [](double x) { return std::abs(x); },
                   [](const std::vector<Value>& in, const Value& g, std::uint32_t) {
                     auto d = derivative_mask(in[0], [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
                     return std::vector<Value>{mul(g, d)};
                   });
}

Value clamp(const Value& a, double lo, double hi) {
  return unary_map("clamp", a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
                   [lo, hi](const std::vector<Value>& in, const Value& g, std::uint32_t) {
                     auto d = derivative_mask(in[0], [lo, hi](double x) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
                     return std::vector<Value>{mul(g, d)};
                   });
}

Value concat_cols(const Value& a, const Value& b) {
  if (a.rows() != b.rows()) shape_error("concat_cols", a.shape(), b.shape());
  const std::size_t m = a.rows(), na = a.cols(), nb = b.cols();
  std::vector<double> out(m * (na + nb));
  auto A = a.data();
  auto B = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < na; ++j) out[i * (na + nb) + j] = A[i * na + j];
    for (std::size_t j = 0; j < nb; ++j) out[i * (na + nb) + na + j] = B[i * nb + j];
  }
  return make_value("concat_cols", {m, na + nb}, std::move(out), {a, b},
                    [na, nb](const std::vector<Value>&, const Value& g, std::uint32_t mask) {
                      std::vector<Value> r(2);
                      if (needs(mask, 0)) r[0] = slice_cols(g, 0, na);
                      if (needs(mask, 1)) r[1] = slice_cols(g, na, nb);
                      return r;
                    });
}

Value slice_cols(const Value& a, std::size_t start, std::size_t length) {
  if (start + length > a.cols()) shape_error("slice_cols", a.shape(), "is narrower than the requested slice");
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(m * length);
  auto A = a.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < length; ++j) out[i * length + j] = A[i * n + start + j];
  return make_value("slice_cols", {m, length}, std::move(out), {a},
                    [start, n](const std::vector<Value>&, const Value& g, std::uint32_t) {
                      return std::vector<Value>{pad_cols(g, start, n)};
                    });
}

Value pad_cols(const Value& a, std::size_t start, std::size_t width) {
  if (start + a.cols() > width) shape_error("pad_cols", a.shape(), "does not fit the padded width");
  const std::size_t m = a.rows(), k = a.cols();
  std::vector<double> out(m * width, 0.0);
  auto A = a.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < k; ++j) out[i * width + start + j] = A[i * k + j];
  return make_value("pad_cols", {m, width}, std::move(out), {a},
                    [start, k](const std::vector<Value>&, const Value& g, std::uint32_t) {
                      return std::vector<Value>{slice_cols(g, start, k)};
                    });
}

Value group_softmax(const Value& a, std::span<const ColumnSpan> spans) {
  check_spans("group_softmax", a, spans);
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(m * n, 0.0);
  auto A = a.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (const auto& s : spans) {
      if (s.length == 0) continue;
      const double* in = A.data() + i * n + s.start;
      double* o = out.data() + i * n + s.start;
      const double hi = *std::max_element(in, in + s.length);
      double z = 0.0;
      for (std::size_t j = 0; j < s.length; ++j) {
        o[j] = std::exp(in[j] - hi);
        z += o[j];
      }
      for (std::size_t j = 0; j < s.length; ++j) o[j] /= z;
    }
  }
  std::vector<ColumnSpan> owned(spans.begin(), spans.end());
  return make_value("group_softmax", a.shape(), std::move(out), {a},
                    [owned](const std::vector<Value>& in, const Value& g, std::uint32_t) {
                      // dx = y * (g - groupsum(g * y))
                      Value y = group_softmax(in[0], owned);
                      Value inner = sub(g, group_sum(mul(g, y), owned));
                      return std::vector<Value>{mul(y, inner)};
                    });
}

Value group_sum(const Value& a, std::span<const ColumnSpan> spans) {
  check_spans("group_sum", a, spans);
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(m * n, 0.0);
  auto A = a.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (const auto& s : spans) {
      double total = 0.0;
      for (std::size_t j = 0; j < s.length; ++j) total += A[i * n + s.start + j];
      for (std::size_t j = 0; j < s.length; ++j) out[i * n + s.start + j] = total;
    }
  }
  std::vector<ColumnSpan> owned(spans.begin(), spans.end());
  // Symmetric linear map: its adjoint is itself.
  return make_value("group_sum", a.shape(), std::move(out), {a},
                    [owned](const std::vector<Value>&, const Value& g, std::uint32_t) {
                      return std::vector<Value>{group_sum(g, owned)};
                    });
}

Value mse(const Value& a, const Value& b) {
  check_same("mse", a, b);
  Value d = sub(a, b);
  return mean(mul(d, d));
}

Value l1_distance(const Value& a, const Value& b) {
  check_same("l1_distance", a, b);
  if (a.rows() == 0) shape_error("l1_distance", a.shape(), "has no rows");
  return scale(sum(abs(sub(a, b))), 1.0 / static_cast<double>(a.rows()));
}

// ---- ParamBlock -----------------------------------------------------------

void ParamBlock::add(std::string name, Value v) {
  names_.push_back(std::move(name));
  values_.push_back(std::move(v));
}

ParamBlock ParamBlock::detached() const {
  ParamBlock out;
  for (std::size_t i = 0; i < size(); ++i) out.add(names_[i], values_[i].detach());
  return out;
}

ParamBlock ParamBlock::as_variables() const {
  ParamBlock out;
  for (std::size_t i = 0; i < size(); ++i) out.add(names_[i], values_[i].as_variable());
  return out;
}

ParamBlock ParamBlock::concat(const ParamBlock& a, const ParamBlock& b) {
  ParamBlock out = a;
  for (std::size_t i = 0; i < b.size(); ++i) out.add(b.names_[i], b.values_[i]);
  return out;
}

std::pair<ParamBlock, ParamBlock> ParamBlock::split(std::size_t n) const {
  ParamBlock head, tail;
  for (std::size_t i = 0; i < size(); ++i) (i < n ? head : tail).add(names_[i], values_[i]);
  return {std::move(head), std::move(tail)};
}

bool ParamBlock::same_data(const ParamBlock& other) const {
  if (names_ != other.names_) return false;
  for (std::size_t i = 0; i < size(); ++i) {
    const auto& a = values_[i];
    const auto& b = other.values_[i];
    if (a.shape() != b.shape()) return false;
    auto da = a.data();
    auto db = b.data();
    if (!std::equal(da.begin(), da.end(), db.begin())) return false;
  }
  return true;
}

// ---- reverse sweep --------------------------------------------------------

std::vector<Value> grad(const Value& loss, std::span<const Value> wrt, GradOptions options) {
  if (loss.numel() != 1) throw ShapeError("grad: loss must be a scalar, got shape " + loss.shape().str());

  // Topological order (inputs before consumers) of every node reachable from the loss.
  std::vector<const Node*> order;
  if (loss.node()) {
    std::unordered_set<const Node*> seen;
    std::vector<std::pair<const Node*, std::size_t>> stack;
    stack.emplace_back(loss.node(), 0);
    seen.insert(loss.node());
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      if (next < node->inputs.size()) {
        const Node* child = node->inputs[next++].node();
        if (child && seen.insert(child).second) stack.emplace_back(child, 0);
      } else {
        order.push_back(node);
        stack.pop_back();
      }
    }
  }

  // Only nodes with a path to some requested tensor need a gradient.
  std::unordered_set<const Node*> relevant;
  for (const auto& w : wrt)
    if (w.node()) relevant.insert(w.node());
  for (const Node* node : order) {
    for (const auto& in : node->inputs) {
      if (in.node() && relevant.count(in.node())) {
        relevant.insert(node);
        break;
      }
    }
  }

  std::unordered_map<const Node*, Value> grads;
  {
    std::optional<NoGradGuard> guard;
    if (!options.create_graph) guard.emplace();

    if (loss.node() && relevant.count(loss.node())) grads[loss.node()] = Value::constant(loss.shape(), 1.0);

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const Node* node = *it;
      if (!node->backward) continue;
      auto found = grads.find(node);
      if (found == grads.end()) continue;

      std::uint32_t mask = 0;
      for (std::size_t i = 0; i < node->inputs.size(); ++i) {
        const Node* child = node->inputs[i].node();
        if (child && relevant.count(child)) mask |= (1U << i);
      }
      if (mask == 0) continue;

      std::vector<Value> input_grads = node->backward(node->inputs, found->second, mask);
      for (std::size_t i = 0; i < node->inputs.size(); ++i) {
        if (!((mask >> i) & 1U)) continue;
        const Node* child = node->inputs[i].node();
        auto existing = grads.find(child);
        if (existing == grads.end()) {
          grads.emplace(child, std::move(input_grads[i]));
        } else {
          existing->second = add(existing->second, input_grads[i]);
        }
      }
    }
  }

  std::vector<Value> out;
  out.reserve(wrt.size());
  for (const auto& w : wrt) {
    auto found = w.node() ? grads.find(w.node()) : grads.end();
    if (found == grads.end()) {
      out.push_back(Value::constant(w.shape(), 0.0));
    } else {
      out.push_back(found->second);
    }
  }
  return out;
}

std::vector<Value> grad(const Value& loss, const ParamBlock& wrt, GradOptions options) {
  return grad(loss, wrt.values(), options);
}

Value grad(const Value& loss, const Value& wrt, GradOptions options) {
  return grad(loss, std::span<const Value>(&wrt, 1), options).front();
}

ParamBlock functional_step(const ParamBlock& params, const Value& loss, double step, bool first_order) {
  auto g = grad(loss, params, {.create_graph = !first_order});
  ParamBlock out;
  for (std::size_t i = 0; i < params.size(); ++i) out.add(params.name(i), sub(params[i], scale(g[i], step)));
  return out;
}

}  // namespace recourse::ad
