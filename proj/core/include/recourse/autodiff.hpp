#pragma once

// Reverse-mode automatic differentiation over dense row-major matrices.
//
// Every Value is a rank-2 array of doubles. A Value built from tracked inputs
// carries a Node that records the primitive, its inputs and a backward rule.
// Backward rules are themselves written in terms of the primitives below, so
// when grad() runs with create_graph the returned gradients are ordinary
// graph-connected Values. That is what lets a caller take an optimizer step
// as a function (functional_step) and later differentiate through it.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "recourse/matrix.hpp"

namespace recourse::ad {

struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t numel() const { return rows * cols; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

// Half-open column range [start, start + length).
struct ColumnSpan {
  std::size_t start = 0;
  std::size_t length = 0;

  bool operator==(const ColumnSpan&) const = default;
};

class Value;
struct Node;

// Computes input gradients from the output gradient. Bit i of `needs` is set
// when input i requires a gradient; entries for unset bits may be left empty.
using BackwardFn =
    std::function<std::vector<Value>(const std::vector<Value>& inputs, const Value& grad, std::uint32_t needs)>;

struct Node {
  const char* op = "leaf";
  std::vector<Value> inputs;
  BackwardFn backward;  // empty for leaves
};

class Value {
 public:
  Value() = default;

  static Value constant(Matrix m);
  static Value constant(Shape shape, double fill);
  static Value scalar(double v);
  // A leaf that gradients may be requested for.
  static Value variable(Matrix m);

  const Shape& shape() const { return shape_; }
  std::size_t rows() const { return shape_.rows; }
  std::size_t cols() const { return shape_.cols; }
  std::size_t numel() const { return shape_.numel(); }
  bool defined() const { return data_ != nullptr; }

  std::span<const double> data() const;
  double operator()(std::size_t r, std::size_t c) const { return (*data_)[r * shape_.cols + c]; }
  double item() const;
  Matrix matrix() const;

  bool requires_grad() const { return node_ != nullptr; }
  bool is_leaf() const { return node_ && !node_->backward; }
  const Node* node() const { return node_.get(); }

  // Same data, no graph linkage.
  Value detach() const;
  // Same data, fresh leaf variable with no history.
  Value as_variable() const;

 private:
  friend Value make_value(const char* op, Shape shape, std::vector<double> data, std::vector<Value> inputs,
                          BackwardFn backward);

  Shape shape_;
  std::shared_ptr<const std::vector<double>> data_;
  std::shared_ptr<Node> node_;
};

// Builds a result Value. The node is only recorded when grad mode is enabled
// and at least one input requires a gradient.
Value make_value(const char* op, Shape shape, std::vector<double> data, std::vector<Value> inputs,
                 BackwardFn backward);

// Grad mode is thread-local; while a NoGradGuard is alive every primitive
// returns constants.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// ---- primitives -----------------------------------------------------------

Value matmul(const Value& a, const Value& b);
Value transpose(const Value& a);
Value add(const Value& a, const Value& b);
Value sub(const Value& a, const Value& b);
Value mul(const Value& a, const Value& b);
Value neg(const Value& a);
Value scale(const Value& a, double k);
Value add_scalar(const Value& a, double k);
// a[m,n] + bias[1,n] broadcast over rows.
Value add_row(const Value& a, const Value& bias);
// [m,n] -> [1,n]
Value sum_rows(const Value& a);
// [1,n] -> [rows,n]
Value broadcast_rows(const Value& a, std::size_t rows);
// [m,n] -> [1,1]
Value sum(const Value& a);
// [1,1] -> shape
Value broadcast(const Value& s, Shape shape);
Value mean(const Value& a);
Value leaky_relu(const Value& a, double slope = 0.01);
Value sigmoid(const Value& a);
Value abs(const Value& a);
Value clamp(const Value& a, double lo, double hi);
Value concat_cols(const Value& a, const Value& b);
Value slice_cols(const Value& a, std::size_t start, std::size_t length);
// Places a[m,k] at column `start` of an otherwise zero [m,width] matrix.
Value pad_cols(const Value& a, std::size_t start, std::size_t width);
// Softmax over each column span independently; columns outside every span are 0.
Value group_softmax(const Value& a, std::span<const ColumnSpan> spans);
// Replaces each entry inside a span with its row's span total; 0 elsewhere.
Value group_sum(const Value& a, std::span<const ColumnSpan> spans);

// Mean over all entries of (a - b)^2.
Value mse(const Value& a, const Value& b);
// Mean over rows of the row-wise l1 distance.
Value l1_distance(const Value& a, const Value& b);

// ---- parameters -----------------------------------------------------------

// Ordered, named list of tensors (weights and biases of one network block).
class ParamBlock {
 public:
  ParamBlock() = default;

  void add(std::string name, Value v);

  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }
  const Value& operator[](std::size_t i) const { return values_[i]; }
  Value& operator[](std::size_t i) { return values_[i]; }
  const std::string& name(std::size_t i) const { return names_[i]; }
  const std::vector<std::string>& names() const { return names_; }
  std::span<const Value> values() const { return values_; }

  // Constants holding the same data.
  ParamBlock detached() const;
  // Fresh leaf variables holding the same data.
  ParamBlock as_variables() const;

  // `a` followed by `b`.
  static ParamBlock concat(const ParamBlock& a, const ParamBlock& b);
  // First `n` tensors and the rest.
  std::pair<ParamBlock, ParamBlock> split(std::size_t n) const;

  // Exact data equality, names included.
  bool same_data(const ParamBlock& other) const;

 private:
  std::vector<std::string> names_;
  std::vector<Value> values_;
};

struct GradOptions {
  // Record the backward computation so the returned gradients are themselves
  // differentiable.
  bool create_graph = false;
};

// Gradients of a scalar `loss` with respect to each of `wrt`. Tensors that do
// not feed the loss (including constants) get zero gradients.
std::vector<Value> grad(const Value& loss, std::span<const Value> wrt, GradOptions options = {});
std::vector<Value> grad(const Value& loss, const ParamBlock& wrt, GradOptions options = {});
Value grad(const Value& loss, const Value& wrt, GradOptions options = {});

// Returns params - step * d(loss)/d(params) with the update kept on the graph,
// so the result stays differentiable with respect to anything `loss` depended
// on. With first_order the inner gradient is detached.
ParamBlock functional_step(const ParamBlock& params, const Value& loss, double step, bool first_order = false);

}  // namespace recourse::ad
