#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "recourse/autodiff.hpp"

namespace recourse::optim {

// In-place first-order update of a ParamBlock. An optimizer instance keeps
// state for exactly one ParamBlock layout; feeding it a different layout is
// an error.
class Optimizer {
 public:
  virtual ~Optimizer() = default;

  // Replaces every tensor in `params` with its updated value as a fresh leaf.
  void apply(ad::ParamBlock& params, std::span<const ad::Value> grads);

  double learning_rate() const { return lr_; }

 protected:
  explicit Optimizer(double lr) : lr_(lr) {}
  virtual void update(std::size_t slot, std::span<double> param, std::span<const double> grad) = 0;
  virtual void begin_step(std::span<const std::size_t> sizes) = 0;

  double lr_;
};

class Sgd final : public Optimizer {
 public:
  explicit Sgd(double lr) : Optimizer(lr) {}

 private:
  void begin_step(std::span<const std::size_t>) override {}
  void update(std::size_t slot, std::span<double> param, std::span<const double> grad) override;
};

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam final : public Optimizer {
 public:
  explicit Adam(AdamOptions options);

  long steps_taken() const { return t_; }

 private:
  void begin_step(std::span<const std::size_t> sizes) override;
  void update(std::size_t slot, std::span<double> param, std::span<const double> grad) override;

  AdamOptions opt_;
  long t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

enum class Kind { kSgd, kAdam };

std::unique_ptr<Optimizer> make(Kind kind, double lr);
Kind parse_kind(std::string_view name);
std::string_view to_string(Kind kind);

}  // namespace recourse::optim
