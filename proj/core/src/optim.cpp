#include "recourse/optim.hpp"

#include <cmath>
#include <string>

#include "recourse/errors.hpp"

namespace recourse::optim {

void Optimizer::apply(ad::ParamBlock& params, std::span<const ad::Value> grads) {
  if (grads.size() != params.size()) {
    throw ShapeError("apply_grads: " + std::to_string(params.size()) + " parameters but " +
                     std::to_string(grads.size()) + " gradients");
  }
  std::vector<std::size_t> sizes;
  sizes.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].shape() != grads[i].shape()) {
      throw ShapeError("apply_grads: parameter '" + params.name(i) + "' has shape " + params[i].shape().str() +
                       " but gradient has shape " + grads[i].shape().str());
    }
    sizes.push_back(params[i].numel());
  }
  begin_step(sizes);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix m = params[i].matrix();
    update(i, m.data, grads[i].data());
    params[i] = ad::Value::variable(std::move(m));
  }
}

void Sgd::update(std::size_t, std::span<double> param, std::span<const double> grad) {
  for (std::size_t i = 0; i < param.size(); ++i) param[i] -= lr_ * grad[i];
}

Adam::Adam(AdamOptions options) : Optimizer(options.lr), opt_(options) {}

void Adam::begin_step(std::span<const std::size_t> sizes) {
  if (t_ == 0) {
    m_.clear();
    v_.clear();
    for (auto n : sizes) {
      m_.emplace_back(n, 0.0);
      v_.emplace_back(n, 0.0);
    }
  } else {
    bool same = sizes.size() == m_.size();
    for (std::size_t i = 0; same && i < sizes.size(); ++i) same = sizes[i] == m_[i].size();
    if (!same) throw ShapeError("apply_grads: Adam state was created for a different parameter layout");
  }
  ++t_;
}

void Adam::update(std::size_t slot, std::span<double> param, std::span<const double> grad) {
  auto& m = m_[slot];
  auto& v = v_[slot];
  const double c1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < param.size(); ++i) {
    m[i] = opt_.beta1 * m[i] + (1.0 - opt_.beta1) * grad[i];
    v[i] = opt_.beta2 * v[i] + (1.0 - opt_.beta2) * grad[i] * grad[i];
    const double mhat = m[i] / c1;
    const double vhat = v[i] / c2;
    param[i] -= opt_.lr * mhat / (std::sqrt(vhat) + opt_.eps);
  }
}

std::unique_ptr<Optimizer> make(Kind kind, double lr) {
  if (kind == Kind::kSgd) return std::make_unique<Sgd>(lr);
  return std::make_unique<Adam>(AdamOptions{.lr = lr});
}

Kind parse_kind(std::string_view name) {
  if (name == "sgd") return Kind::kSgd;
  if (name == "adam") return Kind::kAdam;
  throw ConfigError("unknown optimizer '" + std::string(name) + "' (expected sgd or adam)");
}

std::string_view to_string(Kind kind) { return kind == Kind::kSgd ? "sgd" : "adam"; }

}  // namespace recourse::optim
