#include "spdnet/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace spdnet {

Tensor init_uniform(std::mt19937_64& rng, std::vector<std::size_t> shape, std::size_t fan_in) {
  if (fan_in == 0) throw std::invalid_argument("init_uniform: fan_in must be positive");
  const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  std::vector<double> values(n);
  for (double& v : values) v = dist(rng);
  return Tensor(std::move(shape), std::move(values), /*requires_grad=*/true);
}

Tensor init_zeros(std::vector<std::size_t> shape) {
  return Tensor::zeros(std::move(shape), /*requires_grad=*/true);
}

Tensor init_full(std::vector<std::size_t> shape, double value) {
  return Tensor::full(std::move(shape), value, /*requires_grad=*/true);
}

Tensor init_identity(std::size_t n) {
  std::vector<double> values(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) values[i * n + i] = 1.0;
  return Tensor({n, n}, std::move(values), /*requires_grad=*/true);
}

Tensor linear_last_dim(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  Tensor out = matmul(x, weight);
  if (bias.defined()) out = add(out, bias);
  return out;
}

Adam::Adam(std::vector<Parameter> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  m_.resize(params_.size());
  v_.resize(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) {
    m_[i].assign(params_[i].value.numel(), 0.0);
    v_[i].assign(params_[i].value.numel(), 0.0);
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Parameter& p = params_[i];
    if (!p.value.has_grad()) continue;
    const auto& g = p.value.grad();
    auto& w = p.value.values();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gj = g[j];
      if (!std::isfinite(gj)) {
        throw std::runtime_error("adam: non-finite gradient for parameter '" + p.name + "'");
      }
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * gj;
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * gj * gj;
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      w[j] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
    }
  }
}

void Adam::zero_grad() {
  for (Parameter& p : params_) p.value.zero_grad();
}

}  // namespace spdnet
