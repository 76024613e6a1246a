#pragma once

#include <random>
#include <string>
#include <vector>

#include "spdnet/ops.hpp"
#include "spdnet/tensor.hpp"

namespace spdnet {

/// A named learnable tensor. Names are unique within a model and double as
/// checkpoint keys.
struct Parameter {
  std::string name;
  Tensor value;
};

// Weight initialization: uniform in +/- sqrt(1/fan_in), zeros for biases.
Tensor init_uniform(std::mt19937_64& rng, std::vector<std::size_t> shape, std::size_t fan_in);
Tensor init_zeros(std::vector<std::size_t> shape);
Tensor init_full(std::vector<std::size_t> shape, double value);
Tensor init_identity(std::size_t n);

/// x[...,K] * w[K,M] + b[M]
Tensor linear_last_dim(const Tensor& x, const Tensor& weight, const Tensor& bias);

/// First/second-moment optimizer with bias correction. Parameters with no
/// accumulated gradient are left untouched.
class Adam {
 public:
  explicit Adam(std::vector<Parameter> params, double lr = 1e-3, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8);

  void step();
  void zero_grad();

  std::int64_t step_count() const { return t_; }

 private:
  std::vector<Parameter> params_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::int64_t t_ = 0;
  double lr_;
  double beta1_;
  double beta2_;
  double eps_;
};

}  // namespace spdnet
