#pragma once

#include <string>
#include <vector>

#include "spdnet/nn.hpp"
#include "spdnet/tensor.hpp"

namespace spdnet {

/// Common surface for everything the training/evaluation harness can drive.
class ForecastModel {
 public:
  virtual ~ForecastModel() = default;
  virtual std::string name() const = 0;
  /// Maps inputs [B,S,N] to forecasts [B,P,N].
  virtual Tensor forward(const Tensor& inputs) = 0;
  virtual std::vector<Parameter> parameters() = 0;
};

}  // namespace spdnet
