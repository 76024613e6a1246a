#pragma once

#include <random>
#include <vector>

#include "spdnet/config.hpp"
#include "spdnet/nn.hpp"
#include "spdnet/tensor.hpp"

namespace spdnet {

/// Seasonal-trend decomposition: a wide per-channel convolution extracts the
/// trend, a narrower one extracts seasonality from the detrended series, and
/// the residual is whatever remains. The recombined series (identically the
/// input) is projected from length S to the horizon P.
///
/// Both convolutions start as uniform moving averages and are learnable.
class StdmModule {
 public:
  StdmModule(const ModelConfig& cfg, std::mt19937_64& rng);

  struct Components {
    Tensor trend;
    Tensor seasonal;
    Tensor residual;
  };

  /// Splits x [B,S,N] into trend/seasonal/residual, each [B,S,N].
  Components decompose(const Tensor& x) const;

  /// Recombines the components and projects to [B,P,N].
  Tensor forward(const Tensor& x) const;

  void collect_parameters(std::vector<Parameter>& out) const;

 private:
  std::size_t seq_len_;
  std::size_t pred_len_;
  std::size_t channels_;
  Parameter trend_kernel_;     // [N, trend_kernel]
  Parameter seasonal_kernel_;  // [N, seasonal_kernel]
  Parameter proj_weight_;      // [S, P], shared across channels
  Parameter proj_bias_;        // [P]
};

}  // namespace spdnet
