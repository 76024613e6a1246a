#include "spdnet/stdm.hpp"

#include <stdexcept>

#include "spdnet/ops.hpp"

namespace spdnet {

StdmModule::StdmModule(const ModelConfig& cfg, std::mt19937_64& rng) {
  seq_len_ = cfg.seq_len;
  pred_len_ = cfg.pred_len;
  channels_ = cfg.channels;
  const std::size_t kt = cfg.trend_kernel;
  const std::size_t ks = cfg.seasonal_kernel;
  if (kt % 2 == 0 || ks % 2 == 0) {
    throw std::invalid_argument("stdm: kernels must be odd, got trend=" + std::to_string(kt) +
                                " seasonal=" + std::to_string(ks));
  }
  if (!(kt > ks && ks >= 1)) {
    throw std::invalid_argument("stdm: require trend_kernel > seasonal_kernel >= 1");
  }
  if (kt >= seq_len_) {
    throw std::invalid_argument("stdm: trend kernel " + std::to_string(kt) +
                                " must be smaller than seq_len " + std::to_string(seq_len_));
  }

  trend_kernel_ = {"stdm.trend_conv.weight",
                   init_full({channels_, kt}, 1.0 / static_cast<double>(kt))};
  seasonal_kernel_ = {"stdm.seasonal_conv.weight",
                      init_full({channels_, ks}, 1.0 / static_cast<double>(ks))};
  proj_weight_ = {"stdm.proj.weight", init_uniform(rng, {seq_len_, pred_len_}, seq_len_)};
  proj_bias_ = {"stdm.proj.bias", init_zeros({pred_len_})};
}

StdmModule::Components StdmModule::decompose(const Tensor& x) const {
  if (x.rank() != 3 || x.extent(1) != seq_len_ || x.extent(2) != channels_) {
    throw std::invalid_argument("stdm: input " + shape_string(x.shape()) + " does not match built dims [B," +
                                std::to_string(seq_len_) + "," + std::to_string(channels_) + "]");
  }
  // Convolve over time with channels laid out as [B,N,S].
  Tensor x_cn = permute(x, {0, 2, 1});
  Tensor trend_cn = depthwise_conv1d(x_cn, trend_kernel_.value, Padding::kSame);
  Tensor trend = permute(trend_cn, {0, 2, 1});

  Tensor detrended = sub(x, trend);
  Tensor seasonal_cn = depthwise_conv1d(permute(detrended, {0, 2, 1}), seasonal_kernel_.value,
                                        Padding::kSame);
  Tensor seasonal = permute(seasonal_cn, {0, 2, 1});

  Tensor residual = sub(detrended, seasonal);
  return {trend, seasonal, residual};
}

Tensor StdmModule::forward(const Tensor& x) const {
  Components parts = decompose(x);
  Tensor recombined = add(add(parts.seasonal, parts.trend), parts.residual);
  Tensor by_channel = permute(recombined, {0, 2, 1});  // [B,N,S]
  Tensor projected = linear_last_dim(by_channel, proj_weight_.value, proj_bias_.value);
  return permute(projected, {0, 2, 1});  // [B,P,N]
}

void StdmModule::collect_parameters(std::vector<Parameter>& out) const {
  out.push_back(trend_kernel_);
  out.push_back(seasonal_kernel_);
  out.push_back(proj_weight_);
  out.push_back(proj_bias_);
}

}  // namespace spdnet
