#pragma once

#include <memory>
#include <random>
#include <string>
#include <vector>

#include "spdnet/config.hpp"
#include "spdnet/model.hpp"
#include "spdnet/nn.hpp"
#include "spdnet/periods.hpp"
#include "spdnet/stdm.hpp"
#include "spdnet/tensor.hpp"

namespace spdnet {

/// Optional per-forward diagnostics: detected periods, attention
/// probabilities (one [B,N,N] tensor per period/layer/head) and the raw
/// branch outputs per period.
struct ForwardTrace {
  PeriodSet periods;
  std::vector<Tensor> attention;
  std::vector<Tensor> short_outputs;
  std::vector<Tensor> periodic_outputs;
  std::vector<Tensor> long_outputs;
  Tensor pdm_output;
  Tensor stdm_output;
};

/// One encoder layer over the N variate tokens: multi-head self-attention,
/// head concat + mixing, layer norm, feed-forward, residual over the FFN,
/// and a closing layer norm.
struct EncoderLayer {
  std::vector<Parameter> wq;  // per head, [d_model, d_k]
  std::vector<Parameter> wk;
  std::vector<Parameter> wv;
  Parameter mix;      // [d_model, d_model], identity at init
  Parameter ffn1_w;   // [d_model, d_ff]
  Parameter ffn1_b;   // [d_ff]
  Parameter ffn2_w;   // [d_ff, d_model]
  Parameter ffn2_b;   // [d_model]
  Parameter norm1_gain, norm1_bias;
  Parameter norm2_gain, norm2_bias;
};

/// Periodical decomposition: for each dominant period the input is folded to
/// a [period x cycles] plane and pushed through three parallel branches
/// (short-term 1D conv, periodic 2D conv, long-term encoder); branch sums are
/// fused across periods with a learnable linear map.
///
/// Every learnable shape depends only on the configuration, never on the
/// periods detected in a particular window.
class PdmModule {
 public:
  PdmModule(const ModelConfig& cfg, std::mt19937_64& rng);

  Tensor forward(const Tensor& x, ForwardTrace* trace = nullptr) const;

  // Branch entry points, exposed for white-box verification.
  Tensor short_branch(const Folded& folded) const;
  Tensor periodic_branch(const Folded& folded) const;
  Tensor long_branch(const Folded& folded, ForwardTrace* trace = nullptr) const;

  void collect_parameters(std::vector<Parameter>& out) const;

 private:
  Tensor conv_within_period(const Folded& folded, const Parameter& kernel) const;
  Tensor project_time(const Tensor& x, const Parameter& w, const Parameter& b) const;
  Tensor encode(const Tensor& embedded, ForwardTrace* trace) const;

  std::size_t seq_len_;
  std::size_t pred_len_;
  std::size_t channels_;
  std::size_t k_max_;
  std::size_t d_model_;
  std::size_t heads_;
  std::size_t d_ff_;
  Activation activation_;

  Parameter short_conv_;     // [1,1,3]
  Parameter short_proj_w_;   // [S,P]
  Parameter short_proj_b_;   // [P]
  Parameter periodic_conv_;  // [1,1,3,3]
  Parameter periodic_proj_w_;
  Parameter periodic_proj_b_;
  Parameter long_conv_;      // [1,1,3]
  Parameter embed_w_;        // [S, d_model]
  Parameter embed_b_;        // [d_model]
  std::vector<EncoderLayer> encoder_;
  Parameter long_proj_w_;    // [d_model, P]
  Parameter long_proj_b_;    // [P]
  Parameter fusion_;         // [k_max, 1]
};

/// Full forecaster: weighted sum of the periodical branch and the
/// seasonal-trend branch, both mapping [B,S,N] -> [B,P,N].
class SpdNet : public ForecastModel {
 public:
  explicit SpdNet(const ModelConfig& cfg);

  std::string name() const override { return "spdnet"; }
  Tensor forward(const Tensor& inputs) override { return forward_traced(inputs, nullptr); }
  Tensor forward_traced(const Tensor& inputs, ForwardTrace* trace) const;
  std::vector<Parameter> parameters() override;

  const ModelConfig& config() const { return cfg_; }
  StdmModule& stdm() { return *stdm_; }
  PdmModule& pdm() { return *pdm_; }
  const Parameter& alpha_pdm() const { return alpha_pdm_; }
  const Parameter& alpha_stdm() const { return alpha_stdm_; }

  /// When set, appends the detected period set to this file on every forward.
  void set_period_dump(const std::string& path) { period_dump_path_ = path; }

 private:
  ModelConfig cfg_;
  std::unique_ptr<StdmModule> stdm_;
  std::unique_ptr<PdmModule> pdm_;
  Parameter alpha_pdm_;
  Parameter alpha_stdm_;
  std::string period_dump_path_;
};

}  // namespace spdnet
