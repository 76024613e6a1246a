#include "spdnet/pdm.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "spdnet/ops.hpp"

namespace spdnet {

// ============================================================================
// PdmModule
// ============================================================================

PdmModule::PdmModule(const ModelConfig& cfg, std::mt19937_64& rng) {
  seq_len_ = cfg.seq_len;
  pred_len_ = cfg.pred_len;
  channels_ = cfg.channels;
  k_max_ = cfg.top_k;
  d_model_ = cfg.d_model;
  heads_ = cfg.heads;
  d_ff_ = cfg.d_ff;
  activation_ = cfg.activation;

  if (d_model_ % heads_ != 0) {
    throw std::invalid_argument("pdm: d_model " + std::to_string(d_model_) +
                                " not divisible by heads " + std::to_string(heads_));
  }
  const std::size_t d_k = d_model_ / heads_;

  short_conv_ = {"pdm.short.conv.weight", init_uniform(rng, {1, 1, 3}, 3)};
  short_proj_w_ = {"pdm.short.proj.weight", init_uniform(rng, {seq_len_, pred_len_}, seq_len_)};
  short_proj_b_ = {"pdm.short.proj.bias", init_zeros({pred_len_})};

  periodic_conv_ = {"pdm.periodic.conv.weight", init_uniform(rng, {1, 1, 3, 3}, 9)};
  periodic_proj_w_ = {"pdm.periodic.proj.weight", init_uniform(rng, {seq_len_, pred_len_}, seq_len_)};
  periodic_proj_b_ = {"pdm.periodic.proj.bias", init_zeros({pred_len_})};

  long_conv_ = {"pdm.long.conv.weight", init_uniform(rng, {1, 1, 3}, 3)};
  embed_w_ = {"pdm.long.embed.weight", init_uniform(rng, {seq_len_, d_model_}, seq_len_)};
  embed_b_ = {"pdm.long.embed.bias", init_zeros({d_model_})};

  encoder_.resize(cfg.layers);
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    EncoderLayer& layer = encoder_[l];
    const std::string base = "pdm.long.encoder." + std::to_string(l) + ".";
    for (std::size_t h = 0; h < heads_; ++h) {
      const std::string head = base + "head." + std::to_string(h) + ".";
      layer.wq.push_back({head + "wq", init_uniform(rng, {d_model_, d_k}, d_model_)});
      layer.wk.push_back({head + "wk", init_uniform(rng, {d_model_, d_k}, d_model_)});
      layer.wv.push_back({head + "wv", init_uniform(rng, {d_model_, d_k}, d_model_)});
    }
    layer.mix = {base + "mix.weight", init_identity(d_model_)};
    layer.ffn1_w = {base + "ffn1.weight", init_uniform(rng, {d_model_, d_ff_}, d_model_)};
    layer.ffn1_b = {base + "ffn1.bias", init_zeros({d_ff_})};
    layer.ffn2_w = {base + "ffn2.weight", init_uniform(rng, {d_ff_, d_model_}, d_ff_)};
    layer.ffn2_b = {base + "ffn2.bias", init_zeros({d_model_})};
    layer.norm1_gain = {base + "norm1.gain", init_full({d_model_}, 1.0)};
    layer.norm1_bias = {base + "norm1.bias", init_zeros({d_model_})};
    layer.norm2_gain = {base + "norm2.gain", init_full({d_model_}, 1.0)};
    layer.norm2_bias = {base + "norm2.bias", init_zeros({d_model_})};
  }

  long_proj_w_ = {"pdm.long.proj.weight", init_uniform(rng, {d_model_, pred_len_}, d_model_)};
  long_proj_b_ = {"pdm.long.proj.bias", init_zeros({pred_len_})};

  fusion_ = {"pdm.fusion.weight", init_uniform(rng, {k_max_, 1}, k_max_)};
}

// Shared single-channel conv along the time-within-period axis, one lane per
// (batch, channel, cycle).
Tensor PdmModule::conv_within_period(const Folded& folded, const Parameter& kernel) const {
  const Tensor& t = folded.tensor;  // [B,p,f,N]
  const std::size_t B = t.extent(0), p = t.extent(1), f = t.extent(2), N = t.extent(3);
  Tensor lanes = reshape(permute(t, {0, 3, 2, 1}), {B * N * f, 1, p});
  Tensor conved = conv1d(lanes, kernel.value, Padding::kSame);
  return permute(reshape(conved, {B, N, f, p}), {0, 3, 2, 1});
}

Tensor PdmModule::project_time(const Tensor& x, const Parameter& w, const Parameter& b) const {
  Tensor by_channel = permute(x, {0, 2, 1});  // [B,N,S]
  Tensor projected = linear_last_dim(by_channel, w.value, b.value);
  return permute(projected, {0, 2, 1});  // [B,P,N]
}

Tensor PdmModule::short_branch(const Folded& folded) const {
  Tensor conved = conv_within_period(folded, short_conv_);
  Tensor series = unfold({conved, folded.valid_length, folded.entry});
  return project_time(series, short_proj_w_, short_proj_b_);
}

Tensor PdmModule::periodic_branch(const Folded& folded) const {
  const Tensor& t = folded.tensor;  // [B,p,f,N]
  const std::size_t B = t.extent(0), p = t.extent(1), f = t.extent(2), N = t.extent(3);
  Tensor planes = reshape(permute(t, {0, 3, 1, 2}), {B * N, 1, p, f});
  Tensor conved = conv2d(planes, periodic_conv_.value, Padding::kSame);
  Tensor back = permute(reshape(conved, {B, N, p, f}), {0, 2, 3, 1});
  Tensor series = unfold({back, folded.valid_length, folded.entry});
  return project_time(series, periodic_proj_w_, periodic_proj_b_);
}

Tensor PdmModule::encode(const Tensor& embedded, ForwardTrace* trace) const {
  const std::size_t d_k = d_model_ / heads_;
  const double att_scale = 1.0 / std::sqrt(static_cast<double>(d_k));
  Tensor x = embedded;  // [B,N,d_model]
  for (const EncoderLayer& layer : encoder_) {
    std::vector<Tensor> heads;
    heads.reserve(heads_);
    for (std::size_t h = 0; h < heads_; ++h) {
      Tensor q = matmul(x, layer.wq[h].value);  // [B,N,d_k]
      Tensor k = matmul(x, layer.wk[h].value);
      Tensor v = matmul(x, layer.wv[h].value);
      Tensor scores = scale(matmul(q, permute(k, {0, 2, 1})), att_scale);  // [B,N,N]
      Tensor probs = softmax(scores, 2);
      if (trace) trace->attention.push_back(probs);
      heads.push_back(matmul(probs, v));
    }
    Tensor mixed = matmul(concat(heads, 2), layer.mix.value);  // [B,N,d_model]
    Tensor normed = layer_norm(mixed, layer.norm1_gain.value, layer.norm1_bias.value);
    Tensor hidden = linear_last_dim(normed, layer.ffn1_w.value, layer.ffn1_b.value);
    hidden = activation_ == Activation::kGelu ? gelu(hidden) : relu(hidden);
    Tensor ffn_out = linear_last_dim(hidden, layer.ffn2_w.value, layer.ffn2_b.value);
    Tensor residual = add(normed, ffn_out);  // FFN input + FFN output
    x = layer_norm(residual, layer.norm2_gain.value, layer.norm2_bias.value);
  }
  return x;
}

Tensor PdmModule::long_branch(const Folded& folded, ForwardTrace* trace) const {
  Tensor conved = conv_within_period(folded, long_conv_);
  Tensor series = unfold({conved, folded.valid_length, folded.entry});  // [B,S,N]
  // Reverted embedding: one token per variate, embedded along time.
  Tensor tokens = permute(series, {0, 2, 1});  // [B,N,S]
  Tensor embedded = linear_last_dim(tokens, embed_w_.value, embed_b_.value);  // [B,N,d_model]
  Tensor encoded = encode(embedded, trace);
  Tensor projected = linear_last_dim(encoded, long_proj_w_.value, long_proj_b_.value);  // [B,N,P]
  return permute(projected, {0, 2, 1});
}

Tensor PdmModule::forward(const Tensor& x, ForwardTrace* trace) const {
  if (x.rank() != 3 || x.extent(1) != seq_len_ || x.extent(2) != channels_) {
    throw std::invalid_argument("pdm: input " + shape_string(x.shape()) + " does not match built dims [B," +
                                std::to_string(seq_len_) + "," + std::to_string(channels_) + "]");
  }
  const std::size_t B = x.extent(0);

  Spectrum spectrum = compute_spectrum(x);
  PeriodSet periods = top_k_periods(spectrum, k_max_);
  if (trace) trace->periods = periods;

  std::vector<Tensor> per_period;
  per_period.reserve(periods.entries.size());
  for (const PeriodEntry& entry : periods.entries) {
    Folded folded = fold(x, entry);
    Tensor short_out = short_branch(folded);
    Tensor periodic_out = periodic_branch(folded);
    Tensor long_out = long_branch(folded, trace);
    if (trace) {
      trace->short_outputs.push_back(short_out);
      trace->periodic_outputs.push_back(periodic_out);
      trace->long_outputs.push_back(long_out);
    }
    per_period.push_back(add(add(short_out, periodic_out), long_out));
  }

  // Stack over periods, zero-pad to k_max, and fuse with a learnable map.
  std::vector<Tensor> stacked;
  stacked.reserve(per_period.size());
  for (const Tensor& t : per_period) {
    stacked.push_back(reshape(t, {B, pred_len_, channels_, 1}));
  }
  Tensor fused_in = stacked.size() == 1 ? stacked[0] : concat(stacked, 3);
  fused_in = pad_to(fused_in, 3, k_max_);
  Tensor fused = matmul(fused_in, fusion_.value);  // [B,P,N,1]
  Tensor out = reshape(fused, {B, pred_len_, channels_});
  if (trace) trace->pdm_output = out;
  return out;
}

void PdmModule::collect_parameters(std::vector<Parameter>& out) const {
  out.push_back(short_conv_);
  out.push_back(short_proj_w_);
  out.push_back(short_proj_b_);
  out.push_back(periodic_conv_);
  out.push_back(periodic_proj_w_);
  out.push_back(periodic_proj_b_);
  out.push_back(long_conv_);
  out.push_back(embed_w_);
  out.push_back(embed_b_);
  for (const EncoderLayer& layer : encoder_) {
    for (const Parameter& p : layer.wq) out.push_back(p);
    for (const Parameter& p : layer.wk) out.push_back(p);
    for (const Parameter& p : layer.wv) out.push_back(p);
    out.push_back(layer.mix);
    out.push_back(layer.ffn1_w);
    out.push_back(layer.ffn1_b);
    out.push_back(layer.ffn2_w);
    out.push_back(layer.ffn2_b);
    out.push_back(layer.norm1_gain);
    out.push_back(layer.norm1_bias);
    out.push_back(layer.norm2_gain);
    out.push_back(layer.norm2_bias);
  }
  out.push_back(long_proj_w_);
  out.push_back(long_proj_b_);
  out.push_back(fusion_);
}

// ============================================================================
// SpdNet
// ============================================================================

SpdNet::SpdNet(const ModelConfig& cfg) : cfg_(cfg) {
  std::mt19937_64 rng(cfg.seed);
  stdm_ = std::make_unique<StdmModule>(cfg_, rng);
  pdm_ = std::make_unique<PdmModule>(cfg_, rng);
  alpha_pdm_ = {"alpha_pdm", init_full({1}, 0.5)};
  alpha_stdm_ = {"alpha_stdm", init_full({1}, 0.5)};
}

Tensor SpdNet::forward_traced(const Tensor& inputs, ForwardTrace* trace) const {
  Tensor pdm_out = pdm_->forward(inputs, trace);
  Tensor stdm_out = stdm_->forward(inputs);
  if (trace) trace->stdm_output = stdm_out;
  if (!period_dump_path_.empty()) {
    ForwardTrace local;
    if (!trace) {
      // Periods were already computed inside pdm; recompute cheaply for the dump.
      local.periods = top_k_periods(compute_spectrum(inputs), cfg_.top_k);
      trace = &local;
    }
    std::ofstream dump(period_dump_path_, std::ios::app);
    dump_period_set(dump, trace->periods);
  }
  return add(scale_by(pdm_out, alpha_pdm_.value), scale_by(stdm_out, alpha_stdm_.value));
}

std::vector<Parameter> SpdNet::parameters() {
  std::vector<Parameter> out;
  stdm_->collect_parameters(out);
  pdm_->collect_parameters(out);
  out.push_back(alpha_pdm_);
  out.push_back(alpha_stdm_);
  return out;
}

}  // namespace spdnet
