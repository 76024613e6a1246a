#pragma once

#include <cstdint>
#include <string>

namespace spdnet {

enum class Activation { kGelu, kRelu };

/// All architecture, training, data and synthetic-profile hyperparameters in
/// one flat record. Serializes to/from `key=value` text; unknown keys are
/// rejected on parse. The serialized snapshot is embedded in checkpoints and
/// reports.
struct ModelConfig {
  // architecture
  std::size_t seq_len = 96;
  std::size_t pred_len = 24;
  std::size_t channels = 1;  // set from data when training
  std::size_t top_k = 3;
  std::size_t d_model = 64;
  std::size_t heads = 4;
  std::size_t layers = 2;
  std::size_t d_ff = 128;
  std::size_t trend_kernel = 25;
  std::size_t seasonal_kernel = 7;
  Activation activation = Activation::kGelu;

  // training
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 50;
  std::size_t patience = 5;
  std::uint64_t seed = 42;
  double train_frac = 0.70;
  double val_frac = 0.10;

  // data
  std::string target_column = "load";
  bool forward_fill = false;

  // benchmark
  std::size_t bench_epochs = 3;
  std::size_t bench_warmup = 1;

  // synthetic profile
  std::size_t synth_rows = 20000;
  std::size_t steps_per_day = 96;
  double synth_base = 5.0;
  double synth_daily_amp = 3.0;
  double synth_weekly_amp = 1.0;
  double synth_noise_std = 0.3;
  double synth_ar = 0.7;
  double synth_spike_rate = 0.002;
  double synth_spike_mag = 12.0;
  bool synth_covariates = false;

  std::string to_text() const;

  /// Applies one `key=value` assignment; throws on unknown key or bad value.
  void set(const std::string& key, const std::string& value);

  static ModelConfig from_text(const std::string& text);
  static ModelConfig load_file(const std::string& path);
};

std::string activation_name(Activation a);

}  // namespace spdnet
