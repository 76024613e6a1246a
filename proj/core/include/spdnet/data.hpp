#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "spdnet/config.hpp"
#include "spdnet/tensor.hpp"

namespace spdnet {

// ISO-8601 (UTC, seconds resolution) <-> epoch seconds.
std::int64_t parse_iso8601(const std::string& text);
std::string format_iso8601(std::int64_t epoch_seconds);

/// A timestamped multivariate series. Values are row-major T x N.
struct SeriesTable {
  std::vector<std::int64_t> timestamps;
  std::vector<std::string> columns;
  std::vector<double> values;

  std::size_t rows() const { return timestamps.size(); }
  std::size_t cols() const { return columns.size(); }
  double at(std::size_t r, std::size_t c) const { return values[r * columns.size() + c]; }
  double& at(std::size_t r, std::size_t c) { return values[r * columns.size() + c]; }
  std::size_t column_index(const std::string& name) const;  // throws if absent
};

/// Strict CSV ingestion: first column ISO-8601 timestamps, the rest numeric.
/// Malformed cells fail with row/column position. Empty cells are gaps:
/// rejected unless forward_fill, which copies the previous row's value.
SeriesTable load_csv(const std::string& path, bool forward_fill = false);
void write_csv(const SeriesTable& table, const std::string& path);

struct SplitTables {
  SeriesTable train;
  SeriesTable val;
  SeriesTable test;
};

/// Chronological contiguous split; train/val lengths are floor(frac*T), test
/// takes the remainder. Every split must have at least min_rows rows.
SplitTables split_series(const SeriesTable& table, double train_frac, double val_frac,
                         double test_frac, std::size_t min_rows);

/// Per-column standardization fit on the training split only.
class Scaler {
 public:
  void fit(const SeriesTable& train);
  void transform(SeriesTable& table) const;
  void inverse_transform(SeriesTable& table) const;
  double transform_value(std::size_t col, double v) const;
  double inverse_value(std::size_t col, double v) const;

  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& stddev() const { return std_; }

 private:
  std::vector<double> mean_;
  std::vector<double> std_;
};

struct WindowBatch {
  Tensor inputs;   // [b,S,N]
  Tensor targets;  // [b,P,N]
  std::vector<std::size_t> window_starts;
};

/// All maximal stride-1 windows over a table, batched. Training streams are
/// reshuffled deterministically per reset seed; the final partial batch is
/// kept.
class WindowBatcher {
 public:
  WindowBatcher(const SeriesTable& table, std::size_t seq_len, std::size_t pred_len,
                std::size_t batch_size, bool shuffle, std::uint64_t seed);

  std::size_t window_count() const { return order_.size(); }
  std::size_t batch_count() const;
  void reset(std::uint64_t seed);
  /// Fills the next batch; returns false when the epoch is exhausted.
  bool next(WindowBatch& out);

 private:
  const SeriesTable* table_;
  std::size_t seq_len_;
  std::size_t pred_len_;
  std::size_t batch_size_;
  bool shuffle_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

struct SyntheticProfile {
  std::size_t steps_per_day = 96;
  double base = 5.0;
  double daily_amp = 3.0;
  double weekly_amp = 1.0;
  double noise_std = 0.3;
  double ar_coeff = 0.7;
  double spike_rate = 0.002;
  double spike_magnitude = 12.0;
  bool covariates = false;

  static SyntheticProfile from_config(const ModelConfig& cfg);
};

/// Residential-style load: base + daily and weekly sinusoids + AR(1) noise +
/// sparse spikes, optionally with four smooth weather-like covariates.
/// Fully determined by the seed. Requires rows >= 1000.
SeriesTable generate_synthetic(const SyntheticProfile& profile, std::size_t rows,
                               std::uint64_t seed);

}  // namespace spdnet
