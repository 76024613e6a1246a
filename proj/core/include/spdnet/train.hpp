#pragma once

#include <memory>
#include <string>
#include <vector>

#include "spdnet/config.hpp"
#include "spdnet/data.hpp"
#include "spdnet/metrics.hpp"
#include "spdnet/model.hpp"
#include "spdnet/pdm.hpp"

namespace spdnet {

/// One learnable S->P map shared across channels; the simplest trainable
/// yardstick.
class LinearBaseline : public ForecastModel {
 public:
  explicit LinearBaseline(const ModelConfig& cfg);
  std::string name() const override { return "linear"; }
  Tensor forward(const Tensor& inputs) override;
  std::vector<Parameter> parameters() override;

 private:
  std::size_t seq_len_;
  std::size_t pred_len_;
  std::size_t channels_;
  Parameter weight_;
  Parameter bias_;
};

/// Repeats the last observed value across the horizon. No parameters.
class PersistenceModel : public ForecastModel {
 public:
  explicit PersistenceModel(const ModelConfig& cfg) : pred_len_(cfg.pred_len) {}
  std::string name() const override { return "persistence"; }
  Tensor forward(const Tensor& inputs) override;
  std::vector<Parameter> parameters() override { return {}; }

 private:
  std::size_t pred_len_;
};

std::unique_ptr<ForecastModel> make_model(const std::string& name, const ModelConfig& cfg);

/// Normalized train/val/test splits plus the scaler fit on train only.
struct DataBundle {
  SplitTables splits;
  Scaler scaler;
  std::size_t target_col = 0;
};

/// Split (70/10/20 by default), fit the scaler on train, normalize all three
/// splits. cfg.channels must already match the table.
DataBundle prepare_data(const SeriesTable& table, const ModelConfig& cfg);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_mse = 0.0;
  double val_mae = 0.0;
  double wall_seconds = 0.0;
  double compute_seconds = 0.0;  // forward+backward+step only
};

struct TrainRun {
  ModelConfig config;
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_val_mse = 0.0;
  std::string checkpoint_path;
};

/// MSE training on normalized data with Adam, early stopping on validation
/// MSE, and the best epoch's weights restored on return. When out_dir is
/// non-empty, writes checkpoint.bin and run_log.txt there. A non-finite loss
/// aborts with a diagnostic dump.
TrainRun train_model(ForecastModel& model, const DataBundle& data, const ModelConfig& cfg,
                     const std::string& out_dir);

/// Error accumulation over every window of a split, in order. When `inverse`
/// is given, errors are measured on the un-normalized scale.
MetricsAccumulator accumulate_errors(ForecastModel& model, const SeriesTable& split,
                                     const ModelConfig& cfg, std::size_t target_col,
                                     const Scaler* inverse = nullptr);

MetricsCell evaluate_split(ForecastModel& model, const SeriesTable& split, const ModelConfig& cfg,
                           std::size_t target_col, const std::string& split_name,
                           const Scaler* inverse = nullptr);

/// predictions CSV: timestamp of the predicted point, horizon step (1-based),
/// predicted and actual target values on the original scale.
void write_predictions_csv(const std::string& path, ForecastModel& model,
                           const SeriesTable& split, const Scaler& scaler, const ModelConfig& cfg,
                           std::size_t target_col);

struct BenchmarkRow {
  std::size_t pred_len = 0;
  std::size_t epochs = 0;
  double seconds_per_epoch = 0.0;       // forward+backward+step only
  double wall_seconds_per_epoch = 0.0;  // including batching overhead
};

/// Trains a fresh model per horizon on config-profile synthetic data:
/// bench_warmup untimed epochs, then bench_epochs timed ones.
std::vector<BenchmarkRow> run_benchmark(const ModelConfig& cfg,
                                        const std::vector<std::size_t>& horizons);

void write_benchmark_csv(const std::string& path, const std::vector<BenchmarkRow>& rows);

}  // namespace spdnet
