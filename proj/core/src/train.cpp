#include "spdnet/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "spdnet/checkpoint.hpp"
#include "spdnet/ops.hpp"

namespace spdnet {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
  Tensor diff = sub(pred, target);
  return mean_all(mul(diff, diff));
}

std::uint64_t epoch_seed(std::uint64_t base, std::size_t epoch) {
  return base * 0x9E3779B97F4A7C15ull + static_cast<std::uint64_t>(epoch);
}

struct EpochStats {
  double mean_loss = 0.0;
  double compute_seconds = 0.0;
  double wall_seconds = 0.0;
};

EpochStats run_train_epoch(ForecastModel& model, Adam& opt, WindowBatcher& batcher,
                           std::uint64_t seed) {
  EpochStats stats;
  const auto wall_start = Clock::now();
  batcher.reset(seed);
  WindowBatch batch;
  double loss_sum = 0.0;
  std::size_t window_sum = 0;
  while (batcher.next(batch)) {
    const std::size_t b = batch.inputs.extent(0);

    auto t0 = Clock::now();
    Tensor pred = model.forward(batch.inputs);
    Tensor loss = mse_loss(pred, batch.targets);
    loss.backward();
    opt.step();
    opt.zero_grad();
    stats.compute_seconds += std::chrono::duration<double>(Clock::now() - t0).count();

    loss_sum += loss.item() * static_cast<double>(b);
    window_sum += b;
  }
  stats.mean_loss = window_sum ? loss_sum / static_cast<double>(window_sum) : 0.0;
  stats.wall_seconds = seconds_since(wall_start);
  return stats;
}

}  // namespace

// ============================================================================
// Baselines
// ============================================================================

LinearBaseline::LinearBaseline(const ModelConfig& cfg)
    : seq_len_(cfg.seq_len), pred_len_(cfg.pred_len), channels_(cfg.channels) {
  std::mt19937_64 rng(cfg.seed);
  weight_ = {"linear.weight", init_uniform(rng, {seq_len_, pred_len_}, seq_len_)};
  bias_ = {"linear.bias", init_zeros({pred_len_})};
}

Tensor LinearBaseline::forward(const Tensor& inputs) {
  if (inputs.rank() != 3 || inputs.extent(1) != seq_len_ || inputs.extent(2) != channels_) {
    throw std::invalid_argument("linear: input " + shape_string(inputs.shape()) +
                                " does not match built dims");
  }
  Tensor by_channel = permute(inputs, {0, 2, 1});
  Tensor projected = linear_last_dim(by_channel, weight_.value, bias_.value);
  return permute(projected, {0, 2, 1});
}

std::vector<Parameter> LinearBaseline::parameters() { return {weight_, bias_}; }

Tensor PersistenceModel::forward(const Tensor& inputs) {
  if (inputs.rank() != 3) {
    throw std::invalid_argument("persistence: expected [B,S,N] input");
  }
  Tensor last = slice(inputs, 1, inputs.extent(1) - 1, 1);  // [B,1,N]
  std::vector<Tensor> repeats(pred_len_, last);
  return pred_len_ == 1 ? last : concat(repeats, 1);
}

std::unique_ptr<ForecastModel> make_model(const std::string& name, const ModelConfig& cfg) {
  if (name == "spdnet") return std::make_unique<SpdNet>(cfg);
  if (name == "linear") return std::make_unique<LinearBaseline>(cfg);
  if (name == "persistence") return std::make_unique<PersistenceModel>(cfg);
  throw std::invalid_argument("unknown model '" + name + "' (expected spdnet, linear or persistence)");
}

// ============================================================================
// Data preparation
// ============================================================================

DataBundle prepare_data(const SeriesTable& table, const ModelConfig& cfg) {
  DataBundle bundle;
  const double test_frac = 1.0 - cfg.train_frac - cfg.val_frac;
  bundle.splits = split_series(table, cfg.train_frac, cfg.val_frac, test_frac,
                               cfg.seq_len + cfg.pred_len);
  bundle.scaler.fit(bundle.splits.train);
  bundle.scaler.transform(bundle.splits.train);
  bundle.scaler.transform(bundle.splits.val);
  bundle.scaler.transform(bundle.splits.test);
  bundle.target_col = table.column_index(cfg.target_column);
  return bundle;
}

// ============================================================================
// Training loop
// ============================================================================

TrainRun train_model(ForecastModel& model, const DataBundle& data, const ModelConfig& cfg,
                     const std::string& out_dir) {
  std::vector<Parameter> params = model.parameters();
  if (params.empty()) {
    throw std::invalid_argument("train: model '" + model.name() + "' has no trainable parameters");
  }
  Adam opt(params, cfg.learning_rate);
  WindowBatcher train_batcher(data.splits.train, cfg.seq_len, cfg.pred_len, cfg.batch_size,
                              /*shuffle=*/true, epoch_seed(cfg.seed, 0));

  TrainRun run;
  run.config = cfg;
  run.best_val_mse = std::numeric_limits<double>::infinity();

  std::vector<std::vector<double>> best_values;
  std::size_t wait = 0;

  std::ofstream log;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    log.open(out_dir + "/run_log.txt");
    log << "# " << model.name() << " training run\n";
    log << "# config:\n";
    std::istringstream cfg_text(cfg.to_text());
    std::string line;
    while (std::getline(cfg_text, line)) log << "#   " << line << "\n";
    log << "epoch,train_loss,val_mse,val_mae,wall_seconds\n";
  }

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    EpochStats stats;
    try {
      stats = run_train_epoch(model, opt, train_batcher, epoch_seed(cfg.seed, epoch));
    } catch (const std::runtime_error& e) {
      // Divergence (non-finite loss/gradient) surfaces here.
      if (!out_dir.empty()) {
        std::ofstream dump(out_dir + "/diagnostic_dump.txt");
        dump << "training aborted at epoch " << epoch << ": " << e.what() << "\n";
        dump << "model: " << model.name() << "\n";
        dump << "epochs completed: " << run.epochs.size() << "\n";
        for (const EpochRecord& r : run.epochs) {
          dump << "epoch " << r.epoch << " train_loss " << r.train_loss << " val_mse " << r.val_mse
               << "\n";
        }
        dump << "config:\n" << cfg.to_text();
      }
      throw std::runtime_error("training aborted at epoch " + std::to_string(epoch) + ": " +
                               e.what());
    }

    MetricsAccumulator val = accumulate_errors(model, data.splits.val, cfg, data.target_col);

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = stats.mean_loss;
    rec.val_mse = val.mse();
    rec.val_mae = val.mae();
    rec.wall_seconds = stats.wall_seconds;
    rec.compute_seconds = stats.compute_seconds;
    run.epochs.push_back(rec);
    if (log) {
      char buf[160];
      std::snprintf(buf, sizeof(buf), "%zu,%.12g,%.12g,%.12g,%.3f", epoch, rec.train_loss,
                    rec.val_mse, rec.val_mae, rec.wall_seconds);
      log << buf << "\n";
    }

    if (rec.val_mse < run.best_val_mse) {
      run.best_val_mse = rec.val_mse;
      run.best_epoch = epoch;
      best_values.clear();
      for (const Parameter& p : params) best_values.push_back(p.value.values());
      wait = 0;
    } else {
      ++wait;
      if (wait >= cfg.patience) break;
    }
  }

  // Leave the model at its best-validation weights.
  if (!best_values.empty()) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i].value.values() = best_values[i];
  }

  if (!out_dir.empty()) {
    run.checkpoint_path = out_dir + "/checkpoint.bin";
    save_checkpoint(run.checkpoint_path, cfg, params);
    if (log) {
      log << "# best_epoch=" << run.best_epoch << " best_val_mse=" << run.best_val_mse << "\n";
    }
  }
  return run;
}

// ============================================================================
// Evaluation
// ============================================================================

MetricsAccumulator accumulate_errors(ForecastModel& model, const SeriesTable& split,
                                     const ModelConfig& cfg, std::size_t target_col,
                                     const Scaler* inverse) {
  WindowBatcher batcher(split, cfg.seq_len, cfg.pred_len, cfg.batch_size, /*shuffle=*/false, 0);
  MetricsAccumulator acc(cfg.pred_len);
  WindowBatch batch;
  while (batcher.next(batch)) {
    Tensor pred = model.forward(batch.inputs);
    if (pred.shape() != batch.targets.shape()) {
      throw std::runtime_error("evaluate: prediction shape " + shape_string(pred.shape()) +
                               " does not match targets " + shape_string(batch.targets.shape()));
    }
    if (!inverse) {
      acc.add_batch(pred, batch.targets, target_col);
      continue;
    }
    const std::size_t b = pred.extent(0), p = pred.extent(1), n = pred.extent(2);
    const auto& pv = pred.values();
    const auto& tv = batch.targets.values();
    for (std::size_t i = 0; i < b; ++i) {
      for (std::size_t s = 0; s < p; ++s) {
        const std::size_t idx = (i * p + s) * n + target_col;
        acc.add_pair(s, inverse->inverse_value(target_col, pv[idx]),
                     inverse->inverse_value(target_col, tv[idx]));
      }
    }
  }
  return acc;
}

MetricsCell evaluate_split(ForecastModel& model, const SeriesTable& split, const ModelConfig& cfg,
                           std::size_t target_col, const std::string& split_name,
                           const Scaler* inverse) {
  MetricsAccumulator acc = accumulate_errors(model, split, cfg, target_col, inverse);
  MetricsCell cell;
  cell.model = model.name();
  cell.seq_len = cfg.seq_len;
  cell.pred_len = cfg.pred_len;
  cell.split = split_name;
  cell.space = inverse ? "raw" : "normalized";
  cell.mse = acc.mse();
  cell.mae = acc.mae();
  cell.count = acc.count();
  return cell;
}

void write_predictions_csv(const std::string& path, ForecastModel& model,
                           const SeriesTable& split, const Scaler& scaler, const ModelConfig& cfg,
                           std::size_t target_col) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("predict: cannot write " + path);
  out << "timestamp,horizon_step,predicted,actual\n";
  WindowBatcher batcher(split, cfg.seq_len, cfg.pred_len, cfg.batch_size, /*shuffle=*/false, 0);
  WindowBatch batch;
  char buf[96];
  while (batcher.next(batch)) {
    Tensor pred = model.forward(batch.inputs);
    const std::size_t b = pred.extent(0), p = pred.extent(1), n = pred.extent(2);
    const auto& pv = pred.values();
    const auto& tv = batch.targets.values();
    for (std::size_t i = 0; i < b; ++i) {
      const std::size_t start = batch.window_starts[i];
      for (std::size_t s = 0; s < p; ++s) {
        const std::size_t idx = (i * p + s) * n + target_col;
        const double predicted = scaler.inverse_value(target_col, pv[idx]);
        const double actual = scaler.inverse_value(target_col, tv[idx]);
        out << format_iso8601(split.timestamps[start + cfg.seq_len + s]);
        std::snprintf(buf, sizeof(buf), ",%zu,%.12g,%.12g", s + 1, predicted, actual);
        out << buf << "\n";
      }
    }
  }
}

// ============================================================================
// Benchmark
// ============================================================================

std::vector<BenchmarkRow> run_benchmark(const ModelConfig& cfg,
                                        const std::vector<std::size_t>& horizons) {
  if (horizons.empty()) throw std::invalid_argument("benchmark: horizon list is empty");
  SeriesTable table = generate_synthetic(SyntheticProfile::from_config(cfg), cfg.synth_rows,
                                         cfg.seed);
  std::vector<BenchmarkRow> rows;
  for (std::size_t p : horizons) {
    ModelConfig cell_cfg = cfg;
    cell_cfg.pred_len = p;
    cell_cfg.channels = table.cols();
    DataBundle data = prepare_data(table, cell_cfg);

    SpdNet model(cell_cfg);
    std::vector<Parameter> params = model.parameters();
    Adam opt(params, cell_cfg.learning_rate);
    WindowBatcher batcher(data.splits.train, cell_cfg.seq_len, cell_cfg.pred_len,
                          cell_cfg.batch_size, /*shuffle=*/true, 0);

    for (std::size_t w = 0; w < cell_cfg.bench_warmup; ++w) {
      run_train_epoch(model, opt, batcher, epoch_seed(cell_cfg.seed, w));
    }
    BenchmarkRow row;
    row.pred_len = p;
    row.epochs = cell_cfg.bench_epochs;
    for (std::size_t e = 0; e < cell_cfg.bench_epochs; ++e) {
      EpochStats stats = run_train_epoch(model, opt, batcher, epoch_seed(cell_cfg.seed, 1000 + e));
      row.seconds_per_epoch += stats.compute_seconds;
      row.wall_seconds_per_epoch += stats.wall_seconds;
    }
    row.seconds_per_epoch /= static_cast<double>(cell_cfg.bench_epochs);
    row.wall_seconds_per_epoch /= static_cast<double>(cell_cfg.bench_epochs);
    rows.push_back(row);
  }
  return rows;
}

void write_benchmark_csv(const std::string& path, const std::vector<BenchmarkRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("benchmark: cannot write " + path);
  out << "pred_len,epochs,seconds_per_epoch,wall_seconds_per_epoch\n";
  char buf[96];
  for (const BenchmarkRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%zu,%zu,%.6f,%.6f", r.pred_len, r.epochs, r.seconds_per_epoch,
                  r.wall_seconds_per_epoch);
    out << buf << "\n";
  }
}

}  // namespace spdnet
