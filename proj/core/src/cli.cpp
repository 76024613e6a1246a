#include "spdnet/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>

#include "spdnet/checkpoint.hpp"
#include "spdnet/config.hpp"
#include "spdnet/data.hpp"
#include "spdnet/metrics.hpp"
#include "spdnet/pdm.hpp"
#include "spdnet/train.hpp"

namespace spdnet {

namespace {

struct CommonOpts {
  std::string config_path;
  std::string data_path;
  std::string out_dir;
  std::string model = "spdnet";
  std::string checkpoint_path;
  std::string horizons_csv;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool unnormalized = false;
};

ModelConfig load_config(const CommonOpts& opts) {
  ModelConfig cfg;
  if (!opts.config_path.empty()) cfg = ModelConfig::load_file(opts.config_path);
  if (opts.seed_set) cfg.seed = opts.seed;
  return cfg;
}

std::vector<std::size_t> parse_horizons(const std::string& csv) {
  std::vector<std::size_t> out;
  std::string cur;
  std::istringstream in(csv);
  while (std::getline(in, cur, ',')) {
    if (cur.empty()) continue;
    std::size_t pos = 0;
    const long long v = std::stoll(cur, &pos);
    if (pos != cur.size() || v <= 0) {
      throw std::runtime_error("invalid horizon value '" + cur + "'");
    }
    out.push_back(static_cast<std::size_t>(v));
  }
  if (out.empty()) throw std::runtime_error("empty horizon list");
  return out;
}

void ensure_out_dir(const std::string& dir) {
  if (!dir.empty()) std::filesystem::create_directories(dir);
}

void print_cells(const std::vector<MetricsCell>& cells) {
  for (const MetricsCell& c : cells) {
    std::printf("%-12s S=%-4zu P=%-4zu %-5s %-10s mse=%.6f mae=%.6f (%zu points)\n",
                c.model.c_str(), c.seq_len, c.pred_len, c.split.c_str(), c.space.c_str(), c.mse,
                c.mae, c.count);
  }
}

int cmd_generate_data(const CommonOpts& opts) {
  ModelConfig cfg = load_config(opts);
  const std::string dir = opts.out_dir.empty() ? "." : opts.out_dir;
  ensure_out_dir(dir);
  SeriesTable table = generate_synthetic(SyntheticProfile::from_config(cfg), cfg.synth_rows,
                                         cfg.seed);
  const std::string path = dir + "/synthetic.csv";
  write_csv(table, path);
  std::printf("wrote %zu rows x %zu columns to %s\n", table.rows(), table.cols(), path.c_str());
  return 0;
}

int cmd_train(const CommonOpts& opts) {
  ModelConfig cfg = load_config(opts);
  if (opts.data_path.empty()) throw std::runtime_error("train: --data PATH is required");
  SeriesTable table = load_csv(opts.data_path, cfg.forward_fill);
  cfg.channels = table.cols();

  const std::string out_dir = opts.out_dir.empty() ? "spdnet_out" : opts.out_dir;
  ensure_out_dir(out_dir);
  DataBundle data = prepare_data(table, cfg);

  std::unique_ptr<ForecastModel> model = make_model(opts.model, cfg);
  TrainRun run = train_model(*model, data, cfg, out_dir);
  std::printf("trained %s for %zu epochs; best epoch %zu (val mse %.6f)\n", model->name().c_str(),
              run.epochs.size(), run.best_epoch, run.best_val_mse);

  std::vector<MetricsCell> cells;
  cells.push_back(evaluate_split(*model, data.splits.val, cfg, data.target_col, "val"));
  cells.push_back(evaluate_split(*model, data.splits.test, cfg, data.target_col, "test"));
  if (opts.unnormalized) {
    cells.push_back(evaluate_split(*model, data.splits.test, cfg, data.target_col, "test",
                                   &data.scaler));
  }
  write_metrics_csv(out_dir + "/metrics.csv", cells);
  print_cells(cells);
  std::printf("checkpoint: %s\n", run.checkpoint_path.c_str());
  return 0;
}

int cmd_evaluate(const CommonOpts& opts) {
  if (opts.data_path.empty()) throw std::runtime_error("evaluate: --data PATH is required");

  std::vector<MetricsCell> cells;
  if (opts.model == "persistence") {
    ModelConfig cfg = load_config(opts);
    std::vector<std::size_t> horizons =
        opts.horizons_csv.empty() ? std::vector<std::size_t>{cfg.pred_len}
                                  : parse_horizons(opts.horizons_csv);
    SeriesTable table = load_csv(opts.data_path, cfg.forward_fill);
    for (std::size_t p : horizons) {
      ModelConfig cell_cfg = cfg;
      cell_cfg.pred_len = p;
      cell_cfg.channels = table.cols();
      DataBundle data = prepare_data(table, cell_cfg);
      PersistenceModel model(cell_cfg);
      cells.push_back(evaluate_split(model, data.splits.test, cell_cfg, data.target_col, "test"));
      if (opts.unnormalized) {
        cells.push_back(evaluate_split(model, data.splits.test, cell_cfg, data.target_col, "test",
                                       &data.scaler));
      }
    }
  } else {
    if (opts.checkpoint_path.empty()) {
      throw std::runtime_error("evaluate: --checkpoint PATH is required for trained models");
    }
    Checkpoint ckpt = load_checkpoint(opts.checkpoint_path);
    ModelConfig cfg = ckpt.config;  // provenance: the snapshot wins
    SeriesTable table = load_csv(opts.data_path, cfg.forward_fill);
    if (table.cols() != cfg.channels) {
      throw std::runtime_error("evaluate: data has " + std::to_string(table.cols()) +
                               " columns but checkpoint was trained with " +
                               std::to_string(cfg.channels));
    }
    DataBundle data = prepare_data(table, cfg);
    std::unique_ptr<ForecastModel> model = make_model(opts.model, cfg);
    std::vector<Parameter> params = model->parameters();
    assign_parameters(params, ckpt);
    cells.push_back(evaluate_split(*model, data.splits.test, cfg, data.target_col, "test"));
    if (opts.unnormalized) {
      cells.push_back(evaluate_split(*model, data.splits.test, cfg, data.target_col, "test",
                                     &data.scaler));
    }
  }
  print_cells(cells);
  if (!opts.out_dir.empty()) {
    ensure_out_dir(opts.out_dir);
    write_metrics_csv(opts.out_dir + "/metrics.csv", cells);
  }
  return 0;
}

int cmd_predict(const CommonOpts& opts) {
  if (opts.data_path.empty()) throw std::runtime_error("predict: --data PATH is required");
  if (opts.checkpoint_path.empty()) throw std::runtime_error("predict: --checkpoint PATH is required");
  Checkpoint ckpt = load_checkpoint(opts.checkpoint_path);
  ModelConfig cfg = ckpt.config;
  SeriesTable table = load_csv(opts.data_path, cfg.forward_fill);
  if (table.cols() != cfg.channels) {
    throw std::runtime_error("predict: data has " + std::to_string(table.cols()) +
                             " columns but checkpoint was trained with " +
                             std::to_string(cfg.channels));
  }
  DataBundle data = prepare_data(table, cfg);
  std::unique_ptr<ForecastModel> model = make_model(opts.model, cfg);
  std::vector<Parameter> params = model->parameters();
  assign_parameters(params, ckpt);

  const std::string dir = opts.out_dir.empty() ? "." : opts.out_dir;
  ensure_out_dir(dir);
  const std::string path = dir + "/predictions.csv";
  write_predictions_csv(path, *model, data.splits.test, data.scaler, cfg, data.target_col);
  std::printf("wrote predictions to %s\n", path.c_str());
  return 0;
}

int cmd_benchmark(const CommonOpts& opts) {
  ModelConfig cfg = load_config(opts);
  std::vector<std::size_t> horizons = opts.horizons_csv.empty()
                                          ? std::vector<std::size_t>{1, 4, 24, 48, 96}
                                          : parse_horizons(opts.horizons_csv);
  std::vector<BenchmarkRow> rows = run_benchmark(cfg, horizons);
  for (const BenchmarkRow& r : rows) {
    std::printf("P=%-5zu %.4f s/epoch over %zu epochs (wall %.4f)\n", r.pred_len,
                r.seconds_per_epoch, r.epochs, r.wall_seconds_per_epoch);
  }
  if (!opts.out_dir.empty()) {
    ensure_out_dir(opts.out_dir);
    write_benchmark_csv(opts.out_dir + "/timing.csv", rows);
    std::printf("wrote %s/timing.csv\n", opts.out_dir.c_str());
  }
  return 0;
}

int cmd_inspect_periods(const CommonOpts& opts) {
  ModelConfig cfg = load_config(opts);
  if (opts.data_path.empty()) throw std::runtime_error("inspect-periods: --data PATH is required");
  SeriesTable table = load_csv(opts.data_path, cfg.forward_fill);
  if (table.rows() < cfg.seq_len) {
    throw std::runtime_error("inspect-periods: table has fewer rows than seq_len");
  }
  // Most recent window of length S, all channels.
  const std::size_t start = table.rows() - cfg.seq_len;
  std::vector<double> window(cfg.seq_len * table.cols());
  for (std::size_t s = 0; s < cfg.seq_len; ++s) {
    for (std::size_t c = 0; c < table.cols(); ++c) {
      window[s * table.cols() + c] = table.at(start + s, c);
    }
  }
  Tensor x({1, cfg.seq_len, table.cols()}, std::move(window));
  PeriodSet periods = top_k_periods(compute_spectrum(x), cfg.top_k);
  dump_period_set(std::cout, periods);
  if (!opts.out_dir.empty()) {
    ensure_out_dir(opts.out_dir);
    std::ofstream out(opts.out_dir + "/periods.txt");
    dump_period_set(out, periods);
  }
  return 0;
}

void add_common(CLI::App* sub, CommonOpts& opts, bool with_model = true) {
  sub->add_option("--config", opts.config_path, "config file (key=value lines)");
  sub->add_option("--data", opts.data_path, "input CSV path");
  sub->add_option("--out", opts.out_dir, "output directory");
  sub->add_option("--seed", opts.seed, "seed override")->each([&opts](const std::string&) {
    opts.seed_set = true;
  });
  sub->add_option("--horizons", opts.horizons_csv, "comma-separated prediction horizons");
  sub->add_option("--checkpoint", opts.checkpoint_path, "checkpoint path");
  sub->add_flag("--unnormalized", opts.unnormalized, "also report errors on the original scale");
  if (with_model) {
    sub->add_option("--model", opts.model, "spdnet, linear or persistence")
        ->check(CLI::IsMember({"spdnet", "linear", "persistence"}));
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"SPDNet residential load forecasting"};
  app.require_subcommand(1);

  CommonOpts opts;
  CLI::App* train = app.add_subcommand("train", "train a model and write a checkpoint");
  CLI::App* evaluate = app.add_subcommand("evaluate", "evaluate a checkpoint or baseline on the test split");
  CLI::App* predict = app.add_subcommand("predict", "write per-window forecasts for the test split");
  CLI::App* benchmark = app.add_subcommand("benchmark", "measure seconds/epoch across horizons");
  CLI::App* generate = app.add_subcommand("generate-data", "write a synthetic load CSV");
  CLI::App* inspect = app.add_subcommand("inspect-periods", "print dominant periods of the latest window");
  for (CLI::App* sub : {train, evaluate, predict, benchmark, generate, inspect}) {
    add_common(sub, opts);
  }

  std::vector<const char*> argv;
  argv.push_back("spdnet");
  for (const std::string& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help() << std::flush;
    return 2;
  }

  try {
    if (train->parsed()) return cmd_train(opts);
    if (evaluate->parsed()) return cmd_evaluate(opts);
    if (predict->parsed()) return cmd_predict(opts);
    if (benchmark->parsed()) return cmd_benchmark(opts);
    if (generate->parsed()) return cmd_generate_data(opts);
    if (inspect->parsed()) return cmd_inspect_periods(opts);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}

}  // namespace spdnet
