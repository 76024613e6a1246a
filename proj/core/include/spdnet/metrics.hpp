#pragma once

#include <string>
#include <vector>

#include "spdnet/tensor.hpp"

namespace spdnet {

struct MetricsCell {
  std::string model;
  std::size_t seq_len = 0;
  std::size_t pred_len = 0;
  std::string split;
  std::string space = "normalized";
  double mse = 0.0;
  double mae = 0.0;
  std::size_t count = 0;
};

/// Order-independent error accumulation over one target channel, with
/// per-horizon-step breakdowns.
class MetricsAccumulator {
 public:
  explicit MetricsAccumulator(std::size_t pred_len);

  /// pred/actual are [b,P,N]; only target_col is accumulated.
  void add_batch(const Tensor& pred, const Tensor& actual, std::size_t target_col);
  void add_pair(std::size_t step, double predicted, double actual);

  double mse() const;
  double mae() const;
  double step_mse(std::size_t step) const;
  std::size_t count() const { return count_; }

 private:
  std::size_t pred_len_;
  std::vector<double> sq_by_step_;
  std::vector<double> abs_by_step_;
  std::vector<std::size_t> count_by_step_;
  std::size_t count_ = 0;
};

void write_metrics_csv(const std::string& path, const std::vector<MetricsCell>& cells);

}  // namespace spdnet
