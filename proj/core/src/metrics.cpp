#include "spdnet/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace spdnet {

MetricsAccumulator::MetricsAccumulator(std::size_t pred_len) : pred_len_(pred_len) {
  sq_by_step_.assign(pred_len_, 0.0);
  abs_by_step_.assign(pred_len_, 0.0);
  count_by_step_.assign(pred_len_, 0);
}

void MetricsAccumulator::add_batch(const Tensor& pred, const Tensor& actual, std::size_t target_col) {
  if (pred.shape() != actual.shape() || pred.rank() != 3) {
    throw std::invalid_argument("metrics: prediction " + shape_string(pred.shape()) +
                                " vs actual " + shape_string(actual.shape()));
  }
  const std::size_t b = pred.extent(0), p = pred.extent(1), n = pred.extent(2);
  if (p != pred_len_ || target_col >= n) {
    throw std::invalid_argument("metrics: batch does not match accumulator layout");
  }
  const auto& pv = pred.values();
  const auto& av = actual.values();
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t s = 0; s < p; ++s) {
      const std::size_t idx = (i * p + s) * n + target_col;
      add_pair(s, pv[idx], av[idx]);
    }
  }
}

void MetricsAccumulator::add_pair(std::size_t step, double predicted, double actual) {
  const double e = predicted - actual;
  sq_by_step_.at(step) += e * e;
  abs_by_step_.at(step) += std::abs(e);
  count_by_step_.at(step) += 1;
  ++count_;
}

double MetricsAccumulator::mse() const {
  if (count_ == 0) return 0.0;
  double acc = 0.0;
  for (double v : sq_by_step_) acc += v;
  return acc / static_cast<double>(count_);
}

double MetricsAccumulator::mae() const {
  if (count_ == 0) return 0.0;
  double acc = 0.0;
  for (double v : abs_by_step_) acc += v;
  return acc / static_cast<double>(count_);
}

double MetricsAccumulator::step_mse(std::size_t step) const {
  if (count_by_step_.at(step) == 0) return 0.0;
  return sq_by_step_[step] / static_cast<double>(count_by_step_[step]);
}

void write_metrics_csv(const std::string& path, const std::vector<MetricsCell>& cells) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("metrics: cannot write " + path);
  out << "model,seq_len,pred_len,split,space,mse,mae,count\n";
  char buf[64];
  for (const MetricsCell& c : cells) {
    out << c.model << "," << c.seq_len << "," << c.pred_len << "," << c.split << "," << c.space;
    std::snprintf(buf, sizeof(buf), ",%.12g", c.mse);
    out << buf;
    std::snprintf(buf, sizeof(buf), ",%.12g", c.mae);
    out << buf << "," << c.count << "\n";
  }
}

}  // namespace spdnet
