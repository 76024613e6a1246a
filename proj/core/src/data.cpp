#include "spdnet/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace spdnet {

// ============================================================================
// Time
// ============================================================================

namespace {

// Days since 1970-01-01 for a proleptic Gregorian civil date.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, std::int64_t& y, unsigned& m, unsigned& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp + (mp < 10 ? 3 : -9);
  y += (m <= 2);
}

int parse_fixed_digits(const std::string& s, std::size_t pos, std::size_t count) {
  int v = 0;
  for (std::size_t i = pos; i < pos + count; ++i) {
    if (i >= s.size() || s[i] < '0' || s[i] > '9') return -1;
    v = v * 10 + (s[i] - '0');
  }
  return v;
}

}  // namespace

std::int64_t parse_iso8601(const std::string& text) {
  // YYYY-MM-DDTHH:MM:SS with optional trailing 'Z'; ' ' accepted for 'T'.
  std::string s = text;
  if (!s.empty() && s.back() == 'Z') s.pop_back();
  if (s.size() != 19 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') ||
      s[13] != ':' || s[16] != ':') {
    throw std::runtime_error("invalid ISO-8601 timestamp: '" + text + "'");
  }
  const int year = parse_fixed_digits(s, 0, 4);
  const int month = parse_fixed_digits(s, 5, 2);
  const int day = parse_fixed_digits(s, 8, 2);
  const int hour = parse_fixed_digits(s, 11, 2);
  const int minute = parse_fixed_digits(s, 14, 2);
  const int second = parse_fixed_digits(s, 17, 2);
  if (year < 0 || month < 1 || month > 12 || day < 1 || day > 31 || hour < 0 || hour > 23 ||
      minute < 0 || minute > 59 || second < 0 || second > 60) {
    throw std::runtime_error("invalid ISO-8601 timestamp: '" + text + "'");
  }
  return days_from_civil(year, static_cast<unsigned>(month), static_cast<unsigned>(day)) * 86400 +
         hour * 3600 + minute * 60 + second;
}

std::string format_iso8601(std::int64_t epoch_seconds) {
  std::int64_t days = epoch_seconds / 86400;
  std::int64_t rem = epoch_seconds % 86400;
  if (rem < 0) {
    rem += 86400;
    days -= 1;
  }
  std::int64_t y;
  unsigned m, d;
  civil_from_days(days, y, m, d);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04lld-%02u-%02uT%02lld:%02lld:%02lld",
                static_cast<long long>(y), m, d, static_cast<long long>(rem / 3600),
                static_cast<long long>((rem / 60) % 60), static_cast<long long>(rem % 60));
  return buf;
}

// ============================================================================
// SeriesTable and CSV
// ============================================================================

std::size_t SeriesTable::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) return i;
  }
  throw std::runtime_error("column '" + name + "' not found in table");
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_cell(const std::string& field, std::size_t line_no, const std::string& column) {
  const char* begin = field.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0') {
    throw std::runtime_error("csv: non-numeric cell at line " + std::to_string(line_no) +
                             ", column '" + column + "': '" + field + "'");
  }
  if (!std::isfinite(v)) {
    throw std::runtime_error("csv: non-finite cell at line " + std::to_string(line_no) +
                             ", column '" + column + "'");
  }
  return v;
}

}  // namespace

SeriesTable load_csv(const std::string& path, bool forward_fill) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("csv: cannot open " + path);

  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("csv: empty file " + path);
  std::vector<std::string> header = split_fields(line);
  if (header.size() < 2) throw std::runtime_error("csv: header needs a timestamp and at least one value column");

  SeriesTable table;
  table.columns.assign(header.begin() + 1, header.end());
  const std::size_t n_cols = table.columns.size();

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_fields(line);
    if (fields.size() != n_cols + 1) {
      throw std::runtime_error("csv: line " + std::to_string(line_no) + " has " +
                               std::to_string(fields.size()) + " fields, expected " +
                               std::to_string(n_cols + 1));
    }
    std::int64_t ts;
    try {
      ts = parse_iso8601(fields[0]);
    } catch (const std::exception& e) {
      throw std::runtime_error("csv: line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!table.timestamps.empty() && ts <= table.timestamps.back()) {
      throw std::runtime_error("csv: non-monotone timestamp at line " + std::to_string(line_no));
    }
    table.timestamps.push_back(ts);
    for (std::size_t c = 0; c < n_cols; ++c) {
      const std::string& field = fields[c + 1];
      if (field.empty()) {
        if (!forward_fill || table.rows() < 2) {
          throw std::runtime_error("csv: missing cell at line " + std::to_string(line_no) +
                                   ", column '" + table.columns[c] + "'");
        }
        table.values.push_back(table.at(table.rows() - 2, c));
      } else {
        table.values.push_back(parse_cell(field, line_no, table.columns[c]));
      }
    }
  }
  if (table.rows() == 0) throw std::runtime_error("csv: no data rows in " + path);
  return table;
}

void write_csv(const SeriesTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("csv: cannot write " + path);
  out << "timestamp";
  for (const std::string& c : table.columns) out << "," << c;
  out << "\n";
  char buf[40];
  for (std::size_t r = 0; r < table.rows(); ++r) {
    out << format_iso8601(table.timestamps[r]);
    for (std::size_t c = 0; c < table.cols(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", table.at(r, c));
      out << "," << buf;
    }
    out << "\n";
  }
  if (!out) throw std::runtime_error("csv: write failed for " + path);
}

// ============================================================================
// Split and scaling
// ============================================================================

namespace {

SeriesTable take_rows(const SeriesTable& table, std::size_t begin, std::size_t count) {
  SeriesTable out;
  out.columns = table.columns;
  out.timestamps.assign(table.timestamps.begin() + begin, table.timestamps.begin() + begin + count);
  out.values.assign(table.values.begin() + begin * table.cols(),
                    table.values.begin() + (begin + count) * table.cols());
  return out;
}

}  // namespace

SplitTables split_series(const SeriesTable& table, double train_frac, double val_frac,
                         double test_frac, std::size_t min_rows) {
  if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9) {
    throw std::invalid_argument("split: fractions must sum to 1");
  }
  const std::size_t t = table.rows();
  const std::size_t n_train = static_cast<std::size_t>(std::floor(train_frac * static_cast<double>(t)));
  const std::size_t n_val = static_cast<std::size_t>(std::floor(val_frac * static_cast<double>(t)));
  if (n_train + n_val > t) throw std::invalid_argument("split: fractions leave no test rows");
  const std::size_t n_test = t - n_train - n_val;
  if (n_train < min_rows || n_val < min_rows || n_test < min_rows) {
    throw std::runtime_error("split: a split is shorter than the required " +
                             std::to_string(min_rows) + " rows (train " + std::to_string(n_train) +
                             ", val " + std::to_string(n_val) + ", test " + std::to_string(n_test) + ")");
  }
  SplitTables out;
  out.train = take_rows(table, 0, n_train);
  out.val = take_rows(table, n_train, n_val);
  out.test = take_rows(table, n_train + n_val, n_test);
  return out;
}

void Scaler::fit(const SeriesTable& train) {
  if (train.rows() == 0) throw std::invalid_argument("scaler: empty training split");
  const std::size_t n = train.cols();
  mean_.assign(n, 0.0);
  std_.assign(n, 0.0);
  const double t = static_cast<double>(train.rows());
  for (std::size_t r = 0; r < train.rows(); ++r) {
    for (std::size_t c = 0; c < n; ++c) mean_[c] += train.at(r, c);
  }
  for (std::size_t c = 0; c < n; ++c) mean_[c] /= t;
  for (std::size_t r = 0; r < train.rows(); ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      const double d = train.at(r, c) - mean_[c];
      std_[c] += d * d;
    }
  }
  for (std::size_t c = 0; c < n; ++c) {
    std_[c] = std::sqrt(std_[c] / t);
    if (std_[c] < 1e-8) {
      std::fprintf(stderr, "warning: column '%s' has near-zero variance; std floored to 1e-8\n",
                   train.columns[c].c_str());
      std_[c] = 1e-8;
    }
  }
}

void Scaler::transform(SeriesTable& table) const {
  if (table.cols() != mean_.size()) throw std::invalid_argument("scaler: column count mismatch");
  for (std::size_t r = 0; r < table.rows(); ++r) {
    for (std::size_t c = 0; c < table.cols(); ++c) {
      table.at(r, c) = (table.at(r, c) - mean_[c]) / std_[c];
    }
  }
}

void Scaler::inverse_transform(SeriesTable& table) const {
  if (table.cols() != mean_.size()) throw std::invalid_argument("scaler: column count mismatch");
  for (std::size_t r = 0; r < table.rows(); ++r) {
    for (std::size_t c = 0; c < table.cols(); ++c) {
      table.at(r, c) = table.at(r, c) * std_[c] + mean_[c];
    }
  }
}

double Scaler::transform_value(std::size_t col, double v) const {
  return (v - mean_.at(col)) / std_.at(col);
}

double Scaler::inverse_value(std::size_t col, double v) const {
  return v * std_.at(col) + mean_.at(col);
}

// ============================================================================
// Windowing
// ============================================================================

WindowBatcher::WindowBatcher(const SeriesTable& table, std::size_t seq_len, std::size_t pred_len,
                             std::size_t batch_size, bool shuffle, std::uint64_t seed)
    : table_(&table), seq_len_(seq_len), pred_len_(pred_len), batch_size_(batch_size),
      shuffle_(shuffle) {
  if (batch_size_ == 0) throw std::invalid_argument("windows: batch size must be positive");
  const std::size_t t = table.rows();
  if (t < seq_len_ + pred_len_) {
    throw std::runtime_error("windows: table with " + std::to_string(t) +
                             " rows cannot fit seq_len+pred_len=" +
                             std::to_string(seq_len_ + pred_len_));
  }
  const std::size_t count = t - seq_len_ - pred_len_ + 1;
  order_.resize(count);
  for (std::size_t i = 0; i < count; ++i) order_[i] = i;
  reset(seed);
}

std::size_t WindowBatcher::batch_count() const {
  return (order_.size() + batch_size_ - 1) / batch_size_;
}

void WindowBatcher::reset(std::uint64_t seed) {
  cursor_ = 0;
  if (shuffle_) {
    std::sort(order_.begin(), order_.end());
    std::mt19937_64 rng(seed);
    std::shuffle(order_.begin(), order_.end(), rng);
  }
}

bool WindowBatcher::next(WindowBatch& out) {
  if (cursor_ >= order_.size()) return false;
  const std::size_t b = std::min(batch_size_, order_.size() - cursor_);
  const std::size_t n = table_->cols();

  std::vector<double> inputs(b * seq_len_ * n);
  std::vector<double> targets(b * pred_len_ * n);
  out.window_starts.assign(order_.begin() + cursor_, order_.begin() + cursor_ + b);
  for (std::size_t i = 0; i < b; ++i) {
    const std::size_t start = out.window_starts[i];
    for (std::size_t s = 0; s < seq_len_; ++s) {
      for (std::size_t c = 0; c < n; ++c) {
        inputs[(i * seq_len_ + s) * n + c] = table_->at(start + s, c);
      }
    }
    for (std::size_t p = 0; p < pred_len_; ++p) {
      for (std::size_t c = 0; c < n; ++c) {
        targets[(i * pred_len_ + p) * n + c] = table_->at(start + seq_len_ + p, c);
      }
    }
  }
  out.inputs = Tensor({b, seq_len_, n}, std::move(inputs));
  out.targets = Tensor({b, pred_len_, n}, std::move(targets));
  cursor_ += b;
  return true;
}

// ============================================================================
// Synthetic generator
// ============================================================================

SyntheticProfile SyntheticProfile::from_config(const ModelConfig& cfg) {
  SyntheticProfile p;
  p.steps_per_day = cfg.steps_per_day;
  p.base = cfg.synth_base;
  p.daily_amp = cfg.synth_daily_amp;
  p.weekly_amp = cfg.synth_weekly_amp;
  p.noise_std = cfg.synth_noise_std;
  p.ar_coeff = cfg.synth_ar;
  p.spike_rate = cfg.synth_spike_rate;
  p.spike_magnitude = cfg.synth_spike_mag;
  p.covariates = cfg.synth_covariates;
  return p;
}

SeriesTable generate_synthetic(const SyntheticProfile& profile, std::size_t rows,
                               std::uint64_t seed) {
  if (rows < 1000) throw std::invalid_argument("synthetic: need at least 1000 rows");
  constexpr double kTwoPi = 6.28318530717958647692;
  const double spd = static_cast<double>(profile.steps_per_day);
  const double spw = spd * 7.0;
  const std::int64_t step_seconds = 86400 / static_cast<std::int64_t>(profile.steps_per_day);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  SeriesTable table;
  table.columns = {"load"};
  if (profile.covariates) {
    table.columns.insert(table.columns.end(), {"temperature", "humidity", "wind_speed", "wind_dir"});
  }
  const std::size_t n_cols = table.columns.size();
  table.timestamps.resize(rows);
  table.values.resize(rows * n_cols);

  const std::int64_t start = parse_iso8601("2021-01-01T00:00:00");
  double ar = 0.0;
  for (std::size_t t = 0; t < rows; ++t) {
    table.timestamps[t] = start + static_cast<std::int64_t>(t) * step_seconds;
    const double ft = static_cast<double>(t);
    const double daily = profile.daily_amp * std::sin(kTwoPi * ft / spd);
    const double weekly = profile.weekly_amp * std::sin(kTwoPi * ft / spw);
    ar = profile.ar_coeff * ar + gauss(rng) * profile.noise_std;
    double spike = 0.0;
    if (unit(rng) < profile.spike_rate) {
      spike = profile.spike_magnitude * (0.5 + std::abs(gauss(rng)));
    }
    table.values[t * n_cols] = profile.base + daily + weekly + ar + spike;
    if (profile.covariates) {
      const double yearly = std::sin(kTwoPi * ft / (spd * 365.0));
      table.values[t * n_cols + 1] = 15.0 + 10.0 * yearly + 4.0 * std::sin(kTwoPi * ft / spd + 1.0) +
                                     0.2 * gauss(rng);
      table.values[t * n_cols + 2] = 60.0 - 8.0 * std::sin(kTwoPi * ft / spd + 2.0) + 0.5 * gauss(rng);
      table.values[t * n_cols + 3] = 4.0 + 2.0 * std::sin(kTwoPi * ft / spw + 0.5) + 0.3 * gauss(rng);
      table.values[t * n_cols + 4] = 180.0 + 90.0 * std::sin(kTwoPi * ft / (spd * 3.0)) +
                                     3.0 * gauss(rng);
    }
  }
  return table;
}

}  // namespace spdnet
