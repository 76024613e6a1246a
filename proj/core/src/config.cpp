#include "spdnet/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace spdnet {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::size_t parse_size(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  long long n = 0;
  try {
    n = std::stoll(v, &pos);
  } catch (const std::exception&) {
    throw std::runtime_error("config: invalid integer for '" + key + "': " + v);
  }
  if (pos != v.size() || n <= 0) {
    throw std::runtime_error("config: '" + key + "' must be a positive integer, got " + v);
  }
  return static_cast<std::size_t>(n);
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  unsigned long long n = 0;
  try {
    n = std::stoull(v, &pos);
  } catch (const std::exception&) {
    throw std::runtime_error("config: invalid integer for '" + key + "': " + v);
  }
  if (pos != v.size()) {
    throw std::runtime_error("config: '" + key + "' must be a non-negative integer, got " + v);
  }
  return n;
}

double parse_double(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &pos);
  } catch (const std::exception&) {
    throw std::runtime_error("config: invalid number for '" + key + "': " + v);
  }
  if (pos != v.size()) {
    throw std::runtime_error("config: invalid number for '" + key + "': " + v);
  }
  return d;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::runtime_error("config: '" + key + "' must be true/false, got " + v);
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string activation_name(Activation a) {
  return a == Activation::kGelu ? "gelu" : "relu";
}

std::string ModelConfig::to_text() const {
  std::ostringstream out;
  out << "seq_len=" << seq_len << "\n";
  out << "pred_len=" << pred_len << "\n";
  out << "channels=" << channels << "\n";
  out << "top_k=" << top_k << "\n";
  out << "d_model=" << d_model << "\n";
  out << "heads=" << heads << "\n";
  out << "layers=" << layers << "\n";
  out << "d_ff=" << d_ff << "\n";
  out << "trend_kernel=" << trend_kernel << "\n";
  out << "seasonal_kernel=" << seasonal_kernel << "\n";
  out << "activation=" << activation_name(activation) << "\n";
  out << "learning_rate=" << fmt_double(learning_rate) << "\n";
  out << "batch_size=" << batch_size << "\n";
  out << "max_epochs=" << max_epochs << "\n";
  out << "patience=" << patience << "\n";
  out << "seed=" << seed << "\n";
  out << "train_frac=" << fmt_double(train_frac) << "\n";
  out << "val_frac=" << fmt_double(val_frac) << "\n";
  out << "target_column=" << target_column << "\n";
  out << "forward_fill=" << (forward_fill ? "true" : "false") << "\n";
  out << "bench_epochs=" << bench_epochs << "\n";
  out << "bench_warmup=" << bench_warmup << "\n";
  out << "synth_rows=" << synth_rows << "\n";
  out << "steps_per_day=" << steps_per_day << "\n";
  out << "synth_base=" << fmt_double(synth_base) << "\n";
  out << "synth_daily_amp=" << fmt_double(synth_daily_amp) << "\n";
  out << "synth_weekly_amp=" << fmt_double(synth_weekly_amp) << "\n";
  out << "synth_noise_std=" << fmt_double(synth_noise_std) << "\n";
  out << "synth_ar=" << fmt_double(synth_ar) << "\n";
  out << "synth_spike_rate=" << fmt_double(synth_spike_rate) << "\n";
  out << "synth_spike_mag=" << fmt_double(synth_spike_mag) << "\n";
  out << "synth_covariates=" << (synth_covariates ? "true" : "false") << "\n";
  return out.str();
}

void ModelConfig::set(const std::string& key, const std::string& value) {
  if (key == "seq_len") seq_len = parse_size(key, value);
  else if (key == "pred_len") pred_len = parse_size(key, value);
  else if (key == "channels") channels = parse_size(key, value);
  else if (key == "top_k") top_k = parse_size(key, value);
  else if (key == "d_model") d_model = parse_size(key, value);
  else if (key == "heads") heads = parse_size(key, value);
  else if (key == "layers") layers = parse_size(key, value);
  else if (key == "d_ff") d_ff = parse_size(key, value);
  else if (key == "trend_kernel") trend_kernel = parse_size(key, value);
  else if (key == "seasonal_kernel") seasonal_kernel = parse_size(key, value);
  else if (key == "activation") {
    if (value == "gelu") activation = Activation::kGelu;
    else if (value == "relu") activation = Activation::kRelu;
    else throw std::runtime_error("config: activation must be gelu or relu, got " + value);
  }
  else if (key == "learning_rate") learning_rate = parse_double(key, value);
  else if (key == "batch_size") batch_size = parse_size(key, value);
  else if (key == "max_epochs") max_epochs = parse_size(key, value);
  else if (key == "patience") patience = parse_size(key, value);
  else if (key == "seed") seed = parse_u64(key, value);
  else if (key == "train_frac") train_frac = parse_double(key, value);
  else if (key == "val_frac") val_frac = parse_double(key, value);
  else if (key == "target_column") target_column = value;
  else if (key == "forward_fill") forward_fill = parse_bool(key, value);
  else if (key == "bench_epochs") bench_epochs = parse_size(key, value);
  else if (key == "bench_warmup") bench_warmup = parse_size(key, value);
  else if (key == "synth_rows") synth_rows = parse_size(key, value);
  else if (key == "steps_per_day") steps_per_day = parse_size(key, value);
  else if (key == "synth_base") synth_base = parse_double(key, value);
  else if (key == "synth_daily_amp") synth_daily_amp = parse_double(key, value);
  else if (key == "synth_weekly_amp") synth_weekly_amp = parse_double(key, value);
  else if (key == "synth_noise_std") synth_noise_std = parse_double(key, value);
  else if (key == "synth_ar") synth_ar = parse_double(key, value);
  else if (key == "synth_spike_rate") synth_spike_rate = parse_double(key, value);
  else if (key == "synth_spike_mag") synth_spike_mag = parse_double(key, value);
  else if (key == "synth_covariates") synth_covariates = parse_bool(key, value);
  else throw std::runtime_error("config: unknown key '" + key + "'");
}

ModelConfig ModelConfig::from_text(const std::string& text) {
  ModelConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("config: line " + std::to_string(line_no) + " is not key=value: " + t);
    }
    cfg.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return cfg;
}

ModelConfig ModelConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_text(buf.str());
}

}  // namespace spdnet
