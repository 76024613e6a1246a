#include "spdnet/periods.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>

#include "spdnet/ops.hpp"

namespace spdnet {

namespace {

constexpr double kTwoPi = 6.28318530717958647692;

struct TwiddleTable {
  // cosines[f*S + t], sines[f*S + t] for f in 0..S/2
  std::vector<double> cosines;
  std::vector<double> sines;
};

const TwiddleTable& twiddles_for(std::size_t s_len) {
  static std::map<std::size_t, TwiddleTable> cache;
  auto it = cache.find(s_len);
  if (it != cache.end()) return it->second;
  TwiddleTable table;
  const std::size_t bins = s_len / 2 + 1;
  table.cosines.resize(bins * s_len);
  table.sines.resize(bins * s_len);
  for (std::size_t f = 0; f < bins; ++f) {
    for (std::size_t t = 0; t < s_len; ++t) {
      const double angle = kTwoPi * static_cast<double>(f) * static_cast<double>(t) /
                           static_cast<double>(s_len);
      table.cosines[f * s_len + t] = std::cos(angle);
      table.sines[f * s_len + t] = std::sin(angle);
    }
  }
  return cache.emplace(s_len, std::move(table)).first->second;
}

}  // namespace

Spectrum compute_spectrum(const Tensor& x) {
  if (!x.defined() || x.rank() != 3) {
    throw std::invalid_argument("compute_spectrum: expected a [B,S,N] tensor");
  }
  const std::size_t B = x.extent(0), S = x.extent(1), N = x.extent(2);
  if (S < 4) {
    throw std::invalid_argument("compute_spectrum: sequence length must be >= 4, got " +
                                std::to_string(S));
  }
  const TwiddleTable& tw = twiddles_for(S);
  const std::size_t bins = S / 2 + 1;
  const auto& xv = x.values();

  Spectrum spec;
  spec.sequence_length = S;
  spec.magnitudes.assign(bins, 0.0);

  std::vector<double> lane(S);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t n = 0; n < N; ++n) {
      for (std::size_t t = 0; t < S; ++t) lane[t] = xv[(b * S + t) * N + n];
      for (std::size_t f = 0; f < bins; ++f) {
        const double* cs = tw.cosines.data() + f * S;
        const double* sn = tw.sines.data() + f * S;
        double re = 0.0, im = 0.0;
        for (std::size_t t = 0; t < S; ++t) {
          re += lane[t] * cs[t];
          im -= lane[t] * sn[t];
        }
        spec.magnitudes[f] += std::hypot(re, im);
      }
    }
  }
  const double scale = 1.0 / static_cast<double>(B * N);
  for (double& m : spec.magnitudes) m *= scale;
  return spec;
}

PeriodSet top_k_periods(const Spectrum& spectrum, std::size_t k) {
  if (k == 0) throw std::invalid_argument("top_k_periods: k must be >= 1");
  const std::size_t S = spectrum.sequence_length;
  if (S < 4 || spectrum.magnitudes.size() != S / 2 + 1) {
    throw std::invalid_argument("top_k_periods: malformed spectrum");
  }

  std::vector<PeriodEntry> usable;
  for (std::size_t f = 1; f < spectrum.magnitudes.size(); ++f) {
    const double amp = spectrum.magnitudes[f];
    if (amp > kUsableMagnitude) {
      PeriodEntry e;
      e.frequency = f;
      e.period = (S + f - 1) / f;  // ceil, so period*frequency >= S
      e.amplitude = amp;
      usable.push_back(e);
    }
  }
  if (usable.empty()) {
    throw NoPeriodicityError("top_k_periods: no usable periodic component (constant input?)");
  }
  std::sort(usable.begin(), usable.end(), [](const PeriodEntry& a, const PeriodEntry& b) {
    if (a.amplitude != b.amplitude) return a.amplitude > b.amplitude;
    return a.frequency < b.frequency;
  });
  if (usable.size() > k) usable.resize(k);

  PeriodSet out;
  out.entries = std::move(usable);
  return out;
}

Folded fold(const Tensor& x, const PeriodEntry& entry) {
  if (!x.defined() || x.rank() != 3) {
    throw std::invalid_argument("fold: expected a [B,S,N] tensor");
  }
  const std::size_t B = x.extent(0), S = x.extent(1), N = x.extent(2);
  const std::size_t p = entry.period, f = entry.frequency;
  if (p == 0 || f == 0 || p * f < S) {
    throw std::invalid_argument("fold: invalid period entry (period " + std::to_string(p) +
                                ", frequency " + std::to_string(f) + ") for S=" + std::to_string(S));
  }
  if (p > (1u << 20) || f > (1u << 20)) {
    throw std::invalid_argument("fold: period/frequency out of supported range");
  }
  // [B,S,N] -> [B,p*f,N] -> [B,f,p,N] -> [B,p,f,N]; flat index c*p+t maps to (t,c).
  Tensor padded = pad_to(x, 1, p * f);
  Tensor grouped = reshape(padded, {B, f, p, N});
  Folded out;
  out.tensor = permute(grouped, {0, 2, 1, 3});
  out.valid_length = S;
  out.entry = entry;
  return out;
}

Tensor unfold(const Folded& folded) {
  const Tensor& t = folded.tensor;
  if (!t.defined() || t.rank() != 4) {
    throw std::invalid_argument("unfold: expected a [B,p,f,N] tensor");
  }
  const std::size_t B = t.extent(0), p = t.extent(1), f = t.extent(2), N = t.extent(3);
  const std::size_t S = folded.valid_length;
  if (S == 0 || p * f < S) {
    throw std::invalid_argument("unfold: valid_length " + std::to_string(S) +
                                " inconsistent with folded shape " + shape_string(t.shape()));
  }
  Tensor grouped = permute(t, {0, 2, 1, 3});        // [B,f,p,N]
  Tensor flat = reshape(grouped, {B, p * f, N});    // time index c*p+t
  return slice(flat, 1, 0, S);
}

void dump_period_set(std::ostream& out, const PeriodSet& periods) {
  out << "frequency,period,amplitude\n";
  for (const PeriodEntry& e : periods.entries) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", e.amplitude);
    out << e.frequency << "," << e.period << "," << buf << "\n";
  }
}

}  // namespace spdnet
