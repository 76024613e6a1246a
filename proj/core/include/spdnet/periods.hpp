#pragma once

#include <iosfwd>
#include <stdexcept>
#include <vector>

#include "spdnet/tensor.hpp"

namespace spdnet {

/// Thrown when a window carries no detectable periodic content (all non-DC
/// magnitudes below the usability threshold).
struct NoPeriodicityError : std::runtime_error {
  explicit NoPeriodicityError(const std::string& what) : std::runtime_error(what) {}
};

/// One-sided magnitude spectrum of a [B,S,N] window, averaged over batch and
/// channel. magnitudes[f] covers f = 0..floor(S/2).
struct Spectrum {
  std::vector<double> magnitudes;
  std::size_t sequence_length = 0;
};

struct PeriodEntry {
  std::size_t frequency = 0;  // whole cycles inside the window, >= 1
  std::size_t period = 0;     // ceil(S / frequency)
  double amplitude = 0.0;
};

/// At most k dominant periods, sorted by descending amplitude; ties broken
/// toward the lower frequency. DC is never included.
struct PeriodSet {
  std::vector<PeriodEntry> entries;
};

/// A series folded to [B, period, frequency, N]. Rows index time within one
/// cycle, columns index the cycle; positions past valid_length are zero.
struct Folded {
  Tensor tensor;
  std::size_t valid_length = 0;
  PeriodEntry entry;
};

// Magnitudes below this never count as a usable periodic component.
inline constexpr double kUsableMagnitude = 1e-9;

/// Direct DFT along the time axis; O(S^2) with cached twiddle tables.
/// Requires S >= 4.
Spectrum compute_spectrum(const Tensor& x);

/// Selects the k strongest non-DC frequencies. Returns fewer than k entries
/// when fewer usable frequencies exist; throws NoPeriodicityError when there
/// are none at all.
PeriodSet top_k_periods(const Spectrum& spectrum, std::size_t k);

/// Zero-pads to period*frequency and reshapes so that element (t, c) holds
/// x[c*period + t]. Differentiable.
Folded fold(const Tensor& x, const PeriodEntry& entry);

/// Inverse of fold restricted to the first valid_length positions.
Tensor unfold(const Folded& folded);

void dump_period_set(std::ostream& out, const PeriodSet& periods);

}  // namespace spdnet
