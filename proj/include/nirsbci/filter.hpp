#pragma once

#include <complex>
#include <span>
#include <vector>

#include "nirsbci/optics.hpp"

namespace nirsbci {

/// Low-pass requirements. The design binds order, stopband edge and stopband
/// attenuation; passband edge and ripple are kept for reporting only.
struct FilterSpec {
  int order = 3;
  double stopband_hz = 0.5;
  double stopband_attenuation_db = 50.0;
  double passband_hz = 0.1;
  double passband_ripple_db = 0.1;
  double sample_rate_hz = 10.0;

  void validate() const;
};

/// Direct-form recursive filter, a[0] == 1, zero initial state.
struct FilterRealization {
  std::vector<double> b;
  std::vector<double> a;
  std::vector<std::complex<double>> zeros;  // z-plane
  std::vector<std::complex<double>> poles;  // z-plane
  double sample_rate_hz = 10.0;

  std::complex<double> response(double frequency_hz) const;
  double magnitude_db(double frequency_hz) const;
  double phase_deg(double frequency_hz) const;
  bool stable() const;
};

/// Chebyshev type II low-pass: analog prototype scaled to the prewarped
/// stopband edge, bilinear transform, then DC gain normalized to exactly one.
FilterRealization design_lowpass(const FilterSpec& spec);

/// Causal transposed direct-form II filtering from rest.
std::vector<double> filter_signal(const FilterRealization& filter, std::span<const double> input);

/// Filters every channel of both species. Throws ShapeError when the series
/// does not carry `expected_channels` channels.
HemoSeries apply_filter(const FilterRealization& filter, const HemoSeries& series,
                        int expected_channels = kDefaultChannels);

struct FilterSummary {
  double dc_gain_db = 0.0;
  double passband_droop_db = 0.0;           // attenuation at passband_hz
  double min_stopband_attenuation_db = 0.0;  // over [stopband_hz, fs/2], 0.01 Hz grid
  double worst_stopband_frequency_hz = 0.0;
};

FilterSummary summarize_filter(const FilterRealization& filter, const FilterSpec& spec, double grid_step_hz = 0.01);

}  // namespace nirsbci
