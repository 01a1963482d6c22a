#include "nirsbci/filter.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace nirsbci {

namespace {

using cplx = std::complex<double>;

std::vector<double> expand_real_polynomial(const std::vector<cplx>& roots) {
  // coefficients in descending powers of the variable
  std::vector<cplx> poly{cplx(1.0, 0.0)};
  for (const auto& r : roots) {
    std::vector<cplx> next(poly.size() + 1, cplx(0.0, 0.0));
    for (std::size_t i = 0; i < poly.size(); ++i) {
      next[i] += poly[i];
      next[i + 1] -= poly[i] * r;
    }
    poly = std::move(next);
  }
  std::vector<double> out(poly.size());
  for (std::size_t i = 0; i < poly.size(); ++i) out[i] = poly[i].real();
  return out;
}

cplx evaluate_descending(const std::vector<double>& coeffs, cplx zinv) {
  // sum c_i z^-i via Horner in z^-1
  cplx acc(0.0, 0.0);
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * zinv + *it;
  return acc;
}

}  // namespace

void FilterSpec::validate() const {
  if (order < 1) throw ConfigError("filter order must be at least 1");
  if (!(sample_rate_hz > 0.0)) throw ConfigError("filter sample rate must be positive");
  const double nyquist = sample_rate_hz / 2.0;
  if (!(stopband_hz > 0.0) || !(stopband_hz < nyquist)) {
    throw ConfigError("stopband edge must lie strictly between 0 and Nyquist (" + std::to_string(nyquist) + " Hz)");
  }
  if (!(passband_hz > 0.0) || !(passband_hz < stopband_hz)) {
    throw ConfigError("passband edge must lie strictly between 0 and the stopband edge");
  }
  if (!(stopband_attenuation_db > 0.0)) throw ConfigError("stopband attenuation must be positive");
  if (passband_ripple_db < 0.0) throw ConfigError("passband ripple must be nonnegative");
}

FilterRealization design_lowpass(const FilterSpec& spec) {
  spec.validate();
  const int n = spec.order;
  const double pi = std::numbers::pi;
  const double fs = spec.sample_rate_hz;

  // Analog prototype with its stopband edge at 1 rad/s.
  const double delta = 1.0 / std::sqrt(std::pow(10.0, spec.stopband_attenuation_db / 10.0) - 1.0);
  const double mu = std::asinh(1.0 / delta) / n;
  std::vector<cplx> analog_zeros;
  std::vector<cplx> analog_poles;
  for (int m = -n + 1; m < n; m += 2) {
    const double theta = pi * m / (2.0 * n);
    if (m != 0) analog_zeros.emplace_back(0.0, 1.0 / std::sin(theta));
    cplx p = -std::exp(cplx(0.0, theta));
    p = cplx(std::sinh(mu) * p.real(), std::cosh(mu) * p.imag());
    analog_poles.push_back(1.0 / p);
  }

  // Prewarp the stopband edge so it lands exactly on spec.stopband_hz after the bilinear map.
  const double warped = 2.0 * fs * std::tan(pi * spec.stopband_hz / fs);
  for (auto& z : analog_zeros) z *= warped;
  for (auto& p : analog_poles) p *= warped;

  FilterRealization out;
  out.sample_rate_hz = fs;
  const double two_fs = 2.0 * fs;
  for (const auto& z : analog_zeros) out.zeros.push_back((two_fs + z) / (two_fs - z));
  for (const auto& p : analog_poles) out.poles.push_back((two_fs + p) / (two_fs - p));
  // Zeros at infinity map to Nyquist.
  while (out.zeros.size() < out.poles.size()) out.zeros.emplace_back(-1.0, 0.0);

  out.b = expand_real_polynomial(out.zeros);
  out.a = expand_real_polynomial(out.poles);
  double sum_b = 0.0;
  double sum_a = 0.0;
  for (double v : out.b) sum_b += v;
  for (double v : out.a) sum_a += v;
  const double gain = sum_a / sum_b;
  for (double& v : out.b) v *= gain;
  return out;
}

std::complex<double> FilterRealization::response(double frequency_hz) const {
  const double omega = 2.0 * std::numbers::pi * frequency_hz / sample_rate_hz;
  const cplx zinv = std::exp(cplx(0.0, -omega));
  return evaluate_descending(b, zinv) / evaluate_descending(a, zinv);
}

double FilterRealization::magnitude_db(double frequency_hz) const {
  return 20.0 * std::log10(std::abs(response(frequency_hz)));
}

double FilterRealization::phase_deg(double frequency_hz) const {
  return std::arg(response(frequency_hz)) * 180.0 / std::numbers::pi;
}

bool FilterRealization::stable() const {
  return std::all_of(poles.begin(), poles.end(), [](const cplx& p) { return std::abs(p) < 1.0; });
}

std::vector<double> filter_signal(const FilterRealization& filter, std::span<const double> input) {
  const std::size_t order = filter.a.size() - 1;
  std::vector<double> state(order, 0.0);
  std::vector<double> out(input.size());
  const auto& b = filter.b;
  const auto& a = filter.a;
  for (std::size_t i = 0; i < input.size(); ++i) {
    const double x = input[i];
    const double y = b[0] * x + (order > 0 ? state[0] : 0.0);
    for (std::size_t k = 0; k + 1 < order; ++k) state[k] = state[k + 1] + b[k + 1] * x - a[k + 1] * y;
    if (order > 0) state[order - 1] = b[order] * x - a[order] * y;
    out[i] = y;
  }
  return out;
}

HemoSeries apply_filter(const FilterRealization& filter, const HemoSeries& series, int expected_channels) {
  if (series.channels != expected_channels || series.hbo.cols() != expected_channels ||
      series.hbr.cols() != expected_channels) {
    throw ShapeError("series has " + std::to_string(series.hbo.cols()) + " channels, layout expects " +
                     std::to_string(expected_channels));
  }
  if (series.hbo.rows() == 0) throw ShapeError("cannot filter an empty series");
  HemoSeries out = series;
  auto run = [&](const Eigen::MatrixXd& in, Eigen::MatrixXd& dst) {
    for (Eigen::Index c = 0; c < in.cols(); ++c) {
      Eigen::VectorXd column = in.col(c);
      auto y = filter_signal(filter, std::span<const double>(column.data(), static_cast<std::size_t>(column.size())));
      dst.col(c) = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
    }
  };
  run(series.hbo, out.hbo);
  run(series.hbr, out.hbr);
  return out;
}

FilterSummary summarize_filter(const FilterRealization& filter, const FilterSpec& spec, double grid_step_hz) {
  FilterSummary s;
  s.dc_gain_db = filter.magnitude_db(0.0);
  s.passband_droop_db = -filter.magnitude_db(spec.passband_hz);
  const double nyquist = spec.sample_rate_hz / 2.0;
  const auto steps = static_cast<long>(std::floor((nyquist - spec.stopband_hz) / grid_step_hz + 1e-9));
  s.min_stopband_attenuation_db = std::numeric_limits<double>::infinity();
  for (long i = 0; i <= steps; ++i) {
    const double f = spec.stopband_hz + static_cast<double>(i) * grid_step_hz;
    const double att = -filter.magnitude_db(f);
    if (att < s.min_stopband_attenuation_db) {
      s.min_stopband_attenuation_db = att;
      s.worst_stopband_frequency_hz = f;
    }
  }
  return s;
}

}  // namespace nirsbci
