#pragma once

#include <Eigen/Dense>
#include <array>
#include <filesystem>
#include <istream>
#include <string>

#include "nirsbci/common.hpp"

namespace nirsbci {

/// Raw dual-wavelength intensities. Column 2*c holds channel c at the short
/// wavelength, column 2*c + 1 the long one.
struct OpticalRecording {
  double sample_rate_hz = 10.0;
  int channels = kDefaultChannels;
  std::array<double, 2> wavelengths_nm{695.0, 830.0};
  Eigen::MatrixXd samples;    // samples x (2 * channels)
  Eigen::VectorXd reference;  // I0 per column

  void validate() const;
};

/// Extinction coefficients in 1/(mM*mm); rows are wavelengths, columns are
/// (HbO, HbR).
struct ExtinctionTable {
  Eigen::Matrix2d epsilon;
  double source_distance_mm = 30.0;
  std::array<double, 2> dpf{6.5, 5.9};
  std::string note;

  void validate() const;
  // epsilon scaled by distance and per-wavelength DPF; maps mM to optical density.
  Eigen::Matrix2d path_matrix() const;
};

ExtinctionTable default_extinction_table();
ExtinctionTable parse_extinction_table(const std::string& json_text);
ExtinctionTable load_extinction_table(const std::filesystem::path& path);
std::string extinction_table_json(const ExtinctionTable& table);

/// Optical density changes, same column layout as OpticalRecording::samples.
struct OpticalDensity {
  double sample_rate_hz = 10.0;
  int channels = kDefaultChannels;
  Eigen::MatrixXd values;
};

/// Hemoglobin concentration changes in micromolar; samples x channels.
struct HemoSeries {
  double sample_rate_hz = 10.0;
  int channels = kDefaultChannels;
  Eigen::MatrixXd hbo;
  Eigen::MatrixXd hbr;
};

inline constexpr double kMicromolarPerMillimolar = 1000.0;

OpticalDensity optical_density(const OpticalRecording& recording);

/// Concentrations in mM for one channel/sample given its two optical densities.
Eigen::Vector2d solve_mbll(const Eigen::Vector2d& od, const ExtinctionTable& table);

HemoSeries mbll_invert(const OpticalDensity& od, const ExtinctionTable& table);

// Recording CSV: a '# reference_intensities,...' line, then header
// t,ch01_695,ch01_830,...; one row per sample.
std::string recording_csv(const OpticalRecording& recording);
OpticalRecording parse_recording_csv(std::istream& in);
OpticalRecording load_recording_csv(const std::filesystem::path& path);

}  // namespace nirsbci
