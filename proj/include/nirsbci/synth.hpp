#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nirsbci/epoching.hpp"
#include "nirsbci/optics.hpp"
#include "nirsbci/schedule.hpp"

namespace nirsbci {

/// Double-gamma response. Each gamma has shape delay/dispersion and scale
/// dispersion; the undershoot is subtracted with weight undershoot_ratio.
struct HrfParams {
  double peak_delay_s = 6.0;
  double undershoot_delay_s = 16.0;
  double peak_dispersion_s = 1.0;
  double undershoot_dispersion_s = 1.0;
  double undershoot_ratio = 1.0 / 6.0;
  double amplitude_scale = 1.0;

  void validate() const;
};

/// Peak-normalized double-gamma evaluator; the normalization is located once
/// at construction.
class HrfShape {
 public:
  explicit HrfShape(const HrfParams& params);
  double operator()(double t_s) const;
  double peak_time_s() const { return peak_time_; }

 private:
  double raw(double t_s) const;
  HrfParams params_;
  double peak_time_ = 0.0;
  double peak_value_ = 1.0;
};

double hrf(double t_s, const HrfParams& params);

/// Response to a task boxcar of `task_samples` samples, scaled to unit peak.
std::vector<double> block_response_kernel(const HrfParams& params, int task_samples, double sample_rate_hz,
                                          double tail_s = 32.0);

struct ActivationMap {
  // Peak response in uM per label (yes, no, rest) and channel.
  std::array<Eigen::VectorXd, kNumLabels> amplitude_um;

  static ActivationMap zeros(int channels = kDefaultChannels);
  const Eigen::VectorXd& of(Label label) const { return amplitude_um[static_cast<std::size_t>(index_of(label))]; }
  Eigen::VectorXd& of(Label label) { return amplitude_um[static_cast<std::size_t>(index_of(label))]; }
};

/// Physiological confounds: jittered sinusoids shared across channels,
/// per-channel random-walk drift and white noise. Amplitudes in uM. All
/// randomness comes from the seed handed to generate_session.
struct NoiseModel {
  double mayer_amplitude_um = 0.0;
  double mayer_hz = 0.1;
  double respiration_amplitude_um = 0.0;
  double respiration_hz = 0.3;
  double cardiac_amplitude_um = 0.0;
  double cardiac_min_hz = 0.8;
  double cardiac_max_hz = 1.2;
  double amplitude_jitter = 0.0;          // relative per-channel spread of sinusoid amplitudes
  double phase_jitter_rad_per_sqrt_s = 0.0;  // random-walk phase diffusion
  double drift_step_um = 0.0;             // random-walk step per sample
  double white_sigma_um = 0.0;

  void validate() const;
};

struct Scenario {
  std::string name;
  int version = 1;
  ActivationMap activation = ActivationMap::zeros();
  double trial_amplitude_jitter = 0.0;  // relative sd of per-trial amplitude
  HrfParams hrf;
  double hbr_ratio = 1.0 / 3.0;
  NoiseModel noise;
  double reference_intensity_min = 0.5;
  double reference_intensity_max = 1.5;
  double lead_in_s = 20.0;
  double inter_block_gap_s = 30.0;
  double tail_s = 20.0;

  void validate() const;
};

Scenario parse_scenario(const std::string& json_text);
/// Accepts a bundled scenario name (high-snr, realistic, null) or a JSON path.
Scenario load_scenario(const std::string& name_or_path);

/// Forward modified Beer-Lambert map: uM concentrations to optical density.
OpticalDensity mbll_forward(const Eigen::MatrixXd& hbo_um, const Eigen::MatrixXd& hbr_um, const ExtinctionTable& table,
                            double sample_rate_hz = 10.0);

struct TrialTruth {
  int session = 1;
  int block = 1;
  int trial = 1;
  Label label = Label::rest;
  long onset_sample = 0;
  long task_onset_sample = 0;
  Eigen::VectorXd amplitude_um;  // realized per-channel peak amplitude
};

struct GroundTruthLog {
  std::string scenario;
  std::uint64_t seed = 0;
  int session = 1;
  long samples = 0;
  int channels = kDefaultChannels;
  double sample_rate_hz = 10.0;
  int task_samples = 150;
  int response_tail_samples = 180;  // response is cut where the next task window could begin
  HrfParams hrf;
  std::vector<TrialTruth> trials;

  std::string to_json() const;
};

/// Rebuilds the noiseless HbO stream from the log alone.
Eigen::MatrixXd reconstruct_noiseless(const GroundTruthLog& log);

struct SessionData {
  OpticalRecording recording;
  std::vector<TrialEvent> events;
  GroundTruthLog truth;
  Eigen::MatrixXd noiseless_hbo;  // samples x channels, uM
  Eigen::MatrixXd noise_hbo;
  Eigen::MatrixXd hbo;            // noiseless + noise
  Eigen::MatrixXd hbr;
};

/// Synthesizes one session's continuous recording for the blocks of
/// `schedule` that belong to `session`. Fully determined by `seed`.
SessionData generate_session(int session, const std::vector<BlockPlan>& schedule, const Scenario& scenario,
                             const ProtocolTiming& timing, const ExtinctionTable& table, std::uint64_t seed);

}  // namespace nirsbci
