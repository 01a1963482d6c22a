#include "nirsbci/synth.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "json.hpp"
#include "nirsbci/io.hpp"
#include "nirsbci/layout.hpp"

namespace nirsbci {

namespace {

// Stream identifiers for split_seed; keep stable, they are part of the
// determinism contract.
constexpr std::uint64_t kStreamReference = 1;
constexpr std::uint64_t kStreamPhysiology = 2;
constexpr std::uint64_t kStreamChannel = 1000;
constexpr std::uint64_t kStreamTrial = 100000;

double log_gamma_pdf(double t, double shape, double scale) {
  return (shape - 1.0) * std::log(t) - t / scale - std::lgamma(shape) - shape * std::log(scale);
}

}  // namespace

void HrfParams::validate() const {
  if (!(peak_delay_s > 0.0) || !(undershoot_delay_s > 0.0) || !(peak_dispersion_s > 0.0) ||
      !(undershoot_dispersion_s > 0.0) || !(undershoot_ratio > 0.0) || !(amplitude_scale > 0.0)) {
    throw ConfigError("hrf parameters must all be positive");
  }
  if (!(undershoot_delay_s > peak_delay_s)) throw ConfigError("hrf undershoot delay must exceed peak delay");
}

HrfShape::HrfShape(const HrfParams& params) : params_(params) {
  params_.validate();
  // coarse scan then golden-section refinement of the positive lobe
  const double step = 0.01;
  double best_t = step;
  double best_v = raw(step);
  for (double t = step; t <= params_.undershoot_delay_s; t += step) {
    const double v = raw(t);
    if (v > best_v) {
      best_v = v;
      best_t = t;
    }
  }
  double lo = std::max(best_t - step, 1e-9);
  double hi = best_t + step;
  const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int i = 0; i < 100; ++i) {
    const double a = hi - ratio * (hi - lo);
    const double b = lo + ratio * (hi - lo);
    if (raw(a) < raw(b)) {
      lo = a;
    } else {
      hi = b;
    }
  }
  peak_time_ = 0.5 * (lo + hi);
  peak_value_ = raw(peak_time_);
}

double HrfShape::raw(double t_s) const {
  if (!(t_s > 0.0)) return 0.0;
  const double a1 = params_.peak_delay_s / params_.peak_dispersion_s;
  const double a2 = params_.undershoot_delay_s / params_.undershoot_dispersion_s;
  return std::exp(log_gamma_pdf(t_s, a1, params_.peak_dispersion_s)) -
         params_.undershoot_ratio * std::exp(log_gamma_pdf(t_s, a2, params_.undershoot_dispersion_s));
}

double HrfShape::operator()(double t_s) const {
  if (!std::isfinite(t_s)) throw DomainError("hrf time must be finite");
  return params_.amplitude_scale * raw(t_s) / peak_value_;
}

double hrf(double t_s, const HrfParams& params) { return HrfShape(params)(t_s); }

std::vector<double> block_response_kernel(const HrfParams& params, int task_samples, double sample_rate_hz,
                                          double tail_s) {
  const HrfShape shape(params);
  const int tail = static_cast<int>(std::lround(tail_s * sample_rate_hz));
  const int len = task_samples + tail;
  std::vector<double> h(static_cast<std::size_t>(len));
  for (int n = 0; n < len; ++n) h[static_cast<std::size_t>(n)] = shape(n / sample_rate_hz);
  std::vector<double> kernel(static_cast<std::size_t>(len), 0.0);
  double peak = 0.0;
  for (int n = 0; n < len; ++n) {
    double acc = 0.0;
    for (int m = 0; m < task_samples && m <= n; ++m) acc += h[static_cast<std::size_t>(n - m)];
    kernel[static_cast<std::size_t>(n)] = acc;
    peak = std::max(peak, acc);
  }
  for (auto& v : kernel) v /= peak;
  return kernel;
}

ActivationMap ActivationMap::zeros(int channels) {
  ActivationMap m;
  for (auto& a : m.amplitude_um) a = Eigen::VectorXd::Zero(channels);
  return m;
}

void NoiseModel::validate() const {
  const double amps[] = {mayer_amplitude_um, respiration_amplitude_um, cardiac_amplitude_um, amplitude_jitter,
                         phase_jitter_rad_per_sqrt_s, drift_step_um, white_sigma_um};
  for (double a : amps) {
    if (!(a >= 0.0) || !std::isfinite(a)) throw ConfigError("noise amplitudes must be finite and nonnegative");
  }
  if (!(mayer_hz > 0.0) || !(respiration_hz > 0.0) || !(cardiac_min_hz > 0.0) || cardiac_max_hz < cardiac_min_hz) {
    throw ConfigError("noise frequencies must be positive with cardiac_min_hz <= cardiac_max_hz");
  }
}

void Scenario::validate() const {
  hrf.validate();
  noise.validate();
  for (const auto& a : activation.amplitude_um) {
    if (!a.allFinite()) throw ConfigError("activation amplitudes must be finite");
    if (a.size() != activation.amplitude_um[0].size()) throw ConfigError("activation maps differ in channel count");
  }
  if (!(trial_amplitude_jitter >= 0.0)) throw ConfigError("trial amplitude jitter must be nonnegative");
  if (!(hbr_ratio >= 0.0)) throw ConfigError("hbr ratio must be nonnegative");
  if (!(reference_intensity_min > 0.0) || reference_intensity_max < reference_intensity_min) {
    throw ConfigError("reference intensity range must be positive and ordered");
  }
  if (lead_in_s < 0.0 || inter_block_gap_s < 0.0 || tail_s < 0.0) throw ConfigError("timeline gaps must be nonnegative");
}

Scenario parse_scenario(const std::string& json_text) {
  Scenario s;
  try {
    auto j = nlohmann::json::parse(json_text);
    s.name = j.at("name").get<std::string>();
    s.version = j.value("version", 1);
    const int channels = j.value("channels", kDefaultChannels);
    s.activation = ActivationMap::zeros(channels);
    if (j.contains("activation")) {
      for (auto label : kAllLabels) {
        const std::string key(to_string(label));
        if (!j["activation"].contains(key)) continue;
        for (const auto& group : j["activation"][key]) {
          const double amp = group.at("amplitude_um").get<double>();
          for (int ch : group.at("channels").get<std::vector<int>>()) {
            if (ch < 1 || ch > channels) throw ConfigError("activation channel " + std::to_string(ch) + " out of range");
            s.activation.of(label)(ch - 1) = amp;
          }
        }
      }
    }
    s.trial_amplitude_jitter = j.value("trial_amplitude_jitter", 0.0);
    s.hbr_ratio = j.value("hbr_ratio", 1.0 / 3.0);
    if (j.contains("hrf")) {
      const auto& h = j["hrf"];
      s.hrf.peak_delay_s = h.value("peak_delay_s", s.hrf.peak_delay_s);
      s.hrf.undershoot_delay_s = h.value("undershoot_delay_s", s.hrf.undershoot_delay_s);
      s.hrf.peak_dispersion_s = h.value("peak_dispersion_s", s.hrf.peak_dispersion_s);
      s.hrf.undershoot_dispersion_s = h.value("undershoot_dispersion_s", s.hrf.undershoot_dispersion_s);
      s.hrf.undershoot_ratio = h.value("undershoot_ratio", s.hrf.undershoot_ratio);
      s.hrf.amplitude_scale = h.value("amplitude_scale", s.hrf.amplitude_scale);
    }
    if (j.contains("noise")) {
      const auto& n = j["noise"];
      auto& m = s.noise;
      m.mayer_amplitude_um = n.value("mayer_amplitude_um", m.mayer_amplitude_um);
      m.mayer_hz = n.value("mayer_hz", m.mayer_hz);
      m.respiration_amplitude_um = n.value("respiration_amplitude_um", m.respiration_amplitude_um);
      m.respiration_hz = n.value("respiration_hz", m.respiration_hz);
      m.cardiac_amplitude_um = n.value("cardiac_amplitude_um", m.cardiac_amplitude_um);
      m.cardiac_min_hz = n.value("cardiac_min_hz", m.cardiac_min_hz);
      m.cardiac_max_hz = n.value("cardiac_max_hz", m.cardiac_max_hz);
      m.amplitude_jitter = n.value("amplitude_jitter", m.amplitude_jitter);
      m.phase_jitter_rad_per_sqrt_s = n.value("phase_jitter_rad_per_sqrt_s", m.phase_jitter_rad_per_sqrt_s);
      m.drift_step_um = n.value("drift_step_um", m.drift_step_um);
      m.white_sigma_um = n.value("white_sigma_um", m.white_sigma_um);
    }
    if (j.contains("reference_intensity")) {
      auto r = j["reference_intensity"].get<std::vector<double>>();
      if (r.size() != 2) throw ConfigError("reference_intensity must be [min, max]");
      s.reference_intensity_min = r[0];
      s.reference_intensity_max = r[1];
    }
    if (j.contains("timeline")) {
      const auto& t = j["timeline"];
      s.lead_in_s = t.value("lead_in_s", s.lead_in_s);
      s.inter_block_gap_s = t.value("inter_block_gap_s", s.inter_block_gap_s);
      s.tail_s = t.value("tail_s", s.tail_s);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed scenario: ") + e.what());
  }
  s.validate();
  return s;
}

Scenario load_scenario(const std::string& name_or_path) {
  std::filesystem::path p(name_or_path);
  if (p.extension() != ".json") p = data_dir() / "scenarios" / (name_or_path + ".json");
  if (!std::filesystem::exists(p)) throw ConfigError("unknown scenario '" + name_or_path + "'");
  return parse_scenario(io::read_text_file(p));
}

OpticalDensity mbll_forward(const Eigen::MatrixXd& hbo_um, const Eigen::MatrixXd& hbr_um, const ExtinctionTable& table,
                            double sample_rate_hz) {
  table.validate();
  if (hbo_um.rows() != hbr_um.rows() || hbo_um.cols() != hbr_um.cols()) {
    throw ShapeError("HbO and HbR series differ in shape");
  }
  const Eigen::Matrix2d path = table.path_matrix();
  OpticalDensity od;
  od.sample_rate_hz = sample_rate_hz;
  od.channels = static_cast<int>(hbo_um.cols());
  od.values.resize(hbo_um.rows(), 2 * hbo_um.cols());
  for (Eigen::Index ch = 0; ch < hbo_um.cols(); ++ch) {
    for (Eigen::Index s = 0; s < hbo_um.rows(); ++s) {
      const Eigen::Vector2d conc(hbo_um(s, ch) / kMicromolarPerMillimolar, hbr_um(s, ch) / kMicromolarPerMillimolar);
      const Eigen::Vector2d od_pair = path * conc;
      od.values(s, 2 * ch) = od_pair(0);
      od.values(s, 2 * ch + 1) = od_pair(1);
    }
  }
  return od;
}

std::string GroundTruthLog::to_json() const {
  nlohmann::ordered_json j;
  j["scenario"] = scenario;
  j["seed"] = seed;
  j["session"] = session;
  j["samples"] = samples;
  j["channels"] = channels;
  j["sample_rate_hz"] = sample_rate_hz;
  j["task_samples"] = task_samples;
  j["response_tail_samples"] = response_tail_samples;
  j["hrf"] = {{"peak_delay_s", hrf.peak_delay_s},
              {"undershoot_delay_s", hrf.undershoot_delay_s},
              {"peak_dispersion_s", hrf.peak_dispersion_s},
              {"undershoot_dispersion_s", hrf.undershoot_dispersion_s},
              {"undershoot_ratio", hrf.undershoot_ratio},
              {"amplitude_scale", hrf.amplitude_scale}};
  j["trials"] = nlohmann::ordered_json::array();
  for (const auto& t : trials) {
    nlohmann::ordered_json jt;
    jt["session"] = t.session;
    jt["block"] = t.block;
    jt["trial"] = t.trial;
    jt["label"] = std::string(to_string(t.label));
    jt["onset_sample"] = t.onset_sample;
    jt["task_onset_sample"] = t.task_onset_sample;
    jt["amplitude_um"] = std::vector<double>(t.amplitude_um.data(), t.amplitude_um.data() + t.amplitude_um.size());
    j["trials"].push_back(std::move(jt));
  }
  return j.dump(1);
}

Eigen::MatrixXd reconstruct_noiseless(const GroundTruthLog& log) {
  const auto kernel = block_response_kernel(log.hrf, log.task_samples, log.sample_rate_hz,
                                            log.response_tail_samples / log.sample_rate_hz);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(log.samples, log.channels);
  for (const auto& t : log.trials) {
    for (int ch = 0; ch < log.channels; ++ch) {
      const double amp = t.amplitude_um(ch);
      if (amp == 0.0) continue;
      for (std::size_t n = 0; n < kernel.size(); ++n) {
        const long s = t.task_onset_sample + static_cast<long>(n);
        if (s >= log.samples) break;
        out(s, ch) += amp * kernel[n];
      }
    }
  }
  return out;
}

SessionData generate_session(int session, const std::vector<BlockPlan>& schedule, const Scenario& scenario,
                             const ProtocolTiming& timing, const ExtinctionTable& table, std::uint64_t seed) {
  scenario.validate();
  timing.validate();
  table.validate();
  const double fs = timing.sample_rate_hz;
  const int channels = static_cast<int>(scenario.activation.amplitude_um[0].size());
  const int trial_len = timing.trial_samples();

  std::vector<const BlockPlan*> blocks;
  for (const auto& b : schedule) {
    if (b.session == session) blocks.push_back(&b);
  }
  if (blocks.empty()) throw ConfigError("schedule has no blocks for session " + std::to_string(session));

  SessionData out;
  const long lead = std::lround(scenario.lead_in_s * fs);
  const long gap = std::lround(scenario.inter_block_gap_s * fs);
  const long tail = std::lround(scenario.tail_s * fs);
  long cursor = lead;
  for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
    if (bi > 0) cursor += gap;
    const auto& b = *blocks[bi];
    for (std::size_t t = 0; t < b.order.size(); ++t) {
      TrialEvent e;
      e.onset_sample = cursor;
      e.label = b.order[t];
      e.session = b.session;
      e.block = b.block;
      e.trial = static_cast<int>(t) + 1;
      out.events.push_back(e);
      cursor += trial_len;
    }
  }
  const long total = cursor + tail;

  auto& log = out.truth;
  log.scenario = scenario.name;
  log.seed = seed;
  log.session = session;
  log.samples = total;
  log.channels = channels;
  log.sample_rate_hz = fs;
  log.task_samples = timing.task_samples();
  log.response_tail_samples = timing.task_offset();
  log.hrf = scenario.hrf;

  const std::uint64_t session_seed = split_seed(seed, static_cast<std::uint64_t>(session));
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t i = 0; i < out.events.size(); ++i) {
    const auto& e = out.events[i];
    std::mt19937_64 rng(split_seed(session_seed, kStreamTrial + i));
    TrialTruth tt;
    tt.session = e.session;
    tt.block = e.block;
    tt.trial = e.trial;
    tt.label = e.label;
    tt.onset_sample = e.onset_sample;
    tt.task_onset_sample = e.onset_sample + timing.task_offset();
    tt.amplitude_um = scenario.activation.of(e.label);
    for (int ch = 0; ch < channels; ++ch) {
      const double jitter = 1.0 + scenario.trial_amplitude_jitter * gauss(rng);
      if (tt.amplitude_um(ch) != 0.0) tt.amplitude_um(ch) *= jitter;
    }
    log.trials.push_back(std::move(tt));
  }
  out.noiseless_hbo = reconstruct_noiseless(log);

  // Shared physiological oscillations with diffusing phase.
  const auto& nm = scenario.noise;
  std::mt19937_64 phys_rng(split_seed(session_seed, kStreamPhysiology));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double two_pi = 2.0 * std::numbers::pi;
  const double cardiac_hz = nm.cardiac_min_hz + (nm.cardiac_max_hz - nm.cardiac_min_hz) * unit(phys_rng);
  const double freqs[3] = {nm.mayer_hz, nm.respiration_hz, cardiac_hz};
  const double amps[3] = {nm.mayer_amplitude_um, nm.respiration_amplitude_um, nm.cardiac_amplitude_um};
  Eigen::MatrixXd oscillation(total, 3);
  const double phase_step = nm.phase_jitter_rad_per_sqrt_s * std::sqrt(1.0 / fs);
  for (int c = 0; c < 3; ++c) {
    double phase = two_pi * unit(phys_rng);
    for (long s = 0; s < total; ++s) {
      oscillation(s, c) = std::sin(two_pi * freqs[c] * static_cast<double>(s) / fs + phase);
      phase += phase_step * gauss(phys_rng);
    }
  }

  out.noise_hbo.resize(total, channels);
  for (int ch = 0; ch < channels; ++ch) {
    std::mt19937_64 rng(split_seed(session_seed, kStreamChannel + static_cast<std::uint64_t>(ch)));
    double weight[3];
    for (int c = 0; c < 3; ++c) weight[c] = amps[c] * std::max(0.0, 1.0 + nm.amplitude_jitter * gauss(rng));
    double drift = 0.0;
    for (long s = 0; s < total; ++s) {
      drift += nm.drift_step_um * gauss(rng);
      const double white = nm.white_sigma_um * gauss(rng);
      out.noise_hbo(s, ch) =
          weight[0] * oscillation(s, 0) + weight[1] * oscillation(s, 1) + weight[2] * oscillation(s, 2) + drift + white;
    }
  }

  out.hbo = out.noiseless_hbo + out.noise_hbo;
  out.hbr = -scenario.hbr_ratio * out.hbo;

  const auto od = mbll_forward(out.hbo, out.hbr, table, fs);
  auto& rec = out.recording;
  rec.sample_rate_hz = fs;
  rec.channels = channels;
  rec.reference.resize(2 * channels);
  std::mt19937_64 ref_rng(split_seed(session_seed, kStreamReference));
  for (int c = 0; c < 2 * channels; ++c) {
    rec.reference(c) = scenario.reference_intensity_min +
                       (scenario.reference_intensity_max - scenario.reference_intensity_min) * unit(ref_rng);
  }
  rec.samples.resize(total, 2 * channels);
  for (int c = 0; c < 2 * channels; ++c) {
    for (long s = 0; s < total; ++s) rec.samples(s, c) = rec.reference(c) * std::pow(10.0, -od.values(s, c));
  }
  return out;
}

}  // namespace nirsbci
