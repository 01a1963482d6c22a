#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nirsbci/classifier.hpp"
#include "nirsbci/epoching.hpp"
#include "nirsbci/filter.hpp"
#include "nirsbci/schedule.hpp"
#include "nirsbci/synth.hpp"
#include "nirsbci/tuner.hpp"

namespace nirsbci {

enum class ThresholdMethod { normal, exact };

std::string_view to_string(ThresholdMethod method);
ThresholdMethod parse_threshold_method(std::string_view text);
std::string_view to_string(BlockMode mode);

inline constexpr std::array<double, 3> kSignificanceLevels{0.05, 0.01, 0.001};

/// Smallest accuracy that beats chance (1/classes) at level alpha.
/// normal: one-sided normal approximation p0 + z(1 - alpha) * sqrt(p0 (1 - p0) / n).
/// exact: k / n for the smallest k with P(X >= k) <= alpha under Binomial(n, p0).
double chance_threshold(int n_trials, double alpha, ThresholdMethod method = ThresholdMethod::normal,
                        int classes = kNumLabels);

/// 0-3 stars: number of levels in kSignificanceLevels whose threshold the accuracy exceeds.
int significance_stars(double accuracy, int n_trials, ThresholdMethod method = ThresholdMethod::normal);

struct TrialOutcome {
  int trial = 0;
  Label truth = Label::rest;
  Label predicted = Label::rest;
  std::array<double, kNumLabels> scores{};
};

struct BlockResult {
  int session = 1;
  int block = 1;
  BlockMode mode = BlockMode::online;
  std::vector<TrialOutcome> trials;  // empty for offline blocks
  int correct = 0;
  std::optional<double> accuracy;
  std::optional<double> gamma_used;  // model gamma at prediction time
  int stars_normal = 0;
  int stars_exact = 0;
  TuneOutcome retrain;  // tuning run after this block
  GammaConstraints retrain_constraints;
  int dataset_size_after = 0;
};

struct GammaRecord {
  int trained_after_session = 1;
  int trained_after_block = 1;
  int for_session = 1;  // session the model is used in
  double gamma = 0.0;
};

struct StudyState {
  LabeledDataset dataset;
  std::optional<RldaModel> model;
  int model_session = 0;  // session the current model was tuned for
  std::vector<GammaRecord> gamma_history;
};

/// One block of the protocol. Online blocks are first predicted with the
/// pre-block model; then the block joins the cumulative dataset and gamma is
/// re-tuned and the model retrained. `next_session` is the session of the
/// following block (absent after the last block).
std::pair<StudyState, BlockResult> run_block(StudyState state, const BlockPlan& plan,
                                             const std::vector<FeatureVector>& features,
                                             std::optional<int> next_session, double loading = kDefaultLoading);

struct StudyConfig {
  std::string scenario_name = "high-snr";
  Scenario scenario;
  std::uint64_t seed = 1;
  double loading = kDefaultLoading;
  ThresholdMethod method = ThresholdMethod::normal;
  ExtinctionTable table = default_extinction_table();
  FilterSpec filter;
  ProtocolTiming timing;
  int channels = kDefaultChannels;
};

struct StudyReport {
  std::string source;  // "synthetic:<scenario>" or "recorded"
  std::uint64_t seed = 0;
  double loading = kDefaultLoading;
  ThresholdMethod method = ThresholdMethod::normal;
  ExtinctionTable table;
  FilterSpec filter;
  FilterSummary filter_summary;
  std::vector<BlockPlan> schedule;
  std::vector<FeatureVector> features;  // every trial, schedule order
  std::vector<BlockResult> blocks;
  std::vector<GammaRecord> gamma_trace;
  StudyState final_state;

  std::vector<double> online_accuracies() const;
  double pooled_online_accuracy() const;
  int online_trials() const;
  std::string to_json() const;
  std::string trials_csv() const;
};

/// Conversion, filtering, epoching, baseline removal and feature extraction
/// for one continuous recording.
std::vector<FeatureVector> process_recording(const OpticalRecording& recording, const std::vector<TrialEvent>& events,
                                             const ExtinctionTable& table, const FilterRealization& filter,
                                             const ProtocolTiming& timing);

/// Runs every block of `schedule` in order on precomputed features.
StudyReport run_study_on_features(const std::vector<BlockPlan>& schedule, const std::vector<FeatureVector>& features,
                                  double loading = kDefaultLoading,
                                  ThresholdMethod method = ThresholdMethod::normal);

/// Synthetic end-to-end study: generate both sessions, process, run blocks.
StudyReport run_study(const StudyConfig& config);

/// Study on recorded files: one recording per session plus a shared events table.
StudyReport run_study_recorded(const std::vector<OpticalRecording>& sessions, const std::vector<TrialEvent>& events,
                               const StudyConfig& config);

/// Block plans recovered from an events table (first block of session 1 is offline).
std::vector<BlockPlan> schedule_from_events(const std::vector<TrialEvent>& events);

}  // namespace nirsbci
