#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <istream>
#include <string>
#include <vector>

#include "nirsbci/common.hpp"
#include "nirsbci/optics.hpp"

namespace nirsbci {

/// Trial timing: baseline, cue, start prompt, then the task window.
struct ProtocolTiming {
  double baseline_s = 14.0;
  double cue_s = 3.0;
  double start_s = 1.0;
  double task_s = 15.0;
  double sample_rate_hz = 10.0;

  void validate() const;
  int baseline_samples() const;
  int cue_samples() const;
  int start_samples() const;
  int task_samples() const;
  int task_offset() const { return baseline_samples() + cue_samples() + start_samples(); }
  int trial_samples() const { return task_offset() + task_samples(); }
};

struct TrialEvent {
  long onset_sample = 0;
  Label label = Label::rest;
  int session = 1;
  int block = 1;
  int trial = 1;
};

struct TrialEpoch {
  Label label = Label::rest;
  Eigen::MatrixXd baseline;  // baseline_samples x channels
  Eigen::MatrixXd task;      // task_samples x channels
  int session = 1;
  int block = 1;
  int trial = 1;
};

struct FeatureVector {
  Eigen::VectorXd values;
  Label label = Label::rest;
  int session = 1;
  int block = 1;
  int trial = 1;
};

/// Samples from the end of the baseline used as the per-trial reference (1.5 s at 10 Hz).
inline constexpr int kBaselineTailSamples = 15;

/// Cuts one epoch per event out of a samples x channels stream. Events must be
/// in onset order, non-overlapping and fully contained.
std::vector<TrialEpoch> segment_trials(const Eigen::MatrixXd& stream, const std::vector<TrialEvent>& events,
                                       const ProtocolTiming& timing);
std::vector<TrialEpoch> segment_trials(const HemoSeries& series, const std::vector<TrialEvent>& events,
                                       const ProtocolTiming& timing);

/// Task window minus the per-channel mean of the last `tail_samples` baseline samples.
Eigen::MatrixXd remove_baseline(const TrialEpoch& epoch, int tail_samples = kBaselineTailSamples);

/// Per-channel mean over the corrected task window.
FeatureVector extract_features(const Eigen::MatrixXd& corrected_task, const TrialEpoch& provenance,
                               int expected_channels = kDefaultChannels, int expected_samples = 150);

/// Design matrix (one row per example) with labels.
class LabeledDataset {
 public:
  LabeledDataset() = default;
  explicit LabeledDataset(int dimension) : x_(0, dimension) {}
  LabeledDataset(Eigen::MatrixXd x, std::vector<Label> y);

  void append(const Eigen::VectorXd& features, Label label);
  void append(const FeatureVector& fv) { append(fv.values, fv.label); }

  int size() const { return static_cast<int>(y_.size()); }
  int dimension() const { return static_cast<int>(x_.cols()); }
  const Eigen::MatrixXd& features() const { return x_; }
  const std::vector<Label>& labels() const { return y_; }
  Eigen::VectorXd example(int i) const { return x_.row(i).transpose(); }
  Label label(int i) const { return y_[static_cast<std::size_t>(i)]; }

  int count(Label label) const;
  std::vector<Label> classes() const;  // present labels, fixed order
  int num_classes() const { return static_cast<int>(classes().size()); }
  std::vector<int> indices(Label label) const;

  LabeledDataset without(int index) const;

 private:
  Eigen::MatrixXd x_;
  std::vector<Label> y_;
};

// Events CSV: onset_sample,label,session,block,trial
std::string events_csv(const std::vector<TrialEvent>& events);
std::vector<TrialEvent> parse_events_csv(std::istream& in);
std::vector<TrialEvent> load_events_csv(const std::filesystem::path& path);

// Feature dump CSV: session,block,trial,label,f01..fNN
std::string features_csv(const std::vector<FeatureVector>& features);
std::vector<FeatureVector> parse_features_csv(std::istream& in);
std::vector<FeatureVector> load_features_csv(const std::filesystem::path& path);

}  // namespace nirsbci
