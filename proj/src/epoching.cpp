#include "nirsbci/epoching.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "nirsbci/io.hpp"

namespace nirsbci {

namespace {

int to_samples(double seconds, double rate, const char* what) {
  const double exact = seconds * rate;
  const double rounded = std::round(exact);
  if (std::abs(exact - rounded) > 1e-9) {
    throw ConfigError(std::string(what) + " duration does not map to a whole number of samples");
  }
  return static_cast<int>(rounded);
}

std::string event_name(const TrialEvent& e) {
  return "event (session " + std::to_string(e.session) + ", block " + std::to_string(e.block) + ", trial " +
         std::to_string(e.trial) + ", onset " + std::to_string(e.onset_sample) + ")";
}

}  // namespace

void ProtocolTiming::validate() const {
  if (!(sample_rate_hz > 0.0)) throw ConfigError("sample rate must be positive");
  if (!(baseline_s > 0.0) || !(cue_s > 0.0) || !(start_s > 0.0) || !(task_s > 0.0)) {
    throw ConfigError("all protocol durations must be positive");
  }
  baseline_samples();
  cue_samples();
  start_samples();
  task_samples();
}

int ProtocolTiming::baseline_samples() const { return to_samples(baseline_s, sample_rate_hz, "baseline"); }
int ProtocolTiming::cue_samples() const { return to_samples(cue_s, sample_rate_hz, "cue"); }
int ProtocolTiming::start_samples() const { return to_samples(start_s, sample_rate_hz, "start"); }
int ProtocolTiming::task_samples() const { return to_samples(task_s, sample_rate_hz, "task"); }

std::vector<TrialEpoch> segment_trials(const Eigen::MatrixXd& stream, const std::vector<TrialEvent>& events,
                                       const ProtocolTiming& timing) {
  timing.validate();
  const int trial_len = timing.trial_samples();
  std::vector<TrialEpoch> epochs;
  epochs.reserve(events.size());
  long previous_end = -1;
  for (const auto& e : events) {
    if (e.onset_sample < 0) throw ProtocolError(event_name(e) + " has a negative onset");
    const long end = e.onset_sample + trial_len;
    if (end > stream.rows()) {
      throw ProtocolError(event_name(e) + " is truncated: needs samples up to " + std::to_string(end) +
                          ", stream has " + std::to_string(stream.rows()));
    }
    if (e.onset_sample < previous_end) throw ProtocolError(event_name(e) + " overlaps the previous trial");
    previous_end = end;
    TrialEpoch ep;
    ep.label = e.label;
    ep.session = e.session;
    ep.block = e.block;
    ep.trial = e.trial;
    ep.baseline = stream.middleRows(e.onset_sample, timing.baseline_samples());
    ep.task = stream.middleRows(e.onset_sample + timing.task_offset(), timing.task_samples());
    epochs.push_back(std::move(ep));
  }
  return epochs;
}

std::vector<TrialEpoch> segment_trials(const HemoSeries& series, const std::vector<TrialEvent>& events,
                                       const ProtocolTiming& timing) {
  return segment_trials(series.hbo, events, timing);
}

Eigen::MatrixXd remove_baseline(const TrialEpoch& epoch, int tail_samples) {
  if (tail_samples < 1) throw ConfigError("baseline tail must contain at least one sample");
  if (epoch.baseline.rows() < tail_samples) {
    throw ShapeError("baseline has " + std::to_string(epoch.baseline.rows()) + " samples, need at least " +
                     std::to_string(tail_samples));
  }
  if (epoch.baseline.cols() != epoch.task.cols()) throw ShapeError("baseline and task channel counts differ");
  const Eigen::RowVectorXd reference = epoch.baseline.bottomRows(tail_samples).colwise().mean();
  return epoch.task.rowwise() - reference;
}

FeatureVector extract_features(const Eigen::MatrixXd& corrected_task, const TrialEpoch& provenance,
                               int expected_channels, int expected_samples) {
  if (corrected_task.cols() != expected_channels) {
    throw ShapeError("task window has " + std::to_string(corrected_task.cols()) + " channels, expected " +
                     std::to_string(expected_channels));
  }
  if (corrected_task.rows() != expected_samples) {
    throw ShapeError("task window has " + std::to_string(corrected_task.rows()) + " samples, expected " +
                     std::to_string(expected_samples));
  }
  FeatureVector fv;
  fv.values = corrected_task.colwise().mean().transpose();
  fv.label = provenance.label;
  fv.session = provenance.session;
  fv.block = provenance.block;
  fv.trial = provenance.trial;
  if (!fv.values.allFinite()) throw DomainError("non-finite feature in trial " + std::to_string(fv.trial));
  return fv;
}

LabeledDataset::LabeledDataset(Eigen::MatrixXd x, std::vector<Label> y) : x_(std::move(x)), y_(std::move(y)) {
  if (static_cast<std::size_t>(x_.rows()) != y_.size()) throw ShapeError("feature rows and label count differ");
}

void LabeledDataset::append(const Eigen::VectorXd& features, Label label) {
  if (x_.cols() == 0 && y_.empty()) x_.resize(0, features.size());
  if (features.size() != x_.cols()) {
    throw ShapeError("feature vector has dimension " + std::to_string(features.size()) + ", dataset has " +
                     std::to_string(x_.cols()));
  }
  x_.conservativeResize(x_.rows() + 1, Eigen::NoChange);
  x_.row(x_.rows() - 1) = features.transpose();
  y_.push_back(label);
}

int LabeledDataset::count(Label label) const {
  int n = 0;
  for (auto l : y_) n += (l == label);
  return n;
}

std::vector<Label> LabeledDataset::classes() const {
  std::vector<Label> out;
  for (auto l : kAllLabels) {
    if (count(l) > 0) out.push_back(l);
  }
  return out;
}

std::vector<int> LabeledDataset::indices(Label label) const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i) {
    if (y_[static_cast<std::size_t>(i)] == label) out.push_back(i);
  }
  return out;
}

LabeledDataset LabeledDataset::without(int index) const {
  if (index < 0 || index >= size()) throw DomainError("example index out of range");
  Eigen::MatrixXd x(x_.rows() - 1, x_.cols());
  x.topRows(index) = x_.topRows(index);
  x.bottomRows(x_.rows() - 1 - index) = x_.bottomRows(x_.rows() - 1 - index);
  std::vector<Label> y = y_;
  y.erase(y.begin() + index);
  return LabeledDataset(std::move(x), std::move(y));
}

std::string events_csv(const std::vector<TrialEvent>& events) {
  std::ostringstream out;
  out << "onset_sample,label,session,block,trial\n";
  for (const auto& e : events) {
    out << e.onset_sample << ',' << to_string(e.label) << ',' << e.session << ',' << e.block << ',' << e.trial << '\n';
  }
  return out.str();
}

std::vector<TrialEvent> parse_events_csv(std::istream& in) {
  auto table = io::read_csv(in);
  const int c_onset = table.column("onset_sample");
  const int c_label = table.column("label");
  const int c_session = table.column("session");
  const int c_block = table.column("block");
  const int c_trial = table.column("trial");
  if (c_onset < 0 || c_label < 0 || c_session < 0 || c_block < 0 || c_trial < 0) {
    throw ShapeError("events csv needs columns onset_sample,label,session,block,trial");
  }
  std::vector<TrialEvent> events;
  for (const auto& row : table.rows) {
    TrialEvent e;
    e.onset_sample = static_cast<long>(io::parse_int(row[static_cast<std::size_t>(c_onset)], "onset_sample"));
    e.label = parse_label(row[static_cast<std::size_t>(c_label)]);
    e.session = static_cast<int>(io::parse_int(row[static_cast<std::size_t>(c_session)], "session"));
    e.block = static_cast<int>(io::parse_int(row[static_cast<std::size_t>(c_block)], "block"));
    e.trial = static_cast<int>(io::parse_int(row[static_cast<std::size_t>(c_trial)], "trial"));
    events.push_back(e);
  }
  return events;
}

std::vector<TrialEvent> load_events_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open events file " + path.string());
  return parse_events_csv(in);
}

std::string features_csv(const std::vector<FeatureVector>& features) {
  std::ostringstream out;
  out << "session,block,trial,label";
  const Eigen::Index dim = features.empty() ? kDefaultChannels : features.front().values.size();
  for (Eigen::Index j = 0; j < dim; ++j) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), ",f%02d", static_cast<int>(j + 1));
    out << buf;
  }
  out << '\n';
  for (const auto& fv : features) {
    out << fv.session << ',' << fv.block << ',' << fv.trial << ',' << to_string(fv.label);
    for (Eigen::Index j = 0; j < fv.values.size(); ++j) out << ',' << io::format_double(fv.values(j));
    out << '\n';
  }
  return out.str();
}

std::vector<FeatureVector> parse_features_csv(std::istream& in) {
  auto table = io::read_csv(in);
  if (table.header.size() < 5 || table.header[0] != "session" || table.header[1] != "block" ||
      table.header[2] != "trial" || table.header[3] != "label") {
    throw ShapeError("feature csv needs columns session,block,trial,label,f01...");
  }
  const auto dim = static_cast<Eigen::Index>(table.header.size() - 4);
  std::vector<FeatureVector> out;
  for (const auto& row : table.rows) {
    FeatureVector fv;
    fv.session = static_cast<int>(io::parse_int(row[0], "session"));
    fv.block = static_cast<int>(io::parse_int(row[1], "block"));
    fv.trial = static_cast<int>(io::parse_int(row[2], "trial"));
    fv.label = parse_label(row[3]);
    fv.values.resize(dim);
    for (Eigen::Index j = 0; j < dim; ++j) fv.values(j) = io::parse_double(row[static_cast<std::size_t>(4 + j)], "feature");
    out.push_back(std::move(fv));
  }
  return out;
}

std::vector<FeatureVector> load_features_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open feature file " + path.string());
  return parse_features_csv(in);
}

}  // namespace nirsbci
