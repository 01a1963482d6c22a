#include "nirsbci/study.hpp"

#include <algorithm>
#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include "json.hpp"
#include "nirsbci/io.hpp"

namespace nirsbci {

namespace {

constexpr int kOfflineTrialsPerClass = 12;
constexpr int kOnlineTrialsPerClass = 8;

std::string block_tag(int session, int block) {
  return "session " + std::to_string(session) + " block " + std::to_string(block);
}

nlohmann::ordered_json scores_json(const std::array<double, kNumLabels>& scores) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (auto l : kAllLabels) {
    const double s = scores[static_cast<std::size_t>(index_of(l))];
    if (std::isfinite(s)) j[std::string(to_string(l))] = s;
  }
  return j;
}

std::string stars_text(int n) { return std::string(static_cast<std::size_t>(n), '*'); }

}  // namespace

std::string_view to_string(ThresholdMethod method) { return method == ThresholdMethod::normal ? "normal" : "exact"; }

ThresholdMethod parse_threshold_method(std::string_view text) {
  if (text == "normal") return ThresholdMethod::normal;
  if (text == "exact") return ThresholdMethod::exact;
  throw ConfigError("unknown threshold method '" + std::string(text) + "' (expected normal or exact)");
}

std::string_view to_string(BlockMode mode) { return mode == BlockMode::offline ? "offline" : "online"; }

std::vector<BlockPlan> make_schedule(std::uint64_t seed) {
  struct Shape {
    int session;
    int block;
    BlockMode mode;
    int per_class;
  };
  const Shape shapes[] = {
      {1, 1, BlockMode::offline, kOfflineTrialsPerClass}, {1, 2, BlockMode::online, kOnlineTrialsPerClass},
      {1, 3, BlockMode::online, kOnlineTrialsPerClass},   {2, 1, BlockMode::online, kOnlineTrialsPerClass},
      {2, 2, BlockMode::online, kOnlineTrialsPerClass},   {2, 3, BlockMode::online, kOnlineTrialsPerClass},
      {2, 4, BlockMode::online, kOnlineTrialsPerClass},
  };
  std::vector<BlockPlan> plans;
  for (std::size_t i = 0; i < std::size(shapes); ++i) {
    BlockPlan p;
    p.session = shapes[i].session;
    p.block = shapes[i].block;
    p.mode = shapes[i].mode;
    p.trials_per_class = shapes[i].per_class;
    for (auto l : kAllLabels) p.order.insert(p.order.end(), static_cast<std::size_t>(p.trials_per_class), l);
    std::mt19937_64 rng(split_seed(seed, 500 + i));
    std::shuffle(p.order.begin(), p.order.end(), rng);
    plans.push_back(std::move(p));
  }
  return plans;
}

double chance_threshold(int n_trials, double alpha, ThresholdMethod method, int classes) {
  if (n_trials < 1) throw DomainError("chance threshold needs at least one trial");
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
  if (classes < 2) throw DomainError("chance threshold needs at least two classes");
  const double p0 = 1.0 / classes;
  if (method == ThresholdMethod::normal) {
    const double z = boost::math::quantile(boost::math::normal_distribution<double>(0.0, 1.0), 1.0 - alpha);
    return p0 + z * std::sqrt(p0 * (1.0 - p0) / n_trials);
  }
  const boost::math::binomial_distribution<double> dist(n_trials, p0);
  for (int k = 0; k <= n_trials; ++k) {
    const double tail = k == 0 ? 1.0 : boost::math::cdf(boost::math::complement(dist, k - 1));
    if (tail <= alpha) return static_cast<double>(k) / n_trials;
  }
  // unreachable for alpha > P(X = n); report an impossible accuracy
  return 1.0 + 1.0 / n_trials;
}

int significance_stars(double accuracy, int n_trials, ThresholdMethod method) {
  int stars = 0;
  for (double alpha : kSignificanceLevels) {
    const double thr = chance_threshold(n_trials, alpha, method);
    // exact thresholds are attainable counts, so meeting them is significant
    const bool hit = method == ThresholdMethod::exact ? accuracy >= thr - 1e-12 : accuracy > thr;
    if (hit) ++stars;
  }
  return stars;
}

std::pair<StudyState, BlockResult> run_block(StudyState state, const BlockPlan& plan,
                                             const std::vector<FeatureVector>& features,
                                             std::optional<int> next_session, double loading) {
  const std::string tag = block_tag(plan.session, plan.block);
  if (features.size() != plan.order.size()) {
    throw ProtocolError(tag + ": expected " + std::to_string(plan.order.size()) + " trials, got " +
                        std::to_string(features.size()));
  }
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i].label != plan.order[i]) {
      throw ProtocolError(tag + ": trial " + std::to_string(i + 1) + " label does not match the block plan");
    }
  }
  BlockResult result;
  result.session = plan.session;
  result.block = plan.block;
  result.mode = plan.mode;

  if (plan.mode == BlockMode::online) {
    if (!state.model) throw ProtocolError(tag + ": online block requires a trained model");
    result.gamma_used = state.model->gamma();
    for (const auto& fv : features) {
      const auto pred = state.model->predict(fv.values);
      TrialOutcome t;
      t.trial = fv.trial;
      t.truth = fv.label;
      t.predicted = pred.label;
      t.scores = pred.scores;
      result.correct += (t.predicted == t.truth);
      result.trials.push_back(t);
    }
    const int n = static_cast<int>(result.trials.size());
    result.accuracy = static_cast<double>(result.correct) / n;
    result.stars_normal = significance_stars(*result.accuracy, n, ThresholdMethod::normal);
    result.stars_exact = significance_stars(*result.accuracy, n, ThresholdMethod::exact);
  }

  for (const auto& fv : features) state.dataset.append(fv);
  result.dataset_size_after = state.dataset.size();

  const int target_session = next_session.value_or(plan.session);
  GammaConstraints constraints;
  constraints.session_index = target_session;
  if (state.model && state.model_session == target_session) constraints.previous_gamma = state.model->gamma();
  constraints.first_training_of_session_2 = target_session == 2 && (!state.model || state.model_session == 1);

  try {
    result.retrain = select_gamma(state.dataset, constraints, loading);
    state.model = train_rlda(state.dataset, result.retrain.gamma(), loading);
  } catch (const Error& e) {
    throw NumericalError(tag + ": retraining failed: " + e.what());
  }
  result.retrain_constraints = constraints;
  state.model_session = target_session;
  state.gamma_history.push_back({plan.session, plan.block, target_session, result.retrain.gamma()});
  return {std::move(state), std::move(result)};
}

std::vector<FeatureVector> process_recording(const OpticalRecording& recording, const std::vector<TrialEvent>& events,
                                             const ExtinctionTable& table, const FilterRealization& filter,
                                             const ProtocolTiming& timing) {
  const auto hemo = mbll_invert(optical_density(recording), table);
  const auto filtered = apply_filter(filter, hemo, recording.channels);
  const auto epochs = segment_trials(filtered, events, timing);
  std::vector<FeatureVector> out;
  out.reserve(epochs.size());
  for (const auto& ep : epochs) {
    out.push_back(extract_features(remove_baseline(ep), ep, recording.channels, timing.task_samples()));
  }
  return out;
}

StudyReport run_study_on_features(const std::vector<BlockPlan>& schedule, const std::vector<FeatureVector>& features,
                                  double loading, ThresholdMethod method) {
  StudyReport report;
  report.loading = loading;
  report.method = method;
  report.schedule = schedule;
  report.features = features;
  StudyState state;
  std::size_t cursor = 0;
  for (std::size_t b = 0; b < schedule.size(); ++b) {
    const auto& plan = schedule[b];
    if (cursor + plan.order.size() > features.size()) {
      throw ProtocolError(block_tag(plan.session, plan.block) + ": not enough feature vectors");
    }
    std::vector<FeatureVector> block(features.begin() + static_cast<std::ptrdiff_t>(cursor),
                                     features.begin() + static_cast<std::ptrdiff_t>(cursor + plan.order.size()));
    cursor += plan.order.size();
    std::optional<int> next;
    if (b + 1 < schedule.size()) next = schedule[b + 1].session;
    auto [next_state, result] = run_block(std::move(state), plan, block, next, loading);
    state = std::move(next_state);
    report.blocks.push_back(std::move(result));
  }
  if (cursor != features.size()) throw ProtocolError("feature vectors left over after the final block");
  report.gamma_trace = state.gamma_history;
  report.final_state = std::move(state);
  return report;
}

StudyReport run_study(const StudyConfig& config) {
  config.timing.validate();
  const auto schedule = make_schedule(config.seed);
  const auto filter = design_lowpass(config.filter);
  std::vector<FeatureVector> features;
  for (int session : {1, 2}) {
    auto data = generate_session(session, schedule, config.scenario, config.timing, config.table, config.seed);
    auto fv = process_recording(data.recording, data.events, config.table, filter, config.timing);
    features.insert(features.end(), fv.begin(), fv.end());
  }
  auto report = run_study_on_features(schedule, features, config.loading, config.method);
  report.source = "synthetic:" + config.scenario.name;
  report.seed = config.seed;
  report.table = config.table;
  report.filter = config.filter;
  report.filter_summary = summarize_filter(filter, config.filter);
  return report;
}

std::vector<BlockPlan> schedule_from_events(const std::vector<TrialEvent>& events) {
  std::vector<BlockPlan> plans;
  for (const auto& e : events) {
    if (plans.empty() || plans.back().session != e.session || plans.back().block != e.block) {
      BlockPlan p;
      p.session = e.session;
      p.block = e.block;
      p.mode = plans.empty() ? BlockMode::offline : BlockMode::online;
      plans.push_back(std::move(p));
    }
    plans.back().order.push_back(e.label);
  }
  for (auto& p : plans) {
    int counts[kNumLabels] = {0, 0, 0};
    for (auto l : p.order) ++counts[index_of(l)];
    p.trials_per_class = counts[0];
    if (counts[1] != counts[0] || counts[2] != counts[0]) {
      throw ProtocolError(block_tag(p.session, p.block) + ": class counts are not balanced");
    }
  }
  return plans;
}

StudyReport run_study_recorded(const std::vector<OpticalRecording>& sessions, const std::vector<TrialEvent>& events,
                               const StudyConfig& config) {
  const auto filter = design_lowpass(config.filter);
  std::vector<FeatureVector> features;
  for (std::size_t s = 0; s < sessions.size(); ++s) {
    std::vector<TrialEvent> mine;
    for (const auto& e : events) {
      if (e.session == static_cast<int>(s) + 1) mine.push_back(e);
    }
    auto fv = process_recording(sessions[s], mine, config.table, filter, config.timing);
    features.insert(features.end(), fv.begin(), fv.end());
  }
  auto report = run_study_on_features(schedule_from_events(events), features, config.loading, config.method);
  report.source = "recorded";
  report.seed = config.seed;
  report.table = config.table;
  report.filter = config.filter;
  report.filter_summary = summarize_filter(filter, config.filter);
  return report;
}

std::vector<double> StudyReport::online_accuracies() const {
  std::vector<double> out;
  for (const auto& b : blocks) {
    if (b.accuracy) out.push_back(*b.accuracy);
  }
  return out;
}

int StudyReport::online_trials() const {
  int n = 0;
  for (const auto& b : blocks) n += static_cast<int>(b.trials.size());
  return n;
}

double StudyReport::pooled_online_accuracy() const {
  int correct = 0;
  for (const auto& b : blocks) correct += b.correct;
  const int n = online_trials();
  return n == 0 ? 0.0 : static_cast<double>(correct) / n;
}

std::string StudyReport::to_json() const {
  nlohmann::ordered_json j;
  j["source"] = source;
  j["seed"] = seed;
  j["loading"] = loading;
  j["threshold_method"] = std::string(to_string(method));
  j["extinction_table"] = nlohmann::ordered_json::parse(extinction_table_json(table));
  j["filter"] = {{"order", filter.order},
                 {"stopband_hz", filter.stopband_hz},
                 {"stopband_attenuation_db", filter.stopband_attenuation_db},
                 {"passband_hz", filter.passband_hz},
                 {"sample_rate_hz", filter.sample_rate_hz},
                 {"dc_gain_db", filter_summary.dc_gain_db},
                 {"passband_droop_db", filter_summary.passband_droop_db},
                 {"min_stopband_attenuation_db", filter_summary.min_stopband_attenuation_db}};
  j["blocks"] = nlohmann::ordered_json::array();
  for (const auto& b : blocks) {
    nlohmann::ordered_json jb;
    jb["session"] = b.session;
    jb["block"] = b.block;
    jb["mode"] = std::string(to_string(b.mode));
    const int n = static_cast<int>(b.trials.size());
    if (b.accuracy) {
      jb["accuracy"] = *b.accuracy;
      jb["accuracy_pct"] = io::format_fixed(100.0 * *b.accuracy, 1);
      jb["correct"] = b.correct;
      jb["gamma"] = *b.gamma_used;
      jb["stars"] = stars_text(method == ThresholdMethod::normal ? b.stars_normal : b.stars_exact);
      jb["stars_normal"] = stars_text(b.stars_normal);
      jb["stars_exact"] = stars_text(b.stars_exact);
      nlohmann::ordered_json thr;
      for (double a : kSignificanceLevels) {
        thr[io::format_double(a)] = {{"normal", chance_threshold(n, a, ThresholdMethod::normal)},
                                     {"exact", chance_threshold(n, a, ThresholdMethod::exact)}};
      }
      jb["chance_thresholds"] = std::move(thr);
    } else {
      jb["accuracy"] = nullptr;
      jb["gamma"] = nullptr;
      jb["stars"] = "";
    }
    jb["retrain"] = {{"dataset_size", b.dataset_size_after},
                     {"gamma_min", gamma_of_step(b.retrain.grid.min_step)},
                     {"gamma_max", gamma_of_step(b.retrain.grid.max_step)},
                     {"selected_gamma", b.retrain.gamma()}};
    nlohmann::ordered_json table_json = nlohmann::ordered_json::array();
    for (const auto& e : b.retrain.table) table_json.push_back({{"gamma", e.gamma()}, {"loocv_accuracy", e.accuracy()}});
    jb["retrain"]["loocv"] = std::move(table_json);
    nlohmann::ordered_json trials_json = nlohmann::ordered_json::array();
    for (const auto& t : b.trials) {
      trials_json.push_back({{"trial", t.trial},
                             {"true", std::string(to_string(t.truth))},
                             {"predicted", std::string(to_string(t.predicted))},
                             {"scores", scores_json(t.scores)}});
    }
    jb["trials"] = std::move(trials_json);
    j["blocks"].push_back(std::move(jb));
  }
  j["gamma_trace"] = nlohmann::ordered_json::array();
  for (const auto& g : gamma_trace) {
    j["gamma_trace"].push_back({{"after_session", g.trained_after_session},
                                {"after_block", g.trained_after_block},
                                {"for_session", g.for_session},
                                {"gamma", g.gamma}});
  }
  const auto acc = online_accuracies();
  nlohmann::ordered_json agg;
  agg["online_trials"] = online_trials();
  agg["pooled_online_accuracy"] = pooled_online_accuracy();
  if (!acc.empty()) agg["final_block_accuracy"] = acc.back();
  if (acc.size() >= 3) agg["last3_average"] = (acc[acc.size() - 1] + acc[acc.size() - 2] + acc[acc.size() - 3]) / 3.0;
  j["aggregate"] = std::move(agg);
  return j.dump(2) + "\n";
}

std::string StudyReport::trials_csv() const {
  std::ostringstream out;
  out << "session,block,trial,true,predicted,correct,score_yes,score_no,score_rest,gamma\n";
  for (const auto& b : blocks) {
    for (const auto& t : b.trials) {
      out << b.session << ',' << b.block << ',' << t.trial << ',' << to_string(t.truth) << ','
          << to_string(t.predicted) << ',' << (t.truth == t.predicted ? 1 : 0);
      for (double s : t.scores) out << ',' << (std::isfinite(s) ? io::format_double(s) : std::string());
      out << ',' << io::format_double(*b.gamma_used) << '\n';
    }
  }
  return out.str();
}

}  // namespace nirsbci
