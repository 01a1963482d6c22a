// nirsbci: command-line front end for the fNIRS imagined-speech pipeline.
//
//   nirsbci synth         --scenario high-snr --seed 7 --out run/
//   nirsbci run-study     --scenario high-snr --seed 7 --out run/
//   nirsbci tune          --features run/features.csv --session 1 --out run/
//   nirsbci analyze       --features run/features.csv --out run/
//   nirsbci filter-report --out run/
//   nirsbci table1
//
// NIRSBCI_LOG=quiet|info|debug controls stderr chatter (default info).

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "nirsbci/analysis.hpp"
#include "nirsbci/io.hpp"
#include "nirsbci/layout.hpp"
#include "nirsbci/optics.hpp"
#include "nirsbci/study.hpp"
#include "nirsbci/synth.hpp"
#include "nirsbci/tuner.hpp"

namespace fs = std::filesystem;
using namespace nirsbci;

namespace {

enum class LogLevel { quiet = 0, info = 1, debug = 2 };

LogLevel log_level() {
  const char* env = std::getenv("NIRSBCI_LOG");
  if (!env) return LogLevel::info;
  const std::string v(env);
  if (v == "quiet" || v == "0") return LogLevel::quiet;
  if (v == "debug" || v == "2") return LogLevel::debug;
  return LogLevel::info;
}

void log(LogLevel level, const std::string& msg) {
  if (static_cast<int>(level) <= static_cast<int>(log_level())) std::cerr << "nirsbci: " << msg << '\n';
}

// Everything a subcommand may need. Filled from --config first, then flags.
struct RunConfig {
  std::string scenario = "high-snr";
  std::uint64_t seed = 1;
  bool seed_set = false;
  double loading = kDefaultLoading;
  ThresholdMethod method = ThresholdMethod::normal;
  std::string extinction_table;  // empty = bundled default
  std::string layout;            // empty = bundled default
  std::string out = "nirsbci_out";
  std::vector<std::string> recordings;
  std::string events;
  std::string features;
  std::string fixture;
  FilterSpec filter;
};

std::string resolve(const fs::path& base, const std::string& p) {
  if (p.empty() || fs::path(p).is_absolute()) return p;
  return (base / p).lexically_normal().string();
}

void apply_config_file(const std::string& path, RunConfig& cfg) {
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed config " + path + ": " + e.what());
  }
  const fs::path base = fs::path(path).parent_path();
  try {
    if (j.contains("scenario")) {
      auto s = j["scenario"].get<std::string>();
      cfg.scenario = fs::path(s).extension() == ".json" ? resolve(base, s) : s;
    }
    if (j.contains("seed")) {
      cfg.seed = j["seed"].get<std::uint64_t>();
      cfg.seed_set = true;
    }
    cfg.loading = j.value("loading", cfg.loading);
    if (j.contains("threshold_method")) cfg.method = parse_threshold_method(j["threshold_method"].get<std::string>());
    if (j.contains("extinction_table")) cfg.extinction_table = resolve(base, j["extinction_table"].get<std::string>());
    if (j.contains("layout")) cfg.layout = resolve(base, j["layout"].get<std::string>());
    if (j.contains("out")) cfg.out = resolve(base, j["out"].get<std::string>());
    if (j.contains("recordings")) {
      cfg.recordings.clear();
      for (const auto& r : j["recordings"]) cfg.recordings.push_back(resolve(base, r.get<std::string>()));
    }
    if (j.contains("events")) cfg.events = resolve(base, j["events"].get<std::string>());
    if (j.contains("features")) cfg.features = resolve(base, j["features"].get<std::string>());
    if (j.contains("fixture")) cfg.fixture = resolve(base, j["fixture"].get<std::string>());
    if (j.contains("filter")) {
      const auto& f = j["filter"];
      cfg.filter.order = f.value("order", cfg.filter.order);
      cfg.filter.stopband_hz = f.value("stopband_hz", cfg.filter.stopband_hz);
      cfg.filter.stopband_attenuation_db = f.value("stopband_attenuation_db", cfg.filter.stopband_attenuation_db);
      cfg.filter.passband_hz = f.value("passband_hz", cfg.filter.passband_hz);
      cfg.filter.passband_ripple_db = f.value("passband_ripple_db", cfg.filter.passband_ripple_db);
      cfg.filter.sample_rate_hz = f.value("sample_rate_hz", cfg.filter.sample_rate_hz);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bad value in config " + path + ": " + e.what());
  }
}

ExtinctionTable extinction_of(const RunConfig& cfg) {
  return cfg.extinction_table.empty() ? default_extinction_table() : load_extinction_table(cfg.extinction_table);
}

ChannelLayout layout_of(const RunConfig& cfg) {
  return cfg.layout.empty() ? default_layout() : load_layout(cfg.layout);
}

void write_output(const RunConfig& cfg, const std::string& name, const std::string& contents) {
  fs::create_directories(cfg.out);
  const fs::path p = fs::path(cfg.out) / name;
  io::write_file_atomic(p, contents);
  log(LogLevel::debug, "wrote " + p.string());
}

StudyConfig study_config(const RunConfig& cfg) {
  StudyConfig sc;
  sc.scenario = load_scenario(cfg.scenario);
  sc.scenario_name = sc.scenario.name;
  sc.seed = cfg.seed;
  sc.loading = cfg.loading;
  sc.method = cfg.method;
  sc.table = extinction_of(cfg);
  sc.filter = cfg.filter;
  return sc;
}

std::vector<FeatureVector> load_features(const std::string& path) {
  if (path.empty()) throw ConfigError("--features is required");
  return load_features_csv(path);
}

std::vector<BlockPlan> schedule_of(const std::vector<FeatureVector>& features) {
  std::vector<TrialEvent> events;
  for (const auto& f : features) events.push_back({0, f.label, f.session, f.block, f.trial});
  return schedule_from_events(events);
}

// -- subcommands ------------------------------------------------------------

int cmd_synth(const RunConfig& cfg) {
  if (!cfg.seed_set) throw ConfigError("synthetic runs need --seed");
  const auto sc = study_config(cfg);
  const auto schedule = make_schedule(cfg.seed);
  std::vector<TrialEvent> events;
  for (int session : {1, 2}) {
    auto data = generate_session(session, schedule, sc.scenario, sc.timing, sc.table, cfg.seed);
    write_output(cfg, "session" + std::to_string(session) + ".csv", recording_csv(data.recording));
    write_output(cfg, "truth_session" + std::to_string(session) + ".json", data.truth.to_json());
    events.insert(events.end(), data.events.begin(), data.events.end());
  }
  write_output(cfg, "events.csv", events_csv(events));
  log(LogLevel::info, "synthesized " + std::to_string(events.size()) + " trials of scenario '" + sc.scenario.name +
                          "' into " + cfg.out);
  return 0;
}

int cmd_run_study(const RunConfig& cfg) {
  StudyReport report;
  if (!cfg.recordings.empty()) {
    if (cfg.recordings.size() != 2) throw ConfigError("recorded studies need exactly two session recordings");
    if (cfg.events.empty()) throw ConfigError("recorded studies need --events");
    std::vector<OpticalRecording> sessions;
    for (const auto& r : cfg.recordings) sessions.push_back(load_recording_csv(r));
    StudyConfig sc;
    sc.seed = cfg.seed;
    sc.loading = cfg.loading;
    sc.method = cfg.method;
    sc.table = extinction_of(cfg);
    sc.filter = cfg.filter;
    report = run_study_recorded(sessions, load_events_csv(cfg.events), sc);
  } else {
    if (!cfg.seed_set) throw ConfigError("synthetic runs need --seed");
    report = run_study(study_config(cfg));
  }
  write_output(cfg, "report.json", report.to_json());
  write_output(cfg, "trials.csv", report.trials_csv());
  write_output(cfg, "features.csv", features_csv(report.features));
  std::ostringstream msg;
  msg << report.source << " seed " << report.seed << ": online accuracies";
  for (double a : report.online_accuracies()) msg << ' ' << io::format_fixed(100.0 * a, 1);
  log(LogLevel::info, msg.str());
  return 0;
}

int cmd_tune(const RunConfig& cfg, int session, std::optional<double> previous_gamma, bool session2_start) {
  const auto features = load_features(cfg.features);
  LabeledDataset data;
  for (const auto& f : features) data.append(f);
  GammaConstraints c;
  c.session_index = session2_start ? 2 : session;
  c.first_training_of_session_2 = session2_start;
  c.previous_gamma = previous_gamma;
  if (session2_start && previous_gamma) throw ConfigError("--previous-gamma does not apply at session 2 start");
  const auto outcome = select_gamma(data, c, cfg.loading);
  write_output(cfg, "tune.csv", tune_csv(outcome));
  std::cout << "gamma " << io::format_fixed(outcome.gamma(), 2) << '\n';
  return 0;
}

int cmd_analyze(const RunConfig& cfg) {
  std::vector<FeatureVector> features;
  std::optional<StudyReport> report;
  if (!cfg.features.empty()) {
    features = load_features(cfg.features);
    const auto schedule = schedule_of(features);
    report = run_study_on_features(schedule, features, cfg.loading, cfg.method);
  } else {
    if (!cfg.seed_set) throw ConfigError("analyze needs --features or a synthetic --seed");
    report = run_study(study_config(cfg));
    features = report->features;
  }
  LabeledDataset data;
  for (const auto& f : features) data.append(f);
  const auto layout = layout_of(cfg);
  const auto map = fisher_scores(data);
  write_output(cfg, "channel_map.csv", channel_map_csv(map, layout));

  const auto paired = regularization_comparison(*report);
  std::ostringstream csv;
  csv << "session,block,gamma,tuned_accuracy,unregularized_accuracy\n";
  std::vector<std::pair<double, double>> pairs;
  for (const auto& p : paired) {
    csv << p.session << ',' << p.block << ',' << io::format_double(p.gamma) << ',' << io::format_double(p.tuned)
        << ',' << io::format_double(p.unregularized) << '\n';
    pairs.emplace_back(p.tuned, p.unregularized);
  }
  write_output(cfg, "regularization.csv", csv.str());

  nlohmann::ordered_json j;
  j["trials"] = data.size();
  j["top_channels"] = nlohmann::ordered_json::array();
  for (std::size_t r = 0; r < std::min<std::size_t>(5, map.ranking.size()); ++r) {
    const int id = map.ranking[r];
    const auto& s = map.channel(id);
    j["top_channels"].push_back({{"channel", id},
                                 {"ten20_label", layout.ten20_label(id)},
                                 {"fisher_score", s.infinite ? nlohmann::ordered_json("inf") : nlohmann::ordered_json(s.score)}});
  }
  j["regularization"] = nlohmann::ordered_json::array();
  for (const auto& p : paired) {
    j["regularization"].push_back({{"session", p.session},
                                   {"block", p.block},
                                   {"gamma", p.gamma},
                                   {"tuned", p.tuned},
                                   {"unregularized", p.unregularized}});
  }
  try {
    const auto w = wilcoxon_signed_rank(pairs);
    j["regularization_wilcoxon"] = {{"n", w.n},
                                    {"zeros_dropped", w.zeros_dropped},
                                    {"w_plus", w.w_plus},
                                    {"w_minus", w.w_minus},
                                    {"p_value", w.p_value}};
  } catch (const DomainError& e) {
    j["regularization_wilcoxon"] = {{"skipped", e.what()}};
  }
  write_output(cfg, "analysis.json", j.dump(2) + "\n");
  log(LogLevel::info, "best channel " + std::to_string(map.ranking.front()) + " of " +
                          std::to_string(map.channels.size()));
  return 0;
}

int cmd_filter_report(const RunConfig& cfg) {
  const auto filter = design_lowpass(cfg.filter);
  const auto summary = summarize_filter(filter, cfg.filter);
  std::ostringstream csv;
  csv << "frequency_hz,magnitude_db,phase_deg,magnitude_db_display\n";
  const double nyquist = cfg.filter.sample_rate_hz / 2.0;
  const int steps = static_cast<int>(std::lround(nyquist / 0.01));
  for (int i = 0; i <= steps; ++i) {
    const double f = i * 0.01;
    const double mag = filter.magnitude_db(f);
    csv << io::format_fixed(f, 2) << ',' << io::format_double(mag) << ',' << io::format_double(filter.phase_deg(f))
        << ',' << io::format_fixed(mag, 2) << '\n';
  }
  write_output(cfg, "filter_response.csv", csv.str());

  nlohmann::ordered_json j;
  j["order"] = cfg.filter.order;
  j["stopband_hz"] = cfg.filter.stopband_hz;
  j["stopband_attenuation_db"] = cfg.filter.stopband_attenuation_db;
  j["sample_rate_hz"] = cfg.filter.sample_rate_hz;
  j["b"] = filter.b;
  j["a"] = filter.a;
  j["stable"] = filter.stable();
  j["dc_gain_db"] = summary.dc_gain_db;
  j["passband_hz"] = cfg.filter.passband_hz;
  j["passband_droop_db"] = summary.passband_droop_db;
  j["min_stopband_attenuation_db"] = summary.min_stopband_attenuation_db;
  j["worst_stopband_frequency_hz"] = summary.worst_stopband_frequency_hz;
  write_output(cfg, "filter.json", j.dump(2) + "\n");

  std::cout << "dc gain " << io::format_fixed(summary.dc_gain_db, 6) << " dB\n"
            << "droop at " << io::format_double(cfg.filter.passband_hz) << " Hz "
            << io::format_fixed(summary.passband_droop_db, 3) << " dB\n"
            << "min stopband attenuation " << io::format_fixed(summary.min_stopband_attenuation_db, 3) << " dB at "
            << io::format_fixed(summary.worst_stopband_frequency_hz, 2) << " Hz\n";
  return 0;
}

int cmd_table1(const RunConfig& cfg, bool write) {
  const auto fixture = cfg.fixture.empty() ? default_table1_fixture() : load_table1_fixture(cfg.fixture);
  const auto check = check_table1(fixture);
  const auto text = check.to_text();
  std::cout << text;
  if (write) {
    write_output(cfg, "table1_check.txt", text);
    write_output(cfg, "table1_check.json", check.to_json());
  }
  return check.all_pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fNIRS imagined-speech BCI pipeline"};
  app.require_subcommand(1);

  RunConfig cfg;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> scenario, out, method, features, table_path, layout_path, fixture, events;
  std::optional<double> loading;
  std::vector<std::string> recordings;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--out", out, "output directory");
  };
  auto synthetic = [&](CLI::App* sub) {
    sub->add_option("--seed", seed, "RNG seed");
    sub->add_option("--scenario", scenario, "scenario name or .json path");
    sub->add_option("--extinction-table", table_path, "extinction/DPF JSON");
  };
  auto study_flags = [&](CLI::App* sub) {
    sub->add_option("--threshold-method", method, "chance threshold method")
        ->check(CLI::IsMember({"normal", "exact"}));
    sub->add_option("--loading", loading, "diagonal loading constant")->check(CLI::PositiveNumber);
  };

  auto* synth = app.add_subcommand("synth", "generate a synthetic two-session dataset");
  common(synth);
  synthetic(synth);

  auto* run = app.add_subcommand("run-study", "simulate the full seven-block protocol");
  common(run);
  synthetic(run);
  study_flags(run);
  run->add_option("--recordings", recordings, "session 1 and session 2 recording CSVs")->expected(2);
  run->add_option("--events", events, "events CSV for recorded sessions");

  int session = 1;
  std::optional<double> previous_gamma;
  bool session2_start = false;
  auto* tune = app.add_subcommand("tune", "LOOCV gamma selection on a feature table");
  common(tune);
  tune->add_option("--features", features, "feature CSV")->check(CLI::ExistingFile);
  tune->add_option("--session", session, "session the model is tuned for")->check(CLI::Range(1, 2));
  tune->add_option("--previous-gamma", previous_gamma, "upper bound from the same session")->check(CLI::Range(0.0, 1.0));
  tune->add_flag("--session-2-start", session2_start, "first training for session 2 (gamma >= 0.3)");
  tune->add_option("--loading", loading, "diagonal loading constant")->check(CLI::PositiveNumber);

  auto* analyze = app.add_subcommand("analyze", "Fisher channel map and regularization retrospective");
  common(analyze);
  synthetic(analyze);
  study_flags(analyze);
  analyze->add_option("--features", features, "feature CSV")->check(CLI::ExistingFile);
  analyze->add_option("--layout", layout_path, "channel layout CSV")->check(CLI::ExistingFile);

  auto* filt = app.add_subcommand("filter-report", "design the low-pass filter and tabulate its response");
  common(filt);

  auto* t1 = app.add_subcommand("table1", "recompute the published accuracy table aggregates");
  common(t1);
  t1->add_option("--fixture", fixture, "table CSV")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (!config_path.empty()) apply_config_file(config_path, cfg);
    if (seed) {
      cfg.seed = *seed;
      cfg.seed_set = true;
    }
    if (scenario) cfg.scenario = *scenario;
    if (out) cfg.out = *out;
    if (method) cfg.method = parse_threshold_method(*method);
    if (loading) cfg.loading = *loading;
    if (features) cfg.features = *features;
    if (table_path) cfg.extinction_table = *table_path;
    if (layout_path) cfg.layout = *layout_path;
    if (fixture) cfg.fixture = *fixture;
    if (events) cfg.events = *events;
    if (!recordings.empty()) cfg.recordings = recordings;
    cfg.filter.validate();

    if (synth->parsed()) return cmd_synth(cfg);
    if (run->parsed()) return cmd_run_study(cfg);
    if (tune->parsed()) return cmd_tune(cfg, session, previous_gamma, session2_start);
    if (analyze->parsed()) return cmd_analyze(cfg);
    if (filt->parsed()) return cmd_filter_report(cfg);
    if (t1->parsed()) return cmd_table1(cfg, out.has_value() || !config_path.empty());
  } catch (const Error& e) {
    std::cerr << "nirsbci: error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "nirsbci: error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
