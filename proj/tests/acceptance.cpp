// Acceptance run: one PASS/FAIL line per criterion. argv[1] is the CLI binary.
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

#include "nirsbci/analysis.hpp"
#include "nirsbci/filter.hpp"
#include "nirsbci/io.hpp"
#include "nirsbci/synth.hpp"
#include "nirsbci/tuner.hpp"
#include "oracles.hpp"

using namespace nirsbci;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(double v, int digits = 4) { return io::format_fixed(v, digits); }

int failures = 0;

void criterion(int id, const std::string& name, double limit_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out = body();
  } catch (const std::exception& e) {
    out = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_time = limit_s <= 0.0 || secs < limit_s;
  const bool pass = out.pass && in_time;
  if (!pass) ++failures;
  std::ostringstream line;
  line << "criterion " << id << ": " << (pass ? "PASS" : "FAIL") << "  " << name << "  [" << out.detail << "; "
       << fmt(secs, 3) << " s";
  if (limit_s > 0.0) line << " < " << fmt(limit_s, 0) << " s" << (in_time ? "" : " EXCEEDED");
  line << "]";
  std::cout << line.str() << std::endl;
}

Outcome table_lines(const std::function<bool(const CheckLine&)>& select) {
  const auto check = check_table1(default_table1_fixture());
  Outcome out;
  int n = 0, bad = 0;
  for (const auto& l : check.lines) {
    if (!l.asserted || !select(l)) continue;
    ++n;
    if (!l.pass) {
      ++bad;
      out.detail += l.name + " expected " + l.expected + " got " + l.actual + "; ";
    }
  }
  out.pass = n > 0 && bad == 0;
  out.detail += std::to_string(n - bad) + "/" + std::to_string(n) + " printed values reproduced";
  return out;
}

bool has(const std::string& s, const std::string& part) { return s.find(part) != std::string::npos; }

ExtinctionTable random_table(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.01, 0.3), dpf(3.0, 8.0), dist(10.0, 50.0);
  ExtinctionTable t;
  do {
    t.epsilon << u(rng), u(rng), u(rng), u(rng);
  } while (std::abs(t.epsilon.determinant()) < 1e-4);
  t.source_distance_mm = dist(rng);
  t.dpf = {dpf(rng), dpf(rng)};
  return t;
}

// Constraint and monotonicity audit over one study's gamma trace.
bool trace_ok(const StudyReport& r, std::string& why) {
  const auto& tr = r.gamma_trace;
  for (std::size_t i = 0; i < tr.size(); ++i) {
    const auto& rec = tr[i];
    const bool session2_first = rec.for_session == 2 && (i == 0 || tr[i - 1].for_session == 1);
    if (session2_first && rec.gamma < 0.3 - 1e-12) {
      why = "session-2 start below 0.3";
      return false;
    }
    if (i > 0 && !session2_first && tr[i - 1].for_session == rec.for_session && rec.gamma > tr[i - 1].gamma) {
      why = "gamma increased within a session";
      return false;
    }
  }
  for (std::size_t b = 0; b < r.blocks.size(); ++b) {
    const auto& c = r.blocks[b].retrain_constraints;
    if (c.previous_gamma && r.blocks[b].retrain.gamma() > *c.previous_gamma + 1e-12) {
      why = "selection exceeded previous gamma";
      return false;
    }
  }
  return true;
}

StudyReport synthetic(const std::string& scenario, std::uint64_t seed) {
  StudyConfig cfg;
  cfg.scenario_name = scenario;
  cfg.scenario = load_scenario(scenario);
  cfg.seed = seed;
  return run_study(cfg);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int shell(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: acceptance <path-to-cli>\n";
    return 2;
  }
  const std::string cli = fs::absolute(argv[1]).string();

  criterion(1, "table arithmetic (means, sample SDs, last-3 averages, +/-0.1)", 1.0, [] {
    return table_lines([](const CheckLine& l) { return !has(l.name, "stars") && !has(l.name, "wilcoxon"); });
  });

  criterion(2, "last-3 significance stars at n = 72 (normal thresholds)", 1.0, [] {
    return table_lines([](const CheckLine& l) { return has(l.name, "last3 stars"); });
  });

  criterion(3, "Wilcoxon S1-B2 vs S2-B4 and exact-vs-brute-force", 1.0, [] {
    const auto check = check_table1(default_table1_fixture());
    const double p = check.first_vs_last.p_value;
    Outcome out;
    out.pass = p >= 0.015 && p <= 0.035;
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> len(5, 12), v(-5, 5);
    int compared = 0, mismatched = 0;
    while (compared < 500) {
      std::vector<double> diffs;
      const int n = len(rng);
      for (int i = 0; i < n; ++i) diffs.push_back(v(rng));
      if (std::count_if(diffs.begin(), diffs.end(), [](double d) { return d != 0.0; }) < 5) continue;
      std::vector<std::pair<double, double>> pairs;
      for (double d : diffs) pairs.emplace_back(d, 0.0);
      mismatched += wilcoxon_signed_rank(pairs).p_value != oracle::brute_force_wilcoxon_p(diffs);
      ++compared;
    }
    out.pass = out.pass && mismatched == 0;
    out.detail = "p = " + fmt(p) + " in [0.015, 0.035]; brute force identical on " +
                 std::to_string(compared - mismatched) + "/" + std::to_string(compared);
    return out;
  });

  criterion(4, "filter DC gain and >= 50 dB on [0.5, 5] Hz", 1.0, [] {
    const FilterSpec spec;
    const auto f = design_lowpass(spec);
    const double dc = f.magnitude_db(0.0);
    double worst = -1e300, worst_hz = 0.0;
    for (int i = 50; i <= 500; ++i) {
      const double m = f.magnitude_db(i / 100.0);
      if (m > worst) {
        worst = m;
        worst_hz = i / 100.0;
      }
    }
    Outcome out;
    out.pass = std::abs(dc) <= 0.01 && -worst >= 50.0 && f.stable();
    out.detail = "DC " + fmt(dc, 6) + " dB; min attenuation " + fmt(-worst, 4) + " dB at " + fmt(worst_hz, 2) +
                 " Hz; droop at 0.1 Hz " + fmt(-f.magnitude_db(0.1), 3) + " dB";
    return out;
  });

  criterion(5, "MBLL forward-then-invert over 1000 random tables", 1.0, [] {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> conc(-10.0, 10.0);
    double worst = 0.0;
    for (int t = 0; t < 1000; ++t) {
      const auto table = random_table(rng);
      Eigen::MatrixXd hbo(4, 2), hbr(4, 2);
      for (int s = 0; s < 4; ++s)
        for (int c = 0; c < 2; ++c) {
          hbo(s, c) = conc(rng);
          hbr(s, c) = conc(rng);
        }
      const auto back = mbll_invert(mbll_forward(hbo, hbr, table), table);
      worst = std::max(worst, (back.hbo - hbo).cwiseAbs().maxCoeff() / hbo.cwiseAbs().maxCoeff());
      worst = std::max(worst, (back.hbr - hbr).cwiseAbs().maxCoeff() / hbr.cwiseAbs().maxCoeff());
    }
    return Outcome{worst < 1e-9, "max relative error " + io::format_double(worst)};
  });

  criterion(6, "gamma = 0 RLDA vs pooled-LDA oracle on 200 datasets", 10.0, [] {
    std::mt19937_64 rng(6);
    long agree = 0, total = 0;
    for (int ds = 0; ds < 200; ++ds) {
      const int d = 1 + static_cast<int>(rng() % 5);
      const int n = 3 * (2 + static_cast<int>(rng() % 19));  // 6..60
      const auto data = oracle::random_dataset(rng, n, d, 3, 1.0);
      const auto model = train_rlda(data, 0.0);
      const oracle::PooledLda lda(data, kDefaultLoading);
      std::normal_distribution<double> g(0.0, 2.0);
      for (int q = 0; q < 50; ++q) {
        Eigen::VectorXd x(d);
        for (int j = 0; j < d; ++j) x(j) = g(rng);
        agree += model.predict(x).label == lda.predict(x);
        ++total;
      }
      for (int i = 0; i < n; ++i) {
        agree += model.predict(data.example(i)).label == lda.predict(data.example(i));
        ++total;
      }
    }
    return Outcome{agree == total, std::to_string(agree) + "/" + std::to_string(total) + " predictions agree"};
  });

  criterion(7, "covariance recombination and first-block singularity", 0.0, [] {
    std::mt19937_64 rng(7);
    double worst = 0.0;
    for (int rep = 0; rep < 200; ++rep) {
      const int d = 1 + static_cast<int>(rng() % 6);
      const auto data = oracle::random_dataset(rng, 3 * (3 + static_cast<int>(rng() % 15)), d, 3, 1.0);
      const auto s = class_statistics(data);
      Eigen::MatrixXd recombined = Eigen::MatrixXd::Zero(d, d);
      for (const auto& c : s.classes) recombined += (c.count - 1) * *c.covariance;
      recombined /= static_cast<double>(s.n - s.k);
      worst = std::max(worst, (recombined - s.pooled).cwiseAbs().maxCoeff() / std::max(1.0, s.pooled.cwiseAbs().maxCoeff()));
    }
    const auto first = oracle::random_dataset(rng, 36, 44, 3, 1.0);
    const auto s = class_statistics(first);
    const auto rank = Eigen::FullPivLU<Eigen::MatrixXd>(s.pooled).rank();
    bool singular_without = false;
    try {
      train_rlda(first, 0.0, 0.0);
    } catch (const NumericalError&) {
      singular_without = true;
    }
    Eigen::MatrixXd loaded = s.pooled;
    loaded.diagonal().array() += kDefaultLoading * s.pooled.diagonal().mean();
    const bool pd_with = Eigen::LLT<Eigen::MatrixXd>(loaded).info() == Eigen::Success;
    bool trains = true;
    try {
      train_rlda(first, 0.0);
    } catch (const Error&) {
      trains = false;
    }
    Outcome out;
    out.pass = worst <= 1e-10 && rank < 44 && singular_without && pd_with && trains;
    out.detail = "max recombination error " + io::format_double(worst) + "; 36x44 pooled rank " +
                 std::to_string(rank) + (singular_without ? ", singular unloaded" : ", NOT singular unloaded") +
                 (pd_with && trains ? ", PD with loading" : ", NOT PD with loading");
    return out;
  });

  criterion(8, "tuner LOOCV vs naive oracle, tie-break, session constraints", 30.0, [] {
    std::mt19937_64 rng(8);
    int tables = 0, bad_tables = 0;
    for (int rep = 0; rep < 40; ++rep) {
      const int d = 1 + static_cast<int>(rng() % 4);
      const int n = 3 * (3 + static_cast<int>(rng() % 4));  // 9..18
      const auto data = oracle::random_dataset(rng, n, d, 3, 0.7);
      for (const auto& e : loocv_table(data, GammaGrid{}, kDefaultLoading)) {
        ++tables;
        bad_tables += e.correct != oracle::naive_loocv_correct(data, e.gamma(), kDefaultLoading);
      }
    }
    int tie_cases = 0, bad_ties = 0;
    for (int rep = 0; rep < 40; ++rep) {
      const auto data = oracle::random_dataset(rng, 24, 3, 3, 0.4);
      const auto out = select_gamma(data, GammaConstraints{});
      int best = 0, largest = -1;
      for (const auto& e : out.table) best = std::max(best, e.correct);
      for (const auto& e : out.table)
        if (e.correct == best) largest = e.step;
      ++tie_cases;
      bad_ties += out.chosen_step != largest;
    }
    int studies = 0, bad_studies = 0;
    std::string why;
    for (const char* sc : {"realistic", "null", "high-snr"}) {
      for (std::uint64_t seed = 101; seed <= 102; ++seed) {
        ++studies;
        if (!trace_ok(synthetic(sc, seed), why)) ++bad_studies;
      }
    }
    Outcome out;
    out.pass = bad_tables == 0 && bad_ties == 0 && bad_studies == 0;
    out.detail = std::to_string(tables - bad_tables) + "/" + std::to_string(tables) + " table cells match; " +
                 std::to_string(tie_cases - bad_ties) + "/" + std::to_string(tie_cases) + " tie-breaks; " +
                 std::to_string(studies - bad_studies) + "/" + std::to_string(studies) + " studies respect constraints" +
                 (why.empty() ? "" : " (" + why + ")");
    return out;
  });

  criterion(9, "synthetic studies: high-snr >= 0.90, null inside 99.9% band, injected channel rank 1", 120.0, [] {
    Outcome out;
    double min_final = 1.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed)
      min_final = std::min(min_final, synthetic("high-snr", seed).online_accuracies().back());
    const bool high_ok = min_final >= 0.90;

    int correct = 0, trials = 0;
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
      const auto r = synthetic("null", seed);
      for (const auto& b : r.blocks) {
        if (!b.accuracy) continue;
        correct += b.correct;
        trials += static_cast<int>(b.trials.size());
      }
    }
    const auto [lo, hi] = oracle::binomial_central_band(trials, 1.0 / 3.0, 0.999);
    const bool null_ok = trials >= 500 && correct >= lo && correct <= hi;

    int rank1 = 0;
    const int channels[] = {5, 17, 38};
    for (int ch : channels) {
      StudyConfig cfg;
      cfg.scenario = load_scenario("null");
      cfg.scenario.name = "inject";
      cfg.scenario.activation.of(Label::yes)(ch - 1) = 0.5;
      cfg.scenario_name = "inject";
      cfg.seed = static_cast<std::uint64_t>(ch);
      const auto r = run_study(cfg);
      rank1 += fisher_scores(r.final_state.dataset).ranking.front() == ch;
    }
    out.pass = high_ok && null_ok && rank1 == 3;
    out.detail = "high-snr min final-block accuracy " + fmt(min_final, 3) + " over seeds 1-5; null " +
                 std::to_string(correct) + "/" + std::to_string(trials) + " in [" + std::to_string(lo) + ", " +
                 std::to_string(hi) + "]; injected channel ranked first " + std::to_string(rank1) + "/3";
    return out;
  });

  criterion(10, "determinism: every subcommand twice gives identical bytes", 0.0, [&cli] {
    const fs::path root = fs::temp_directory_path() / ("nirsbci_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(root);
    fs::create_directories(root);
    const std::string base = "cd '" + root.string() + "' && '" + cli + "' ";
    const std::vector<std::pair<std::string, std::string>> commands = {
        {"synth", "synth --scenario realistic --seed 3 --out {}"},
        {"run-study", "run-study --scenario realistic --seed 3 --out {}"},
        {"run-study-recorded", "run-study --recordings synth1/session1.csv synth1/session2.csv --events synth1/events.csv --out {}"},
        {"tune", "tune --features run-study1/features.csv --session-2-start --out {}"},
        {"analyze", "analyze --features run-study1/features.csv --out {}"},
        {"filter-report", "filter-report --out {}"},
        {"table1", "table1 --out {}"},
    };
    int files = 0, differing = 0;
    std::string problems;
    for (const auto& [tag, args] : commands) {
      for (int rep = 1; rep <= 2; ++rep) {
        std::string a = args;
        a.replace(a.find("{}"), 2, tag + std::to_string(rep));
        if (shell(base + a + " > /dev/null 2>&1") != 0) problems += tag + " failed; ";
      }
      for (const auto& e : fs::directory_iterator(root / (tag + "1"))) {
        ++files;
        const auto other = root / (tag + "2") / e.path().filename();
        if (!fs::exists(other) || slurp(e.path()) != slurp(other)) {
          ++differing;
          problems += tag + "/" + e.path().filename().string() + " differs; ";
        }
      }
    }
    fs::remove_all(root);
    return Outcome{differing == 0 && problems.empty() && files > 0,
                   problems + std::to_string(files - differing) + "/" + std::to_string(files) + " files identical across " +
                       std::to_string(commands.size()) + " commands"};
  });

  std::cout << (failures == 0 ? "acceptance: all criteria passed" : "acceptance: " + std::to_string(failures) + " failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
