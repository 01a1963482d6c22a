#include <random>

#include "doctest.h"
#include "json.hpp"
#include "nirsbci/study.hpp"
#include "oracles.hpp"

using namespace nirsbci;

namespace {

// Features that follow the schedule, with class means `separation` apart.
std::vector<FeatureVector> scheduled_features(const std::vector<BlockPlan>& schedule, int dim, double separation,
                                              std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<FeatureVector> out;
  for (const auto& plan : schedule) {
    int trial = 1;
    for (auto label : plan.order) {
      FeatureVector f;
      f.values.resize(dim);
      for (int j = 0; j < dim; ++j) f.values(j) = g(rng);
      if (label != Label::rest) f.values(index_of(label)) += separation;
      f.label = label;
      f.session = plan.session;
      f.block = plan.block;
      f.trial = trial++;
      out.push_back(f);
    }
  }
  return out;
}

}  // namespace

TEST_SUITE("study") {
  TEST_CASE("schedule shape") {
    const auto s = make_schedule(1);
    REQUIRE(s.size() == 7);
    const std::size_t sizes[] = {36, 24, 24, 24, 24, 24, 24};
    std::size_t total = 0;
    for (std::size_t i = 0; i < 7; ++i) {
      CHECK(s[i].order.size() == sizes[i]);
      total += s[i].order.size();
      CHECK(s[i].mode == (i == 0 ? BlockMode::offline : BlockMode::online));
      CHECK(s[i].session == (i < 3 ? 1 : 2));
      for (auto l : kAllLabels)
        CHECK(std::count(s[i].order.begin(), s[i].order.end(), l) == static_cast<long>(sizes[i] / 3));
    }
    CHECK(total == 180);
    CHECK(s[3].block == 1);
    CHECK(s[6].block == 4);
  }

  TEST_CASE("schedule is deterministic per seed") {
    CHECK(make_schedule(9)[2].order == make_schedule(9)[2].order);
    CHECK(make_schedule(9)[2].order != make_schedule(10)[2].order);
  }

  TEST_CASE("normal chance thresholds") {
    const double sigma = std::sqrt(2.0 / 9.0 / 72.0);
    CHECK(sigma == doctest::Approx(0.05556).epsilon(1e-3));
    const double t05 = chance_threshold(72, 0.05);
    CHECK(t05 == doctest::Approx(1.0 / 3.0 + 1.6448536269514722 * sigma).epsilon(1e-12));
    CHECK(std::abs(t05 - 0.4246) <= 0.0005);
    const double t001 = chance_threshold(72, 0.001);
    CHECK(t001 == doctest::Approx(1.0 / 3.0 + 3.090232306167813 * sigma).epsilon(1e-12));
    CHECK(std::abs(t001 - 0.5048) <= 0.0005);
    CHECK(chance_threshold(72, 0.5) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK_THROWS_AS(chance_threshold(72, 0.0), DomainError);
    CHECK_THROWS_AS(chance_threshold(72, 1.0), DomainError);
    CHECK_THROWS_AS(chance_threshold(72, std::nan("")), DomainError);
    CHECK_THROWS_AS(chance_threshold(0, 0.05), DomainError);
  }

  TEST_CASE("exact chance thresholds match binomial enumeration") {
    for (int n : {10, 24, 72, 144, 500}) {
      for (double a : kSignificanceLevels) {
        const int k = oracle::binomial_exact_k(n, 1.0 / 3.0, a);
        CHECK(chance_threshold(n, a, ThresholdMethod::exact) == doctest::Approx(static_cast<double>(k) / n).epsilon(1e-15));
      }
    }
  }

  TEST_CASE("stars follow the thresholds") {
    CHECK(significance_stars(0.444, 72) == 1);
    CHECK(significance_stars(0.528, 72) == 3);
    CHECK(significance_stars(0.347, 72) == 0);
    CHECK(significance_stars(0.625, 24) == 2);
    CHECK(significance_stars(0.6666, 24) == 3);
    const double exact = chance_threshold(24, 0.05, ThresholdMethod::exact);
    CHECK(significance_stars(exact, 24, ThresholdMethod::exact) >= 1);
  }

  TEST_CASE("threshold method names round trip") {
    CHECK(parse_threshold_method("normal") == ThresholdMethod::normal);
    CHECK(parse_threshold_method(to_string(ThresholdMethod::exact)) == ThresholdMethod::exact);
    CHECK_THROWS_AS(parse_threshold_method("wald"), ConfigError);
  }

  TEST_CASE("offline block trains a model without predicting") {
    const auto schedule = make_schedule(3);
    const auto f = scheduled_features(schedule, 6, 2.0, 3);
    std::vector<FeatureVector> first(f.begin(), f.begin() + 36);
    auto [state, result] = run_block(StudyState{}, schedule[0], first, 1);
    CHECK(result.trials.empty());
    CHECK(!result.accuracy);
    CHECK(state.model.has_value());
    CHECK(state.dataset.size() == 36);
    CHECK(state.model_session == 1);
  }

  TEST_CASE("online block without a model is a protocol error") {
    const auto schedule = make_schedule(3);
    const auto f = scheduled_features(schedule, 6, 2.0, 3);
    std::vector<FeatureVector> second(f.begin() + 36, f.begin() + 60);
    CHECK_THROWS_AS(run_block(StudyState{}, schedule[1], second, 1), ProtocolError);
  }

  TEST_CASE("block features must match the plan") {
    const auto schedule = make_schedule(3);
    auto f = scheduled_features(schedule, 6, 2.0, 3);
    std::vector<FeatureVector> first(f.begin(), f.begin() + 35);
    CHECK_THROWS_AS(run_block(StudyState{}, schedule[0], first, 1), ProtocolError);
    first.assign(f.begin(), f.begin() + 36);
    first[4].label = first[4].label == Label::yes ? Label::no : Label::yes;
    CHECK_THROWS_AS(run_block(StudyState{}, schedule[0], first, 1), ProtocolError);
  }

  TEST_CASE("study bookkeeping on scheduled features") {
    for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
      const auto schedule = make_schedule(seed);
      const auto features = scheduled_features(schedule, 8, 1.2, seed);
      const auto report = run_study_on_features(schedule, features);
      REQUIRE(report.blocks.size() == 7);
      CHECK(report.blocks[2].dataset_size_after == 84);
      CHECK(report.blocks[6].dataset_size_after == 180);
      CHECK(report.online_trials() == 144);
      int total_correct = 0;
      for (const auto& b : report.blocks) {
        if (b.mode == BlockMode::offline) continue;
        int correct = 0;
        for (const auto& t : b.trials) correct += t.truth == t.predicted;
        CHECK(correct == b.correct);
        CHECK(*b.accuracy == static_cast<double>(correct) / 24.0);
        CHECK(b.stars_normal == significance_stars(*b.accuracy, 24, ThresholdMethod::normal));
        CHECK(b.stars_exact == significance_stars(*b.accuracy, 24, ThresholdMethod::exact));
        total_correct += correct;
      }
      CHECK(report.pooled_online_accuracy() == static_cast<double>(total_correct) / 144.0);

      // gamma used by each online block is the one tuned right before it
      for (std::size_t b = 1; b < 7; ++b) CHECK(*report.blocks[b].gamma_used == report.gamma_trace[b - 1].gamma);

      // constraints and monotonicity within each session
      const auto& trace = report.gamma_trace;
      REQUIRE(trace.size() == 7);
      CHECK(trace[2].for_session == 2);
      CHECK(trace[2].gamma >= 0.3);
      CHECK(trace[1].gamma <= trace[0].gamma);
      for (std::size_t i = 3; i < 7; ++i) CHECK(trace[i].gamma <= trace[i - 1].gamma);
      CHECK(report.blocks[2].retrain_constraints.first_training_of_session_2);
      CHECK(!report.blocks[2].retrain_constraints.previous_gamma);
      CHECK(*report.blocks[3].retrain_constraints.previous_gamma == trace[2].gamma);
    }
  }

  TEST_CASE("stored model equals a fresh retrain on the cumulative data") {
    const auto schedule = make_schedule(6);
    const auto features = scheduled_features(schedule, 5, 1.0, 6);
    const auto report = run_study_on_features(schedule, features);
    const auto& st = report.final_state;
    const auto fresh = train_rlda(st.dataset, st.model->gamma());
    REQUIRE(fresh.classes().size() == st.model->classes().size());
    for (std::size_t k = 0; k < fresh.classes().size(); ++k) {
      CHECK(fresh.classes()[k].cholesky == st.model->classes()[k].cholesky);
      CHECK(fresh.classes()[k].mean == st.model->classes()[k].mean);
    }
  }

  TEST_CASE("predictions for a block do not depend on that block's data") {
    const auto schedule = make_schedule(7);
    const auto features = scheduled_features(schedule, 5, 1.0, 7);
    const auto base = run_study_on_features(schedule, features);
    auto perturbed = features;
    std::mt19937_64 rng(1);
    // relabel the last block by permuting its labels, preserving balance
    auto relabeled_schedule = schedule;
    std::shuffle(relabeled_schedule[6].order.begin(), relabeled_schedule[6].order.end(), rng);
    for (std::size_t i = 0; i < 24; ++i) perturbed[156 + i].label = relabeled_schedule[6].order[i];
    const auto other = run_study_on_features(relabeled_schedule, perturbed);
    for (std::size_t t = 0; t < 24; ++t) CHECK(other.blocks[6].trials[t].predicted == base.blocks[6].trials[t].predicted);
    // and earlier blocks are untouched entirely
    for (std::size_t b = 1; b < 6; ++b) CHECK(other.blocks[b].correct == base.blocks[b].correct);
  }

  TEST_CASE("report json and csv carry every online block") {
    const auto schedule = make_schedule(8);
    const auto report = run_study_on_features(schedule, scheduled_features(schedule, 4, 1.5, 8));
    const auto j = nlohmann::json::parse(report.to_json());
    REQUIRE(j["blocks"].size() == 7);
    CHECK(j["blocks"][0]["accuracy"].is_null());
    for (int b = 1; b < 7; ++b) {
      CHECK(j["blocks"][b]["trials"].size() == 24);
      CHECK(j["blocks"][b]["accuracy"].get<double>() == *report.blocks[static_cast<std::size_t>(b)].accuracy);
      CHECK(j["blocks"][b].contains("stars"));
      CHECK(j["blocks"][b].contains("gamma"));
    }
    CHECK(j["gamma_trace"].size() == 7);
    CHECK(j["extinction_table"].contains("dpf"));
    const auto csv = report.trials_csv();
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 145);
  }

  TEST_CASE("schedule recovered from events matches the generator") {
    const auto schedule = make_schedule(11);
    std::vector<TrialEvent> events;
    long onset = 0;
    for (const auto& p : schedule) {
      int t = 1;
      for (auto l : p.order) events.push_back({onset += 330, l, p.session, p.block, t++});
    }
    const auto back = schedule_from_events(events);
    REQUIRE(back.size() == 7);
    for (std::size_t i = 0; i < 7; ++i) {
      CHECK(back[i].order == schedule[i].order);
      CHECK(back[i].mode == schedule[i].mode);
      CHECK(back[i].trials_per_class == schedule[i].trials_per_class);
    }
    events.pop_back();
    CHECK_THROWS_AS(schedule_from_events(events), ProtocolError);
  }

  TEST_CASE("high-snr pipeline beats chance in the first online block and ends above 90%") {
    StudyConfig cfg;
    cfg.scenario = load_scenario("high-snr");
    cfg.seed = 1;
    const auto report = run_study(cfg);
    const auto acc = report.online_accuracies();
    REQUIRE(acc.size() == 6);
    CHECK(acc.front() > chance_threshold(24, 0.05));
    CHECK(acc.back() >= 0.90);
    CHECK(report.source == "synthetic:high-snr");
    CHECK(report.filter_summary.min_stopband_attenuation_db >= 50.0 - 1e-9);
  }
}
