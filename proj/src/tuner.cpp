#include "nirsbci/tuner.hpp"

#include <cmath>
#include <sstream>

#include "nirsbci/io.hpp"

namespace nirsbci {

int step_of_gamma(double gamma) {
  const double scaled = gamma * kGammaSteps;
  const double rounded = std::round(scaled);
  if (!(gamma >= 0.0 && gamma <= 1.0) || std::abs(scaled - rounded) > 1e-9) {
    throw DomainError("gamma " + io::format_double(gamma) + " is not on the 0.05 grid");
  }
  return static_cast<int>(rounded);
}

std::vector<int> GammaGrid::steps() const {
  std::vector<int> out;
  for (int s = min_step; s <= max_step; ++s) out.push_back(s);
  return out;
}

GammaGrid constrained_grid(const GammaConstraints& constraints) {
  GammaGrid grid;
  if (constraints.previous_gamma) grid.max_step = step_of_gamma(*constraints.previous_gamma);
  if (constraints.first_training_of_session_2) grid.min_step = kSessionTwoMinStep;
  return grid;
}

namespace {

void check_loocv_preconditions(const LabeledDataset& data) {
  const int k = data.num_classes();
  if (data.size() < k + 2) {
    throw DomainError("leave-one-out needs N >= K + 2 (N = " + std::to_string(data.size()) +
                      ", K = " + std::to_string(k) + ")");
  }
}

ClassStats fold_statistics(const LabeledDataset& data, int fold) {
  auto train = data.without(fold);
  if (train.num_classes() != data.num_classes()) {
    throw DomainError("fold " + std::to_string(fold) + " leaves class '" + std::string(to_string(data.label(fold))) +
                      "' empty");
  }
  try {
    return class_statistics(train);
  } catch (const Error& e) {
    throw DomainError("fold " + std::to_string(fold) + " is untrainable: " + e.what());
  }
}

}  // namespace

double loocv_accuracy(const LabeledDataset& data, double gamma, double loading) {
  check_loocv_preconditions(data);
  int correct = 0;
  for (int i = 0; i < data.size(); ++i) {
    const auto stats = fold_statistics(data, i);
    RldaModel model;
    try {
      model = train_rlda(stats, gamma, loading);
    } catch (const Error& e) {
      throw DomainError("fold " + std::to_string(i) + " is untrainable: " + e.what());
    }
    correct += (model.predict(data.example(i)).label == data.label(i));
  }
  return static_cast<double>(correct) / data.size();
}

std::vector<TuneEntry> loocv_table(const LabeledDataset& data, const GammaGrid& grid, double loading) {
  if (grid.empty()) throw DomainError("gamma grid is empty");
  check_loocv_preconditions(data);
  const auto steps = grid.steps();
  std::vector<TuneEntry> table(steps.size());
  for (std::size_t g = 0; g < steps.size(); ++g) {
    table[g].step = steps[g];
    table[g].total = data.size();
  }
  for (int i = 0; i < data.size(); ++i) {
    const auto stats = fold_statistics(data, i);
    const Eigen::VectorXd held_out = data.example(i);
    for (std::size_t g = 0; g < steps.size(); ++g) {
      RldaModel model;
      try {
        model = train_rlda(stats, gamma_of_step(steps[g]), loading);
      } catch (const Error& e) {
        throw DomainError("fold " + std::to_string(i) + " is untrainable at gamma " +
                          io::format_double(gamma_of_step(steps[g])) + ": " + e.what());
      }
      table[g].correct += (model.predict(held_out).label == data.label(i));
    }
  }
  return table;
}

TuneOutcome select_gamma(const LabeledDataset& data, const GammaConstraints& constraints, double loading) {
  TuneOutcome out;
  out.grid = constrained_grid(constraints);
  if (out.grid.empty()) throw DomainError("gamma constraints leave an empty grid");
  out.table = loocv_table(data, out.grid, loading);
  int best = -1;
  for (const auto& e : out.table) {
    // ascending scan with >= keeps the largest gamma among ties
    if (e.correct >= best) {
      best = e.correct;
      out.chosen_step = e.step;
    }
  }
  return out;
}

std::string tune_csv(const TuneOutcome& outcome) {
  std::ostringstream out;
  out << "gamma,loocv_accuracy,selected\n";
  for (const auto& e : outcome.table) {
    out << io::format_fixed(e.gamma(), 2) << ',' << io::format_double(e.accuracy()) << ','
        << (e.step == outcome.chosen_step ? 1 : 0) << '\n';
  }
  return out.str();
}

}  // namespace nirsbci
