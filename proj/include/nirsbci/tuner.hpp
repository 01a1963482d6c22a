#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nirsbci/classifier.hpp"

namespace nirsbci {

/// Gamma values are integer twentieths: step s means gamma = s / 20.
inline constexpr int kGammaSteps = 20;
inline constexpr int kSessionTwoMinStep = 6;  // gamma >= 0.30

inline double gamma_of_step(int step) { return static_cast<double>(step) / kGammaSteps; }
/// Throws DomainError unless gamma sits on the 0.05 grid.
int step_of_gamma(double gamma);

struct GammaGrid {
  int min_step = 0;
  int max_step = kGammaSteps;

  std::vector<int> steps() const;
  bool empty() const { return min_step > max_step; }
};

struct GammaConstraints {
  int session_index = 1;
  bool first_training_of_session_2 = false;
  // Upper bound; only set when the previous gamma belongs to the same session.
  std::optional<double> previous_gamma;
};

GammaGrid constrained_grid(const GammaConstraints& constraints);

struct TuneEntry {
  int step = 0;
  int correct = 0;
  int total = 0;
  double gamma() const { return gamma_of_step(step); }
  double accuracy() const { return total == 0 ? 0.0 : static_cast<double>(correct) / total; }
};

struct TuneOutcome {
  std::vector<TuneEntry> table;  // ascending gamma
  int chosen_step = 0;
  GammaGrid grid;
  double gamma() const { return gamma_of_step(chosen_step); }
};

/// Plain leave-one-out accuracy at one gamma.
double loocv_accuracy(const LabeledDataset& data, double gamma, double loading = kDefaultLoading);

/// Leave-one-out correct counts for every gamma in the grid. Each fold's class
/// statistics are computed once and reused across gammas; nothing is shared
/// between folds.
std::vector<TuneEntry> loocv_table(const LabeledDataset& data, const GammaGrid& grid,
                                   double loading = kDefaultLoading);

/// Best LOOCV accuracy on the constrained grid; ties go to the largest gamma.
TuneOutcome select_gamma(const LabeledDataset& data, const GammaConstraints& constraints,
                         double loading = kDefaultLoading);

/// CSV with columns gamma,loocv_accuracy,selected.
std::string tune_csv(const TuneOutcome& outcome);

}  // namespace nirsbci
