#pragma once

#include <Eigen/Dense>
#include <array>
#include <optional>
#include <string>
#include <vector>

#include "nirsbci/epoching.hpp"

namespace nirsbci {

/// Relative diagonal loading applied to every blended covariance.
inline constexpr double kDefaultLoading = 1e-5;

struct ClassSummary {
  Label label = Label::yes;
  int count = 0;
  Eigen::VectorXd mean;
  // Unbiased class covariance; absent when count < 2.
  std::optional<Eigen::MatrixXd> covariance;
};

struct ClassStats {
  std::vector<ClassSummary> classes;  // present classes in fixed label order
  Eigen::VectorXd overall_mean;
  Eigen::MatrixXd pooled;  // within-class scatter / (N - K)
  int n = 0;
  int k = 0;

  const ClassSummary& of(Label label) const;
  int dimension() const { return static_cast<int>(overall_mean.size()); }
};

ClassStats class_statistics(const LabeledDataset& data);

/// (1 - gamma) * pooled + gamma * class covariance, symmetrized.
Eigen::MatrixXd blend_covariance(const ClassStats& stats, Label label, double gamma);

struct Prediction {
  Label label = Label::yes;
  // Discriminant per label index; -inf for classes the model never saw.
  std::array<double, kNumLabels> scores{};
};

class RldaModel {
 public:
  struct ClassModel {
    Label label = Label::yes;
    int count = 0;
    Eigen::VectorXd mean;
    Eigen::MatrixXd blended;  // before loading
    double loading_value = 0.0;
    Eigen::MatrixXd cholesky;  // lower factor of blended + loading_value * I
    double log_det = 0.0;
  };

  RldaModel() = default;

  /// Factorizes each (blended + loading) matrix. Throws NumericalError naming
  /// the class whose matrix is not positive definite.
  RldaModel(double gamma, double loading, std::vector<ClassModel> classes);

  double gamma() const { return gamma_; }
  double loading() const { return loading_; }
  int dimension() const { return dimension_; }
  const std::vector<ClassModel>& classes() const { return classes_; }

  Prediction predict(const Eigen::VectorXd& x) const;
  /// Explicit (blended + loading)^-1 for one class, for diagnostics.
  Eigen::MatrixXd inverse_covariance(Label label) const;

  std::string to_json() const;
  static RldaModel from_json(const std::string& text);

 private:
  double gamma_ = 0.0;
  double loading_ = kDefaultLoading;
  int dimension_ = 0;
  std::vector<ClassModel> classes_;
};

RldaModel train_rlda(const ClassStats& stats, double gamma, double loading = kDefaultLoading);
RldaModel train_rlda(const LabeledDataset& data, double gamma, double loading = kDefaultLoading);

}  // namespace nirsbci
