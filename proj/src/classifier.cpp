#include "nirsbci/classifier.hpp"

#include <cmath>
#include <limits>

#include "json.hpp"

namespace nirsbci {

namespace {

// A pivot below this fraction of the largest diagonal entry counts as singular.
constexpr double kPivotTolerance = 1e-12;

void check_gamma(double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw DomainError("gamma must lie in [0, 1], got " + std::to_string(gamma));
  }
}

}  // namespace

const ClassSummary& ClassStats::of(Label label) const {
  for (const auto& c : classes) {
    if (c.label == label) return c;
  }
  throw DomainError("class '" + std::string(to_string(label)) + "' is not present in the training data");
}

ClassStats class_statistics(const LabeledDataset& data) {
  ClassStats stats;
  stats.n = data.size();
  stats.k = data.num_classes();
  if (stats.n == 0) throw DomainError("cannot compute class statistics of an empty dataset");
  if (stats.n <= stats.k) {
    throw DomainError("pooled covariance needs N > K (N = " + std::to_string(stats.n) +
                      ", K = " + std::to_string(stats.k) + ")");
  }
  const Eigen::MatrixXd& x = data.features();
  const auto d = x.cols();
  stats.overall_mean = x.colwise().mean().transpose();
  Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(d, d);
  for (auto label : data.classes()) {
    const auto idx = data.indices(label);
    ClassSummary s;
    s.label = label;
    s.count = static_cast<int>(idx.size());
    Eigen::MatrixXd members(s.count, d);
    for (int r = 0; r < s.count; ++r) members.row(r) = x.row(idx[static_cast<std::size_t>(r)]);
    s.mean = members.colwise().mean().transpose();
    Eigen::MatrixXd centered = members.rowwise() - s.mean.transpose();
    Eigen::MatrixXd class_scatter = centered.transpose() * centered;
    class_scatter = 0.5 * (class_scatter + class_scatter.transpose()).eval();
    scatter += class_scatter;
    if (s.count >= 2) s.covariance = class_scatter / static_cast<double>(s.count - 1);
    stats.classes.push_back(std::move(s));
  }
  stats.pooled = scatter / static_cast<double>(stats.n - stats.k);
  return stats;
}

Eigen::MatrixXd blend_covariance(const ClassStats& stats, Label label, double gamma) {
  check_gamma(gamma);
  const auto& cls = stats.of(label);
  if (gamma == 0.0) return stats.pooled;
  if (!cls.covariance) {
    throw DomainError("class '" + std::string(to_string(label)) + "' has " + std::to_string(cls.count) +
                      " example(s); gamma > 0 needs at least 2");
  }
  Eigen::MatrixXd m = (1.0 - gamma) * stats.pooled + gamma * *cls.covariance;
  return 0.5 * (m + m.transpose());
}

RldaModel::RldaModel(double gamma, double loading, std::vector<ClassModel> classes)
    : gamma_(gamma), loading_(loading), classes_(std::move(classes)) {
  check_gamma(gamma);
  if (!(loading >= 0.0)) throw DomainError("loading must be nonnegative");
  if (classes_.empty()) throw DomainError("model needs at least one class");
  dimension_ = static_cast<int>(classes_.front().mean.size());
  for (auto& c : classes_) {
    const auto d = c.blended.rows();
    if (c.mean.size() != dimension_ || c.blended.cols() != d || d != dimension_) {
      throw ShapeError("class '" + std::string(to_string(c.label)) + "' has inconsistent dimensions");
    }
    c.loading_value = loading_ * c.blended.diagonal().mean();
    Eigen::MatrixXd loaded = c.blended;
    loaded.diagonal().array() += c.loading_value;
    Eigen::LLT<Eigen::MatrixXd> llt(loaded);
    const std::string who = "covariance of class '" + std::string(to_string(c.label)) + "'";
    if (llt.info() != Eigen::Success) throw NumericalError(who + " is not positive definite after loading");
    Eigen::MatrixXd lower = llt.matrixL();
    const double scale = loaded.diagonal().maxCoeff();
    const double min_pivot = lower.diagonal().array().square().minCoeff();
    if (!(scale > 0.0) || !(min_pivot > kPivotTolerance * scale)) {
      throw NumericalError(who + " is numerically singular after loading (min pivot " + std::to_string(min_pivot) + ")");
    }
    c.cholesky = std::move(lower);
    c.log_det = 2.0 * c.cholesky.diagonal().array().log().sum();
  }
}

Prediction RldaModel::predict(const Eigen::VectorXd& x) const {
  if (x.size() != dimension_) {
    throw ShapeError("feature vector has dimension " + std::to_string(x.size()) + ", model expects " +
                     std::to_string(dimension_));
  }
  Prediction p;
  p.scores.fill(-std::numeric_limits<double>::infinity());
  const double log_prior = -std::log(static_cast<double>(classes_.size()));
  bool first = true;
  double best = 0.0;
  for (const auto& c : classes_) {
    Eigen::VectorXd diff = x - c.mean;
    c.cholesky.triangularView<Eigen::Lower>().solveInPlace(diff);
    const double score = -0.5 * c.log_det - 0.5 * diff.squaredNorm() + log_prior;
    p.scores[static_cast<std::size_t>(index_of(c.label))] = score;
    // classes_ is in label order, so strict '>' keeps the earlier label on ties
    if (first || score > best) {
      best = score;
      p.label = c.label;
      first = false;
    }
  }
  return p;
}

Eigen::MatrixXd RldaModel::inverse_covariance(Label label) const {
  for (const auto& c : classes_) {
    if (c.label != label) continue;
    Eigen::MatrixXd ident = Eigen::MatrixXd::Identity(dimension_, dimension_);
    Eigen::MatrixXd linv = c.cholesky.triangularView<Eigen::Lower>().solve(ident);
    return linv.transpose() * linv;
  }
  throw DomainError("class not in model");
}

std::string RldaModel::to_json() const {
  nlohmann::ordered_json j;
  j["format"] = "rlda-model";
  j["version"] = 1;
  j["gamma"] = gamma_;
  j["loading"] = loading_;
  j["dimension"] = dimension_;
  j["classes"] = nlohmann::ordered_json::array();
  for (const auto& c : classes_) {
    nlohmann::ordered_json jc;
    jc["label"] = std::string(to_string(c.label));
    jc["count"] = c.count;
    jc["mean"] = std::vector<double>(c.mean.data(), c.mean.data() + c.mean.size());
    std::vector<double> rows;
    rows.reserve(static_cast<std::size_t>(c.blended.size()));
    for (Eigen::Index r = 0; r < c.blended.rows(); ++r) {
      for (Eigen::Index col = 0; col < c.blended.cols(); ++col) rows.push_back(c.blended(r, col));
    }
    jc["covariance_row_major"] = std::move(rows);
    jc["loading_value"] = c.loading_value;
    j["classes"].push_back(std::move(jc));
  }
  return j.dump(2);
}

RldaModel RldaModel::from_json(const std::string& text) {
  try {
    auto j = nlohmann::json::parse(text);
    if (j.at("format").get<std::string>() != "rlda-model") throw ConfigError("not an rlda-model file");
    const int d = j.at("dimension").get<int>();
    std::vector<ClassModel> classes;
    for (const auto& jc : j.at("classes")) {
      ClassModel c;
      c.label = parse_label(jc.at("label").get<std::string>());
      c.count = jc.at("count").get<int>();
      auto mean = jc.at("mean").get<std::vector<double>>();
      auto cov = jc.at("covariance_row_major").get<std::vector<double>>();
      if (static_cast<int>(mean.size()) != d || static_cast<int>(cov.size()) != d * d) {
        throw ShapeError("model class block has wrong sizes");
      }
      c.mean = Eigen::Map<Eigen::VectorXd>(mean.data(), d);
      c.blended = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(cov.data(), d, d);
      classes.push_back(std::move(c));
    }
    return RldaModel(j.at("gamma").get<double>(), j.at("loading").get<double>(), std::move(classes));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed model file: ") + e.what());
  }
}

RldaModel train_rlda(const ClassStats& stats, double gamma, double loading) {
  check_gamma(gamma);
  std::vector<RldaModel::ClassModel> classes;
  for (const auto& s : stats.classes) {
    RldaModel::ClassModel c;
    c.label = s.label;
    c.count = s.count;
    c.mean = s.mean;
    c.blended = blend_covariance(stats, s.label, gamma);
    classes.push_back(std::move(c));
  }
  return RldaModel(gamma, loading, std::move(classes));
}

RldaModel train_rlda(const LabeledDataset& data, double gamma, double loading) {
  return train_rlda(class_statistics(data), gamma, loading);
}

}  // namespace nirsbci
