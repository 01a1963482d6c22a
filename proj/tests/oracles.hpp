#pragma once

// Independent reference computations shared by the unit and acceptance tests.
// None of these call into the library routine they check.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "nirsbci/classifier.hpp"
#include "nirsbci/epoching.hpp"

namespace oracle {

using nirsbci::Label;

inline nirsbci::LabeledDataset random_dataset(std::mt19937_64& rng, int n, int d, int classes, double separation) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<Eigen::VectorXd> centers;
  for (int k = 0; k < classes; ++k) {
    Eigen::VectorXd c(d);
    for (int j = 0; j < d; ++j) c(j) = separation * gauss(rng);
    centers.push_back(c);
  }
  // A shared random mixing matrix keeps covariances non-spherical.
  Eigen::MatrixXd mix(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) mix(i, j) = gauss(rng) * (i == j ? 1.0 : 0.4);
  nirsbci::LabeledDataset data(d);
  for (int i = 0; i < n; ++i) {
    const int k = i % classes;
    Eigen::VectorXd z(d);
    for (int j = 0; j < d; ++j) z(j) = gauss(rng);
    data.append(centers[static_cast<std::size_t>(k)] + mix * z, nirsbci::kAllLabels[static_cast<std::size_t>(k)]);
  }
  return data;
}

// Textbook pooled-covariance LDA with explicit loops and an LU solve.
struct PooledLda {
  std::vector<Label> labels;
  std::vector<Eigen::VectorXd> weights;
  std::vector<double> offsets;

  PooledLda(const nirsbci::LabeledDataset& data, double loading) {
    const int d = data.dimension();
    const int n = data.size();
    std::vector<Eigen::VectorXd> means;
    std::vector<int> counts;
    for (auto label : nirsbci::kAllLabels) {
      Eigen::VectorXd sum = Eigen::VectorXd::Zero(d);
      int c = 0;
      for (int i = 0; i < n; ++i) {
        if (data.label(i) != label) continue;
        sum += data.example(i);
        ++c;
      }
      if (c == 0) continue;
      labels.push_back(label);
      means.push_back(sum / c);
      counts.push_back(c);
    }
    Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(d, d);
    for (int i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(std::find(labels.begin(), labels.end(), data.label(i)) - labels.begin());
      const Eigen::VectorXd r = data.example(i) - means[k];
      for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) scatter(a, b) += r(a) * r(b);
    }
    Eigen::MatrixXd sigma = scatter / static_cast<double>(n - static_cast<int>(labels.size()));
    double trace = 0.0;
    for (int a = 0; a < d; ++a) trace += sigma(a, a);
    for (int a = 0; a < d; ++a) sigma(a, a) += loading * trace / d;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(sigma);
    for (std::size_t k = 0; k < labels.size(); ++k) {
      const Eigen::VectorXd w = lu.solve(means[k]);
      weights.push_back(w);
      offsets.push_back(-0.5 * means[k].dot(w));
    }
  }

  Label predict(const Eigen::VectorXd& x) const {
    std::size_t best = 0;
    double best_score = -1e300;
    for (std::size_t k = 0; k < labels.size(); ++k) {
      const double s = weights[k].dot(x) + offsets[k];
      if (s > best_score) {
        best_score = s;
        best = k;
      }
    }
    return labels[best];
  }
};

// Retrains from scratch for every held-out trial.
inline int naive_loocv_correct(const nirsbci::LabeledDataset& data, double gamma, double loading) {
  int correct = 0;
  for (int i = 0; i < data.size(); ++i) {
    nirsbci::LabeledDataset rest(data.dimension());
    for (int j = 0; j < data.size(); ++j)
      if (j != i) rest.append(data.example(j), data.label(j));
    const auto model = nirsbci::train_rlda(rest, gamma, loading);
    correct += model.predict(data.example(i)).label == data.label(i);
  }
  return correct;
}

// Two-sided exact signed-rank p by enumerating every sign assignment.
inline double brute_force_wilcoxon_p(const std::vector<double>& diffs_in) {
  std::vector<double> diffs;
  for (double d : diffs_in)
    if (d != 0.0) diffs.push_back(d);
  const std::size_t n = diffs.size();
  // Doubled midrank = 2 * (#smaller) + (#equal) + 1.
  std::vector<long> rank2(n);
  for (std::size_t i = 0; i < n; ++i) {
    long smaller = 0, equal = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (std::abs(diffs[j]) < std::abs(diffs[i])) ++smaller;
      if (std::abs(diffs[j]) == std::abs(diffs[i])) ++equal;
    }
    rank2[i] = 2 * smaller + equal + 1;
  }
  long observed = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (diffs[i] > 0) observed += rank2[i];
  std::uint64_t lower = 0, upper = 0;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    long s = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask >> i & 1u) s += rank2[i];
    lower += s <= observed;
    upper += s >= observed;
  }
  return std::min(1.0, 2.0 * static_cast<double>(std::min(lower, upper)) / std::ldexp(1.0, static_cast<int>(n)));
}

inline std::vector<double> binomial_pmf(int n, double p) {
  std::vector<double> pmf(static_cast<std::size_t>(n) + 1);
  for (int k = 0; k <= n; ++k) {
    const double logc = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
    pmf[static_cast<std::size_t>(k)] = std::exp(logc + k * std::log(p) + (n - k) * std::log1p(-p));
  }
  return pmf;
}

// Central band [lo, hi] in counts holding at least `coverage` of the mass,
// each tail carrying at most (1 - coverage) / 2.
inline std::pair<int, int> binomial_central_band(int n, double p, double coverage) {
  const auto pmf = binomial_pmf(n, p);
  const double tail = (1.0 - coverage) / 2.0;
  int lo = 0;
  double acc = 0.0;
  while (lo <= n && acc + pmf[static_cast<std::size_t>(lo)] <= tail) acc += pmf[static_cast<std::size_t>(lo++)];
  int hi = n;
  acc = 0.0;
  while (hi >= 0 && acc + pmf[static_cast<std::size_t>(hi)] <= tail) acc += pmf[static_cast<std::size_t>(hi--)];
  return {lo, hi};
}

// Smallest k with P(X >= k) <= alpha.
inline int binomial_exact_k(int n, double p, double alpha) {
  const auto pmf = binomial_pmf(n, p);
  double upper = 0.0;
  int k = n + 1;
  for (int j = n; j >= 0; --j) {
    if (upper + pmf[static_cast<std::size_t>(j)] > alpha) break;
    upper += pmf[static_cast<std::size_t>(j)];
    k = j;
  }
  return k;
}

// Cramer's rule for [a b; c d] x = y.
inline Eigen::Vector2d cramer(const Eigen::Matrix2d& m, const Eigen::Vector2d& y) {
  const double det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
  return {(y(0) * m(1, 1) - m(0, 1) * y(1)) / det, (m(0, 0) * y(1) - y(0) * m(1, 0)) / det};
}

}  // namespace oracle
