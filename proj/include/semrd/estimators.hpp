#pragma once

// Sample-based mutual information (contrastive log-ratio upper bound) with a
// linear-Gaussian variational conditional fit in closed form, plus exact
// discrete MI reporting for pipeline joints.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "semrd/prob.hpp"

namespace semrd {

/// Paired samples; row i of xs goes with row i of ys.
struct SampleSet {
  Eigen::MatrixXd xs;
  Eigen::MatrixXd ys;

  std::size_t size() const noexcept { return static_cast<std::size_t>(xs.rows()); }

  void validate() const {
    if (xs.rows() != ys.rows()) throw dimension_error("samples: x and y row counts differ");
    if (xs.rows() < 2) throw invalid_input("samples: need at least 2 pairs");
    if (xs.cols() < 1 || ys.cols() < 1) throw invalid_input("samples: empty x or y block");
    if (!xs.allFinite() || !ys.allFinite()) throw invalid_input("samples: non-finite entry");
  }
};

/// q(y|x) = N(y; weight x + bias, diag(noise_variance)).
struct GaussianConditionalModel {
  Eigen::MatrixXd weight;          // d_y x d_x
  Eigen::VectorXd bias;            // d_y
  Eigen::VectorXd noise_variance;  // d_y, > 0
  bool ridge_fallback = false;

  double log_density(const Eigen::Ref<const Eigen::VectorXd>& y, const Eigen::Ref<const Eigen::VectorXd>& x) const {
    const Eigen::VectorXd mean = weight * x + bias;
    double lp = 0.0;
    for (Eigen::Index d = 0; d < y.size(); ++d) {
      const double r = y[d] - mean[d];
      lp -= 0.5 * (std::log(2.0 * std::numbers::pi * noise_variance[d]) + r * r / noise_variance[d]);
    }
    return lp;
  }
};

inline constexpr double kVarianceFloor = 1e-12;
inline constexpr double kRidgePenalty = 1e-8;
inline constexpr std::size_t kExactCrossTermLimit = 20000;
inline constexpr std::uint64_t kCrossTermSubsample = 10'000'000;

/// Ordinary least squares per output dimension; residual variance as the noise.
inline GaussianConditionalModel fit_gaussian_conditional(const SampleSet& s) {
  s.validate();
  const Eigen::Index n = s.xs.rows(), dx = s.xs.cols();
  if (n <= dx + 1) throw invalid_input("fit_gaussian_conditional: need more samples than x dimensions + 1");
  Eigen::MatrixXd design(n, dx + 1);
  design.leftCols(dx) = s.xs;
  design.col(dx).setOnes();

  GaussianConditionalModel m;
  Eigen::MatrixXd coef;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() == dx + 1) {
    coef = qr.solve(s.ys);
  } else {
    Eigen::MatrixXd gram = design.transpose() * design;
    gram.diagonal().array() += kRidgePenalty;
    coef = gram.ldlt().solve(design.transpose() * s.ys);
    m.ridge_fallback = true;
  }
  m.weight = coef.topRows(dx).transpose();
  m.bias = coef.row(dx).transpose();
  const Eigen::MatrixXd resid = s.ys - design * coef;
  m.noise_variance = (resid.array().square().colwise().sum() / static_cast<double>(n)).transpose();
  for (Eigen::Index d = 0; d < m.noise_variance.size(); ++d) m.noise_variance[d] = std::max(m.noise_variance[d], kVarianceFloor);
  return m;
}

struct ClubEstimate {
  double nats = 0.0;
  bool exact_cross_term = true;
  std::uint64_t cross_pairs = 0;
};

namespace detail {

// Neumaier compensated sum, order fixed by the caller.
struct CompensatedSum {
  double sum = 0.0;
  double comp = 0.0;
  void add(double v) {
    const double t = sum + v;
    comp += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
    sum = t;
  }
  double value() const { return sum + comp; }
};

}  // namespace detail

/// (1/N) sum_i log q(y_i|x_i) - (1/N^2) sum_{i,j} log q(y_j|x_i).
///
/// The cross term is evaluated over all N^2 pairs up to N = 20000; above that a
/// seeded subsample of 10^7 pairs is used and the estimate is flagged.
inline ClubEstimate club_estimate(const SampleSet& s, const GaussianConditionalModel& model, std::uint64_t seed = 0) {
  s.validate();
  if (model.weight.rows() != s.ys.cols() || model.weight.cols() != s.xs.cols() || model.bias.size() != s.ys.cols() ||
      model.noise_variance.size() != s.ys.cols())
    throw dimension_error("club_estimate: model does not match sample dimensions");
  const Eigen::Index n = s.xs.rows(), dy = s.ys.cols();
  const Eigen::MatrixXd means = (s.xs * model.weight.transpose()).rowwise() + model.bias.transpose();
  const Eigen::VectorXd inv_var = model.noise_variance.cwiseInverse();
  double log_norm = 0.0;
  for (Eigen::Index d = 0; d < dy; ++d) log_norm -= 0.5 * std::log(2.0 * std::numbers::pi * model.noise_variance[d]);

  auto log_q = [&](Eigen::Index yi, Eigen::Index xi) {
    double q = log_norm;
    for (Eigen::Index d = 0; d < dy; ++d) {
      const double r = s.ys(yi, d) - means(xi, d);
      q -= 0.5 * r * r * inv_var[d];
    }
    return q;
  };

  detail::CompensatedSum positive;
  for (Eigen::Index i = 0; i < n; ++i) positive.add(log_q(i, i));

  ClubEstimate out;
  detail::CompensatedSum negative;
  if (static_cast<std::size_t>(n) <= kExactCrossTermLimit) {
    for (Eigen::Index i = 0; i < n; ++i) {
      detail::CompensatedSum row;
      for (Eigen::Index j = 0; j < n; ++j) row.add(log_q(j, i));
      negative.add(row.value() / static_cast<double>(n));
    }
    out.cross_pairs = static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(n);
    out.nats = positive.value() / static_cast<double>(n) - negative.value() / static_cast<double>(n);
  } else {
    std::mt19937_64 rng(seed);
    const auto pick = [&] { return static_cast<Eigen::Index>(detail::uniform_below(rng, static_cast<std::uint64_t>(n))); };
    for (std::uint64_t k = 0; k < kCrossTermSubsample; ++k) {
      const Eigen::Index i = pick(), j = pick();
      negative.add(log_q(j, i));
    }
    out.exact_cross_term = false;
    out.cross_pairs = kCrossTermSubsample;
    out.nats = positive.value() / static_cast<double>(n) - negative.value() / static_cast<double>(kCrossTermSubsample);
  }
  return out;
}

/// -1/2 ln(1 - rho^2), the mutual information of a standard bivariate normal pair.
inline double analytic_gaussian_mi(double rho) {
  if (!(std::abs(rho) < 1.0)) throw invalid_input("analytic_gaussian_mi: |rho| must be < 1");
  return -0.5 * std::log1p(-rho * rho);
}

/// n pairs of unit-variance normals with correlation rho (x scalar, y scalar).
inline SampleSet gaussian_pairs(double rho, std::size_t n, std::uint64_t seed) {
  if (!(std::abs(rho) < 1.0)) throw invalid_input("gaussian_pairs: |rho| must be < 1");
  std::mt19937_64 rng(seed);
  detail::StandardNormal normal;
  SampleSet s{Eigen::MatrixXd(n, 1), Eigen::MatrixXd(n, 1)};
  const double c = std::sqrt(1.0 - rho * rho);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = normal(rng), b = normal(rng);
    s.xs(static_cast<Eigen::Index>(i), 0) = a;
    s.ys(static_cast<Eigen::Index>(i), 0) = rho * a + c * b;
  }
  return s;
}

/// Reads `x0,...,y0,...` CSV. Columns are assigned by header prefix.
inline SampleSet read_samples_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw invalid_input("samples csv: missing header");
  std::vector<int> is_x;
  {
    std::stringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) {
      while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
      while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
      if (!cell.empty() && cell[0] == 'x')
        is_x.push_back(1);
      else if (!cell.empty() && cell[0] == 'y')
        is_x.push_back(0);
      else
        throw invalid_input("samples csv: header column '" + cell + "' is neither x* nor y*");
    }
  }
  std::vector<std::vector<double>> xr, yr;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    std::stringstream ls(line);
    std::string cell;
    std::vector<double> xv, yv;
    std::size_t col = 0;
    while (std::getline(ls, cell, ',')) {
      if (col >= is_x.size()) throw invalid_input("samples csv: too many columns on line " + std::to_string(lineno));
      double v = 0.0;
      try {
        std::size_t used = 0;
        v = std::stod(cell, &used);
        while (used < cell.size() && (cell[used] == ' ' || cell[used] == '\r')) ++used;
        if (used != cell.size()) throw invalid_input("samples csv: bad number on line " + std::to_string(lineno));
      } catch (const Error&) {
        throw;
      } catch (const std::exception&) {
        throw invalid_input("samples csv: bad number on line " + std::to_string(lineno));
      }
      (is_x[col] ? xv : yv).push_back(v);
      ++col;
    }
    if (col != is_x.size()) throw invalid_input("samples csv: too few columns on line " + std::to_string(lineno));
    xr.push_back(std::move(xv));
    yr.push_back(std::move(yv));
  }
  if (xr.empty() || xr[0].empty() || yr[0].empty()) throw invalid_input("samples csv: need at least one x and one y column with data");
  SampleSet s{Eigen::MatrixXd(xr.size(), xr[0].size()), Eigen::MatrixXd(yr.size(), yr[0].size())};
  for (std::size_t i = 0; i < xr.size(); ++i) {
    for (std::size_t d = 0; d < xr[i].size(); ++d) s.xs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = xr[i][d];
    for (std::size_t d = 0; d < yr[i].size(); ++d) s.ys(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = yr[i][d];
  }
  s.validate();
  return s;
}

struct DiscreteMiReport {
  double i_x_xhat_bits = 0.0;
  double i_xhat_y_bits = 0.0;
};

/// Exact I(X;Xhat) and I(Xhat;Y) for p(x), p(y|x) and the end-to-end p(xhat|x).
inline DiscreteMiReport discrete_mi_report(const Distribution& px, const ConditionalDistribution& py_given_x,
                                           const ConditionalDistribution& pxhat_given_x) {
  const JointDistribution3 j = compose_markov(px, py_given_x, pxhat_given_x);
  return {to_bits(std::max(mutual_information(j.marginal_x_xhat()), 0.0)),
          to_bits(std::max(mutual_information(j.marginal_xhat_y()), 0.0))};
}

}  // namespace semrd
