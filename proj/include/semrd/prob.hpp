#pragma once

// Finite discrete distributions and exact information functionals.
// All quantities are in nats; convert with to_bits() at reporting boundaries.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "semrd/error.hpp"

namespace semrd {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Entries below this are treated as exact zeros after an update.
inline constexpr double kClampFloor = 1e-15;

/// Accepted deviation of an input row sum from 1 before renormalization.
inline constexpr double kInputSumTolerance = 1e-9;

inline double to_bits(double nats) { return nats / std::numbers::ln2; }

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) return {};
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != m.cols_) throw dimension_error("ragged matrix rows");
      std::copy(rows[i].begin(), rows[i].end(), m.data_.begin() + static_cast<std::ptrdiff_t>(i * m.cols_));
    }
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  std::vector<std::vector<double>> to_rows() const {
    std::vector<std::vector<double>> out(rows_);
    for (std::size_t i = 0; i < rows_; ++i) out[i].assign(row(i).begin(), row(i).end());
    return out;
  }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

namespace detail {

inline double checked_sum(std::span<const double> v, const char* what) {
  double sum = 0.0;
  for (double p : v) {
    if (!std::isfinite(p) || p < -kClampFloor) throw invalid_input(std::string(what) + ": negative or non-finite probability");
    sum += std::max(p, 0.0);
  }
  return sum;
}

// Validates a probability row and rescales it so the sum is 1 to rounding.
inline void normalize_row(std::span<double> row, double tolerance, const char* what) {
  if (row.empty()) throw invalid_input(std::string(what) + ": empty distribution");
  const double sum = checked_sum(row, what);
  if (!(sum > 0.0) || std::abs(sum - 1.0) > tolerance) {
    throw invalid_input(std::string(what) + ": probabilities sum to " + std::to_string(sum));
  }
  for (double& p : row) p = std::max(p, 0.0) / sum;
}

inline void clamp_row(std::span<double> row) {
  double sum = 0.0;
  for (double& p : row) {
    if (p < kClampFloor) p = 0.0;
    sum += p;
  }
  if (sum > 0.0)
    for (double& p : row) p /= sum;
}

inline double xlogy_ratio(double p, double num, double den) {
  // p * log(num/den) with 0 log 0 := 0
  if (p <= 0.0) return 0.0;
  return p * std::log(num / den);
}

}  // namespace detail

class Distribution {
 public:
  Distribution() = default;

  explicit Distribution(std::vector<double> mass, double tolerance = kInputSumTolerance) : mass_(std::move(mass)) {
    detail::normalize_row(mass_, tolerance, "distribution");
  }

  /// Normalizes arbitrary nonnegative weights.
  static Distribution from_weights(std::vector<double> weights) {
    const double sum = detail::checked_sum(weights, "weights");
    if (!(sum > 0.0)) throw invalid_input("weights: total mass is zero");
    for (double& w : weights) w = std::max(w, 0.0) / sum;
    return Distribution(std::move(weights), kInf);
  }

  static Distribution uniform(std::size_t n) { return Distribution(std::vector<double>(n, 1.0 / static_cast<double>(n))); }

  static Distribution point_mass(std::size_t n, std::size_t at) {
    std::vector<double> m(n, 0.0);
    m.at(at) = 1.0;
    return Distribution(std::move(m));
  }

  std::size_t size() const noexcept { return mass_.size(); }
  double operator[](std::size_t i) const { return mass_[i]; }
  std::span<const double> mass() const noexcept { return mass_; }
  const std::vector<double>& values() const noexcept { return mass_; }

  bool operator==(const Distribution&) const = default;

 private:
  std::vector<double> mass_;
};

/// Row-stochastic matrix; row a is p(. | a).
class ConditionalDistribution {
 public:
  ConditionalDistribution() = default;

  explicit ConditionalDistribution(Matrix rows, double tolerance = kInputSumTolerance) : rows_(std::move(rows)) {
    if (rows_.rows() == 0 || rows_.cols() == 0) throw invalid_input("conditional distribution: empty");
    for (std::size_t i = 0; i < rows_.rows(); ++i) detail::normalize_row(rows_.row(i), tolerance, "conditional row");
  }

  static ConditionalDistribution from_rows(const std::vector<std::vector<double>>& rows,
                                           double tolerance = kInputSumTolerance) {
    return ConditionalDistribution(Matrix::from_rows(rows), tolerance);
  }

  static ConditionalDistribution identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return ConditionalDistribution(std::move(m));
  }

  /// Every row equal to `row`.
  static ConditionalDistribution constant(std::size_t rows, const Distribution& row) {
    Matrix m(rows, row.size());
    for (std::size_t i = 0; i < rows; ++i) std::copy(row.mass().begin(), row.mass().end(), m.row(i).begin());
    return ConditionalDistribution(std::move(m));
  }

  std::size_t rows() const noexcept { return rows_.rows(); }
  std::size_t cols() const noexcept { return rows_.cols(); }
  double operator()(std::size_t i, std::size_t j) const { return rows_(i, j); }
  std::span<const double> row(std::size_t i) const { return rows_.row(i); }
  Distribution row_distribution(std::size_t i) const {
    return Distribution(std::vector<double>(row(i).begin(), row(i).end()));
  }
  const Matrix& matrix() const noexcept { return rows_; }

  bool operator==(const ConditionalDistribution&) const = default;

 private:
  Matrix rows_;
};

/// Two-way joint p(a, b), rows indexed by a.
class JointDistribution {
 public:
  JointDistribution() = default;

  explicit JointDistribution(Matrix mass, double tolerance = kInputSumTolerance) : mass_(std::move(mass)) {
    if (mass_.empty()) throw invalid_input("joint distribution: empty");
    detail::normalize_row(mass_.data(), tolerance, "joint");
  }

  std::size_t rows() const noexcept { return mass_.rows(); }
  std::size_t cols() const noexcept { return mass_.cols(); }
  double operator()(std::size_t a, std::size_t b) const { return mass_(a, b); }
  const Matrix& matrix() const noexcept { return mass_; }

  Distribution marginal_rows() const {
    std::vector<double> m(rows(), 0.0);
    for (std::size_t a = 0; a < rows(); ++a)
      for (std::size_t b = 0; b < cols(); ++b) m[a] += mass_(a, b);
    return Distribution(std::move(m));
  }

  Distribution marginal_cols() const {
    std::vector<double> m(cols(), 0.0);
    for (std::size_t a = 0; a < rows(); ++a)
      for (std::size_t b = 0; b < cols(); ++b) m[b] += mass_(a, b);
    return Distribution(std::move(m));
  }

  Distribution flattened() const { return Distribution(std::vector<double>(mass_.data().begin(), mass_.data().end())); }

 private:
  Matrix mass_;
};

/// Three-way joint indexed (x, xhat, y).
class JointDistribution3 {
 public:
  JointDistribution3(std::size_t nx, std::size_t nxhat, std::size_t ny, std::vector<double> mass)
      : nx_(nx), nxhat_(nxhat), ny_(ny), mass_(std::move(mass)) {
    if (mass_.size() != nx * nxhat * ny) throw dimension_error("3-way joint: size mismatch");
    detail::normalize_row(mass_, kInputSumTolerance, "3-way joint");
  }

  std::size_t size_x() const noexcept { return nx_; }
  std::size_t size_xhat() const noexcept { return nxhat_; }
  std::size_t size_y() const noexcept { return ny_; }

  double operator()(std::size_t x, std::size_t xhat, std::size_t y) const { return mass_[(x * nxhat_ + xhat) * ny_ + y]; }

  JointDistribution marginal_x_xhat() const {
    Matrix m(nx_, nxhat_);
    for (std::size_t x = 0; x < nx_; ++x)
      for (std::size_t xh = 0; xh < nxhat_; ++xh)
        for (std::size_t y = 0; y < ny_; ++y) m(x, xh) += (*this)(x, xh, y);
    return JointDistribution(std::move(m));
  }

  JointDistribution marginal_x_y() const {
    Matrix m(nx_, ny_);
    for (std::size_t x = 0; x < nx_; ++x)
      for (std::size_t xh = 0; xh < nxhat_; ++xh)
        for (std::size_t y = 0; y < ny_; ++y) m(x, y) += (*this)(x, xh, y);
    return JointDistribution(std::move(m));
  }

  JointDistribution marginal_xhat_y() const {
    Matrix m(nxhat_, ny_);
    for (std::size_t x = 0; x < nx_; ++x)
      for (std::size_t xh = 0; xh < nxhat_; ++xh)
        for (std::size_t y = 0; y < ny_; ++y) m(xh, y) += (*this)(x, xh, y);
    return JointDistribution(std::move(m));
  }

 private:
  std::size_t nx_, nxhat_, ny_;
  std::vector<double> mass_;
};

inline double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return std::max(h, 0.0);
}

inline double entropy(const Distribution& d) { return entropy(d.mass()); }

/// KL(p || q) in nats; +infinity when p puts mass where q has none. Rounding
/// negatives (|p - q| near machine precision) are returned as 0.
inline double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw dimension_error("kl_divergence: length mismatch");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) return kInf;
    kl += p[i] * std::log(p[i] / q[i]);
  }
  return std::max(kl, 0.0);
}

inline double kl_divergence(const Distribution& p, const Distribution& q) { return kl_divergence(p.mass(), q.mass()); }

inline double mutual_information(const JointDistribution& j) {
  const Distribution pa = j.marginal_rows();
  const Distribution pb = j.marginal_cols();
  double mi = 0.0;
  for (std::size_t a = 0; a < j.rows(); ++a)
    for (std::size_t b = 0; b < j.cols(); ++b) mi += detail::xlogy_ratio(j(a, b), j(a, b), pa[a] * pb[b]);
  return mi;
}

/// p(a, b) = p(a) p(b | a).
inline JointDistribution joint_from(const Distribution& prior, const ConditionalDistribution& forward) {
  if (prior.size() != forward.rows()) throw dimension_error("joint_from: prior length != conditional rows");
  Matrix m(forward.rows(), forward.cols());
  for (std::size_t a = 0; a < forward.rows(); ++a)
    for (std::size_t b = 0; b < forward.cols(); ++b) m(a, b) = prior[a] * forward(a, b);
  return JointDistribution(std::move(m));
}

/// Output marginal sum_a p(a) p(b | a).
inline Distribution push_forward(const Distribution& prior, const ConditionalDistribution& forward) {
  if (prior.size() != forward.rows()) throw dimension_error("push_forward: prior length != conditional rows");
  std::vector<double> out(forward.cols(), 0.0);
  for (std::size_t a = 0; a < forward.rows(); ++a)
    for (std::size_t b = 0; b < forward.cols(); ++b) out[b] += prior[a] * forward(a, b);
  return Distribution(std::move(out));
}

/// Row composition: (first then second)(c | a) = sum_b first(b|a) second(c|b).
inline ConditionalDistribution chain(const ConditionalDistribution& first, const ConditionalDistribution& second) {
  if (first.cols() != second.rows()) throw dimension_error("chain: inner dimension mismatch");
  Matrix m(first.rows(), second.cols());
  for (std::size_t a = 0; a < first.rows(); ++a)
    for (std::size_t b = 0; b < first.cols(); ++b) {
      const double w = first(a, b);
      if (w == 0.0) continue;
      for (std::size_t c = 0; c < second.cols(); ++c) m(a, c) += w * second(b, c);
    }
  return ConditionalDistribution(std::move(m));
}

struct BayesInversion {
  ConditionalDistribution posterior;  // rows indexed by the forward output symbol
  std::vector<bool> unreachable;      // output symbols with zero marginal; posterior row is uniform
};

/// p(a | b) = p(b | a) p(a) / p(b).
inline BayesInversion bayes_invert(const Distribution& prior, const ConditionalDistribution& forward) {
  if (prior.size() != forward.rows()) throw dimension_error("bayes_invert: prior length != conditional rows");
  const std::size_t na = forward.rows();
  const std::size_t nb = forward.cols();
  Matrix post(nb, na);
  std::vector<bool> unreachable(nb, false);
  for (std::size_t b = 0; b < nb; ++b) {
    double pb = 0.0;
    for (std::size_t a = 0; a < na; ++a) pb += prior[a] * forward(a, b);
    if (pb <= 0.0) {
      unreachable[b] = true;
      for (std::size_t a = 0; a < na; ++a) post(b, a) = 1.0 / static_cast<double>(na);
      continue;
    }
    for (std::size_t a = 0; a < na; ++a) post(b, a) = prior[a] * forward(a, b) / pb;
  }
  return {ConditionalDistribution(std::move(post)), std::move(unreachable)};
}

/// p(x, xhat, y) = p(x) p(xhat | x) p(y | x) under the chain Y - X - Xhat.
inline JointDistribution3 compose_markov(const Distribution& px, const ConditionalDistribution& py_given_x,
                                         const ConditionalDistribution& pxhat_given_x) {
  if (px.size() != py_given_x.rows() || px.size() != pxhat_given_x.rows())
    throw dimension_error("compose_markov: conditioning alphabets differ");
  const std::size_t nx = px.size(), nxh = pxhat_given_x.cols(), ny = py_given_x.cols();
  std::vector<double> mass(nx * nxh * ny);
  for (std::size_t x = 0; x < nx; ++x)
    for (std::size_t xh = 0; xh < nxh; ++xh)
      for (std::size_t y = 0; y < ny; ++y) mass[(x * nxh + xh) * ny + y] = px[x] * pxhat_given_x(x, xh) * py_given_x(x, y);
  return {nx, nxh, ny, std::move(mass)};
}

namespace detail {

// Uniform double in (0, 1] from the top 53 bits; stable across standard libraries.
inline double unit_open(std::mt19937_64& rng) { return (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53; }

// Uniform double in [0, 1).
inline double unit_closed_open(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Standard normal draws by Box-Muller, so seeded streams match across standard libraries.
class StandardNormal {
 public:
  double operator()(std::mt19937_64& rng) {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(unit_open(rng)));
    const double t = 2.0 * std::numbers::pi * unit_closed_open(rng);
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
  }

 private:
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Unbiased integer in [0, n) by rejection.
inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
  for (;;) {
    const std::uint64_t v = rng();
    if (v < limit) return v % n;
  }
}

inline std::vector<double> dirichlet_row(std::mt19937_64& rng, std::size_t n) {
  std::vector<double> w(n);
  double sum = 0.0;
  for (double& v : w) {
    v = -std::log(unit_open(rng));
    sum += v;
  }
  for (double& v : w) v /= sum;
  return w;
}

}  // namespace detail

/// Uniform draw from the probability simplex, deterministic in `seed`.
inline Distribution random_distribution(std::uint64_t seed, std::size_t n) {
  if (n == 0) throw invalid_input("random_distribution: n must be >= 1");
  std::mt19937_64 rng(seed);
  return Distribution(detail::dirichlet_row(rng, n));
}

inline ConditionalDistribution random_conditional(std::uint64_t seed, std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0) throw invalid_input("random_conditional: dims must be >= 1");
  std::mt19937_64 rng(seed);
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    const auto r = detail::dirichlet_row(rng, cols);
    std::copy(r.begin(), r.end(), m.row(i).begin());
  }
  return ConditionalDistribution(std::move(m));
}

}  // namespace semrd
