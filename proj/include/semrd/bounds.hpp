#pragma once

// Numerical checks of the variational upper bound on task distortion and of the
// pixel-distortion / mutual-information correspondence along a rate sweep.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "semrd/distortion.hpp"
#include "semrd/prob.hpp"

namespace semrd {

inline constexpr double kBoundSlack = 1e-9;

struct BoundReport {
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;  // rhs - lhs
  bool satisfied = true;
  bool infinite_rhs = false;  // q vanishes where p(y, xhat) > 0
};

namespace detail {

inline JointDistribution xhat_y_joint(const SemanticSource& src, const ConditionalDistribution& mapping,
                                      const ConditionalDistribution& q) {
  if (mapping.rows() != src.size_x()) throw dimension_error("bound: mapping rows != |X|");
  if (q.rows() != mapping.cols() || q.cols() != src.size_y()) throw dimension_error("bound: q must be |Xhat| x |Y|");
  return compose_markov(src.px, src.py_given_x, mapping).marginal_xhat_y();
}

}  // namespace detail

/// -sum p(y, xhat) log q(y|xhat); +infinity when q is zero on the support of p(y, xhat).
inline double cross_entropy_term(const SemanticSource& src, const ConditionalDistribution& mapping, const ConditionalDistribution& q) {
  const JointDistribution j = detail::xhat_y_joint(src, mapping, q);
  double ce = 0.0;
  for (std::size_t xh = 0; xh < j.rows(); ++xh)
    for (std::size_t y = 0; y < j.cols(); ++y) {
      const double w = j(xh, y);
      if (w <= 0.0) continue;
      if (q(xh, y) <= 0.0) return kInf;
      ce -= w * std::log(q(xh, y));
    }
  return ce;
}

/// D_T <= I(X;Y) - H(Y) - E[log q(y|xhat)] for any predictor q.
inline BoundReport variational_dt_bound(const SemanticSource& src, const ConditionalDistribution& mapping,
                                        const ConditionalDistribution& q) {
  BoundReport r;
  r.lhs = task_distortion_mi_form(src, mapping);
  const JointDistribution xy = joint_from(src.px, src.py_given_x);
  const double ce = cross_entropy_term(src, mapping, q);
  r.infinite_rhs = std::isinf(ce);
  r.rhs = mutual_information(xy) - entropy(xy.marginal_cols()) + ce;
  r.slack = r.rhs - r.lhs;
  r.satisfied = r.slack >= -kBoundSlack;
  return r;
}

struct CorrespondencePoint {
  double rate_nats = 0.0;         // I(X;Xhat)
  double pixel_distortion = 0.0;  // E d_RD
};

struct CorrespondenceReport {
  std::vector<CorrespondencePoint> points;  // sorted by rate
  double rank_correlation = 0.0;            // Spearman, distortion vs rate
  bool monotone = true;                     // distortion non-increasing as rate grows
};

namespace detail {

inline std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = r;
    i = j + 1;
  }
  return rank;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace detail

/// Rank correlation and curve monotonicity of (I(X;Xhat), D_R) over a set of mappings.
/// Meant for a beta = 0 lambda sweep; mappings from a task-weighted objective are out of scope.
inline CorrespondenceReport mse_mi_correspondence(const SemanticSource& src, const DistortionMatrix& pixel,
                                                  const std::vector<ConditionalDistribution>& mappings) {
  if (mappings.size() < 3) throw invalid_input("mse_mi_correspondence: need at least 3 mappings");
  CorrespondenceReport r;
  for (const auto& m : mappings)
    r.points.push_back({std::max(mutual_information(joint_from(src.px, m)), 0.0), expected_distortion(src.px, m, pixel)});
  std::stable_sort(r.points.begin(), r.points.end(),
                   [](const CorrespondencePoint& a, const CorrespondencePoint& b) { return a.rate_nats < b.rate_nats; });
  std::vector<double> rates, dists;
  for (std::size_t i = 0; i < r.points.size(); ++i) {
    rates.push_back(r.points[i].rate_nats);
    dists.push_back(r.points[i].pixel_distortion);
    if (i > 0 && r.points[i].pixel_distortion > r.points[i - 1].pixel_distortion + kBoundSlack) r.monotone = false;
  }
  r.rank_correlation = detail::pearson(detail::average_ranks(rates), detail::average_ranks(dists));
  return r;
}

}  // namespace semrd
