#pragma once

// Pixel-level, task-relevant and combined semantic distortion measures.

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>

#include "semrd/prob.hpp"

namespace semrd {

enum class DistortionKind { pixel, task, combined };

inline const char* to_string(DistortionKind k) {
  switch (k) {
    case DistortionKind::pixel:
      return "pixel";
    case DistortionKind::task:
      return "task";
    case DistortionKind::combined:
      return "combined";
  }
  return "?";
}

/// |X| x |Xhat| nonnegative costs. Task and combined kinds may hold +infinity.
class DistortionMatrix {
 public:
  DistortionMatrix() = default;

  DistortionMatrix(Matrix costs, DistortionKind kind) : costs_(std::move(costs)), kind_(kind) {
    if (costs_.empty()) throw invalid_input("distortion matrix: empty");
    for (double c : costs_.data()) {
      if (std::isnan(c) || c < 0.0) throw invalid_input("distortion matrix: negative or NaN cost");
      if (std::isinf(c) && kind_ == DistortionKind::pixel) throw invalid_input("distortion matrix: infinite pixel cost");
    }
  }

  std::size_t rows() const noexcept { return costs_.rows(); }
  std::size_t cols() const noexcept { return costs_.cols(); }
  double operator()(std::size_t x, std::size_t xhat) const { return costs_(x, xhat); }
  DistortionKind kind() const noexcept { return kind_; }
  const Matrix& costs() const noexcept { return costs_; }

  bool has_finite_row_minima() const {
    for (std::size_t x = 0; x < rows(); ++x) {
      bool finite = false;
      for (double c : costs_.row(x)) finite = finite || std::isfinite(c);
      if (!finite) return false;
    }
    return true;
  }

  double max_finite() const {
    double m = 0.0;
    for (double c : costs_.data())
      if (std::isfinite(c)) m = std::max(m, c);
    return m;
  }

  DistortionMatrix scaled(double factor) const {
    Matrix m = costs_;
    for (double& c : m.data()) c *= factor;
    return {std::move(m), kind_};
  }

 private:
  Matrix costs_;
  DistortionKind kind_ = DistortionKind::pixel;
};

/// A discrete source with labels and symbol coordinates.
struct SemanticSource {
  Distribution px;
  ConditionalDistribution py_given_x;
  Matrix embeddings;                                      // |X| x d
  std::optional<ConditionalDistribution> alt_py_given_x;  // second label function
  std::optional<Matrix> xhat_embeddings;                  // |Xhat| x d, defaults to embeddings
  std::optional<Matrix> d_rd;                             // explicit pixel-distortion override

  std::size_t size_x() const noexcept { return px.size(); }
  std::size_t size_y() const noexcept { return py_given_x.cols(); }

  std::size_t size_xhat() const noexcept {
    if (d_rd) return d_rd->cols();
    if (xhat_embeddings) return xhat_embeddings->rows();
    return embeddings.rows() > 0 ? embeddings.rows() : px.size();
  }

  const Matrix& reconstruction_embeddings() const { return xhat_embeddings ? *xhat_embeddings : embeddings; }

  void validate() const {
    if (px.size() == 0) throw invalid_input("source: empty p(x)");
    if (py_given_x.rows() != px.size()) throw dimension_error("source: p(y|x) rows != |X|");
    if (!embeddings.empty() && embeddings.rows() != px.size()) throw dimension_error("source: embedding rows != |X|");
    if (alt_py_given_x && alt_py_given_x->rows() != px.size())
      throw dimension_error("source: alternate label rows != |X|");
    if (xhat_embeddings && !embeddings.empty() && xhat_embeddings->cols() != embeddings.cols())
      throw dimension_error("source: reconstruction embedding dimension differs");
    if (d_rd && d_rd->rows() != px.size()) throw dimension_error("source: d_rd rows != |X|");
    if (!d_rd && embeddings.empty()) throw invalid_input("source: needs embeddings or an explicit d_rd");
  }
};

/// Squared Euclidean distance between source and reconstruction embeddings.
inline DistortionMatrix mse_matrix(const SemanticSource& src) {
  const Matrix& a = src.embeddings;
  const Matrix& b = src.reconstruction_embeddings();
  if (a.empty() || b.empty()) throw invalid_input("mse_matrix: embeddings missing");
  if (a.cols() != b.cols()) throw dimension_error("mse_matrix: embedding dimensions differ");
  Matrix d(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) {
        const double diff = a(i, k) - b(j, k);
        s += diff * diff;
      }
      d(i, j) = s;
    }
  return {std::move(d), DistortionKind::pixel};
}

/// The explicit d_rd override when the source carries one, else mse_matrix.
inline DistortionMatrix pixel_distortion(const SemanticSource& src) {
  if (src.d_rd) return {*src.d_rd, DistortionKind::pixel};
  return mse_matrix(src);
}

inline DistortionMatrix hamming_matrix(std::size_t n) {
  if (n == 0) throw invalid_input("hamming_matrix: n must be >= 1");
  Matrix d(n, n, 1.0);
  for (std::size_t i = 0; i < n; ++i) d(i, i) = 0.0;
  return {std::move(d), DistortionKind::pixel};
}

/// d_T(x, xhat) = KL(p(y|x) || p(y|xhat)).
inline DistortionMatrix task_distortion_matrix(const ConditionalDistribution& py_given_x,
                                               const ConditionalDistribution& py_given_xhat) {
  if (py_given_x.cols() != py_given_xhat.cols()) throw dimension_error("task_distortion_matrix: label alphabets differ");
  Matrix d(py_given_x.rows(), py_given_xhat.rows());
  for (std::size_t x = 0; x < py_given_x.rows(); ++x)
    for (std::size_t xh = 0; xh < py_given_xhat.rows(); ++xh) d(x, xh) = kl_divergence(py_given_x.row(x), py_given_xhat.row(xh));
  return {std::move(d), DistortionKind::task};
}

/// d_RD + beta * d_T element-wise. A zero beta returns the pixel costs untouched.
inline DistortionMatrix combined_distortion(const DistortionMatrix& pixel, const DistortionMatrix& task, double beta) {
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw invalid_input("combined_distortion: beta must be finite and >= 0");
  if (pixel.rows() != task.rows() || pixel.cols() != task.cols()) throw dimension_error("combined_distortion: shape mismatch");
  Matrix d = pixel.costs();
  if (beta > 0.0)
    for (std::size_t x = 0; x < d.rows(); ++x)
      for (std::size_t xh = 0; xh < d.cols(); ++xh) d(x, xh) += beta * task(x, xh);
  return {std::move(d), DistortionKind::combined};
}

/// E[d(X, Xhat)] under p(x) p(xhat|x); zero-probability cells contribute nothing even when d is infinite.
inline double expected_distortion(const Distribution& px, const ConditionalDistribution& mapping, const DistortionMatrix& d) {
  if (px.size() != mapping.rows() || d.rows() != mapping.rows() || d.cols() != mapping.cols())
    throw dimension_error("expected_distortion: shape mismatch");
  double total = 0.0;
  for (std::size_t x = 0; x < mapping.rows(); ++x)
    for (std::size_t xh = 0; xh < mapping.cols(); ++xh) {
      const double w = px[x] * mapping(x, xh);
      if (w > 0.0) total += w * d(x, xh);
    }
  return total;
}

/// p(y|xhat) = sum_x p(y|x) p(x|xhat). Rows for unreachable xhat are the label marginal p(y).
inline ConditionalDistribution bayes_predictor(const Distribution& px, const ConditionalDistribution& py_given_x,
                                               const ConditionalDistribution& mapping) {
  if (px.size() != py_given_x.rows() || px.size() != mapping.rows()) throw dimension_error("bayes_predictor: shape mismatch");
  const auto inv = bayes_invert(px, mapping);
  const Distribution py = push_forward(px, py_given_x);
  Matrix out(mapping.cols(), py_given_x.cols());
  for (std::size_t xh = 0; xh < mapping.cols(); ++xh) {
    if (inv.unreachable[xh]) {
      std::copy(py.mass().begin(), py.mass().end(), out.row(xh).begin());
      continue;
    }
    for (std::size_t x = 0; x < px.size(); ++x) {
      const double w = inv.posterior(xh, x);
      if (w == 0.0) continue;
      for (std::size_t y = 0; y < py_given_x.cols(); ++y) out(xh, y) += w * py_given_x(x, y);
    }
  }
  return ConditionalDistribution(std::move(out));
}

/// sum_{x,xhat,y} p(x) p(xhat|x) p(y|x) log[p(y|x) / p(y|xhat)] for an arbitrary predictor.
inline double expected_task_distortion(const SemanticSource& src, const ConditionalDistribution& mapping,
                                       const ConditionalDistribution& py_given_xhat) {
  if (mapping.rows() != src.size_x() || py_given_xhat.rows() != mapping.cols() || py_given_xhat.cols() != src.size_y())
    throw dimension_error("expected_task_distortion: shape mismatch");
  double total = 0.0;
  for (std::size_t x = 0; x < src.size_x(); ++x)
    for (std::size_t xh = 0; xh < mapping.cols(); ++xh) {
      const double w = src.px[x] * mapping(x, xh);
      if (w <= 0.0) continue;
      const double kl = kl_divergence(src.py_given_x.row(x), py_given_xhat.row(xh));
      if (std::isinf(kl)) return kInf;
      total += w * kl;
    }
  return total;
}

/// I(X;Y) - I(Xhat;Y) from exact joints; Xhat's label joint is the Markov composition.
inline double task_distortion_mi_form(const SemanticSource& src, const ConditionalDistribution& mapping) {
  const JointDistribution3 j = compose_markov(src.px, src.py_given_x, mapping);
  return mutual_information(j.marginal_x_y()) - mutual_information(j.marginal_xhat_y());
}

}  // namespace semrd
