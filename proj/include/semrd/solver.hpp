#pragma once

// Alternating (Blahut-Arimoto style) solver for the rate / pixel-distortion /
// task-distortion trade-off, with curve sweeps and a grid-search oracle.
//
// Internally the functional is L = lambda * I(X;Xhat) + D_R + beta * D_T and the
// mapping update is p(xhat|x) = p(xhat) exp(-d_S(x,xhat) / lambda) / mu(x).

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "semrd/distortion.hpp"
#include "semrd/prob.hpp"

namespace semrd {

enum class InitMode { uniform, seeded_random };

struct SolverConfig {
  double lambda = 1.0;
  double beta = 0.0;
  int max_iters = 10000;
  double tol = 1e-10;          // on |L_k - L_{k-1}|
  double mapping_tol = 1e-9;   // max-abs change of p(xhat|x) between iterations
  InitMode init_pxhat = InitMode::uniform;
  std::uint64_t seed = 0;
  double epsilon_clamp = kClampFloor;

  void validate() const {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw invalid_input("solver: lambda must be finite and > 0");
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw invalid_input("solver: beta must be finite and >= 0");
    if (!(tol > 0.0)) throw invalid_input("solver: tol must be > 0");
    if (max_iters < 1) throw invalid_input("solver: max_iters must be >= 1");
    if (!(epsilon_clamp >= 0.0)) throw invalid_input("solver: epsilon_clamp must be >= 0");
  }
};

/// The iterate carried between steps: p_k(xhat), p_k(y|xhat), and the mapping that produced them.
struct BaState {
  Distribution pxhat;
  ConditionalDistribution py_given_xhat;
  ConditionalDistribution mapping;  // empty before the first step
};

struct LagrangianTerms {
  double rate_nats = 0.0;
  double pixel_distortion = 0.0;
  double task_distortion_nats = 0.0;
  double lagrangian = 0.0;
};

struct SolverResult {
  ConditionalDistribution mapping;
  Distribution pxhat;
  ConditionalDistribution py_given_xhat;
  std::vector<std::size_t> support;  // xhat with p(xhat) > 0
  double rate_nats = 0.0;
  double pixel_distortion = 0.0;
  double task_distortion_nats = 0.0;
  double lagrangian = 0.0;
  int iterations = 0;
  bool converged = false;
  bool monotone = true;  // recorded L sequence non-increasing within 1e-10
  double residual = 0.0;
  std::vector<double> lagrangian_history;
};

struct RDPoint {
  double lambda = 0.0;
  double beta = 0.0;
  double rate_bits = 0.0;
  double pixel_distortion = 0.0;
  double task_distortion_bits = 0.0;
  double task_mi_bits = 0.0;  // I(Xhat;Y)
  bool converged = false;
  bool feasible = true;
  std::string note;
};

inline constexpr double kMonotoneSlack = 1e-10;

namespace detail {

inline void check_instance(const SemanticSource& src, const DistortionMatrix& pixel) {
  src.validate();
  if (pixel.rows() != src.size_x()) throw dimension_error("solver: pixel matrix rows != |X|");
}

inline std::vector<double> clamped(std::vector<double> v, double floor) {
  double sum = 0.0;
  for (double& p : v) {
    if (p < floor) p = 0.0;
    sum += p;
  }
  if (sum > 0.0)
    for (double& p : v) p /= sum;
  return v;
}

inline DistortionMatrix semantic_distortion(const SemanticSource& src, const DistortionMatrix& pixel,
                                            const ConditionalDistribution& py_given_xhat, double beta) {
  if (beta == 0.0) return {pixel.costs(), DistortionKind::combined};
  return combined_distortion(pixel, task_distortion_matrix(src.py_given_x, py_given_xhat), beta);
}

// Gibbs mapping p(xhat) exp(-d/lambda) / mu(x), evaluated in the log domain.
inline Matrix gibbs_mapping(const Distribution& pxhat, const DistortionMatrix& ds, double lambda, double floor) {
  Matrix m(ds.rows(), ds.cols());
  std::vector<double> logw(ds.cols());
  for (std::size_t x = 0; x < ds.rows(); ++x) {
    double best = -kInf;
    for (std::size_t xh = 0; xh < ds.cols(); ++xh) {
      const double d = ds(x, xh);
      logw[xh] = (pxhat[xh] > 0.0 && std::isfinite(d)) ? std::log(pxhat[xh]) - d / lambda : -kInf;
      best = std::max(best, logw[xh]);
    }
    if (best == -kInf) throw Error(ErrorKind::infeasible, "solver: every reconstruction is forbidden for source symbol " + std::to_string(x));
    double z = 0.0;
    for (std::size_t xh = 0; xh < ds.cols(); ++xh) {
      const double w = logw[xh] == -kInf ? 0.0 : std::exp(logw[xh] - best);
      m(x, xh) = w;
      z += w;
    }
    auto row = m.row(x);
    for (double& w : row) w /= z;
    double sum = 0.0;
    for (double& w : row) {
      if (w < floor) w = 0.0;
      sum += w;
    }
    for (double& w : row) w /= sum;
  }
  return m;
}

}  // namespace detail

/// lambda * I(X;Xhat) + D_R + beta * D_T for a mapping, D_T in its mutual-information form.
inline LagrangianTerms lagrangian_terms(const SemanticSource& src, const DistortionMatrix& pixel,
                                        const ConditionalDistribution& mapping, double lambda, double beta) {
  LagrangianTerms t;
  t.rate_nats = std::max(mutual_information(joint_from(src.px, mapping)), 0.0);
  t.pixel_distortion = expected_distortion(src.px, mapping, pixel);
  t.task_distortion_nats = task_distortion_mi_form(src, mapping);
  t.lagrangian = lambda * t.rate_nats + t.pixel_distortion + beta * t.task_distortion_nats;
  return t;
}

inline BaState initial_state(const SemanticSource& src, std::size_t nxhat, const SolverConfig& cfg) {
  Distribution pxhat = cfg.init_pxhat == InitMode::uniform ? Distribution::uniform(nxhat)
                                                           : random_distribution(cfg.seed, nxhat);
  const Distribution py = push_forward(src.px, src.py_given_x);
  return {std::move(pxhat), ConditionalDistribution::constant(nxhat, py), {}};
}

/// One alternation: rebuild d_S from the current predictor, then mapping, marginal, predictor.
inline BaState ba_step(const BaState& state, const SemanticSource& src, const DistortionMatrix& pixel, const SolverConfig& cfg) {
  if (state.pxhat.size() != pixel.cols() || state.py_given_xhat.rows() != pixel.cols())
    throw dimension_error("ba_step: state does not match the reconstruction alphabet");
  const DistortionMatrix ds = detail::semantic_distortion(src, pixel, state.py_given_xhat, cfg.beta);
  ConditionalDistribution mapping(detail::gibbs_mapping(state.pxhat, ds, cfg.lambda, cfg.epsilon_clamp));
  Distribution pxhat(detail::clamped(push_forward(src.px, mapping).values(), cfg.epsilon_clamp));
  ConditionalDistribution predictor = bayes_predictor(src.px, src.py_given_x, mapping);
  return {std::move(pxhat), std::move(predictor), std::move(mapping)};
}

/// Max deviation from the three self-consistent equations.
inline double verify_self_consistency(const SolverResult& result, const SemanticSource& src, const DistortionMatrix& pixel,
                                      const SolverConfig& cfg) {
  const DistortionMatrix ds = detail::semantic_distortion(src, pixel, result.py_given_xhat, cfg.beta);
  const Matrix gibbs = detail::gibbs_mapping(result.pxhat, ds, cfg.lambda, 0.0);
  double residual = 0.0;
  for (std::size_t x = 0; x < gibbs.rows(); ++x)
    for (std::size_t xh = 0; xh < gibbs.cols(); ++xh) residual = std::max(residual, std::abs(result.mapping(x, xh) - gibbs(x, xh)));

  const Distribution marginal = push_forward(src.px, result.mapping);
  for (std::size_t xh = 0; xh < marginal.size(); ++xh) residual = std::max(residual, std::abs(marginal[xh] - result.pxhat[xh]));

  const ConditionalDistribution predictor = bayes_predictor(src.px, src.py_given_x, result.mapping);
  for (std::size_t xh = 0; xh < predictor.rows(); ++xh) {
    if (marginal[xh] <= 0.0) continue;
    for (std::size_t y = 0; y < predictor.cols(); ++y)
      residual = std::max(residual, std::abs(predictor(xh, y) - result.py_given_xhat(xh, y)));
  }
  return residual;
}

/// Iterates ba_step from a given state until |dL| < tol and the mapping has settled, or max_iters.
inline SolverResult solve_from(BaState state, const SemanticSource& src, const DistortionMatrix& pixel, const SolverConfig& cfg) {
  cfg.validate();
  detail::check_instance(src, pixel);
  SolverResult r;
  double previous = kInf;
  for (int k = 1; k <= cfg.max_iters; ++k) {
    BaState next = ba_step(state, src, pixel, cfg);
    const LagrangianTerms t = lagrangian_terms(src, pixel, next.mapping, cfg.lambda, cfg.beta);
    r.lagrangian_history.push_back(t.lagrangian);
    if (t.lagrangian > previous + kMonotoneSlack) r.monotone = false;

    double change = state.mapping.rows() == 0 ? kInf : 0.0;
    if (state.mapping.rows() != 0)
      for (std::size_t i = 0; i < next.mapping.matrix().data().size(); ++i)
        change = std::max(change, std::abs(next.mapping.matrix().data()[i] - state.mapping.matrix().data()[i]));

    const bool settled = std::abs(t.lagrangian - previous) < cfg.tol && change < cfg.mapping_tol;
    previous = t.lagrangian;
    state = std::move(next);
    r.iterations = k;
    r.rate_nats = t.rate_nats;
    r.pixel_distortion = t.pixel_distortion;
    r.task_distortion_nats = t.task_distortion_nats;
    r.lagrangian = t.lagrangian;
    if (settled) {
      r.converged = true;
      break;
    }
  }
  r.mapping = std::move(state.mapping);
  r.pxhat = std::move(state.pxhat);
  r.py_given_xhat = std::move(state.py_given_xhat);
  for (std::size_t xh = 0; xh < r.pxhat.size(); ++xh)
    if (r.pxhat[xh] > 0.0) r.support.push_back(xh);
  r.residual = verify_self_consistency(r, src, pixel, cfg);
  return r;
}

inline SolverResult solve(const SemanticSource& src, const DistortionMatrix& pixel, const SolverConfig& cfg) {
  cfg.validate();
  detail::check_instance(src, pixel);
  return solve_from(initial_state(src, pixel.cols(), cfg), src, pixel, cfg);
}

inline RDPoint to_rd_point(const SemanticSource& src, const SolverResult& r, double lambda, double beta) {
  RDPoint p;
  p.lambda = lambda;
  p.beta = beta;
  p.rate_bits = to_bits(r.rate_nats);
  p.pixel_distortion = r.pixel_distortion;
  p.task_distortion_bits = to_bits(r.task_distortion_nats);
  p.task_mi_bits = to_bits(mutual_information(compose_markov(src.px, src.py_given_x, r.mapping).marginal_xhat_y()));
  p.converged = r.converged;
  return p;
}

namespace detail {

/// Runs body(i) for i in [0, n) on up to `threads` workers; body writes only to slot i.
template <class Body>
void parallel_for(std::size_t n, unsigned threads, Body&& body) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = next++; i < n; i = next++) body(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace detail

/// One solve per lambda, sorted by rate. Infeasible points are kept with feasible=false.
inline std::vector<RDPoint> rd_curve(const SemanticSource& src, const DistortionMatrix& pixel, const std::vector<double>& lambda_grid,
                                     double beta, SolverConfig base = {}, unsigned threads = 1) {
  if (lambda_grid.empty()) throw invalid_input("rd_curve: empty lambda grid");
  for (double l : lambda_grid)
    if (!(l > 0.0)) throw invalid_input("rd_curve: every lambda must be > 0");
  std::vector<RDPoint> points(lambda_grid.size());
  detail::parallel_for(lambda_grid.size(), threads, [&](std::size_t i) {
    SolverConfig cfg = base;
    cfg.lambda = lambda_grid[i];
    cfg.beta = beta;
    try {
      points[i] = to_rd_point(src, solve(src, pixel, cfg), cfg.lambda, beta);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::infeasible) throw;
      points[i].lambda = cfg.lambda;
      points[i].beta = beta;
      points[i].feasible = false;
      points[i].note = e.what();
    }
  });
  std::stable_sort(points.begin(), points.end(), [](const RDPoint& a, const RDPoint& b) {
    if (a.feasible != b.feasible) return a.feasible;
    if (a.rate_bits != b.rate_bits) return a.rate_bits < b.rate_bits;
    return a.lambda > b.lambda;
  });
  return points;
}

// ---------------------------------------------------------------------------
// Grid-search oracle

enum class OracleMethod { mapping_grid, dual_grid };

struct BruteForceResult {
  ConditionalDistribution mapping;
  double lagrangian = kInf;
  std::uint64_t candidates = 0;
  OracleMethod method = OracleMethod::mapping_grid;
};

inline constexpr std::size_t kOracleMaxX = 4;
inline constexpr std::size_t kOracleMaxXhat = 3;
inline constexpr std::size_t kOracleMaxY = 3;
inline constexpr std::uint64_t kOracleMappingGridLimit = 5'000'000;

namespace detail {

// All integer compositions of n into k nonnegative parts, lexicographic.
inline std::vector<std::vector<int>> compositions(int n, std::size_t k) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur(k, 0);
  auto rec = [&](auto&& self, std::size_t pos, int left) -> void {
    if (pos + 1 == k) {
      cur[pos] = left;
      out.push_back(cur);
      return;
    }
    for (int v = left; v >= 0; --v) {
      cur[pos] = v;
      self(self, pos + 1, left - v);
    }
  };
  rec(rec, 0, n);
  return out;
}

inline std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
  std::uint64_t r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

inline std::uint64_t checked_pow(std::uint64_t base, std::size_t exp) {
  std::uint64_t r = 1;
  for (std::size_t i = 0; i < exp; ++i) {
    if (r > std::numeric_limits<std::uint64_t>::max() / std::max<std::uint64_t>(base, 1)) return std::numeric_limits<std::uint64_t>::max();
    r *= base;
  }
  return r;
}

// Minimizes over p(xhat|x) for fixed marginal weights r and fixed
// exp(-d_S/lambda) columns: -lambda * sum_x p(x) log sum_xhat r(xhat) E(x, xhat).
inline double dual_value(const std::vector<double>& px, const std::vector<double>& e, std::size_t nxh, const std::vector<int>& r,
                         double step, double lambda) {
  double total = 0.0;
  for (std::size_t x = 0; x < px.size(); ++x) {
    double s = 0.0;
    for (std::size_t xh = 0; xh < nxh; ++xh) s += r[xh] * step * e[x * nxh + xh];
    if (s <= 0.0) {
      if (px[x] > 0.0) return kInf;
      continue;
    }
    total -= px[x] * std::log(s);
  }
  return lambda * total;
}

// Steepest pairwise-transfer descent on the weight lattice; the objective is convex in r.
inline double lattice_descent(const std::vector<double>& px, const std::vector<double>& e, std::size_t nxh, std::vector<int>& r,
                              double step, double lambda) {
  double best = dual_value(px, e, nxh, r, step, lambda);
  for (;;) {
    double cand_best = best;
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < nxh; ++i) {
      if (r[i] == 0) continue;
      for (std::size_t j = 0; j < nxh; ++j) {
        if (i == j) continue;
        --r[i];
        ++r[j];
        const double v = dual_value(px, e, nxh, r, step, lambda);
        ++r[i];
        --r[j];
        if (v < cand_best - 1e-15) {
          cand_best = v;
          bi = i;
          bj = j;
        }
      }
    }
    if (!(cand_best < best)) return best;
    --r[bi];
    ++r[bj];
    best = cand_best;
  }
}

}  // namespace detail

/// Exhaustive grid search for the minimum Lagrangian on tiny instances.
///
/// When the mapping grid is small enough every row-stochastic mapping on the grid
/// is evaluated. Otherwise the search runs over the dual variables: the marginal
/// weights r(xhat) and the predictor rows q(y|xhat) on the same grid, where for
/// fixed (r, q) the optimal mapping is available in closed form. Every predictor
/// grid point is visited; the weights are optimized on their lattice. The
/// reported Lagrangian is always the exact value of the returned mapping.
inline BruteForceResult brute_force_solve(const SemanticSource& src, const DistortionMatrix& pixel, const SolverConfig& cfg,
                                          double grid_step) {
  cfg.validate();
  detail::check_instance(src, pixel);
  const std::size_t nx = src.size_x(), nxh = pixel.cols(), ny = src.size_y();
  if (nx > kOracleMaxX || nxh > kOracleMaxXhat || ny > kOracleMaxY)
    throw invalid_input("brute_force_solve: instance exceeds the 4 x 3 x 3 oracle cap");
  if (!(grid_step > 0.0 && grid_step <= 0.5)) throw invalid_input("brute_force_solve: grid_step must be in (0, 0.5]");
  const int n = static_cast<int>(std::lround(1.0 / grid_step));
  if (std::abs(n * grid_step - 1.0) > 1e-9) throw invalid_input("brute_force_solve: 1/grid_step must be an integer");
  const double step = 1.0 / n;

  const auto rows = detail::compositions(n, nxh);
  const std::uint64_t mapping_candidates = detail::checked_pow(rows.size(), nx);
  BruteForceResult best;

  if (mapping_candidates <= kOracleMappingGridLimit) {
    best.method = OracleMethod::mapping_grid;
    best.candidates = mapping_candidates;
    std::vector<std::size_t> idx(nx, 0);
    Matrix m(nx, nxh);
    for (std::uint64_t c = 0; c < mapping_candidates; ++c) {
      for (std::size_t x = 0; x < nx; ++x)
        for (std::size_t xh = 0; xh < nxh; ++xh) m(x, xh) = rows[idx[x]][xh] * step;
      ConditionalDistribution mapping(m, kInf);
      const double l = lagrangian_terms(src, pixel, mapping, cfg.lambda, cfg.beta).lagrangian;
      if (l < best.lagrangian) {
        best.lagrangian = l;
        best.mapping = std::move(mapping);
      }
      for (std::size_t x = 0; x < nx; ++x) {
        if (++idx[x] < rows.size()) break;
        idx[x] = 0;
      }
    }
    return best;
  }

  best.method = OracleMethod::dual_grid;
  const std::vector<double>& px = src.px.values();
  const auto qrows = cfg.beta > 0.0 ? detail::compositions(n, ny) : std::vector<std::vector<int>>{std::vector<int>(ny, 0)};
  // e_cols[xh][qi][x] = exp(-(d_RD + beta * KL(p(y|x) || q_qi)) / lambda)
  std::vector<std::vector<std::vector<double>>> e_cols(nxh, std::vector<std::vector<double>>(qrows.size(), std::vector<double>(nx)));
  for (std::size_t qi = 0; qi < qrows.size(); ++qi) {
    std::vector<double> q(ny);
    for (std::size_t y = 0; y < ny; ++y) q[y] = qrows[qi][y] * step;
    for (std::size_t x = 0; x < nx; ++x) {
      const double task = cfg.beta > 0.0 ? kl_divergence(src.py_given_x.row(x), q) : 0.0;
      for (std::size_t xh = 0; xh < nxh; ++xh) {
        const double d = pixel(x, xh) + (cfg.beta > 0.0 ? cfg.beta * task : 0.0);
        e_cols[xh][qi][x] = std::isfinite(d) ? std::exp(-d / cfg.lambda) : 0.0;
      }
    }
  }

  struct Candidate {
    double value;
    std::vector<std::size_t> q;
    std::vector<int> r;
  };
  constexpr std::size_t kRefine = 16;
  std::vector<Candidate> top;

  const std::uint64_t q_combos = detail::checked_pow(qrows.size(), nxh);
  std::vector<std::size_t> qidx(nxh, 0);
  std::vector<int> r(nxh, 0);
  r[0] = n;
  std::vector<double> e(nx * nxh);
  for (std::uint64_t c = 0; c < q_combos; ++c) {
    for (std::size_t x = 0; x < nx; ++x)
      for (std::size_t xh = 0; xh < nxh; ++xh) e[x * nxh + xh] = e_cols[xh][qidx[xh]][x];
    // warm start from the previous weights, restart from uniform-ish if infeasible
    double v = detail::lattice_descent(px, e, nxh, r, step, cfg.lambda);
    if (!std::isfinite(v)) {
      std::fill(r.begin(), r.end(), n / static_cast<int>(nxh));
      r[0] += n - (n / static_cast<int>(nxh)) * static_cast<int>(nxh);
      v = detail::lattice_descent(px, e, nxh, r, step, cfg.lambda);
    }
    if (top.size() < kRefine || v < top.back().value) {
      top.push_back({v, qidx, r});
      std::sort(top.begin(), top.end(), [](const Candidate& a, const Candidate& b) { return a.value < b.value; });
      if (top.size() > kRefine) top.pop_back();
    }
    for (std::size_t xh = 0; xh < nxh; ++xh) {
      if (++qidx[xh] < qrows.size()) break;
      qidx[xh] = 0;
    }
  }

  // Exhaustive weight search for the most promising predictor points.
  for (Candidate& cand : top) {
    for (std::size_t x = 0; x < nx; ++x)
      for (std::size_t xh = 0; xh < nxh; ++xh) e[x * nxh + xh] = e_cols[xh][cand.q[xh]][x];
    for (const auto& rr : rows) {
      const double v = detail::dual_value(px, e, nxh, rr, step, cfg.lambda);
      if (v < cand.value) {
        cand.value = v;
        cand.r = rr;
      }
    }
  }
  best.candidates = q_combos * rows.size();

  for (const Candidate& cand : top) {
    for (std::size_t x = 0; x < nx; ++x)
      for (std::size_t xh = 0; xh < nxh; ++xh) e[x * nxh + xh] = e_cols[xh][cand.q[xh]][x];
    Matrix m(nx, nxh);
    bool ok = true;
    for (std::size_t x = 0; x < nx; ++x) {
      double s = 0.0;
      for (std::size_t xh = 0; xh < nxh; ++xh) s += cand.r[xh] * e[x * nxh + xh];
      if (s <= 0.0) {
        ok = false;
        break;
      }
      for (std::size_t xh = 0; xh < nxh; ++xh) m(x, xh) = cand.r[xh] * e[x * nxh + xh] / s;
    }
    if (!ok) continue;
    ConditionalDistribution mapping(std::move(m), 1e-6);
    const double l = lagrangian_terms(src, pixel, mapping, cfg.lambda, cfg.beta).lagrangian;
    if (l < best.lagrangian) {
      best.lagrangian = l;
      best.mapping = std::move(mapping);
    }
  }
  if (!std::isfinite(best.lagrangian)) throw Error(ErrorKind::infeasible, "brute_force_solve: no feasible grid point");
  return best;
}

}  // namespace semrd
