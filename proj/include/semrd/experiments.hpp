#pragma once

// Synthetic semantic sources, quantizer design from solver mappings, the exact
// end-to-end pipeline (quantize -> index channel -> Bayes classifier), transfer
// scoring under a second label function, and CSV / JSON emission.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "semrd/channel.hpp"
#include "semrd/codec.hpp"
#include "semrd/distortion.hpp"
#include "semrd/prob.hpp"
#include "semrd/solver.hpp"

namespace semrd {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Source generation

struct GeometryConfig {
  double center_box = 1.0;      // cluster centers uniform in [-box, box]^2
  double symbol_spread = 0.2;   // symbol = center + spread * N(0, I)
  double label_softness = 0.1;  // mass moved off the member cluster, spread evenly
  bool dirichlet_px = false;    // p(x) uniform unless set
  bool alt_task = true;         // second, geometric label function
  double alt_softness = 0.1;
  bool reconstruct_at_centers = true;  // Xhat = cluster centers; otherwise Xhat = X
  double mean_sq_distance = 2.0;       // rescale so symbol pairs average this squared distance; 0 keeps raw scale
  bool labels_follow_clusters = false; // label = cluster; otherwise label = contiguous index block, cutting across clusters
};

/// Symbol i belongs to cluster i mod n_labels. Its label is either that cluster or the block
/// floor(i * n_labels / n_symbols), softened either way.
/// The alternate task splits symbols in half by their projection on a seeded direction.
inline SemanticSource generate_semantic_source(std::size_t n_symbols, std::size_t n_labels, const GeometryConfig& g,
                                               std::uint64_t seed) {
  if (n_labels < 2 || n_symbols < n_labels) throw invalid_input("generate_semantic_source: need n_symbols >= n_labels >= 2");
  if (!(g.label_softness >= 0.0 && g.label_softness < 1.0) || !(g.alt_softness >= 0.0 && g.alt_softness < 1.0))
    throw invalid_input("generate_semantic_source: softness must be in [0, 1)");
  if (!(g.center_box >= 0.0) || !(g.symbol_spread >= 0.0) || !(g.mean_sq_distance >= 0.0)) throw invalid_input("generate_semantic_source: negative geometry scale");
  std::mt19937_64 rng(seed);
  auto box = [&](std::mt19937_64& r) { return g.center_box * (2.0 * detail::unit_closed_open(r) - 1.0); };
  detail::StandardNormal normal;

  Matrix centers(n_labels, 2);
  for (std::size_t k = 0; k < n_labels; ++k) {
    centers(k, 0) = box(rng);
    centers(k, 1) = box(rng);
  }
  SemanticSource src;
  src.embeddings = Matrix(n_symbols, 2);
  Matrix labels(n_symbols, n_labels, g.label_softness / static_cast<double>(n_labels));
  for (std::size_t i = 0; i < n_symbols; ++i) {
    const std::size_t k = i % n_labels;
    src.embeddings(i, 0) = centers(k, 0) + g.symbol_spread * normal(rng);
    src.embeddings(i, 1) = centers(k, 1) + g.symbol_spread * normal(rng);
    labels(i, g.labels_follow_clusters ? k : i * n_labels / n_symbols) += 1.0 - g.label_softness;
  }
  src.py_given_x = ConditionalDistribution(std::move(labels));
  if (g.mean_sq_distance > 0.0) {
    double total = 0.0;
    for (std::size_t i = 0; i < n_symbols; ++i)
      for (std::size_t j = i + 1; j < n_symbols; ++j)
        total += std::pow(src.embeddings(i, 0) - src.embeddings(j, 0), 2) + std::pow(src.embeddings(i, 1) - src.embeddings(j, 1), 2);
    const double pairs = 0.5 * static_cast<double>(n_symbols * (n_symbols - 1));
    if (total > 0.0) {
      const double f = std::sqrt(g.mean_sq_distance * pairs / total);
      for (double& v : src.embeddings.data()) v *= f;
      for (double& v : centers.data()) v *= f;
    }
  }
  if (g.reconstruct_at_centers) src.xhat_embeddings = centers;
  src.px = g.dirichlet_px ? Distribution(detail::dirichlet_row(rng, n_symbols)) : Distribution::uniform(n_symbols);

  if (g.alt_task) {
    const double angle = 2.0 * std::numbers::pi * detail::unit_open(rng);
    const double ux = std::cos(angle), uy = std::sin(angle);
    std::vector<std::size_t> order(n_symbols);
    for (std::size_t i = 0; i < n_symbols; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return src.embeddings(a, 0) * ux + src.embeddings(a, 1) * uy < src.embeddings(b, 0) * ux + src.embeddings(b, 1) * uy;
    });
    Matrix alt(n_symbols, 2, g.alt_softness / 2.0);
    for (std::size_t r = 0; r < n_symbols; ++r) alt(order[r], r < n_symbols / 2 ? 0 : 1) += 1.0 - g.alt_softness;
    src.alt_py_given_x = ConditionalDistribution(std::move(alt));
  }
  src.validate();
  return src;
}

// ---------------------------------------------------------------------------
// JSON I/O

inline Error io_error(const std::string& what) { return {ErrorKind::io, what}; }

namespace detail {

inline Matrix matrix_from_json(const json& j, const char* field) {
  if (!j.is_array() || j.empty()) throw invalid_input(std::string("source json: '") + field + "' must be a nonempty array of rows");
  std::vector<std::vector<double>> rows;
  for (const auto& r : j) {
    if (!r.is_array()) throw invalid_input(std::string("source json: '") + field + "' rows must be arrays");
    std::vector<double> row;
    for (const auto& v : r) {
      if (!v.is_number()) throw invalid_input(std::string("source json: non-numeric entry in '") + field + "'");
      row.push_back(v.get<double>());
    }
    if (!rows.empty() && row.size() != rows[0].size()) throw dimension_error(std::string("source json: ragged rows in '") + field + "'");
    rows.push_back(std::move(row));
  }
  return Matrix::from_rows(rows);
}

inline json matrix_to_json(const Matrix& m) { return m.to_rows(); }

inline std::vector<double> vector_from_json(const json& j, const char* field) {
  if (!j.is_array()) throw invalid_input(std::string("json: '") + field + "' must be an array");
  std::vector<double> v;
  for (const auto& e : j) {
    if (!e.is_number()) throw invalid_input(std::string("json: non-numeric entry in '") + field + "'");
    v.push_back(e.get<double>());
  }
  return v;
}

inline json parse_json_text(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw invalid_input(origin + ": " + e.what());
  }
}

}  // namespace detail

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw io_error("write failed on '" + path + "'");
}

inline SemanticSource source_from_json(const json& j) {
  if (!j.is_object()) throw invalid_input("source json: expected an object");
  for (const char* f : {"px", "py_given_x"})
    if (!j.contains(f)) throw invalid_input(std::string("source json: missing '") + f + "'");
  SemanticSource s;
  s.px = Distribution(detail::vector_from_json(j["px"], "px"));
  s.py_given_x = ConditionalDistribution(detail::matrix_from_json(j["py_given_x"], "py_given_x"));
  if (j.contains("embeddings")) s.embeddings = detail::matrix_from_json(j["embeddings"], "embeddings");
  if (j.contains("alt_py_given_x"))
    s.alt_py_given_x = ConditionalDistribution(detail::matrix_from_json(j["alt_py_given_x"], "alt_py_given_x"));
  if (j.contains("xhat_embeddings")) s.xhat_embeddings = detail::matrix_from_json(j["xhat_embeddings"], "xhat_embeddings");
  if (j.contains("d_rd")) s.d_rd = detail::matrix_from_json(j["d_rd"], "d_rd");
  s.validate();
  return s;
}

inline json source_to_json(const SemanticSource& s) {
  json j;
  j["px"] = s.px.values();
  j["py_given_x"] = detail::matrix_to_json(s.py_given_x.matrix());
  if (!s.embeddings.empty()) j["embeddings"] = detail::matrix_to_json(s.embeddings);
  if (s.alt_py_given_x) j["alt_py_given_x"] = detail::matrix_to_json(s.alt_py_given_x->matrix());
  if (s.xhat_embeddings) j["xhat_embeddings"] = detail::matrix_to_json(*s.xhat_embeddings);
  if (s.d_rd) j["d_rd"] = detail::matrix_to_json(*s.d_rd);
  return j;
}

inline SemanticSource load_source(const std::string& path) {
  return source_from_json(detail::parse_json_text(read_text_file(path), path));
}

/// Weights are renormalized on load so hand-written files need not sum to 1 to 12 digits.
inline GmmPmfModel gmm_from_json(const json& j) {
  if (!j.is_object()) throw invalid_input("model json: expected an object");
  for (const char* f : {"weights", "means", "scales"})
    if (!j.contains(f)) throw invalid_input(std::string("model json: missing '") + f + "'");
  GmmPmfModel m{detail::vector_from_json(j["weights"], "weights"), detail::vector_from_json(j["means"], "means"),
                detail::vector_from_json(j["scales"], "scales")};
  if (!m.weights.empty()) m.weights = Distribution::from_weights(m.weights).values();
  m.validate();
  return m;
}

inline json gmm_to_json(const GmmPmfModel& m) { return {{"weights", m.weights}, {"means", m.means}, {"scales", m.scales}}; }

// ---------------------------------------------------------------------------
// Quantizer

enum class MappingMode { argmax, stochastic };

struct Quantizer {
  MappingMode mode = MappingMode::argmax;
  ConditionalDistribution transition;  // one-hot rows in argmax mode
  std::vector<std::size_t> index;      // argmax index per x (argmax mode)

  /// Indices for a sequence of source symbols; stochastic mode samples each with the seed.
  std::vector<std::size_t> apply(std::span<const std::size_t> xs, std::uint64_t seed = 0) const {
    std::vector<std::size_t> out;
    out.reserve(xs.size());
    std::mt19937_64 rng(seed);
    for (std::size_t x : xs) {
      if (x >= transition.rows()) throw invalid_input("quantizer: source symbol outside alphabet");
      if (mode == MappingMode::argmax) {
        out.push_back(index[x]);
        continue;
      }
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      const auto row = transition.row(x);
      double acc = 0.0;
      std::size_t pick = row.size() - 1;
      for (std::size_t j = 0; j < row.size(); ++j) {
        acc += row[j];
        if (u < acc) {
          pick = j;
          break;
        }
      }
      while (row[pick] == 0.0 && pick > 0) --pick;
      out.push_back(pick);
    }
    return out;
  }
};

/// Ties in argmax mode go to the lowest index.
inline Quantizer design_quantizer(const ConditionalDistribution& mapping, MappingMode mode) {
  Quantizer q;
  q.mode = mode;
  if (mode == MappingMode::stochastic) {
    q.transition = mapping;
    return q;
  }
  Matrix m(mapping.rows(), mapping.cols());
  for (std::size_t x = 0; x < mapping.rows(); ++x) {
    const auto row = mapping.row(x);
    const std::size_t best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    q.index.push_back(best);
    m(x, best) = 1.0;
  }
  q.transition = ConditionalDistribution(std::move(m));
  return q;
}

inline Quantizer design_quantizer(const SolverResult& r, MappingMode mode) { return design_quantizer(r.mapping, mode); }

// ---------------------------------------------------------------------------
// Exact pipeline statistics

inline std::size_t argmax_index(std::span<const double> row) {
  return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
}

/// The classifier is the Bayes predictor of the sent indices (trained on a clean link);
/// ground truth for x is argmax_y p(y|x).
inline double exact_accuracy(const Distribution& px, const ConditionalDistribution& labels, const ConditionalDistribution& sent,
                             const ConditionalDistribution& received) {
  const ConditionalDistribution predictor = bayes_predictor(px, labels, sent);
  std::vector<std::size_t> decision(predictor.rows());
  for (std::size_t xh = 0; xh < predictor.rows(); ++xh) decision[xh] = argmax_index(predictor.row(xh));
  double acc = 0.0;
  for (std::size_t x = 0; x < px.size(); ++x) {
    const std::size_t truth = argmax_index(labels.row(x));
    for (std::size_t xh = 0; xh < received.cols(); ++xh)
      if (decision[xh] == truth) acc += px[x] * received(x, xh);
  }
  return std::clamp(acc, 0.0, 1.0);
}

enum class ChannelAxis { flip_prob, snr_db };

struct ExperimentConfig {
  SemanticSource source;
  std::vector<double> lambda_grid{1.0};
  std::vector<double> beta_grid{0.0, 0.1};
  ChannelAxis axis = ChannelAxis::flip_prob;
  std::vector<double> channel_grid{0.0};  // flip probabilities or SNRs in dB
  ChannelKind channel_kind = ChannelKind::awgn;
  std::uint64_t seed = 0;
  MappingMode mapping_mode = MappingMode::argmax;
  SolverConfig solver;
  unsigned threads = 1;

  void validate() const {
    source.validate();
    if (lambda_grid.empty() || beta_grid.empty() || channel_grid.empty()) throw invalid_input("experiment: every grid must be nonempty");
    for (double l : lambda_grid)
      if (!(l > 0.0) || !std::isfinite(l)) throw invalid_input("experiment: lambda must be finite and > 0");
    for (double b : beta_grid)
      if (!(b >= 0.0) || !std::isfinite(b)) throw invalid_input("experiment: beta must be finite and >= 0");
    for (double c : channel_grid) {
      if (axis == ChannelAxis::flip_prob) check_flip_prob(c);
      if (!std::isfinite(c)) throw invalid_input("experiment: channel grid value not finite");
    }
  }
};

struct ExperimentRecord {
  double lambda = 0.0;
  double beta = 0.0;
  double snr_or_flip = 0.0;
  double rate_bits = 0.0;     // I(X;Xhat) of the sent indices
  double entropy_bits = 0.0;  // H(Xhat) of the sent indices
  double mse = 0.0;           // expected pixel distortion after the channel
  double accuracy = 0.0;
  double task_distortion_bits = 0.0;  // I(X;Y) - I(Xhat_rx;Y)
  double i_xhat_y_bits = 0.0;         // I(Xhat_rx;Y)
  std::optional<double> transfer_accuracy;
  bool feasible = true;
  std::string note;

  bool operator==(const ExperimentRecord&) const = default;
};

struct PipelineJoints {
  ConditionalDistribution sent;      // p(xhat|x) of the quantizer
  ConditionalDistribution received;  // sent composed with the index channel
};

inline double flip_for(const ExperimentConfig& cfg, double axis_value, std::size_t alphabet) {
  return cfg.axis == ChannelAxis::flip_prob ? axis_value : flip_prob_for_snr(axis_value, alphabet, cfg.channel_kind);
}

inline PipelineJoints pipeline_joints(const ConditionalDistribution& mapping, MappingMode mode, double flip_prob) {
  const Quantizer q = design_quantizer(mapping, mode);
  return {q.transition, chain(q.transition, index_channel_matrix(mapping.cols(), flip_prob))};
}

namespace detail {

// Information terms below this are summation residue; zero them so emitted tables are stable.
inline double clean_nats(double v) { return v < 1e-12 ? 0.0 : v; }

}  // namespace detail

inline ExperimentRecord score_cell(const SemanticSource& src, const DistortionMatrix& pixel, const PipelineJoints& pj) {
  ExperimentRecord r;
  const JointDistribution sent = joint_from(src.px, pj.sent);
  r.rate_bits = to_bits(detail::clean_nats(mutual_information(sent)));
  r.entropy_bits = to_bits(entropy(sent.marginal_cols()));
  r.rate_bits = std::min(r.rate_bits, r.entropy_bits);
  r.mse = expected_distortion(src.px, pj.received, pixel);
  r.accuracy = exact_accuracy(src.px, src.py_given_x, pj.sent, pj.received);
  const JointDistribution3 j = compose_markov(src.px, src.py_given_x, pj.received);
  const double ixy = mutual_information(j.marginal_x_y());
  const double ixhy = detail::clean_nats(mutual_information(j.marginal_xhat_y()));
  r.i_xhat_y_bits = to_bits(ixhy);
  r.task_distortion_bits = to_bits(std::max(ixy - ixhy, 0.0));
  if (src.alt_py_given_x) r.transfer_accuracy = exact_accuracy(src.px, *src.alt_py_given_x, pj.sent, pj.received);
  return r;
}

inline void sort_records(std::vector<ExperimentRecord>& records) {
  std::stable_sort(records.begin(), records.end(), [](const ExperimentRecord& a, const ExperimentRecord& b) {
    if (a.lambda != b.lambda) return a.lambda < b.lambda;
    if (a.beta != b.beta) return a.beta < b.beta;
    return a.snr_or_flip < b.snr_or_flip;
  });
}

/// One solve per (lambda, beta); every channel value reuses that solution.
inline std::vector<ExperimentRecord> run_pipeline(const ExperimentConfig& cfg) {
  cfg.validate();
  const DistortionMatrix pixel = pixel_distortion(cfg.source);
  struct Cell {
    double lambda, beta;
  };
  std::vector<Cell> cells;
  for (double l : cfg.lambda_grid)
    for (double b : cfg.beta_grid) cells.push_back({l, b});
  std::vector<std::vector<ExperimentRecord>> out(cells.size());
  detail::parallel_for(cells.size(), cfg.threads, [&](std::size_t i) {
    SolverConfig sc = cfg.solver;
    sc.lambda = cells[i].lambda;
    sc.beta = cells[i].beta;
    std::optional<SolverResult> result;
    std::string note;
    try {
      result = solve(cfg.source, pixel, sc);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::infeasible) throw;
      note = e.what();
    }
    for (double c : cfg.channel_grid) {
      ExperimentRecord r;
      if (result) {
        r = score_cell(cfg.source, pixel, pipeline_joints(result->mapping, cfg.mapping_mode, flip_for(cfg, c, pixel.cols())));
        if (!result->converged) r.note = "not converged";
      } else {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        r.rate_bits = r.entropy_bits = r.mse = r.accuracy = r.task_distortion_bits = r.i_xhat_y_bits = nan;
        r.feasible = false;
        r.note = note;
      }
      r.lambda = cells[i].lambda;
      r.beta = cells[i].beta;
      r.snr_or_flip = c;
      out[i].push_back(std::move(r));
    }
  });
  std::vector<ExperimentRecord> records;
  for (auto& v : out) records.insert(records.end(), v.begin(), v.end());
  sort_records(records);
  return records;
}

struct TransferRow {
  double lambda = 0.0;
  double beta = 0.0;
  double task_a_accuracy = 0.0;
  double task_b_accuracy = 0.0;
};

struct TrainedMapping {
  double lambda = 0.0;
  double beta = 0.0;
  ConditionalDistribution mapping;
};

/// Scores stored mappings under both label functions on a clean link, without re-solving.
inline std::vector<TransferRow> transfer_eval(const SemanticSource& src, const std::vector<TrainedMapping>& trained,
                                              MappingMode mode = MappingMode::argmax) {
  if (!src.alt_py_given_x) throw invalid_input("transfer_eval: source has no alternate task");
  std::vector<TransferRow> rows;
  for (const auto& t : trained) {
    if (t.mapping.rows() != src.size_x()) throw dimension_error("transfer_eval: mapping rows != |X|");
    const Quantizer q = design_quantizer(t.mapping, mode);
    rows.push_back({t.lambda, t.beta, exact_accuracy(src.px, src.py_given_x, q.transition, q.transition),
                    exact_accuracy(src.px, *src.alt_py_given_x, q.transition, q.transition)});
  }
  return rows;
}

/// Solves each (lambda, beta) on the primary task, then scores under both tasks.
inline std::vector<TransferRow> transfer_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  const DistortionMatrix pixel = pixel_distortion(cfg.source);
  std::vector<TrainedMapping> trained;
  for (double l : cfg.lambda_grid)
    for (double b : cfg.beta_grid) {
      SolverConfig sc = cfg.solver;
      sc.lambda = l;
      sc.beta = b;
      trained.push_back({l, b, solve(cfg.source, pixel, sc).mapping});
    }
  return transfer_eval(cfg.source, trained, cfg.mapping_mode);
}

// ---------------------------------------------------------------------------
// Emission

inline constexpr const char* kCsvHeader =
    "lambda,beta,snr_or_flip,rate_bits,entropy_bits,mse,accuracy,task_distortion_bits,i_xhat_y_bits,transfer_accuracy";

inline std::string format_g9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline std::string records_to_csv(const std::vector<ExperimentRecord>& records) {
  std::string s = std::string(kCsvHeader) + "\n";
  for (const auto& r : records) {
    for (double v : {r.lambda, r.beta, r.snr_or_flip, r.rate_bits, r.entropy_bits, r.mse, r.accuracy, r.task_distortion_bits,
                     r.i_xhat_y_bits})
      s += format_g9(v) + ",";
    if (r.transfer_accuracy) s += format_g9(*r.transfer_accuracy);
    s += "\n";
  }
  return s;
}

inline json record_to_json(const ExperimentRecord& r) {
  auto num = [](double v) -> json { return std::isfinite(v) ? json(v) : json(nullptr); };
  json j{{"lambda", r.lambda},
         {"beta", r.beta},
         {"snr_or_flip", r.snr_or_flip},
         {"rate_bits", num(r.rate_bits)},
         {"entropy_bits", num(r.entropy_bits)},
         {"mse", num(r.mse)},
         {"accuracy", num(r.accuracy)},
         {"task_distortion_bits", num(r.task_distortion_bits)},
         {"i_xhat_y_bits", num(r.i_xhat_y_bits)},
         {"transfer_accuracy", r.transfer_accuracy ? json(*r.transfer_accuracy) : json(nullptr)},
         {"feasible", r.feasible}};
  if (!r.note.empty()) j["note"] = r.note;
  return j;
}

inline std::string records_to_json(const std::vector<ExperimentRecord>& records) {
  json arr = json::array();
  for (const auto& r : records) arr.push_back(record_to_json(r));
  return arr.dump(2) + "\n";
}

enum class OutputFormat { csv, json };

inline void emit_results(const std::vector<ExperimentRecord>& records, const std::string& path, OutputFormat fmt) {
  write_text_file(path, fmt == OutputFormat::csv ? records_to_csv(records) : records_to_json(records));
}

inline std::vector<ExperimentRecord> parse_records_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw invalid_input("results csv: header mismatch");
  std::vector<ExperimentRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.emplace_back();
    if (cells.size() != 10) throw invalid_input("results csv: expected 10 columns on line " + std::to_string(lineno));
    std::vector<double> v;
    for (std::size_t i = 0; i < 9; ++i) {
      try {
        v.push_back(std::stod(cells[i]));
      } catch (const std::exception&) {
        throw invalid_input("results csv: bad number on line " + std::to_string(lineno));
      }
    }
    ExperimentRecord r{v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8], std::nullopt, true, {}};
    if (!cells[9].empty()) r.transfer_accuracy = std::stod(cells[9]);
    r.feasible = std::isfinite(r.rate_bits);
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<ExperimentRecord> parse_records_json(const std::string& text) {
  const json arr = detail::parse_json_text(text, "results json");
  if (!arr.is_array()) throw invalid_input("results json: expected an array");
  auto num = [](const json& j) { return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>(); };
  std::vector<ExperimentRecord> out;
  for (const auto& j : arr) {
    ExperimentRecord r;
    r.lambda = j.at("lambda").get<double>();
    r.beta = j.at("beta").get<double>();
    r.snr_or_flip = j.at("snr_or_flip").get<double>();
    r.rate_bits = num(j.at("rate_bits"));
    r.entropy_bits = num(j.at("entropy_bits"));
    r.mse = num(j.at("mse"));
    r.accuracy = num(j.at("accuracy"));
    r.task_distortion_bits = num(j.at("task_distortion_bits"));
    r.i_xhat_y_bits = num(j.at("i_xhat_y_bits"));
    if (!j.at("transfer_accuracy").is_null()) r.transfer_accuracy = j["transfer_accuracy"].get<double>();
    r.feasible = j.value("feasible", true);
    r.note = j.value("note", std::string());
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Experiment config file

inline MappingMode parse_mapping_mode(const std::string& s) {
  if (s == "argmax") return MappingMode::argmax;
  if (s == "stochastic") return MappingMode::stochastic;
  throw invalid_input("mapping_mode must be argmax or stochastic, got '" + s + "'");
}

inline ChannelKind parse_channel_kind(const std::string& s) {
  if (s == "awgn") return ChannelKind::awgn;
  if (s == "rayleigh") return ChannelKind::rayleigh;
  throw invalid_input("channel kind must be awgn or rayleigh, got '" + s + "'");
}

inline GeometryConfig geometry_from_json(const json& j) {
  GeometryConfig g;
  g.center_box = j.value("center_box", g.center_box);
  g.symbol_spread = j.value("symbol_spread", g.symbol_spread);
  g.label_softness = j.value("label_softness", g.label_softness);
  g.dirichlet_px = j.value("dirichlet_px", g.dirichlet_px);
  g.alt_task = j.value("alt_task", g.alt_task);
  g.alt_softness = j.value("alt_softness", g.alt_softness);
  g.mean_sq_distance = j.value("mean_sq_distance", g.mean_sq_distance);
  g.labels_follow_clusters = j.value("labels_follow_clusters", g.labels_follow_clusters);
  g.reconstruct_at_centers = j.value("reconstruct_at_centers", g.reconstruct_at_centers);
  return g;
}

/// Fields: source (object) | source_file (path, relative to base_dir) | generate {n_symbols, n_labels, seed, geometry...};
/// lambda_grid, beta_grid, flip_grid | snr_grid (+ channel), seed, mapping_mode, max_iters, tol.
inline ExperimentConfig experiment_from_json(const json& j, const std::string& base_dir = "") {
  if (!j.is_object()) throw invalid_input("experiment config: expected an object");
  ExperimentConfig c;
  try {
    if (j.contains("source")) {
      c.source = source_from_json(j["source"]);
    } else if (j.contains("source_file")) {
      std::string p = j["source_file"].get<std::string>();
      if (!base_dir.empty() && !p.empty() && p[0] != '/') p = base_dir + "/" + p;
      c.source = load_source(p);
    } else if (j.contains("generate")) {
      const json& g = j["generate"];
      c.source = generate_semantic_source(g.value("n_symbols", std::size_t{4}), g.value("n_labels", std::size_t{2}), geometry_from_json(g),
                                          g.value("seed", std::uint64_t{7}));
    } else {
      throw invalid_input("experiment config: needs source, source_file or generate");
    }
    if (j.contains("lambda_grid")) c.lambda_grid = detail::vector_from_json(j["lambda_grid"], "lambda_grid");
    if (j.contains("beta_grid")) c.beta_grid = detail::vector_from_json(j["beta_grid"], "beta_grid");
    if (j.contains("flip_grid") && j.contains("snr_grid")) throw invalid_input("experiment config: give flip_grid or snr_grid, not both");
    if (j.contains("flip_grid")) c.channel_grid = detail::vector_from_json(j["flip_grid"], "flip_grid");
    if (j.contains("snr_grid")) {
      c.axis = ChannelAxis::snr_db;
      c.channel_grid = detail::vector_from_json(j["snr_grid"], "snr_grid");
    }
    if (j.contains("channel")) c.channel_kind = parse_channel_kind(j["channel"].get<std::string>());
    c.seed = j.value("seed", c.seed);
    if (j.contains("mapping_mode")) c.mapping_mode = parse_mapping_mode(j["mapping_mode"].get<std::string>());
    c.solver.max_iters = j.value("max_iters", c.solver.max_iters);
    c.solver.tol = j.value("tol", c.solver.tol);
    c.solver.seed = c.seed;
  } catch (const json::exception& e) {
    throw invalid_input(std::string("experiment config: ") + e.what());
  }
  c.validate();
  return c;
}

}  // namespace semrd
