// semrd command-line front end.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "semrd/semrd.hpp"

namespace {

using namespace semrd;

constexpr const char* kDescription = R"(Semantic rate-distortion toolkit.

Objective convention: the solver minimizes
    L = lambda * I(X;Xhat) + D_R + beta * D_T
and its mapping update is p(xhat|x) proportional to p(xhat) exp(-d_S/lambda),
d_S = d_RD + beta * KL(p(y|x) || p(y|xhat)). A larger lambda buys less rate.
The form R + lambda' * D_R + beta' * D_T maps onto this one with
lambda = 1/lambda' and beta = beta'/lambda'.

Reported quality is MSE (expected squared embedding distance), not PSNR:
symbols are points, not pixel arrays, so there is no peak value to normalize by.

Exit codes: 0 ok, 2 invalid input, 3 infeasible instance, 4 I/O error.)";

struct Globals {
  std::uint64_t seed = 0;
  std::string out = "-";
  std::string format = "csv";
  unsigned threads = 1;
};

struct SourceArgs {
  std::string path;
  std::vector<std::size_t> generate;  // n_symbols n_labels
};

void add_source_options(CLI::App* sub, SourceArgs& a) {
  auto* p = sub->add_option("--source", a.path, "Source JSON (px, py_given_x, embeddings, ...)");
  auto* g = sub->add_option("--generate", a.generate, "Generate a synthetic source: N_SYMBOLS N_LABELS (uses --seed)")->expected(2);
  p->excludes(g);
}

SemanticSource source_from(const SourceArgs& a, const Globals& g) {
  if (!a.path.empty()) return load_source(a.path);
  if (a.generate.size() == 2) return generate_semantic_source(a.generate[0], a.generate[1], GeometryConfig{}, g.seed);
  throw invalid_input("give --source FILE or --generate N_SYMBOLS N_LABELS");
}

void write_output(const Globals& g, const std::string& text) {
  if (g.out == "-") {
    std::cout << text;
    std::cout.flush();
    return;
  }
  write_text_file(g.out, text);
}

OutputFormat output_format(const Globals& g) {
  if (g.format == "csv") return OutputFormat::csv;
  if (g.format == "json") return OutputFormat::json;
  throw invalid_input("--format must be csv or json");
}

std::string g9(double v) { return format_g9(v); }

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

// ---------------------------------------------------------------------------

struct SolveArgs {
  SourceArgs source;
  double lambda = 1.0;
  double beta = 0.0;
  int max_iters = 10000;
  double tol = 1e-10;
  std::string init = "uniform";
};

SolverConfig solver_config(const SolveArgs& a, const Globals& g) {
  SolverConfig c;
  c.lambda = a.lambda;
  c.beta = a.beta;
  c.max_iters = a.max_iters;
  c.tol = a.tol;
  c.seed = g.seed;
  if (a.init == "uniform")
    c.init_pxhat = InitMode::uniform;
  else if (a.init == "random")
    c.init_pxhat = InitMode::seeded_random;
  else
    throw invalid_input("--init must be uniform or random");
  c.validate();
  return c;
}

void run_solve(const SolveArgs& a, const Globals& g) {
  const SemanticSource src = source_from(a.source, g);
  const SolverConfig cfg = solver_config(a, g);
  const SolverResult r = solve(src, pixel_distortion(src), cfg);
  const RDPoint p = to_rd_point(src, r, cfg.lambda, cfg.beta);
  json j{{"lambda", cfg.lambda},
         {"beta", cfg.beta},
         {"rate_bits", p.rate_bits},
         {"pixel_distortion", p.pixel_distortion},
         {"task_distortion_bits", p.task_distortion_bits},
         {"i_xhat_y_bits", p.task_mi_bits},
         {"lagrangian", r.lagrangian},
         {"iterations", r.iterations},
         {"converged", r.converged},
         {"monotone", r.monotone},
         {"residual", r.residual},
         {"support", r.support},
         {"mapping", r.mapping.matrix().to_rows()},
         {"pxhat", r.pxhat.values()},
         {"py_given_xhat", r.py_given_xhat.matrix().to_rows()}};
  write_output(g, j.dump(2) + "\n");
}

struct CurveArgs {
  SolveArgs solve;
  std::vector<double> lambdas;
};

void run_rd_curve(const CurveArgs& a, const Globals& g) {
  const SemanticSource src = source_from(a.solve.source, g);
  const SolverConfig cfg = solver_config(a.solve, g);
  const auto points = rd_curve(src, pixel_distortion(src), a.lambdas, cfg.beta, cfg, g.threads);
  if (output_format(g) == OutputFormat::csv) {
    std::string s = "lambda,beta,rate_bits,pixel_distortion,task_distortion_bits,i_xhat_y_bits,converged,feasible\n";
    for (const auto& p : points)
      s += g9(p.lambda) + "," + g9(p.beta) + "," + g9(p.rate_bits) + "," + g9(p.pixel_distortion) + "," + g9(p.task_distortion_bits) +
           "," + g9(p.task_mi_bits) + "," + (p.converged ? "1" : "0") + "," + (p.feasible ? "1" : "0") + "\n";
    write_output(g, s);
    return;
  }
  json arr = json::array();
  for (const auto& p : points) {
    json j{{"lambda", p.lambda},
           {"beta", p.beta},
           {"rate_bits", p.rate_bits},
           {"pixel_distortion", p.pixel_distortion},
           {"task_distortion_bits", p.task_distortion_bits},
           {"i_xhat_y_bits", p.task_mi_bits},
           {"converged", p.converged},
           {"feasible", p.feasible}};
    if (!p.note.empty()) j["note"] = p.note;
    arr.push_back(j);
  }
  write_output(g, arr.dump(2) + "\n");
}

std::string parent_dir(const std::string& path) {
  const auto slash = path.find_last_of('/');
  return slash == std::string::npos ? std::string() : path.substr(0, slash);
}

ExperimentConfig load_experiment(const std::string& path, const Globals& g) {
  ExperimentConfig c = experiment_from_json(detail::parse_json_text(read_text_file(path), path), parent_dir(path));
  c.threads = g.threads;
  return c;
}

void run_pipeline_cmd(const std::string& config, const Globals& g) {
  const auto records = run_pipeline(load_experiment(config, g));
  write_output(g, output_format(g) == OutputFormat::csv ? records_to_csv(records) : records_to_json(records));
}

void run_transfer(const std::string& config, const Globals& g) {
  const auto rows = transfer_sweep(load_experiment(config, g));
  if (output_format(g) == OutputFormat::csv) {
    std::string s = "lambda,beta,task_a_accuracy,task_b_accuracy\n";
    for (const auto& r : rows) s += g9(r.lambda) + "," + g9(r.beta) + "," + g9(r.task_a_accuracy) + "," + g9(r.task_b_accuracy) + "\n";
    write_output(g, s);
    return;
  }
  json arr = json::array();
  for (const auto& r : rows)
    arr.push_back({{"lambda", r.lambda}, {"beta", r.beta}, {"task_a_accuracy", r.task_a_accuracy}, {"task_b_accuracy", r.task_b_accuracy}});
  write_output(g, arr.dump(2) + "\n");
}

void run_mi_club(const std::string& input, const Globals& g) {
  std::ifstream in(input);
  if (!in) throw io_error("cannot open '" + input + "' for reading");
  const SampleSet s = read_samples_csv(in);
  const GaussianConditionalModel m = fit_gaussian_conditional(s);
  const ClubEstimate e = club_estimate(s, m, g.seed);
  json j{{"samples", s.size()},
         {"club_nats", e.nats},
         {"club_bits", to_bits(e.nats)},
         {"exact_cross_term", e.exact_cross_term},
         {"cross_pairs", e.cross_pairs},
         {"ridge_fallback", m.ridge_fallback}};
  write_output(g, j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------

std::vector<double> read_reals(const std::string& path) {
  const std::string text = read_text_file(path);
  std::istringstream in(text);
  std::vector<double> v;
  std::string tok;
  while (in >> tok) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw invalid_input("'" + path + "': not a number: " + tok);
    }
  }
  return v;
}

struct CodecArgs {
  std::string model;
  std::string in;
  std::size_t components = 3;
};

void run_codec_encode(const CodecArgs& a, const Globals& g) {
  if (g.out == "-") throw invalid_input("codec encode: --out FILE is required");
  const std::vector<double> raw = read_reals(a.in);
  const SymbolStream stream = quantize_inference(raw);
  GmmPmfModel model;
  if (!a.model.empty()) {
    model = gmm_from_json(detail::parse_json_text(read_text_file(a.model), a.model));
  } else {
    std::vector<double> xs(raw.begin(), raw.end());
    EmConfig em;
    em.seed = g.seed;
    model = fit_gmm_pmf(xs, a.components, em).model;
  }
  const BitPayload p = arithmetic_encode(stream, model);
  std::ofstream out(g.out, std::ios::binary);
  if (!out) throw io_error("cannot open '" + g.out + "' for writing");
  out.write(reinterpret_cast<const char*>(p.bytes.data()), static_cast<std::streamsize>(p.bytes.size()));
  if (!out) throw io_error("write failed on '" + g.out + "'");
  std::fprintf(stderr, "symbols %zu  bytes %zu  header %zu  rate_loss_bits %.3f\n", stream.values.size(), p.bytes.size(),
               p.header_bytes, rate_loss(model, stream));
}

void run_codec_decode(const CodecArgs& a, const Globals& g) {
  const std::string bytes = read_text_file(a.in);
  const DecodedPayload d = arithmetic_decode(std::span(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
  std::string s;
  for (std::int32_t v : d.stream.values) s += std::to_string(v) + "\n";
  write_output(g, s);
}

// ---------------------------------------------------------------------------

struct SerArgs {
  std::string mod = "bpsk";
  std::string kind = "awgn";
  std::vector<double> snr_db{0.0, 5.0, 10.0};
  std::uint64_t n = 1000000;
  std::string csi = "perfect";
  std::string fading = "symbol";
  std::size_t block_len = 4096;
};

void run_channel_ser(const SerArgs& a, const Globals& g) {
  const Modulation mod = a.mod == "bpsk" ? Modulation::bpsk : a.mod == "qam16" ? Modulation::qam16 : throw invalid_input("--mod must be bpsk or qam16");
  ChannelConfig base;
  base.kind = parse_channel_kind(a.kind);
  base.csi = a.csi == "perfect" ? Csi::perfect : a.csi == "none" ? Csi::none : throw invalid_input("--csi must be perfect or none");
  if (a.fading != "symbol" && a.fading != "block") throw invalid_input("--fading must be symbol or block");
  base.per_symbol_fading = a.fading == "symbol";
  std::string s = "mod,kind,snr_db,symbols,ser,ber,analytic_ser,analytic_ber\n";
  json arr = json::array();
  for (std::size_t i = 0; i < a.snr_db.size(); ++i) {
    ChannelConfig c = base;
    c.snr_db = a.snr_db[i];
    c.seed = trial_seed(g.seed, i);
    const ErrorRateMeasurement m = measure_error_rates(mod, c, a.n, a.block_len);
    const double gl = db_to_linear(c.snr_db);
    double aser = std::numeric_limits<double>::quiet_NaN(), aber = aser;
    if (mod == Modulation::bpsk && c.kind == ChannelKind::awgn) aser = aber = bpsk_awgn_ber(gl);
    if (mod == Modulation::bpsk && c.kind == ChannelKind::rayleigh && c.per_symbol_fading && c.csi == Csi::perfect)
      aser = aber = bpsk_rayleigh_ber(gl);
    if (mod == Modulation::qam16 && c.kind == ChannelKind::awgn) aser = qam16_awgn_ser(gl);
    s += a.mod + "," + a.kind + "," + g9(c.snr_db) + "," + std::to_string(m.symbols) + "," + g9(m.ser()) + "," + g9(m.ber()) + "," +
         (std::isfinite(aser) ? g9(aser) : "") + "," + (std::isfinite(aber) ? g9(aber) : "") + "\n";
    arr.push_back({{"mod", a.mod},
                   {"kind", a.kind},
                   {"snr_db", c.snr_db},
                   {"symbols", m.symbols},
                   {"ser", m.ser()},
                   {"ber", m.ber()},
                   {"analytic_ser", number_or_null(aser)},
                   {"analytic_ber", number_or_null(aber)}});
  }
  write_output(g, output_format(g) == OutputFormat::csv ? s : arr.dump(2) + "\n");
}

struct OracleArgs {
  SolveArgs solve;
  double step = 0.05;
};

void run_oracle(const OracleArgs& a, const Globals& g) {
  const SemanticSource src = source_from(a.solve.source, g);
  const SolverConfig cfg = solver_config(a.solve, g);
  const DistortionMatrix pixel = pixel_distortion(src);
  const BruteForceResult o = brute_force_solve(src, pixel, cfg, a.step);
  const SolverResult r = solve(src, pixel, cfg);
  json j{{"oracle_lagrangian", o.lagrangian},
         {"solver_lagrangian", r.lagrangian},
         {"gap", r.lagrangian - o.lagrangian},
         {"candidates", o.candidates},
         {"method", o.method == OracleMethod::mapping_grid ? "mapping_grid" : "dual_grid"},
         {"oracle_mapping", o.mapping.matrix().to_rows()}};
  write_output(g, j.dump(2) + "\n");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{kDescription, "semrd"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Seed for every random choice");
  app.add_option("--out", g.out, "Output path, '-' for stdout");
  app.add_option("--format", g.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--threads", g.threads, "Worker threads for sweeps")->check(CLI::Range(1u, 1024u));

  SolveArgs solve_args;
  auto add_solver_options = [](CLI::App* sub, SolveArgs& a, bool with_lambda) {
    add_source_options(sub, a.source);
    if (with_lambda) sub->add_option("--lambda", a.lambda, "Rate multiplier (> 0); exponent scale of the mapping update");
    sub->add_option("--beta", a.beta, "Task-distortion weight (>= 0)");
    sub->add_option("--max-iters", a.max_iters, "Iteration cap");
    sub->add_option("--tol", a.tol, "Stop when |dL| < tol");
    sub->add_option("--init", a.init, "Initial p(xhat): uniform or random")->check(CLI::IsMember({"uniform", "random"}));
  };
  auto* solve_cmd = app.add_subcommand("solve", "Run the alternating solver once; JSON result");
  add_solver_options(solve_cmd, solve_args, true);

  CurveArgs curve_args;
  auto* curve_cmd = app.add_subcommand("rd-curve", "Solve along a lambda grid");
  add_solver_options(curve_cmd, curve_args.solve, false);
  curve_cmd->add_option("--lambdas", curve_args.lambdas, "Lambda grid")->required()->delimiter(',');

  std::string pipeline_config;
  auto* pipeline_cmd = app.add_subcommand("pipeline", "Quantize, send through the index channel, classify; one record per grid cell");
  pipeline_cmd->add_option("--config", pipeline_config, "Experiment JSON")->required();

  std::string transfer_config;
  auto* transfer_cmd = app.add_subcommand("transfer", "Score mappings trained on task A under the alternate task B");
  transfer_cmd->add_option("--config", transfer_config, "Experiment JSON (source must carry alt_py_given_x)")->required();

  std::string club_input;
  auto* club_cmd = app.add_subcommand("mi-club", "CLUB mutual-information estimate with a linear-Gaussian q(y|x)");
  club_cmd->add_option("--input", club_input, "CSV with header x0,...,y0,...")->required();

  CodecArgs codec_args;
  auto* codec_cmd = app.add_subcommand("codec", "Entropy-code integer symbols with a Gaussian-mixture PMF");
  codec_cmd->require_subcommand(1);
  auto* enc_cmd = codec_cmd->add_subcommand("encode", "Round reals to integers and range-code them");
  enc_cmd->add_option("--model", codec_args.model, "Model JSON {weights, means, scales}; fitted by EM when omitted");
  enc_cmd->add_option("--components", codec_args.components, "Mixture size when fitting")->check(CLI::Range(1, 255));
  enc_cmd->add_option("--in", codec_args.in, "Whitespace-separated values")->required();
  auto* dec_cmd = codec_cmd->add_subcommand("decode", "Decode a payload to one integer per line");
  dec_cmd->add_option("--in", codec_args.in, "Payload file")->required();

  SerArgs ser_args;
  auto* channel_cmd = app.add_subcommand("channel", "Channel characterization");
  channel_cmd->require_subcommand(1);
  auto* ser_cmd = channel_cmd->add_subcommand("ser", "Measure uncoded symbol and bit error rates");
  ser_cmd->add_option("--mod", ser_args.mod, "bpsk or qam16")->check(CLI::IsMember({"bpsk", "qam16"}));
  ser_cmd->add_option("--kind", ser_args.kind, "awgn or rayleigh")->check(CLI::IsMember({"awgn", "rayleigh"}));
  ser_cmd->add_option("--snr-db", ser_args.snr_db, "SNR list in dB")->delimiter(',');
  ser_cmd->add_option("--n", ser_args.n, "Symbols per SNR");
  ser_cmd->add_option("--csi", ser_args.csi, "perfect or none")->check(CLI::IsMember({"perfect", "none"}));
  ser_cmd->add_option("--fading", ser_args.fading, "Rayleigh gain per symbol or per block")->check(CLI::IsMember({"symbol", "block"}));
  ser_cmd->add_option("--block-len", ser_args.block_len, "Symbols per block")->check(CLI::Range(std::size_t{1}, std::size_t{1} << 30));

  OracleArgs oracle_args;
  auto* oracle_cmd = app.add_subcommand("oracle", "Grid-search optimum of the Lagrangian on a tiny instance, next to the solver's");
  add_solver_options(oracle_cmd, oracle_args.solve, true);
  oracle_cmd->add_option("--step", oracle_args.step, "Simplex grid step (1/step must be an integer)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*solve_cmd) run_solve(solve_args, g);
    else if (*curve_cmd) run_rd_curve(curve_args, g);
    else if (*pipeline_cmd) run_pipeline_cmd(pipeline_config, g);
    else if (*transfer_cmd) run_transfer(transfer_config, g);
    else if (*club_cmd) run_mi_club(club_input, g);
    else if (*enc_cmd) run_codec_encode(codec_args, g);
    else if (*dec_cmd) run_codec_decode(codec_args, g);
    else if (*ser_cmd) run_channel_ser(ser_args, g);
    else if (*oracle_cmd) run_oracle(oracle_args, g);
  } catch (const Error& e) {
    std::fprintf(stderr, "semrd: %s\n", e.what());
    return exit_code_for(e.kind());
  } catch (const json::exception& e) {
    std::fprintf(stderr, "semrd: invalid JSON: %s\n", e.what());
    return 2;
  } catch (const std::bad_alloc&) {
    std::fprintf(stderr, "semrd: out of memory\n");
    return 2;
  }
  return 0;
}
