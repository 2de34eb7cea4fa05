#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

#include "oracles/oracles.hpp"
#include "semrd/semrd.hpp"

using namespace semrd;
namespace fs = std::filesystem;

namespace {

SemanticSource reference() { return generate_semantic_source(4, 2, GeometryConfig{}, 7); }

fs::path scratch_dir() {
  const fs::path p = fs::temp_directory_path() / ("semrd_tests_" + std::to_string(::getpid()));
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_cli(const std::string& args, const fs::path& out) {
  const std::string cmd = std::string(SEMRD_CLI) + " " + args + " > " + out.string() + " 2> " + out.string() + ".err";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

ExperimentConfig reference_config() {
  ExperimentConfig c;
  c.source = reference();
  c.lambda_grid = {0.5, 1.0};
  c.beta_grid = {0.0, 2.0, 50.0};
  c.channel_grid = {0.0, 0.1, 0.3, 0.5};
  c.seed = 7;
  return c;
}

}  // namespace

// ---------------------------------------------------------------- source generation

TEST(Experiments, ReferenceSourceShape) {
  const SemanticSource s = reference();
  EXPECT_EQ(s.size_x(), 4u);
  EXPECT_EQ(s.size_y(), 2u);
  EXPECT_EQ(s.size_xhat(), 2u);
  ASSERT_TRUE(s.alt_py_given_x.has_value());
  const json golden = json::parse(slurp(fs::path(SEMRD_GOLDEN_DIR) / "reference.json"));
  const double ixy = to_bits(mutual_information(joint_from(s.px, s.py_given_x)));
  EXPECT_GT(ixy, 0.0);
  EXPECT_NEAR(ixy, golden["source"]["i_x_y_bits"].get<double>(), 1e-12);
  std::size_t per_label[2] = {0, 0};
  for (std::size_t x = 0; x < 4; ++x) ++per_label[argmax_index(s.py_given_x.row(x))];
  EXPECT_EQ(per_label[0], 2u);
  EXPECT_EQ(per_label[1], 2u);
  EXPECT_EQ(source_to_json(s), json::parse(slurp(fs::path(SEMRD_GOLDEN_DIR) / "reference_source.json")));
}

TEST(Experiments, GenerationIsDeterministic) {
  EXPECT_EQ(source_to_json(reference()), source_to_json(reference()));
  EXPECT_NE(source_to_json(reference()), source_to_json(generate_semantic_source(4, 2, GeometryConfig{}, 8)));
  GeometryConfig d;
  d.dirichlet_px = true;
  EXPECT_EQ(source_to_json(generate_semantic_source(6, 3, d, 1)), source_to_json(generate_semantic_source(6, 3, d, 1)));
}

TEST(Experiments, HardLabelsOnePerSymbolGiveFullInformation) {
  GeometryConfig g;
  g.label_softness = 0.0;
  g.labels_follow_clusters = true;
  const SemanticSource s = generate_semantic_source(5, 5, g, 3);
  EXPECT_NEAR(mutual_information(joint_from(s.px, s.py_given_x)), entropy(s.px), 1e-12);
}

TEST(Experiments, GenerationRejectsBadSizes) {
  EXPECT_THROW(generate_semantic_source(1, 1, GeometryConfig{}, 0), Error);
  EXPECT_THROW(generate_semantic_source(2, 3, GeometryConfig{}, 0), Error);
  GeometryConfig g;
  g.label_softness = 1.0;
  EXPECT_THROW(generate_semantic_source(4, 2, g, 0), Error);
}

TEST(Experiments, SourceJsonRoundTrip) {
  const SemanticSource s = reference();
  const SemanticSource back = source_from_json(source_to_json(s));
  EXPECT_EQ(back.px, s.px);
  EXPECT_EQ(back.py_given_x, s.py_given_x);
  EXPECT_EQ(back.embeddings, s.embeddings);
  EXPECT_EQ(*back.xhat_embeddings, *s.xhat_embeddings);
  EXPECT_THROW(source_from_json(json::parse(R"({"px": [0.5, 0.5]})")), Error);
  EXPECT_THROW(source_from_json(json::parse(R"({"px": [0.5, 0.5], "py_given_x": [[1, 0]], "d_rd": [[0]]})")), Error);
}

// ---------------------------------------------------------------- quantizer

TEST(Experiments, QuantizerArgmaxAndTies) {
  const ConditionalDistribution m = ConditionalDistribution::from_rows({{0.5, 0.5}, {0.1, 0.9}, {0.98, 0.02}});
  const Quantizer q = design_quantizer(m, MappingMode::argmax);
  EXPECT_EQ(q.index, (std::vector<std::size_t>{0, 1, 0}));
  const std::vector<std::size_t> xs{0, 1, 2, 2};
  EXPECT_EQ(q.apply(xs), (std::vector<std::size_t>{0, 1, 0, 0}));
  EXPECT_THROW(q.apply(std::vector<std::size_t>{3}), Error);
}

TEST(Experiments, StochasticQuantizerFrequencies) {
  const ConditionalDistribution m = ConditionalDistribution::from_rows({{0.2, 0.5, 0.3}});
  const Quantizer q = design_quantizer(m, MappingMode::stochastic);
  const std::vector<std::size_t> xs(100000, 0);
  const auto out = q.apply(xs, 99);
  EXPECT_EQ(out, q.apply(xs, 99));
  double counts[3] = {0, 0, 0};
  for (std::size_t v : out) counts[v] += 1.0;
  for (int j = 0; j < 3; ++j) {
    const double p = m(0, j);
    EXPECT_NEAR(counts[j] / 1e5, p, 3.0 * std::sqrt(p * (1 - p) / 1e5));
  }
}

// ---------------------------------------------------------------- pipeline

TEST(Experiments, TransparentPipeline) {
  ExperimentConfig c;
  c.source = reference();
  c.source.xhat_embeddings.reset();
  c.lambda_grid = {1e-3};
  c.beta_grid = {0.0};
  const auto recs = run_pipeline(c);
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_NEAR(recs[0].accuracy, 1.0, 1e-12);
  EXPECT_NEAR(recs[0].mse, 0.0, 1e-9);
  EXPECT_NEAR(recs[0].rate_bits, 2.0, 1e-9);
}

TEST(Experiments, ReferenceTradeoffMatchesGolden) {
  const json golden = json::parse(slurp(fs::path(SEMRD_GOLDEN_DIR) / "reference.json"))["tradeoff"];
  ExperimentConfig c;
  c.source = reference();
  c.beta_grid = {0.0, 2.0};
  c.mapping_mode = MappingMode::stochastic;
  const auto recs = run_pipeline(c);
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_GT(recs[1].i_xhat_y_bits, recs[0].i_xhat_y_bits);
  EXPECT_GT(recs[1].mse, recs[0].mse);
  EXPECT_NEAR(recs[0].i_xhat_y_bits, golden["beta0_i_xhat_y_bits"].get<double>(), 1e-9);
  EXPECT_NEAR(recs[1].mse, golden["beta2_mse"].get<double>(), 1e-9);
}

TEST(Experiments, RecordInvariantsAndChannelDegradation) {
  const auto recs = run_pipeline(reference_config());
  ASSERT_EQ(recs.size(), 2u * 3u * 4u);
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const auto& r = recs[i];
    EXPECT_TRUE(r.feasible);
    EXPECT_LE(r.rate_bits, r.entropy_bits + 1e-9);
    EXPECT_LE(r.entropy_bits, 1.0 + 1e-12);
    EXPECT_GE(r.accuracy, 0.0);
    EXPECT_LE(r.accuracy, 1.0);
    ASSERT_TRUE(r.transfer_accuracy.has_value());
    if (i % 4 != 0) {
      EXPECT_LE(r.accuracy, recs[i - 1].accuracy + 1e-12);
      EXPECT_LE(r.i_xhat_y_bits, recs[i - 1].i_xhat_y_bits + 1e-12);
    }
  }
  // flip 0.5 on two indices makes the received index independent of x: label-prior baseline
  EXPECT_NEAR(recs[3].accuracy, 0.5, 1e-12);
  EXPECT_NEAR(recs[3].i_xhat_y_bits, 0.0, 1e-12);
}

TEST(Experiments, ReceivedInformationNeverExceedsSent) {
  const SemanticSource s = reference();
  SolverConfig sc;
  sc.beta = 2.0;
  const SolverResult r = solve(s, pixel_distortion(s), sc);
  for (double f : {0.0, 0.05, 0.2, 0.6}) {
    const PipelineJoints pj = pipeline_joints(r.mapping, MappingMode::stochastic, f);
    EXPECT_LE(mutual_information(joint_from(s.px, pj.received)), mutual_information(joint_from(s.px, pj.sent)) + 1e-9);
  }
}

TEST(Experiments, BetaZeroMatchesClassicalPipeline) {
  ExperimentConfig c = reference_config();
  c.beta_grid = {0.0};
  c.mapping_mode = MappingMode::stochastic;
  const auto recs = run_pipeline(c);
  const SemanticSource s = reference();
  const DistortionMatrix pixel = pixel_distortion(s);
  for (const auto& r : recs) {
    const oracle::ClassicalBa ba = oracle::classical_ba(s.px.values(), pixel.costs().to_rows(), r.lambda, 20000);
    const ExperimentRecord want =
        score_cell(s, pixel, pipeline_joints(ConditionalDistribution::from_rows(ba.mapping), c.mapping_mode, r.snr_or_flip));
    EXPECT_NEAR(r.mse, want.mse, 1e-8);
    EXPECT_NEAR(r.accuracy, want.accuracy, 1e-8);
    EXPECT_NEAR(r.rate_bits, want.rate_bits, 1e-8);
    EXPECT_NEAR(r.i_xhat_y_bits, want.i_xhat_y_bits, 1e-8);
  }
}

TEST(Experiments, ThreadsDoNotChangeResults) {
  ExperimentConfig c = reference_config();
  const auto one = run_pipeline(c);
  c.threads = 4;
  EXPECT_EQ(records_to_csv(one), records_to_csv(run_pipeline(c)));
  EXPECT_EQ(records_to_json(one), records_to_json(run_pipeline(c)));
}

TEST(Experiments, SnrAxis) {
  ExperimentConfig c = reference_config();
  c.axis = ChannelAxis::snr_db;
  c.channel_grid = {0.0, 30.0};
  c.channel_kind = ChannelKind::rayleigh;
  const auto recs = run_pipeline(c);
  EXPECT_GE(recs[1].accuracy, recs[0].accuracy);
  EXPECT_NEAR(flip_for(c, 30.0, 2), flip_prob_for_snr(30.0, 2, ChannelKind::rayleigh), 0.0);
}

TEST(Experiments, GridValidation) {
  ExperimentConfig c;
  c.source.px = Distribution::uniform(2);
  c.source.py_given_x = ConditionalDistribution::identity(2);
  c.source.d_rd = Matrix::from_rows({{0.0, 1.0}, {1.0, 0.0}});
  c.lambda_grid = {1.0};
  c.beta_grid = {0.0};
  const auto recs = run_pipeline(c);
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_TRUE(recs[0].feasible);
  c.beta_grid = {-1.0};
  EXPECT_THROW(run_pipeline(c), Error);
  c.beta_grid = {0.0};
  c.channel_grid = {1.0};
  EXPECT_THROW(run_pipeline(c), Error);
}

// ---------------------------------------------------------------- transfer

TEST(Experiments, TransferReference) {
  const json golden = json::parse(slurp(fs::path(SEMRD_GOLDEN_DIR) / "reference.json"))["transfer"];
  const SemanticSource s = reference();
  std::vector<TrainedMapping> trained;
  for (double b : {0.0, 0.5, 10.0, 50.0}) {
    SolverConfig sc;
    sc.beta = b;
    trained.push_back({1.0, b, solve(s, pixel_distortion(s), sc).mapping});
  }
  const auto rows = transfer_eval(s, trained);
  EXPECT_GE(rows[1].task_b_accuracy, rows[2].task_b_accuracy);
  EXPECT_GE(rows[1].task_b_accuracy, rows[3].task_b_accuracy);
  EXPECT_EQ(rows[1].task_b_accuracy, golden["moderate_task_b_accuracy"].get<double>());
  EXPECT_EQ(rows[3].task_b_accuracy, golden["extreme_task_b_accuracy"].get<double>());

  SemanticSource swapped = s;
  std::swap(*swapped.alt_py_given_x, swapped.py_given_x);
  const auto blind = transfer_eval(swapped, {trained[0]});
  EXPECT_EQ(blind[0].task_a_accuracy, rows[0].task_b_accuracy);
  EXPECT_EQ(blind[0].task_b_accuracy, rows[0].task_a_accuracy);

  const auto id = transfer_eval(s, {{1.0, 0.0, ConditionalDistribution::identity(4)}});
  EXPECT_EQ(id[0].task_b_accuracy, 1.0);
  SemanticSource no_alt = s;
  no_alt.alt_py_given_x.reset();
  EXPECT_THROW(transfer_eval(no_alt, trained), Error);
}

// ---------------------------------------------------------------- emission

TEST(Experiments, EmptyRecordsEmitHeaderOnly) {
  EXPECT_EQ(records_to_csv({}), std::string(kCsvHeader) + "\n");
  EXPECT_TRUE(parse_records_csv(records_to_csv({})).empty());
}

TEST(Experiments, EmissionRoundTrips) {
  auto recs = run_pipeline(reference_config());
  recs.push_back(recs.front());
  recs.back().transfer_accuracy.reset();
  EXPECT_EQ(parse_records_json(records_to_json(recs)), recs);
  const auto back = parse_records_csv(records_to_csv(recs));
  ASSERT_EQ(back.size(), recs.size());
  EXPECT_EQ(records_to_csv(back), records_to_csv(recs));
  for (std::size_t i = 0; i < recs.size(); ++i) {
    EXPECT_NEAR(back[i].mse, recs[i].mse, 1e-8 * std::max(1.0, std::abs(recs[i].mse)));
    EXPECT_EQ(back[i].transfer_accuracy.has_value(), recs[i].transfer_accuracy.has_value());
  }
}

TEST(Experiments, EmitToFileAndIoErrors) {
  const fs::path dir = scratch_dir();
  const auto recs = run_pipeline(reference_config());
  emit_results(recs, (dir / "r.csv").string(), OutputFormat::csv);
  EXPECT_EQ(slurp(dir / "r.csv"), records_to_csv(recs));
  try {
    emit_results(recs, (dir / "missing" / "r.csv").string(), OutputFormat::csv);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::io);
  }
  EXPECT_THROW(load_source((dir / "nope.json").string()), Error);
}

TEST(Experiments, ConfigParsing) {
  const ExperimentConfig c = experiment_from_json(json::parse(slurp(fs::path(SEMRD_GOLDEN_DIR) / "pipeline_config.json")));
  EXPECT_EQ(c.beta_grid, (std::vector<double>{0.0, 2.0, 50.0}));
  EXPECT_EQ(source_to_json(c.source), source_to_json(reference()));
  EXPECT_THROW(experiment_from_json(json::parse(R"({"lambda_grid": [1]})")), Error);
  EXPECT_THROW(experiment_from_json(json::parse(R"({"generate": {}, "flip_grid": [0], "snr_grid": [1]})")), Error);
  EXPECT_THROW(experiment_from_json(json::parse(R"({"generate": {}, "mapping_mode": "fuzzy"})")), Error);
  EXPECT_THROW(experiment_from_json(json::parse(R"({"generate": {}, "lambda_grid": [0]})")), Error);
}

// ---------------------------------------------------------------- CLI

TEST(Cli, GoldenPipelineCsvIsByteIdentical) {
  const fs::path dir = scratch_dir();
  const std::string cfg = (fs::path(SEMRD_GOLDEN_DIR) / "pipeline_config.json").string();
  ASSERT_EQ(run_cli("pipeline --config " + cfg, dir / "p.csv"), 0);
  EXPECT_EQ(slurp(dir / "p.csv"), slurp(fs::path(SEMRD_GOLDEN_DIR) / "pipeline.csv"));
  ASSERT_EQ(run_cli("--threads 4 --out " + (dir / "q.csv").string() + " pipeline --config " + cfg, dir / "q.log"), 0);
  EXPECT_EQ(slurp(dir / "q.csv"), slurp(fs::path(SEMRD_GOLDEN_DIR) / "pipeline.csv"));
}

TEST(Cli, ExitCodes) {
  const fs::path dir = scratch_dir();
  EXPECT_EQ(run_cli("--help", dir / "o"), 0);
  EXPECT_EQ(run_cli("solve --generate 4 2 --lambda 1 --beta 2", dir / "o"), 0);
  EXPECT_NO_THROW(json::parse(slurp(dir / "o")));
  EXPECT_EQ(run_cli("solve --generate 4 2 --lambda -1", dir / "o"), 2);
  EXPECT_EQ(run_cli("bogus", dir / "o"), 2);
  EXPECT_EQ(run_cli("solve --source " + (dir / "absent.json").string(), dir / "o"), 4);
  EXPECT_EQ(run_cli("pipeline --config " + (dir / "absent.json").string(), dir / "o"), 4);

  std::ofstream(dir / "bad.json") << "{not json";
  EXPECT_EQ(run_cli("solve --source " + (dir / "bad.json").string(), dir / "o"), 2);

  std::ofstream(dir / "inf.json") << R"({"px": [0.5, 0.5], "py_given_x": [[1, 0], [0, 1]], "d_rd": [[0, 1], [1, 0]]})";
  EXPECT_EQ(run_cli("solve --source " + (dir / "inf.json").string() + " --beta 1", dir / "o"), 0);
}

TEST(Cli, CodecRoundTrip) {
  const fs::path dir = scratch_dir();
  std::ofstream(dir / "vals.txt") << "0.2 1.7 -3.4 2.5 0.5 8 -1 4.49 3 3 -2 0.9\n";
  ASSERT_EQ(run_cli("codec encode --components 1 --in " + (dir / "vals.txt").string() + " --out " + (dir / "p.bin").string(), dir / "o"),
            0);
  ASSERT_EQ(run_cli("codec decode --in " + (dir / "p.bin").string(), dir / "d.txt"), 0);
  EXPECT_EQ(slurp(dir / "d.txt"), "0\n2\n-3\n2\n0\n8\n-1\n4\n3\n3\n-2\n1\n");
  std::ofstream(dir / "junk.bin") << "SRDC-garbage";
  EXPECT_EQ(run_cli("codec decode --in " + (dir / "junk.bin").string(), dir / "o"), 2);
}

TEST(Cli, OtherSubcommandsRun) {
  const fs::path dir = scratch_dir();
  EXPECT_EQ(run_cli("rd-curve --generate 4 2 --lambdas 0.5,1,2", dir / "o"), 0);
  EXPECT_EQ(run_cli("--format json transfer --config " + (fs::path(SEMRD_GOLDEN_DIR) / "pipeline_config.json").string(), dir / "o"), 0);
  EXPECT_EQ(run_cli("channel ser --mod bpsk --kind awgn --snr-db 0,5 --n 20000", dir / "o"), 0);
  EXPECT_EQ(run_cli("oracle --generate 4 2 --step 0.1", dir / "o"), 0);
  std::ofstream(dir / "pairs.csv") << "x0,y0\n0,0.1\n1,0.9\n2,2.2\n3,2.8\n4,4.1\n";
  EXPECT_EQ(run_cli("mi-club --input " + (dir / "pairs.csv").string(), dir / "o"), 0);
}
