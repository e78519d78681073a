#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <json.hpp>

#include "dsmis/cli.hpp"
#include "dsmis/estimator.hpp"
#include "dsmis/ism.hpp"
#include "dsmis/dsm.hpp"
#include "dsmis/seqcore.hpp"

using namespace dsmis;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// First `lines` lines of a text.
std::string head(const std::string& text, int lines) {
  std::size_t pos = 0;
  for (int i = 0; i < lines && pos != std::string::npos; ++i) {
    pos = text.find('\n', pos);
    if (pos != std::string::npos) ++pos;
  }
  return text.substr(0, pos);
}

fs::path temp_path(const std::string& name) {
  return fs::path(::testing::TempDir()) / ("dsmis_cli_" + name);
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  for (std::string cell; std::getline(in, cell, ',');) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

const std::vector<std::string> kEstimate = {"estimate", "--x",    "TTCATT", "--y",  "TTTGTT",
                                            "--lambda", "0.5",    "--T",    "0.2",  "--N",
                                            "2000",     "--seed", "7",      "--workers", "2"};

}  // namespace

TEST(Cli, Help) {
  const Result r = run_cli({"--help"});
  EXPECT_EQ(r.code, cli::kExitOk);
  EXPECT_NE(r.out.find("estimate"), std::string::npos);
}

TEST(Cli, NoSubcommand) { EXPECT_EQ(run_cli({}).code, cli::kExitUsage); }

TEST(Cli, EstimateJson) {
  const Result r = run_cli(kEstimate);
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  const json j = json::parse(r.out);
  EXPECT_EQ(j["n"], 6);
  EXPECT_EQ(j["r"], 2);
  EXPECT_EQ(j["model"], "jc69+cpg");
  EXPECT_EQ(j["N"], 2000);
  EXPECT_TRUE(j["log_p_hat"].is_number());
  EXPECT_FALSE(j.contains("wall_time"));
  EXPECT_GT(j["ess"].get<double>(), 0.0);
}

TEST(Cli, EstimateMatchesLibrary) {
  const Result r = run_cli(kEstimate);
  ASSERT_EQ(r.code, cli::kExitOk);
  RunConfig cfg;
  cfg.N = 2000;
  cfg.seed = 7;
  cfg.workers = 2;
  const EstimateReport lib =
      estimate(make_cpg_model({0.5, 1.0}),
               SequencePair(Sequence::parse("TTCATT"), Sequence::parse("TTTGTT")), 0.2, cfg);
  EXPECT_EQ(json::parse(r.out)["log_p_hat"].get<double>(), lib.log_p_hat);
}

TEST(Cli, EstimateUnitLambda) {
  const Result r = run_cli({"estimate", "--x", "TTCATT", "--y", "TTTGTT", "--lambda", "1", "--T",
                            "0.2", "--N", "500"});
  ASSERT_EQ(r.code, cli::kExitOk);
  const json j = json::parse(r.out);
  EXPECT_EQ(j["cv2"].get<double>(), 0.0);
  EXPECT_EQ(j["ess"].get<double>(), 500.0);
  EXPECT_EQ(j["log_p_hat"].get<double>(), j["log_p_ism"].get<double>());
}

TEST(Cli, EstimateTiming) {
  std::vector<std::string> args = kEstimate;
  args.push_back("--timing");
  const Result r = run_cli(args);
  ASSERT_EQ(r.code, cli::kExitOk);
  EXPECT_TRUE(json::parse(r.out).contains("wall_time"));
}

TEST(Cli, EstimateMedianOfBatches) {
  std::vector<std::string> args = kEstimate;
  args.insert(args.end(), {"--delta", "0.5"});
  const Result r = run_cli(args);
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  EXPECT_EQ(json::parse(r.out)["batches"].size(), 7u);
}

TEST(Cli, EstimateSampleSize) {
  std::vector<std::string> args = kEstimate;
  args.insert(args.end(), {"--epsilon", "0.1"});
  const json j = json::parse(run_cli(args).out);
  EXPECT_EQ(j["n_star_figure"].get<std::uint64_t>(),
            chebychev_sample_size(0.1, j["l2_hat"].get<double>()));
}

TEST(Cli, EstimateFromFasta) {
  const fs::path fasta = temp_path("pair.fa");
  std::ofstream(fasta) << ">x\nTTCATT\n>y\nTTTGTT\n";
  const Result a = run_cli({"estimate", "--fasta", fasta.string(), "--lambda", "0.5", "--T", "0.2",
                            "--N", "2000", "--seed", "7", "--workers", "2"});
  ASSERT_EQ(a.code, cli::kExitOk) << a.err;
  EXPECT_EQ(a.out, run_cli(kEstimate).out);
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run_cli({"estimate", "--x", "ACGT", "--y", "ACGA"}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({"estimate", "--x", "ACGT", "--y", "ACGA", "--T", "0.1", "--model", "gtr"}).code,
            cli::kExitUsage);
  EXPECT_EQ(run_cli({"estimate", "--x", "ACGT", "--y", "ACG", "--T", "0.1"}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({"estimate", "--x", "ACGT", "--y", "ACGA", "--T", "abc"}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({"estimate", "--x", "ACGT", "--y", "ACGA", "--T", "0.1", "--bogus"}).code,
            cli::kExitUsage);
  EXPECT_EQ(run_cli({"estimate", "--fasta", "/nonexistent/x.fa", "--T", "0.1"}).code,
            cli::kExitUsage);
  const Result missing = run_cli({"estimate", "--x", "ACGT", "--y", "ACGA"});
  EXPECT_NE(missing.err.find("T"), std::string::npos);
}

TEST(Cli, UnderflowingEndpointIsNumericFailure) {
  // p(C | A) is about rate T / 3, below the smallest normal double.
  const Result r = run_cli({"estimate", "--x", "ACA", "--y", "CCA", "--T", "1e-300", "--base-rate", "1e-12"});
  EXPECT_EQ(r.code, cli::kExitNumeric) << r.err;
  EXPECT_NE(r.err.find("numerical failure"), std::string::npos);
}

TEST(Cli, ConfigFileAndFlagPrecedence) {
  const fs::path cfg = temp_path("run.json");
  std::ofstream(cfg) << R"({"x": "TTCATT", "y": "TTTGTT", "lambda": 0.5, "T": 0.2, "N": 2000,
                           "seed": 7, "workers": 2})";
  const Result file_only = run_cli({"estimate", "--config", cfg.string()});
  ASSERT_EQ(file_only.code, cli::kExitOk) << file_only.err;
  EXPECT_EQ(file_only.out, run_cli(kEstimate).out);

  const Result overridden = run_cli({"estimate", "--config", cfg.string(), "--seed", "8", "--N", "300"});
  ASSERT_EQ(overridden.code, cli::kExitOk);
  const json j = json::parse(overridden.out);
  EXPECT_EQ(j["seed"], 8);
  EXPECT_EQ(j["N"], 300);
  EXPECT_EQ(j["lambda"], 0.5);
}

TEST(Cli, DashedConfigKeys) {
  const fs::path cfg = temp_path("bound.json");
  std::ofstream(cfg) << R"({"lambda": [0.5], "r_islands": 1, "t_mult": [0.5], "base_rate": 1.0})";
  const Result r = run_cli({"bound", "--config", cfg.string()});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  EXPECT_EQ(split_lines(r.out).size(), 2u + 3u);
}

TEST(Cli, WorkersFromEnvironment) {
  ::setenv("DSMIS_WORKERS", "3", 1);
  EXPECT_EQ(cli::default_workers(), 3u);
  const Result r = run_cli({"estimate", "--x", "TTCATT", "--y", "TTTGTT", "--T", "0.2", "--N", "30"});
  EXPECT_EQ(json::parse(r.out)["workers"], 3);
  ::setenv("DSMIS_WORKERS", "0", 1);
  EXPECT_EQ(cli::default_workers(), 1u);
  ::unsetenv("DSMIS_WORKERS");
  EXPECT_EQ(cli::default_workers(), 1u);
}

TEST(Cli, EstimateCsvGoldenHeader) {
  std::vector<std::string> args = kEstimate;
  args.insert(args.end(), {"--format", "csv"});
  const Result r = run_cli(args);
  ASSERT_EQ(r.code, cli::kExitOk);
  EXPECT_EQ(head(r.out, 2), slurp(fs::path(DSMIS_GOLDEN_DIR) / "estimate_rows.csv"));
  const auto lines = split_lines(r.out);
  ASSERT_EQ(lines.size(), 3u);
  const auto cells = split_csv(lines[2]);
  ASSERT_EQ(cells.size(), 11u);
  EXPECT_EQ(cells[0], "6");
  EXPECT_EQ(cells[2], "0.2");
  EXPECT_EQ(cells[3], "0.5");
  EXPECT_EQ(cells[4], "2000");
  EXPECT_EQ(cells[10], "");
  EXPECT_EQ(std::stod(cells[6]), json::parse(run_cli(kEstimate).out)["log_p_hat"].get<double>());
}

TEST(Cli, BoundsGolden) {
  const Result r = run_cli({"bound", "--r-islands", "1", "--lambda", "0.5,2", "--t-mult", "0.25,1"});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  EXPECT_EQ(head(r.out, 2), slurp(fs::path(DSMIS_GOLDEN_DIR) / "bounds.csv"));
  EXPECT_EQ(r.out, slurp(fs::path(DSMIS_GOLDEN_DIR) / "bounds_island1.csv"));
}

TEST(Cli, BoundsJsonConstants) {
  const Result r = run_cli({"bound", "--r-islands", "2", "--lambda", "0.5", "--T", "0.05", "--json",
                            "--kind", "prop3,theorem3"});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  const json rows = json::parse(r.out);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0]["kind"], "prop3-l2");
  for (const char* key : {"theta_cg", "log_mgf", "mgf", "p_r", "log_p_r"})
    EXPECT_TRUE(rows[0]["constants"].contains(key)) << key;
  for (const char* key : {"theta", "c", "c_prime"})
    EXPECT_TRUE(rows[1]["constants"].contains(key)) << key;
  EXPECT_TRUE(rows[1]["rate_extremes"].contains("delta_tilde"));
}

TEST(Cli, BoundsNeedTime) {
  EXPECT_EQ(run_cli({"bound", "--r-islands", "1", "--lambda", "0.5"}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({"bound", "--r-islands", "1", "--T", "0.1", "--kind", "lemma9"}).code,
            cli::kExitUsage);
}

TEST(Cli, IslandWithOracle) {
  const Result r = run_cli({"island", "--r-islands", "1", "--lambda", "0.5", "--T", "0.2", "--N",
                            "20000", "--seed", "3"});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  const json j = json::parse(r.out);
  EXPECT_EQ(j["oracle_status"], "exact");
  EXPECT_LE(j["relative_error"].get<double>(), 0.05);
  EXPECT_LE(j["prop4_l2"].get<double>(), j["prop3"]["value"].get<double>());
}

TEST(Cli, IslandOracleSkippedWhenLarge) {
  const Result r = run_cli({"island", "--r-islands", "4", "--lambda", "0.5", "--t-mult", "0.5",
                            "--N", "500", "--format", "csv"});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  EXPECT_EQ(head(r.out, 2), slurp(fs::path(DSMIS_GOLDEN_DIR) / "island.csv"));
  const auto cells = split_csv(split_lines(r.out)[2]);
  ASSERT_EQ(cells.size(), 16u);
  EXPECT_EQ(cells[1], "18");
  EXPECT_EQ(cells[10], "");
  EXPECT_EQ(cells[11], "skipped: state space 4^18 exceeds limit");
}

TEST(Cli, IslandUnitLambda) {
  const json j = json::parse(
      run_cli({"island", "--r-islands", "2", "--lambda", "1", "--T", "0.1", "--N", "200"}).out);
  EXPECT_EQ(j["prop4_l2"].get<double>(), 1.0);
  EXPECT_EQ(j["island_kl"].get<double>(), 0.0);
  EXPECT_EQ(j["estimate"]["cv2"].get<double>(), 0.0);
}

TEST(Cli, OracleWithOrderings) {
  const fs::path table = temp_path("orderings.csv");
  const Result r = run_cli({"oracle", "--x", "TTCATT", "--y", "TTTGTT", "--lambda", "0.5", "--T",
                            "0.2", "--orderings", table.string()});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  const json j = json::parse(r.out);
  EXPECT_GT(j["p"].get<double>(), 0.0);
  EXPECT_EQ(j["orderings"]["count"], 2);
  const std::string csv = slurp(table);
  EXPECT_EQ(head(csv, 2), slurp(fs::path(DSMIS_GOLDEN_DIR) / "orderings.csv"));
  const auto lines = split_lines(csv);
  ASSERT_EQ(lines.size(), 4u);
  EXPECT_EQ(lines[2], "3 4,1,0.6666666666666666");
  EXPECT_EQ(lines[3], "4 3,0.5,0.3333333333333333");
}

TEST(Cli, OracleStateLimit) {
  EXPECT_EQ(run_cli({"oracle", "--x", "TTCATTCA", "--y", "TTTGTTCA", "--T", "0.2"}).code,
            cli::kExitUsage);
}

namespace {

const std::vector<std::string> kSmallFigure = {"figure", "--n", "64", "--r", "2,4", "--t-mult",
                                               "0.5,1", "--replicates", "3", "--N", "200",
                                               "--seed", "5", "--workers", "2"};

}  // namespace

TEST(CliFigure, DeterministicCsv) {
  const Result a = run_cli(kSmallFigure);
  ASSERT_EQ(a.code, cli::kExitOk) << a.err;
  EXPECT_EQ(a.out, run_cli(kSmallFigure).out);
  EXPECT_EQ(head(a.out, 2), slurp(fs::path(DSMIS_GOLDEN_DIR) / "figure.csv"));
  EXPECT_EQ(split_lines(a.out).size(), 2u + 4u);
  std::vector<std::string> one_worker = kSmallFigure;
  one_worker.back() = "1";
  EXPECT_EQ(a.out, run_cli(one_worker).out);
}

TEST(CliFigure, UnitLambdaIsFlat) {
  std::vector<std::string> args = kSmallFigure;
  args.insert(args.end(), {"--lambda", "1"});
  const auto lines = split_lines(run_cli(args).out);
  ASSERT_EQ(lines.size(), 6u);
  for (std::size_t i = 2; i < lines.size(); ++i) {
    const auto cells = split_csv(lines[i]);
    EXPECT_EQ(cells[12], "1");
    EXPECT_EQ(cells[15], "10000");
    EXPECT_EQ(cells[16], "10000");
    EXPECT_EQ(cells[17], "10000");
  }
}

TEST(CliFigure, BudgetAndResume) {
  std::vector<std::string> args = kSmallFigure;
  args.insert(args.end(), {"--budget-seconds", "0"});
  const Result partial = run_cli(args);
  ASSERT_EQ(partial.code, cli::kExitOk) << partial.err;
  const auto lines = split_lines(partial.out);
  ASSERT_FALSE(lines.empty());
  ASSERT_EQ(lines.back().rfind("# resume: ", 0), 0u);
  const std::size_t resume = std::stoul(lines.back().substr(10));
  EXPECT_LT(resume, 4u);
  EXPECT_EQ(lines.size(), 2u + resume + 1u);

  // Rows computed after resuming equal the rows of an uninterrupted run.
  std::vector<std::string> rest = kSmallFigure;
  rest.insert(rest.end(), {"--resume", std::to_string(resume)});
  const auto full = split_lines(run_cli(kSmallFigure).out);
  const auto tail = split_lines(run_cli(rest).out);
  ASSERT_EQ(tail.size(), 2u + 4u - resume);
  for (std::size_t i = 2; i < tail.size(); ++i) EXPECT_EQ(tail[i], full[i + resume]);
}

TEST(CliFigure, SvgPlot) {
  const fs::path svg = temp_path("figure.svg");
  std::vector<std::string> args = kSmallFigure;
  args.insert(args.end(), {"--svg", svg.string()});
  ASSERT_EQ(run_cli(args).code, cli::kExitOk);
  const std::string text = slurp(svg);
  EXPECT_EQ(text.rfind("<svg", 0), 0u);
  EXPECT_NE(text.find("<polyline"), std::string::npos);
  EXPECT_NE(text.find("stroke-dasharray"), std::string::npos);
  EXPECT_NE(text.find("</svg>"), std::string::npos);
}

TEST(CliFigure, BadGrid) {
  EXPECT_EQ(run_cli({"figure", "--n", "64", "--r", "3"}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({"figure", "--n", "8", "--r", "4"}).code, cli::kExitUsage);
}

TEST(Schema, EstimateReportKeys) {
  const json schema = json::parse(slurp(fs::path(DSMIS_SCHEMA_DIR) / "estimate_report.schema.json"));
  const json report = json::parse(run_cli(kEstimate).out);
  for (const auto& key : schema["required"]) EXPECT_TRUE(report.contains(key.get<std::string>())) << key;
  for (const auto& [key, value] : report.items())
    EXPECT_TRUE(schema["properties"].contains(key)) << key;
  EXPECT_EQ(report["schema"], schema["properties"]["schema"]["const"]);
}
