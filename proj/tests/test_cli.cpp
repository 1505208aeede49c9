#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <gtest/gtest.h>

#include "statseek/cli/commands.hpp"

namespace fs = std::filesystem;
using namespace statseek;
using namespace statseek::cli;

namespace {

const fs::path kSource = STATSEEK_SOURCE_DIR;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("statseek_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int tool(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(STATSEEK_TOOL) + " " + args + " >" + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string config(const std::string& name) { return (kSource / "configs" / name).string(); }

fs::path write(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
  return p;
}

}  // namespace

TEST(Config, BundledConfigsParse) {
  for (const auto& entry : fs::directory_iterator(kSource / "configs")) {
    SCOPED_TRACE(entry.path().string());
    const ExperimentConfig cfg = load_config(entry.path().string());
    const Game g = make_game(cfg.game);
    EXPECT_NO_THROW(g.validate());
  }
}

TEST(Config, InfiniteEqTranscription) {
  const Game g = make_game(load_config(config("infinite_eq.json")).game);
  for (double a : {0.5, 0.7, 1.0}) {
    Eigen::VectorXd x(2);
    x << a, 1 - a;
    EXPECT_LE(stationarity_residual(CollectiveProfile(x, g.partition), g.agents), 1e-14);
  }
}

TEST(Config, Rejections) {
  const fs::path d = scratch("reject");
  EXPECT_THROW(load_config(write(d / "a.json", "{ \"game\": ").string()), ConfigError);
  EXPECT_THROW(load_config(write(d / "b.json", R"({"game": {"type": "quadratic"}, "Kay": 3})").string()), ConfigError);
  EXPECT_THROW(load_config(write(d / "c.json", R"({"game": {"type": "quadratic"}, "K": 10, "K_in": 10})").string()),
               ConfigError);
  EXPECT_THROW(make_game(load_config(write(d / "d.json", R"({"game": {"type": "chess"}})").string()).game),
               ConfigError);
  EXPECT_THROW(make_game(load_config(write(d / "e.json", R"({"game": {"type": "quadratic", "playerz": 3}})").string()).game),
               ConfigError);
}

TEST(Io, FormatRoundTrip) {
  for (double v : {0.1, -1e-300, 123456.789, 1.0 / 3.0}) EXPECT_EQ(parse_double(cli::fmt(v)), v);
  EXPECT_TRUE(std::isnan(parse_double(cli::fmt(kNaN))));
  EXPECT_EQ(parse_double(cli::fmt(-kInf)), -kInf);
  EXPECT_THROW(parse_double("1.5x"), IoError);
}

TEST(Cli, RunIsByteIdenticalForSameSeed) {
  const fs::path a = scratch("run_a"), b = scratch("run_b");
  ASSERT_EQ(tool("run --config " + config("quadratic10.json") + " --seed 7 --out " + a.string(), a / "log"), 0);
  ASSERT_EQ(tool("run --config " + config("quadratic10.json") + " --seed 7 --out " + b.string(), b / "log"), 0);
  EXPECT_EQ(read_file(a / "trace.csv"), read_file(b / "trace.csv"));
  EXPECT_EQ(read_file(a / "verdict.json"), read_file(b / "verdict.json"));
  const auto verdict = nlohmann::json::parse(read_file(a / "verdict.json"));
  EXPECT_TRUE(verdict["converged"].get<bool>());
}

TEST(Cli, BadConfigExitsTwo) {
  const fs::path d = scratch("bad");
  const fs::path malformed = write(d / "m.json", "{ not json");
  EXPECT_EQ(tool("run --config " + malformed.string() + " --out " + d.string(), d / "log"), 2);
  const fs::path unknown = write(d / "u.json", R"({"game": {"type": "quadratic"}, "bogus": 1})");
  EXPECT_EQ(tool("run --config " + unknown.string() + " --out " + d.string(), d / "log"), 2);
  const fs::path empty_grid = write(d / "g.json", R"({"game": {"type": "quadratic"}, "sweep": {"beta": [], "K_in": [10]}})");
  EXPECT_EQ(tool("sweep --config " + empty_grid.string() + " --out " + d.string(), d / "log"), 2);
  EXPECT_EQ(tool("stats --config " + config("quadratic10.json") + " --reps 0 --out " + d.string(), d / "log"), 2);
  EXPECT_EQ(tool("run --config " + (d / "missing.json").string(), d / "log"), 2);
}

TEST(Cli, VerifyDetectsTampering) {
  const fs::path d = scratch("verify");
  ASSERT_EQ(tool("run --config " + config("quadratic10.json") + " --out " + d.string(), d / "log"), 0);
  EXPECT_EQ(tool("verify --trace " + (d / "trace.csv").string() + " --config " + config("quadratic10.json"), d / "v0"), 0);

  // bump the last row's first query entry
  CsvTable t = parse_csv(read_file(d / "trace.csv"));
  const int col = t.column("x_hat_1");
  t.rows.back()[col] = cli::fmt(parse_double(t.rows.back()[col]) + 0.5);
  std::string text;
  for (std::size_t c = 0; c < t.header.size(); ++c) text += (c ? "," : "") + t.header[c];
  text += "\n";
  for (const auto& row : t.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) text += (c ? "," : "") + row[c];
    text += "\n";
  }
  write(d / "trace.csv", text);
  EXPECT_EQ(tool("verify --trace " + (d / "trace.csv").string() + " --config " + config("quadratic10.json"), d / "v1"), 4);
}

TEST(Cli, VerifyNotConvergedHasNoCertificate) {
  const fs::path d = scratch("noeq");
  const fs::path cfg = write(d / "noeq.json", R"({"game": {"type": "no_eq"}, "K": 100, "K_in": 10})");
  ASSERT_EQ(tool("run --config " + cfg.string() + " --out " + d.string(), d / "log"), 0);
  const auto verdict = nlohmann::json::parse(read_file(d / "verdict.json"));
  EXPECT_EQ(verdict["verdict"], "not_converged");
  EXPECT_EQ(tool("verify --trace " + (d / "trace.csv").string() + " --config " + cfg.string(), d / "report"), 0);
  EXPECT_NE(read_file(d / "report").find("no certificate"), std::string::npos);
}

TEST(Cli, TraceColumns) {
  const fs::path d = scratch("columns");
  const fs::path cfg = write(d / "c.json", R"({"game": {"type": "no_eq"}, "K": 12, "K_in": 2})");
  ASSERT_EQ(tool("run --config " + cfg.string() + " --out " + d.string(), d / "log"), 0);
  const CsvTable t = parse_csv(read_file(d / "trace.csv"));
  EXPECT_EQ(t.rows.size(), 12u);
  for (const char* c : {"k", "phase", "x_hat_1", "x_2", "residual", "theta_norm_1", "d_theta_2", "theta_1_2",
                        "lambda_min_H", "kkt_residual", "flags"})
    EXPECT_NO_THROW(t.column(c)) << c;
  EXPECT_EQ(t.rows[0][t.column("phase")], "init");
  EXPECT_EQ(t.rows[2][t.column("phase")], "active");
}

TEST(Cli, SweepAndStatsOutputs) {
  const fs::path d = scratch("sweep");
  const fs::path cfg = write(d / "s.json", R"({"game": {"type": "quadratic"}, "K": 30, "K_in": 5,
    "sweep": {"beta": [0, 1], "K_in": [5, 10]}, "reps": 2})");
  ASSERT_EQ(tool("sweep --config " + cfg.string() + " --out " + (d / "a").string() + " --parallel 1", d / "log"), 0);
  ASSERT_EQ(tool("sweep --config " + cfg.string() + " --out " + (d / "b").string() + " --parallel 3", d / "log"), 0);
  EXPECT_EQ(read_file(d / "a" / "grid.csv"), read_file(d / "b" / "grid.csv"));
  const CsvTable grid = parse_csv(read_file(d / "a" / "grid.csv"));
  EXPECT_EQ(grid.rows.size(), 4u * 30u);

  ASSERT_EQ(tool("stats --config " + cfg.string() + " --reps 4 --out " + (d / "s1").string(), d / "log"), 0);
  ASSERT_EQ(tool("stats --config " + cfg.string() + " --reps 4 --parallel 2 --out " + (d / "s2").string(), d / "log"), 0);
  EXPECT_EQ(read_file(d / "s1" / "stats.json"), read_file(d / "s2" / "stats.json"));
  const auto stats = nlohmann::json::parse(read_file(d / "s1" / "stats.json"));
  EXPECT_EQ(stats["reps"], 4);
}
