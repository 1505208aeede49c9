#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/cfg/helpers.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "statseek/cli/commands.hpp"

using namespace statseek::cli;

namespace {

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("statseek");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* level = std::getenv("STATSEEK_LOG")) spdlog::cfg::helpers::load_levels(level);
}

void common_flags(CLI::App* cmd, CommonOptions& o, bool with_reps) {
  cmd->add_option("--config", o.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "master seed");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--parallel", o.parallel, "max worker threads");
  if (with_reps) cmd->add_option("--reps", o.reps, "replications per cell");
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"statseek: learning stationary profiles of multi-agent systems by querying reactions"};
  app.require_subcommand(1);

  CommonOptions run_o, sweep_o, stats_o, verify_o;
  std::string trace;
  auto* run = app.add_subcommand("run", "single run; writes trace.csv and verdict.json");
  common_flags(run, run_o, false);
  auto* sweep = app.add_subcommand("sweep", "(beta, K_in) grid; writes grid.csv");
  common_flags(sweep, sweep_o, true);
  auto* stats = app.add_subcommand("stats", "replication statistics; writes stats.json");
  common_flags(stats, stats_o, true);
  auto* verify = app.add_subcommand("verify", "re-check a trace against live agents");
  verify->add_option("--trace", trace, "trace.csv of a finished run")->required();
  verify->add_option("--config", verify_o.config, "experiment config used for the run")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kBadConfig;
  }

  if (*run) return cmd_run(run_o);
  if (*sweep) return cmd_sweep(sweep_o);
  if (*stats) return cmd_stats(stats_o);
  if (*verify) return cmd_verify(trace, verify_o);
  return kBadConfig;
}
