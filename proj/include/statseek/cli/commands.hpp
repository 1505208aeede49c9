#pragma once

// run / sweep / stats / verify. Each returns a process exit code:
//   0 ok, 1 I/O failure, 2 bad config, 3 solver abort, 4 verify mismatch.

#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "statseek/cli/config.hpp"
#include "statseek/cli/io.hpp"
#include "statseek/engine.hpp"
#include "statseek/oracle.hpp"
#include "statseek/query.hpp"

namespace statseek::cli {

enum ExitCode { kOk = 0, kIoFailure = 1, kBadConfig = 2, kSolverAbort = 3, kVerifyMismatch = 4 };

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> reps;
  std::optional<int> parallel;
};

namespace detail {

struct Loaded {
  ExperimentConfig cfg;
  Game game;
  std::filesystem::path out;
};

inline Loaded load(const CommonOptions& opts) {
  ExperimentConfig cfg = load_config(opts.config);
  if (opts.seed) cfg.run.seed = *opts.seed;
  if (opts.reps) cfg.reps = *opts.reps;
  if (opts.parallel) {
    if (*opts.parallel < 1) throw ConfigError("--parallel must be >= 1");
    cfg.parallel = *opts.parallel;
  }
  Game game;
  try {
    game = make_game(cfg.game);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("game: ") + e.what());
  }
  const int n = game.partition.total();
  if (cfg.run.range_lower && (cfg.run.range_lower->size() != n || cfg.run.range_upper->size() != n)) {
    throw ConfigError("config.range: expected length " + std::to_string(n));
  }
  std::filesystem::path out = opts.out ? *opts.out : cfg.out;
  return {std::move(cfg), std::move(game), std::move(out)};
}

template <class Fn>
int guarded(const char* name, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    spdlog::debug("{}: {}", name, e.what());
    std::cerr << "config error: " << e.what() << '\n';
    return kBadConfig;
  } catch (const RunAborted& e) {
    spdlog::debug("{}: run aborted: {}", name, e.what());
    std::cerr << "solver abort: " << e.what() << '\n';
    return kSolverAbort;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kIoFailure;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kIoFailure;
  } catch (const Error& e) {
    std::cerr << "solver abort: " << e.what() << '\n';
    return kSolverAbort;
  }
}

}  // namespace detail

inline int cmd_run(const CommonOptions& opts) {
  return detail::guarded("run", [&] {
    auto [cfg, game, out] = detail::load(opts);
    RunConfig rc = cfg.run;
    rc.seed = derive_seed(cfg.run.seed, 0);
    spdlog::info("run {}: K={} K_in={} beta={} seed={}", game.name, rc.K, rc.K_in, rc.beta, cfg.run.seed);
    try {
      RunResult r = run(rc, game);
      nlohmann::json v = verdict_json(r.verdict, rc, game.name);
      v["master_seed"] = cfg.run.seed;
      write_atomic(out / "trace.csv", trace_csv(r.trace));
      write_atomic(out / "verdict.json", dump(v));
      std::cout << dump(v);
      spdlog::info("run {}: {}", game.name, v["verdict"].get<std::string>());
      return static_cast<int>(kOk);
    } catch (const RunAborted& e) {
      nlohmann::json v;
      v["game"] = game.name;
      v["verdict"] = "aborted";
      v["converged"] = false;
      v["error"] = e.what();
      v["iterations_used"] = e.trace.records.size();
      v["master_seed"] = cfg.run.seed;
      write_atomic(out / "trace.csv", trace_csv(e.trace));
      write_atomic(out / "verdict.json", dump(v));
      throw;
    }
  });
}

inline int cmd_sweep(const CommonOptions& opts) {
  return detail::guarded("sweep", [&] {
    auto [cfg, game, out] = detail::load(opts);
    if (!cfg.has_sweep || cfg.sweep_beta.empty() || cfg.sweep_k_in.empty()) {
      throw ConfigError("config.sweep: beta and K_in grids must be non-empty");
    }
    if (cfg.reps < 1) throw ConfigError("reps must be >= 1");
    for (int k_in : cfg.sweep_k_in) {
      if (k_in < 0 || k_in >= cfg.run.K) throw ConfigError("config.sweep.K_in: values must satisfy 0 <= K_in < K");
    }
    for (double b : cfg.sweep_beta) {
      if (!(b >= 0)) throw ConfigError("config.sweep.beta: values must be >= 0");
    }
    spdlog::info("sweep {}: {}x{} cells, {} reps", game.name, cfg.sweep_beta.size(), cfg.sweep_k_in.size(), cfg.reps);
    const auto cells = sweep(cfg.run, game, cfg.sweep_beta, cfg.sweep_k_in, cfg.reps, cfg.parallel);
    nlohmann::json summary;
    summary["game"] = game.name;
    summary["reps"] = cfg.reps;
    summary["master_seed"] = cfg.run.seed;
    summary["cells"] = nlohmann::json::array();
    for (const auto& c : cells) summary["cells"].push_back({{"beta", c.beta}, {"K_in", c.K_in}, {"failed", c.failed}});
    write_atomic(out / "grid.csv", grid_csv(cells));
    write_atomic(out / "sweep.json", dump(summary));
    std::cout << dump(summary);
    return static_cast<int>(kOk);
  });
}

inline int cmd_stats(const CommonOptions& opts) {
  return detail::guarded("stats", [&] {
    auto [cfg, game, out] = detail::load(opts);
    if (cfg.reps < 1) throw ConfigError("reps must be >= 1");
    spdlog::info("stats {}: {} reps", game.name, cfg.reps);
    const StatsResult st = stats(cfg.run, game, cfg.reps, cfg.parallel);
    std::optional<agents::LqrInstance> lqr;
    if (cfg.game.type == "lqr_random") lqr = lqr_instance(cfg.game);

    nlohmann::json j;
    j["game"] = game.name;
    j["reps"] = st.reps;
    j["failed"] = st.failed;
    j["master_seed"] = cfg.run.seed;
    j["percent_converged"] = st.percent_converged;
    j["min_lambda_min_H"] = jnum(st.min_lambda_converged);
    j["certificates_positive"] = st.certificates_positive;
    j["same_profile"] = st.same_profile;
    j["profile_tol"] = st.profile_tol;
    j["runs"] = nlohmann::json::array();
    for (int r = 0; r < st.reps; ++r) {
      const Verdict& v = st.verdicts[r];
      nlohmann::json run;
      run["rep"] = r;
      run["seed"] = derive_seed(cfg.run.seed, static_cast<std::uint64_t>(r));
      run["status"] = st.run_failed[r] ? "failed" : (v.converged ? "converged" : "not_converged");
      run["iterations_used"] = v.iterations_used;
      run["final_residual"] = jnum(v.final_residual);
      run["final_stationarity"] = jnum(v.final_stationarity);
      run["lambda_min_H"] = jnum(v.lambda_min_H);
      if (lqr && v.converged) {
        run["closed_loop_spectral_radius"] = agents::spectral_radius(lqr->closed_loop(v.final_query));
      }
      j["runs"].push_back(std::move(run));
    }
    write_atomic(out / "stats.json", dump(j));
    nlohmann::json brief = j;
    brief.erase("runs");
    std::cout << dump(brief);
    return static_cast<int>(kOk);
  });
}

/// Re-checks a finished run against the live agents.
inline int cmd_verify(const std::string& trace_path, const CommonOptions& opts) {
  return detail::guarded("verify", [&]() -> int {
    auto [cfg, game, out] = detail::load(opts);
    (void)out;
    const CsvTable t = parse_csv(read_file(trace_path));
    if (t.rows.empty()) throw IoError("trace has no rows");
    const std::filesystem::path verdict_path = std::filesystem::path(trace_path).parent_path() / "verdict.json";
    nlohmann::json verdict;
    try {
      verdict = nlohmann::json::parse(read_file(verdict_path));
    } catch (const nlohmann::json::exception& e) {
      throw IoError("malformed verdict.json: " + std::string(e.what()));
    }

    const Partition& P = game.partition;
    const int n = P.total();
    const auto& last = t.rows.back();
    Eigen::VectorXd x_hat(n), x(n);
    for (int j = 0; j < n; ++j) {
      x_hat[j] = parse_double(last[t.column("x_hat_" + std::to_string(j + 1))]);
      x[j] = parse_double(last[t.column("x_" + std::to_string(j + 1))]);
    }
    const double recorded_residual = parse_double(last[t.column("residual")]);
    const double recorded_lambda = parse_double(last[t.column("lambda_min_H")]);

    nlohmann::json report;
    report["trace"] = trace_path;
    report["notes"] = nlohmann::json::array();
    bool ok = true;
    auto fail = [&](const std::string& why) {
      ok = false;
      report["notes"].push_back(why);
    };

    Eigen::VectorXd live(n);
    for (int i = 0; i < P.agents(); ++i) live.segment(P.offset(i), P.size(i)) = game.agents[i]->react(P.complement(x_hat, i)).action;
    const double reaction_gap = (live - x).lpNorm<Eigen::Infinity>();
    if (!(reaction_gap <= 1e-9 * (1.0 + x.lpNorm<Eigen::Infinity>()))) fail("recorded reactions differ from live agents");
    if (std::abs((x_hat - x).norm() - recorded_residual) > 1e-12 * (1.0 + recorded_residual)) {
      fail("recorded residual inconsistent with recorded columns");
    }
    if (!contains(game.omega, x_hat, cfg.run.tol_feas)) fail("final query outside the feasible set");

    const double stationarity = stationarity_residual(CollectiveProfile(x_hat, P), game.agents);
    report["stationarity_residual"] = jnum(stationarity);
    report["reaction_gap"] = jnum(reaction_gap);

    const bool converged = verdict.value("converged", false);
    report["converged"] = converged;
    if (verdict.contains("final_query") && verdict["final_query"].is_array()) {
      Eigen::VectorXd vq(n);
      if (static_cast<int>(verdict["final_query"].size()) != n) {
        fail("verdict final_query has the wrong length");
      } else {
        for (int j = 0; j < n; ++j) vq[j] = verdict["final_query"][j].is_number() ? verdict["final_query"][j].get<double>() : kNaN;
        if (!((vq - x_hat).lpNorm<Eigen::Infinity>() <= 1e-12 * (1.0 + x_hat.lpNorm<Eigen::Infinity>()))) {
          fail("verdict final_query differs from the trace");
        }
      }
    }

    if (!converged) {
      report["notes"].push_back("no certificate");
    } else {
      const double tol = verdict.value("tol_conv", cfg.run.tol_conv);
      if (!(stationarity <= 10.0 * tol)) fail("final query is not stationary");
      std::vector<AffineSurrogate> surrogates;
      for (int i = 0; i < P.agents(); ++i) {
        const int p = P.size(i) * (P.complement_size(i) + 1);
        Eigen::VectorXd th(p);
        for (int j = 0; j < p; ++j) th[j] = parse_double(last[t.column("theta_" + std::to_string(i + 1) + "_" + std::to_string(j + 1))]);
        surrogates.push_back(AffineSurrogate::from_theta(th, P.size(i)));
      }
      const double lam = lambda_min(build_query_problem(surrogates, P, game.omega).H);
      report["lambda_min_H"] = jnum(lam);
      if (!(std::abs(lam - recorded_lambda) <= 1e-9 * (1.0 + std::abs(lam)))) fail("lambda_min(H) does not match the trace");
      if (verdict.value("unique_certificate", false) && !(lam > 0)) fail("certificate claims uniqueness but lambda_min(H) <= 0");
    }
    report["consistent"] = ok;
    std::cout << dump(report);
    return ok ? static_cast<int>(kOk) : static_cast<int>(kVerifyMismatch);
  });
}

}  // namespace statseek::cli
