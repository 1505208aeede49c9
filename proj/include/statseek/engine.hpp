#pragma once

// The active learning loop. Each iteration k:
//   1. the surrogates theta^k already include every pair up to k - 1;
//   2. the observer picks the query x_hat^k (a projected random draw during
//      the passive phase, the min-norm element of M(theta^k) afterwards);
//   3. agents react with x_i^k = f_i(x_hat^k_{-i});
//   4. (x_hat^k_{-i}, x_i^k) is fed to agent i's Kalman bank.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "statseek/agents/oracle.hpp"
#include "statseek/errors.hpp"
#include "statseek/oracle.hpp"
#include "statseek/profiles.hpp"
#include "statseek/projection.hpp"
#include "statseek/query.hpp"
#include "statseek/surrogate.hpp"

namespace statseek {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct RunConfig {
  int K = 100;
  int K_in = 10;
  double alpha = 1e9;
  double beta = 1.0;
  std::uint64_t seed = 1;
  double tol_conv = 1e-6;
  double tol_theta = 1e-6;
  int window = 5;
  double eig_tol = kDefaultEigTol;
  double tikhonov_eps = kDefaultTikhonovEps;
  double tol_feas = kDefaultTolFeas;
  bool early_stop = true;
  /// Overrides the game's range estimate m^-, m^+ when set.
  std::optional<Eigen::VectorXd> range_lower;
  std::optional<Eigen::VectorXd> range_upper;

  void validate() const {
    if (K < 1) throw Error("K must be >= 1");
    if (K_in < 0 || K_in >= K) throw Error("K_in must satisfy 0 <= K_in < K");
    if (!(alpha > 0)) throw Error("alpha must be > 0");
    if (!(beta >= 0)) throw Error("beta must be >= 0");
    if (!(tol_conv > 0) || !(tol_theta > 0)) throw Error("tolerances must be > 0");
    if (window < 1) throw Error("window must be >= 1");
    if (range_lower && range_upper && (range_lower->array() > range_upper->array()).any()) {
      throw Error("range estimate: lower > upper");
    }
  }
};

enum class Phase { kInit, kActive };

inline const char* to_string(Phase p) { return p == Phase::kInit ? "init" : "active"; }

struct IterationRecord {
  int k = 0;
  Phase phase = Phase::kInit;
  Eigen::VectorXd query;
  Eigen::VectorXd reaction;
  double residual = 0.0;
  /// Parameters that produced this iteration's query, one vector per agent.
  std::vector<Eigen::VectorXd> theta;
  std::vector<double> theta_norm;
  /// ||theta_i^k - theta_i^{k-1}||.
  std::vector<double> d_theta;
  double lambda_min_H = kNaN;
  double kkt_residual = kNaN;
  bool unique_certificate = false;
  std::vector<std::string> flags;
};

struct RunTrace {
  Partition partition;
  std::vector<IterationRecord> records;
};

struct Verdict {
  bool converged = false;
  int iterations_used = 0;
  double final_residual = kNaN;
  double final_stationarity = kNaN;
  double lambda_min_H = kNaN;
  bool unique_certificate = false;
  Eigen::VectorXd final_query;
};

struct RunResult {
  RunTrace trace;
  Verdict verdict;
};

/// A solver failure mid-run; carries everything recorded so far.
class RunAborted : public Error {
 public:
  RunAborted(const std::string& what, RunTrace partial) : Error(what), trace(std::move(partial)) {}
  RunTrace trace;
};

/// Seeds of independent replications: (master, index) through std::seed_seq.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::mt19937_64 gen(seq);
  return gen();
}

inline std::mt19937_64 make_rng(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  return std::mt19937_64(seq);
}

struct EngineState {
  std::vector<KalmanBank> banks;
  std::vector<SampleLog> logs;
  std::mt19937_64 rng;
  RunTrace trace;
  std::vector<Eigen::VectorXd> previous_theta;
  int k = 0;
  int streak = 0;

  std::vector<AffineSurrogate> surrogates() const {
    std::vector<AffineSurrogate> out;
    out.reserve(banks.size());
    for (const auto& b : banks) out.push_back(b.surrogate());
    return out;
  }
};

namespace detail {

inline Eigen::VectorXd flat_theta(const KalmanBank& bank) { return bank.surrogate().theta(); }

/// Steps 1 and 3-4 shared by both phases: snapshot theta, query agents,
/// record, update the banks.
inline IterationRecord& observe(EngineState& s, const Game& game, Phase phase, const Eigen::VectorXd& query) {
  const auto& P = game.partition;
  IterationRecord rec;
  rec.k = ++s.k;
  rec.phase = phase;
  rec.query = query;
  for (int i = 0; i < P.agents(); ++i) {
    Eigen::VectorXd th = flat_theta(s.banks[i]);
    rec.theta_norm.push_back(th.norm());
    rec.d_theta.push_back(s.previous_theta.empty() ? kNaN : (th - s.previous_theta[i]).norm());
    rec.theta.push_back(std::move(th));
  }
  s.previous_theta = rec.theta;

  rec.reaction.resize(P.total());
  for (int i = 0; i < P.agents(); ++i) {
    const Reaction r = game.agents[i]->react(P.complement(query, i));
    detail::require_dims(r.action.size() == P.size(i), "reaction size");
    if (!r.action.allFinite()) throw NumericalError("numerical breakdown: non-finite reaction");
    rec.reaction.segment(P.offset(i), P.size(i)) = r.action;
    if (r.distress) rec.flags.push_back("distress_" + std::to_string(i + 1));
  }
  rec.residual = (rec.query - rec.reaction).norm();

  for (int i = 0; i < P.agents(); ++i) {
    Eigen::VectorXd others = P.complement(query, i);
    Eigen::VectorXd own = P.block(rec.reaction, i);
    s.banks[i].update(others, own);
    s.logs[i].append(std::move(others), std::move(own), rec.k);
  }
  s.trace.records.push_back(std::move(rec));
  return s.trace.records.back();
}

}  // namespace detail

inline EngineState make_state(const RunConfig& cfg, const Game& game) {
  cfg.validate();
  game.validate();
  EngineState s{{}, {}, make_rng(cfg.seed), {}, {}, 0, 0};
  s.trace.partition = game.partition;
  for (int i = 0; i < game.partition.agents(); ++i) {
    s.banks.emplace_back(game.partition.size(i), game.partition.complement_size(i), cfg.alpha, cfg.beta);
    s.logs.emplace_back(game.partition.size(i), game.partition.complement_size(i));
  }
  return s;
}

/// Passive phase: K_in projected random draws (or the game's own sampler).
inline void init_phase(EngineState& s, const RunConfig& cfg, const Game& game) {
  const Eigen::VectorXd lo = cfg.range_lower.value_or(game.range_lower);
  const Eigen::VectorXd hi = cfg.range_upper.value_or(game.range_upper);
  detail::require_dims(lo.size() == game.partition.total() && hi.size() == game.partition.total(), "range estimate");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int t = 0; t < cfg.K_in; ++t) {
    Eigen::VectorXd draw;
    if (game.init_sampler) {
      draw = game.init_sampler(s.rng);
    } else {
      draw.resize(lo.size());
      for (Eigen::Index k = 0; k < lo.size(); ++k) draw[k] = lo[k] + (hi[k] - lo[k]) * unit(s.rng);
    }
    const Eigen::VectorXd query = project(game.omega, draw);
    if (!contains(game.omega, query, cfg.tol_feas)) throw InvariantViolation("projected draw outside the feasible set");
    detail::observe(s, game, Phase::kInit, query);
  }
}

/// One active iteration. Returns the new record.
inline const IterationRecord& step(EngineState& s, const RunConfig& cfg, const Game& game) {
  const QueryProblem q = build_query_problem(s.surrogates(), game.partition, game.omega);
  QpOptions opts;
  opts.tol_feas = cfg.tol_feas;
  const QueryResult res = min_norm_query(q, cfg.eig_tol, cfg.tikhonov_eps, opts);
  if (!contains(game.omega, res.x_hat, cfg.tol_feas)) {
    throw InvariantViolation("query outside the feasible set at iteration " + std::to_string(s.k + 1));
  }
  IterationRecord& rec = detail::observe(s, game, Phase::kActive, res.x_hat);
  rec.lambda_min_H = res.lambda_min_H;
  rec.kkt_residual = res.kkt_residual;
  rec.unique_certificate = res.unique_certificate;
  if (!res.unique_certificate) rec.flags.push_back("tikhonov");

  double max_dtheta = 0.0;
  for (double d : rec.d_theta) max_dtheta = std::max(max_dtheta, std::isnan(d) ? kInf : d);
  s.streak = (rec.residual <= cfg.tol_conv && max_dtheta <= cfg.tol_theta) ? s.streak + 1 : 0;
  return rec;
}

inline Verdict make_verdict(const EngineState& s, const RunConfig& cfg, const Game& game) {
  Verdict v;
  v.iterations_used = s.k;
  const IterationRecord* last = nullptr;
  for (auto it = s.trace.records.rbegin(); it != s.trace.records.rend(); ++it) {
    if (it->phase == Phase::kActive) {
      last = &*it;
      break;
    }
  }
  if (last == nullptr) return v;
  v.converged = s.streak >= cfg.window;
  v.final_residual = last->residual;
  v.final_query = last->query;
  v.lambda_min_H = last->lambda_min_H;
  v.unique_certificate = last->unique_certificate;
  v.final_stationarity = stationarity_residual(CollectiveProfile(last->query, game.partition), game.agents);
  if (v.converged && !(v.final_stationarity <= 10.0 * cfg.tol_conv)) {
    throw InvariantViolation("converged run ended at a non-stationary profile");
  }
  return v;
}

/// init_phase, then K - K_in active steps (fewer when early_stop fires).
inline RunResult run(const RunConfig& cfg, const Game& game) {
  EngineState s = make_state(cfg, game);
  try {
    init_phase(s, cfg, game);
    while (s.k < cfg.K) {
      step(s, cfg, game);
      if (cfg.early_stop && s.streak >= cfg.window) break;
    }
    Verdict v = make_verdict(s, cfg, game);
    return {std::move(s.trace), std::move(v)};
  } catch (const RunAborted&) {
    throw;
  } catch (const std::exception& e) {
    throw RunAborted(e.what(), std::move(s.trace));
  }
}

/// Runs fn(0..count-1) on up to `workers` threads. Results must be written
/// by index; the first exception (lowest index) is rethrown.
template <class Fn>
void parallel_for(int count, int workers, Fn&& fn) {
  workers = std::clamp(workers, 1, std::max(1, count));
  std::vector<std::exception_ptr> errors(count);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) if (e) std::rethrow_exception(e);
}

struct SweepCell {
  double beta = 0.0;
  int K_in = 0;
  /// Mean over successful runs of ||x_hat^k - x^k||, k = 1..K (NaN if none).
  std::vector<double> mean_residual;
  int failed = 0;
};

/// Grid over (beta, K_in) with `reps` replications per cell; early stopping
/// is disabled so every run contributes K residuals. Replication r uses
/// derive_seed(cfg.seed, r) in every cell.
inline std::vector<SweepCell> sweep(const RunConfig& tmpl, const Game& game, const std::vector<double>& betas,
                                    const std::vector<int>& k_ins, int reps, int workers = 1) {
  if (betas.empty() || k_ins.empty()) throw Error("sweep grid is empty");
  if (reps < 1) throw Error("sweep needs reps >= 1");
  const int cells = static_cast<int>(betas.size() * k_ins.size());
  std::vector<std::vector<double>> residuals(static_cast<std::size_t>(cells) * reps);
  std::vector<char> failed(residuals.size(), 0);
  for (int c = 0; c < cells; ++c) {
    RunConfig cfg = tmpl;
    cfg.beta = betas[c / k_ins.size()];
    cfg.K_in = k_ins[c % k_ins.size()];
    cfg.validate();
  }
  parallel_for(static_cast<int>(residuals.size()), workers, [&](int job) {
    const int c = job / reps;
    const int rep = job % reps;
    RunConfig cfg = tmpl;
    cfg.beta = betas[c / k_ins.size()];
    cfg.K_in = k_ins[c % k_ins.size()];
    cfg.early_stop = false;
    cfg.seed = derive_seed(tmpl.seed, static_cast<std::uint64_t>(rep));
    try {
      const RunResult r = run(cfg, game);
      for (const auto& rec : r.trace.records) residuals[job].push_back(rec.residual);
    } catch (const RunAborted&) {
      failed[job] = 1;
    }
  });

  std::vector<SweepCell> out(cells);
  for (int c = 0; c < cells; ++c) {
    auto& cell = out[c];
    cell.beta = betas[c / k_ins.size()];
    cell.K_in = k_ins[c % k_ins.size()];
    cell.mean_residual.assign(tmpl.K, kNaN);
    for (int k = 0; k < tmpl.K; ++k) {
      double acc = 0.0;
      int n = 0;
      for (int rep = 0; rep < reps; ++rep) {
        const int job = c * reps + rep;
        if (failed[job] || k >= static_cast<int>(residuals[job].size())) continue;
        acc += residuals[job][k];
        ++n;
      }
      if (n > 0) cell.mean_residual[k] = acc / n;
    }
    for (int rep = 0; rep < reps; ++rep) cell.failed += failed[c * reps + rep];
  }
  return out;
}

struct StatsResult {
  int reps = 0;
  int failed = 0;
  double percent_converged = 0.0;
  std::vector<Verdict> verdicts;  // by replication index; failed runs stay default
  std::vector<char> run_failed;
  /// Minimum of lambda_min(H) over convergent runs (NaN if none converged).
  double min_lambda_converged = kNaN;
  bool certificates_positive = true;
  /// All convergent runs returned the same profile within profile_tol.
  bool same_profile = true;
  double profile_tol = 1e-4;
};

inline StatsResult stats(const RunConfig& tmpl, const Game& game, int reps, int workers = 1) {
  if (reps < 1) throw Error("stats needs reps >= 1");
  tmpl.validate();
  StatsResult out;
  out.reps = reps;
  out.verdicts.resize(reps);
  out.run_failed.assign(reps, 0);
  parallel_for(reps, workers, [&](int rep) {
    RunConfig cfg = tmpl;
    cfg.seed = derive_seed(tmpl.seed, static_cast<std::uint64_t>(rep));
    try {
      out.verdicts[rep] = run(cfg, game).verdict;
    } catch (const RunAborted&) {
      out.run_failed[rep] = 1;
    }
  });
  int converged = 0;
  const Eigen::VectorXd* reference = nullptr;
  for (int rep = 0; rep < reps; ++rep) {
    out.failed += out.run_failed[rep];
    const Verdict& v = out.verdicts[rep];
    if (!v.converged) continue;
    ++converged;
    if (std::isnan(out.min_lambda_converged) || v.lambda_min_H < out.min_lambda_converged) {
      out.min_lambda_converged = v.lambda_min_H;
    }
    if (!(v.lambda_min_H > 0)) out.certificates_positive = false;
    if (reference == nullptr) reference = &v.final_query;
    else if ((v.final_query - *reference).lpNorm<Eigen::Infinity>() > out.profile_tol) out.same_profile = false;
  }
  out.percent_converged = 100.0 * converged / reps;
  return out;
}

}  // namespace statseek
