#pragma once

// Experiment configuration files (JSON). Every object rejects unknown keys.
//
//   {
//     "game": {"type": "quadratic", "players": 10},
//     "K": 100, "K_in": 10, "alpha": 1e9, "beta": 1, "seed": 1,
//     "tol_conv": 1e-6, "tol_theta": 1e-6, "window": 5, "early_stop": true,
//     "range": {"lower": [...], "upper": [...]},
//     "sweep": {"beta": [0, 0.5, 1], "K_in": [1, 10]},
//     "reps": 20, "parallel": 1, "out": "out/quadratic10"
//   }
//
// Polytopes are {"lower": [...], "upper": [...], "A": [[...]], "b": [...]};
// null, "inf" and "-inf" stand for infinite bounds.

#include <cstdint>
#include <fstream>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "statseek/agents/internet.hpp"
#include "statseek/agents/lqr.hpp"
#include "statseek/agents/qp_gnep.hpp"
#include "statseek/agents/quadratic_game.hpp"
#include "statseek/agents/two_by_two.hpp"
#include "statseek/engine.hpp"

namespace statseek::cli {

using nlohmann::json;

class ConfigError : public Error {
 public:
  using Error::Error;
};

struct GameSpec {
  std::string type;
  json raw;
};

struct ExperimentConfig {
  GameSpec game;
  RunConfig run;
  std::vector<double> sweep_beta;
  std::vector<int> sweep_k_in;
  bool has_sweep = false;
  int reps = 1;
  int parallel = 1;
  std::string out = "out";
};

namespace detail {

inline void reject_unknown(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& item : obj.items()) {
    if (!ok.count(item.key())) throw ConfigError(where + ": unknown key \"" + item.key() + "\"");
  }
}

inline double number(const json& v, const std::string& where) {
  if (v.is_null()) return kInf;
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf" || s == "+inf") return kInf;
    if (s == "-inf") return -kInf;
    throw ConfigError(where + ": expected a number, got \"" + s + "\"");
  }
  if (!v.is_number()) throw ConfigError(where + ": expected a number");
  return v.get<double>();
}

template <class T>
T get(const json& obj, const char* key, T fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

inline double get_number(const json& obj, const char* key, double fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  return number(obj.at(key), where + "." + key);
}

inline Eigen::VectorXd vector(const json& v, const std::string& where, double null_as = kInf) {
  if (!v.is_array()) throw ConfigError(where + ": expected an array");
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t k = 0; k < v.size(); ++k) {
    out[static_cast<Eigen::Index>(k)] = v[k].is_null() ? null_as : number(v[k], where);
  }
  return out;
}

inline Eigen::MatrixXd matrix(const json& v, const std::string& where) {
  if (!v.is_array()) throw ConfigError(where + ": expected an array of rows");
  if (v.empty()) return Eigen::MatrixXd(0, 0);
  const std::size_t cols = v[0].is_array() ? v[0].size() : 0;
  Eigen::MatrixXd out(static_cast<Eigen::Index>(v.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < v.size(); ++r) {
    if (!v[r].is_array() || v[r].size() != cols) throw ConfigError(where + ": ragged matrix");
    for (std::size_t c = 0; c < cols; ++c) out(r, c) = number(v[r][c], where);
  }
  return out;
}

inline Polytope polytope(const json& v, int dim, const std::string& where) {
  reject_unknown(v, {"lower", "upper", "A", "b"}, where);
  Eigen::VectorXd lo = v.contains("lower") ? vector(v["lower"], where + ".lower", -kInf)
                                           : Eigen::VectorXd::Constant(dim, -kInf);
  Eigen::VectorXd hi = v.contains("upper") ? vector(v["upper"], where + ".upper", kInf)
                                           : Eigen::VectorXd::Constant(dim, kInf);
  if (lo.size() != dim || hi.size() != dim) throw ConfigError(where + ": bounds must have length " + std::to_string(dim));
  Eigen::MatrixXd A(0, dim);
  Eigen::VectorXd b(0);
  if (v.contains("A") != v.contains("b")) throw ConfigError(where + ": A and b go together");
  if (v.contains("A")) {
    A = matrix(v["A"], where + ".A");
    b = vector(v["b"], where + ".b");
    if (A.rows() == 0) A.resize(0, dim);
    if (A.cols() != dim || A.rows() != b.size()) throw ConfigError(where + ": A/b dimensions");
  }
  try {
    return Polytope(lo, hi, A, b);
  } catch (const Error& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

inline agents::QpGnep qp_gnep_data(const json& g, const std::string& where) {
  if (!g.contains("partition") || !g.contains("omega") || !g.contains("costs")) {
    throw ConfigError(where + ": needs partition, omega and costs");
  }
  agents::QpGnep data;
  std::vector<int> sizes;
  try {
    sizes = g["partition"].get<std::vector<int>>();
    data.partition = Partition(sizes);
  } catch (const std::exception& e) {
    throw ConfigError(where + ".partition: " + e.what());
  }
  data.omega = polytope(g["omega"], data.partition.total(), where + ".omega");
  const json& costs = g["costs"];
  if (!costs.is_array() || static_cast<int>(costs.size()) != data.partition.agents()) {
    throw ConfigError(where + ".costs: one entry per agent");
  }
  for (std::size_t i = 0; i < costs.size(); ++i) {
    const std::string at = where + ".costs[" + std::to_string(i) + "]";
    reject_unknown(costs[i], {"Q", "q", "R"}, at);
    agents::QpAgentCost c;
    c.Q = matrix(costs[i].at("Q"), at + ".Q");
    c.q = vector(costs[i].at("q"), at + ".q");
    c.R = costs[i].contains("R") ? matrix(costs[i]["R"], at + ".R")
                                 : Eigen::MatrixXd::Zero(c.q.size(), data.partition.complement_size(static_cast<int>(i)));
    data.costs.push_back(std::move(c));
  }
  try {
    data.validate();
  } catch (const Error& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return data;
}

}  // namespace detail

/// Builds the live game (agents included) from the "game" object.
inline Game make_game(const GameSpec& spec) {
  const json& g = spec.raw;
  const std::string where = "game";
  if (spec.type == "quadratic") {
    detail::reject_unknown(g, {"type", "players"}, where);
    return agents::quadratic_game(detail::get<int>(g, "players", 10, where));
  }
  if (spec.type == "internet") {
    detail::reject_unknown(g, {"type", "players", "draw_upper"}, where);
    return agents::internet_game(detail::get<int>(g, "players", 10, where),
                                 detail::get_number(g, "draw_upper", 0.15, where));
  }
  if (spec.type == "no_eq") {
    detail::reject_unknown(g, {"type"}, where);
    return agents::no_equilibrium_game();
  }
  if (spec.type == "infinite_eq") {
    detail::reject_unknown(g, {"type", "partition", "omega", "costs"}, where);
    return agents::infinite_equilibria_game(detail::qp_gnep_data(g, where));
  }
  if (spec.type == "qp_gnep") {
    detail::reject_unknown(g, {"type", "name", "partition", "omega", "costs"}, where);
    return agents::qp_gnep_game(detail::qp_gnep_data(g, where), detail::get<std::string>(g, "name", "qp_gnep", where));
  }
  if (spec.type == "lqr_random") {
    detail::reject_unknown(g, {"type", "agents", "instance_seed", "perturbation"}, where);
    auto rng = make_rng(detail::get<std::uint64_t>(g, "instance_seed", 1, where));
    auto inst = agents::random_lqr_instance(rng, detail::get<int>(g, "agents", 3, where));
    return agents::lqr_game(std::move(inst), detail::get_number(g, "perturbation", 0.05, where));
  }
  throw ConfigError("game.type: unknown game \"" + spec.type + "\"");
}

/// The LQR instance behind an lqr_random game spec (same draw as make_game).
inline agents::LqrInstance lqr_instance(const GameSpec& spec) {
  if (spec.type != "lqr_random") throw ConfigError("not an lqr_random game");
  auto rng = make_rng(detail::get<std::uint64_t>(spec.raw, "instance_seed", 1, "game"));
  return agents::random_lqr_instance(rng, detail::get<int>(spec.raw, "agents", 3, "game"));
}

inline ExperimentConfig parse_config(const json& j) {
  detail::reject_unknown(j,
                         {"game", "K", "K_in", "alpha", "beta", "seed", "tol_conv", "tol_theta", "window", "eig_tol",
                          "tikhonov_eps", "tol_feas", "early_stop", "range", "sweep", "reps", "parallel", "out"},
                         "config");
  ExperimentConfig cfg;
  if (!j.contains("game") || !j["game"].is_object() || !j["game"].contains("type")) {
    throw ConfigError("config.game: missing or without \"type\"");
  }
  cfg.game.type = detail::get<std::string>(j["game"], "type", "", "game");
  cfg.game.raw = j["game"];

  auto& r = cfg.run;
  const std::string w = "config";
  r.K = detail::get<int>(j, "K", r.K, w);
  r.K_in = detail::get<int>(j, "K_in", r.K_in, w);
  r.alpha = detail::get_number(j, "alpha", r.alpha, w);
  r.beta = detail::get_number(j, "beta", r.beta, w);
  r.seed = detail::get<std::uint64_t>(j, "seed", r.seed, w);
  r.tol_conv = detail::get_number(j, "tol_conv", r.tol_conv, w);
  r.tol_theta = detail::get_number(j, "tol_theta", r.tol_theta, w);
  r.window = detail::get<int>(j, "window", r.window, w);
  r.eig_tol = detail::get_number(j, "eig_tol", r.eig_tol, w);
  r.tikhonov_eps = detail::get_number(j, "tikhonov_eps", r.tikhonov_eps, w);
  r.tol_feas = detail::get_number(j, "tol_feas", r.tol_feas, w);
  r.early_stop = detail::get<bool>(j, "early_stop", r.early_stop, w);
  if (j.contains("range")) {
    detail::reject_unknown(j["range"], {"lower", "upper"}, "config.range");
    if (!j["range"].contains("lower") || !j["range"].contains("upper")) {
      throw ConfigError("config.range: needs lower and upper");
    }
    r.range_lower = detail::vector(j["range"]["lower"], "config.range.lower");
    r.range_upper = detail::vector(j["range"]["upper"], "config.range.upper");
    if (!r.range_lower->allFinite() || !r.range_upper->allFinite()) throw ConfigError("config.range: must be finite");
  }
  if (j.contains("sweep")) {
    detail::reject_unknown(j["sweep"], {"beta", "K_in"}, "config.sweep");
    cfg.has_sweep = true;
    cfg.sweep_beta = detail::get<std::vector<double>>(j["sweep"], "beta", {}, "config.sweep");
    cfg.sweep_k_in = detail::get<std::vector<int>>(j["sweep"], "K_in", {}, "config.sweep");
  }
  cfg.reps = detail::get<int>(j, "reps", cfg.reps, w);
  cfg.parallel = detail::get<int>(j, "parallel", cfg.parallel, w);
  cfg.out = detail::get<std::string>(j, "out", cfg.out, w);
  try {
    r.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (cfg.parallel < 1) throw ConfigError("config.parallel: must be >= 1");
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("malformed JSON in " + path + ": " + e.what());
  }
  return parse_config(j);
}

}  // namespace statseek::cli
