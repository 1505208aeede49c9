#pragma once

// Output files: trace.csv, verdict.json, grid.csv, stats.json. Every file is
// written to a temporary sibling and renamed into place.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "statseek/engine.hpp"

namespace statseek::cli {

class IoError : public Error {
 public:
  using Error::Error;
};

inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw IoError("short write on " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& s) {
  if (s == "nan") return kNaN;
  if (s == "inf") return kInf;
  if (s == "-inf") return -kInf;
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw IoError("bad number \"" + s + "\"");
  return v;
}

/// NaN and infinities become null.
inline nlohmann::json jnum(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

inline nlohmann::json jvec(const Eigen::VectorXd& v) {
  auto out = nlohmann::json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) out.push_back(jnum(v[k]));
  return out;
}

inline std::vector<std::string> trace_header(const RunTrace& trace) {
  const Partition& P = trace.partition;
  const int n = P.total();
  std::vector<std::string> h{"k", "phase"};
  for (int j = 1; j <= n; ++j) h.push_back("x_hat_" + std::to_string(j));
  for (int j = 1; j <= n; ++j) h.push_back("x_" + std::to_string(j));
  h.push_back("residual");
  for (int i = 1; i <= P.agents(); ++i) h.push_back("theta_norm_" + std::to_string(i));
  for (int i = 1; i <= P.agents(); ++i) h.push_back("d_theta_" + std::to_string(i));
  for (int i = 0; i < P.agents(); ++i) {
    const int p = P.size(i) * (P.complement_size(i) + 1);
    for (int j = 1; j <= p; ++j) h.push_back("theta_" + std::to_string(i + 1) + "_" + std::to_string(j));
  }
  h.push_back("lambda_min_H");
  h.push_back("kkt_residual");
  h.push_back("flags");
  return h;
}

inline std::string trace_csv(const RunTrace& trace) {
  std::ostringstream os;
  const auto header = trace_header(trace);
  for (std::size_t c = 0; c < header.size(); ++c) os << (c ? "," : "") << header[c];
  os << '\n';
  for (const auto& r : trace.records) {
    os << r.k << ',' << to_string(r.phase);
    for (Eigen::Index j = 0; j < r.query.size(); ++j) os << ',' << fmt(r.query[j]);
    for (Eigen::Index j = 0; j < r.reaction.size(); ++j) os << ',' << fmt(r.reaction[j]);
    os << ',' << fmt(r.residual);
    for (double v : r.theta_norm) os << ',' << fmt(v);
    for (double v : r.d_theta) os << ',' << fmt(v);
    for (const auto& th : r.theta)
      for (Eigen::Index j = 0; j < th.size(); ++j) os << ',' << fmt(th[j]);
    os << ',' << fmt(r.lambda_min_H) << ',' << fmt(r.kkt_residual) << ',';
    for (std::size_t f = 0; f < r.flags.size(); ++f) os << (f ? ";" : "") << r.flags[f];
    os << '\n';
  }
  return os.str();
}

/// One parsed trace.csv row, keyed by header name.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const {
    for (std::size_t c = 0; c < header.size(); ++c)
      if (header[c] == name) return static_cast<int>(c);
    throw IoError("missing column " + name);
  }
};

inline CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ls(s);
    while (std::getline(ls, cell, ',')) out.push_back(cell);
    if (!s.empty() && s.back() == ',') out.emplace_back();
    return out;
  };
  if (!std::getline(in, line)) throw IoError("empty CSV");
  t.header = split(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto row = split(line);
    if (row.size() != t.header.size()) throw IoError("CSV row width mismatch");
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline nlohmann::json verdict_json(const Verdict& v, const RunConfig& cfg, const std::string& game) {
  nlohmann::json j;
  j["game"] = game;
  j["verdict"] = v.converged ? "converged" : "not_converged";
  j["converged"] = v.converged;
  j["iterations_used"] = v.iterations_used;
  j["final_residual"] = jnum(v.final_residual);
  j["final_stationarity"] = jnum(v.final_stationarity);
  j["lambda_min_H"] = jnum(v.lambda_min_H);
  j["unique_certificate"] = v.unique_certificate;
  j["final_query"] = jvec(v.final_query);
  j["seed"] = cfg.seed;
  j["K"] = cfg.K;
  j["K_in"] = cfg.K_in;
  j["alpha"] = cfg.alpha;
  j["beta"] = cfg.beta;
  j["tol_conv"] = cfg.tol_conv;
  j["tol_theta"] = cfg.tol_theta;
  j["window"] = cfg.window;
  return j;
}

inline std::string grid_csv(const std::vector<SweepCell>& cells) {
  std::ostringstream os;
  os << "beta,K_in,k,mean_residual\n";
  for (const auto& c : cells)
    for (std::size_t k = 0; k < c.mean_residual.size(); ++k)
      os << fmt(c.beta) << ',' << c.K_in << ',' << k + 1 << ',' << fmt(c.mean_residual[k]) << '\n';
  return os.str();
}

inline std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

}  // namespace statseek::cli
