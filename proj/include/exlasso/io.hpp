#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "exlasso/baselines.hpp"
#include "exlasso/ppdna.hpp"
#include "exlasso/problem.hpp"
#include "exlasso/sieving.hpp"
#include "exlasso/synthetic.hpp"

namespace exlasso {

using nlohmann::json;

// Data error with file/line/column context. All on-disk indices (triplet
// rows/cols, group ids) are 1-based; the in-memory API is 0-based.
struct ParseError : std::runtime_error {
  ParseError(const std::string& path, std::size_t line, std::size_t col, const std::string& msg)
      : std::runtime_error(path + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " +
                           msg) {}
};

namespace detail {

inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open file for reading: " + path);
  return f;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open file for writing: " + path);
  return f;
}

inline double parse_double(const std::string& tok, const std::string& path, std::size_t line,
                           std::size_t col) {
  try {
    std::size_t used = 0;
    double v = std::stod(tok, &used);
    if (used != tok.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ParseError(path, line, col, "expected a number, got '" + tok + "'");
  }
}

inline long parse_long(const std::string& tok, const std::string& path, std::size_t line,
                       std::size_t col) {
  try {
    std::size_t used = 0;
    long v = std::stol(tok, &used);
    if (used != tok.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ParseError(path, line, col, "expected an integer, got '" + tok + "'");
  }
}

inline std::vector<std::string> split(const std::string& s, char delim) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(s);
  while (std::getline(ss, cur, delim)) out.push_back(cur);
  return out;
}

inline std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream ss(s);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// vectors: one value per line

inline Vector load_vector(const std::string& path) {
  auto f = detail::open_in(path);
  std::vector<double> vals;
  std::string line;
  std::size_t ln = 0;
  while (std::getline(f, line)) {
    ++ln;
    if (line.empty()) continue;
    vals.push_back(detail::parse_double(line, path, ln, 1));
  }
  return Eigen::Map<Vector>(vals.data(), static_cast<Index>(vals.size()));
}

inline void save_vector(const Vector& v, const std::string& path) {
  auto f = detail::open_out(path);
  for (Index i = 0; i < v.size(); ++i) f << detail::fmt_double(v[i]) << "\n";
}

// ---------------------------------------------------------------------------
// groups: one group id (1..l) per feature line

inline std::vector<int> load_group_labels(const std::string& path) {
  auto f = detail::open_in(path);
  std::vector<int> labels;
  std::string line;
  std::size_t ln = 0;
  while (std::getline(f, line)) {
    ++ln;
    if (line.empty()) continue;
    labels.push_back(static_cast<int>(detail::parse_long(line, path, ln, 1)));
  }
  return labels;
}

inline void save_group_labels(const GroupPartition& g, const std::string& path) {
  auto f = detail::open_out(path);
  for (Index i = 0; i < g.num_features(); ++i) f << (g.group_of(i) + 1) << "\n";
}

// ---------------------------------------------------------------------------
// dense CSV: one sample per row, comma-separated

inline Matrix load_dense_csv(const std::string& path) {
  auto f = detail::open_in(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t ln = 0;
  while (std::getline(f, line)) {
    ++ln;
    if (line.empty()) continue;
    auto toks = detail::split(line, ',');
    std::vector<double> row;
    row.reserve(toks.size());
    for (std::size_t c = 0; c < toks.size(); ++c)
      row.push_back(detail::parse_double(toks[c], path, ln, c + 1));
    if (!rows.empty() && row.size() != rows.front().size())
      throw ParseError(path, ln, 1,
                       "row has " + std::to_string(row.size()) + " fields, expected " +
                           std::to_string(rows.front().size()));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError(path, 1, 1, "empty matrix file");
  Matrix a(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      a(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return a;
}

inline void save_dense_csv(const Matrix& a, const std::string& path) {
  auto f = detail::open_out(path);
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      if (j) f << ',';
      f << detail::fmt_double(a(i, j));
    }
    f << "\n";
  }
}

// ---------------------------------------------------------------------------
// sparse triplet text: header "m n nnz", then "row col value" (1-based)

inline SparseMatrix load_sparse_triplet(const std::string& path) {
  auto f = detail::open_in(path);
  std::string line;
  std::size_t ln = 0;
  if (!std::getline(f, line)) throw ParseError(path, 1, 1, "missing header line 'm n nnz'");
  ++ln;
  auto head = detail::split_ws(line);
  if (head.size() != 3) throw ParseError(path, 1, 1, "header must be 'm n nnz'");
  const long m = detail::parse_long(head[0], path, 1, 1);
  const long n = detail::parse_long(head[1], path, 1, 2);
  const long nnz = detail::parse_long(head[2], path, 1, 3);
  if (m <= 0 || n <= 0 || nnz < 0) throw ParseError(path, 1, 1, "invalid dimensions in header");

  std::vector<Eigen::Triplet<double>> trips;
  std::vector<char> seen;  // duplicate detection
  seen.assign(static_cast<std::size_t>(m) * static_cast<std::size_t>(n) <= (std::size_t{1} << 26)
                  ? static_cast<std::size_t>(m) * static_cast<std::size_t>(n)
                  : 0,
              0);
  long count = 0;
  while (std::getline(f, line)) {
    ++ln;
    if (line.empty()) continue;
    auto toks = detail::split_ws(line);
    if (toks.size() != 3) throw ParseError(path, ln, 1, "expected 'row col value'");
    const long r = detail::parse_long(toks[0], path, ln, 1);
    const long c = detail::parse_long(toks[1], path, ln, 2);
    const double v = detail::parse_double(toks[2], path, ln, 3);
    if (r < 1 || r > m) throw ParseError(path, ln, 1, "row index out of range");
    if (c < 1 || c > n) throw ParseError(path, ln, 2, "column index out of range");
    if (!seen.empty()) {
      auto& flag = seen[static_cast<std::size_t>(r - 1) * static_cast<std::size_t>(n) +
                        static_cast<std::size_t>(c - 1)];
      if (flag) throw ParseError(path, ln, 1, "duplicate entry for (row, col)");
      flag = 1;
    }
    trips.emplace_back(static_cast<Index>(r - 1), static_cast<Index>(c - 1), v);
    ++count;
  }
  if (count != nnz)
    throw ParseError(path, ln, 1,
                     "header declares " + std::to_string(nnz) + " entries, found " +
                         std::to_string(count));
  SparseMatrix a(static_cast<Index>(m), static_cast<Index>(n));
  a.setFromTriplets(trips.begin(), trips.end());
  return a;
}

inline void save_sparse_triplet(const SparseMatrix& a, const std::string& path) {
  auto f = detail::open_out(path);
  f << a.rows() << " " << a.cols() << " " << a.nonZeros() << "\n";
  for (Index j = 0; j < a.outerSize(); ++j)
    for (SparseMatrix::InnerIterator it(a, j); it; ++it)
      f << (it.row() + 1) << " " << (it.col() + 1) << " " << detail::fmt_double(it.value())
        << "\n";
}

// A file is a triplet file iff its first line is exactly three integers.
inline DesignMatrix load_design_matrix(const std::string& path) {
  {
    auto f = detail::open_in(path);
    std::string line;
    while (std::getline(f, line) && line.empty()) {
    }
    auto toks = detail::split_ws(line);
    bool triplet = toks.size() == 3;
    for (const auto& t : toks)
      if (t.find_first_not_of("0123456789") != std::string::npos) triplet = false;
    if (!triplet) return DesignMatrix(load_dense_csv(path));
  }
  return DesignMatrix(load_sparse_triplet(path));
}

// ---------------------------------------------------------------------------
// JSON config mirrors

inline void to_json(json& j, const SyntheticSpec& s) {
  j = json{{"m", s.m},
           {"l", s.l},
           {"p", s.p},
           {"nnz_per_group", s.nnz_per_group},
           {"corr_in", s.corr_in},
           {"corr_out", s.corr_out},
           {"noise", s.noise},
           {"signal_range", {s.signal_lo, s.signal_hi}},
           {"seed", s.seed},
           {"task", s.task == SyntheticSpec::Task::regression ? "regression" : "classification"}};
}

inline void from_json(const json& j, SyntheticSpec& s) {
  s.m = j.value("m", s.m);
  s.l = j.value("l", s.l);
  s.p = j.value("p", s.p);
  s.nnz_per_group = j.value("nnz_per_group", s.nnz_per_group);
  s.corr_in = j.value("corr_in", s.corr_in);
  s.corr_out = j.value("corr_out", s.corr_out);
  s.noise = j.value("noise", s.noise);
  if (j.contains("signal_range")) {
    s.signal_lo = j["signal_range"].at(0).get<double>();
    s.signal_hi = j["signal_range"].at(1).get<double>();
  }
  s.seed = j.value("seed", s.seed);
  if (j.contains("task")) {
    const std::string t = j["task"].get<std::string>();
    if (t == "regression")
      s.task = SyntheticSpec::Task::regression;
    else if (t == "classification")
      s.task = SyntheticSpec::Task::classification;
    else
      throw std::runtime_error("config: unknown task '" + t + "'");
  }
}

inline void to_json(json& j, const PpdnaConfig& c) {
  j = json{{"sigma0", c.sigma0},       {"sigma_growth", c.sigma_growth},
           {"sigma_max", c.sigma_max}, {"tau", c.tau},
           {"tol", c.tol},             {"max_outer", c.max_outer},
           {"max_total_inner", c.max_total_inner}, {"time_limit", c.time_limit}};
}

inline void from_json(const json& j, PpdnaConfig& c) {
  c.sigma0 = j.value("sigma0", c.sigma0);
  c.sigma_growth = j.value("sigma_growth", c.sigma_growth);
  c.sigma_max = j.value("sigma_max", c.sigma_max);
  c.tau = j.value("tau", c.tau);
  c.tol = j.value("tol", c.tol);
  c.max_outer = j.value("max_outer", c.max_outer);
  c.max_total_inner = j.value("max_total_inner", c.max_total_inner);
  c.time_limit = j.value("time_limit", c.time_limit);
}

inline void to_json(json& j, const FirstOrderConfig& c) {
  j = json{{"max_iter", c.max_iter},       {"tol", c.tol},
           {"time_limit", c.time_limit},   {"rho", c.rho},
           {"step_length", c.step_length}, {"adapt_rho", c.adapt_rho}};
}

inline void from_json(const json& j, FirstOrderConfig& c) {
  c.max_iter = j.value("max_iter", c.max_iter);
  c.tol = j.value("tol", c.tol);
  c.time_limit = j.value("time_limit", c.time_limit);
  c.rho = j.value("rho", c.rho);
  c.step_length = j.value("step_length", c.step_length);
  c.adapt_rho = j.value("adapt_rho", c.adapt_rho);
}

// ---------------------------------------------------------------------------
// results

inline json solve_record(const std::string& solver, double lambda, const Solution& sol,
                         const SolverReport& rep) {
  return json{{"solver", solver},
              {"lambda", lambda},
              {"objective", sol.objective},
              {"eta_kkt", sol.kkt_residual},
              {"nnz", sol.active_set.size()},
              {"time_s", rep.wall_time},
              {"outer_iters", rep.outer_iters},
              {"inner_iters", rep.total_inner_iters},
              {"status", to_string(rep.status)}};
}

inline json path_record(const PathEntry& e) {
  return json{{"lambda", e.lambda},
              {"objective", e.solution.objective},
              {"eta_kkt", e.solution.kkt_residual},
              {"nnz", e.solution.active_set.size()},
              {"time_s", e.time_s},
              {"outer_iters", e.outer_iters},
              {"inner_iters", e.inner_iters},
              {"sieve_rounds", e.sieve_rounds},
              {"reduced_sizes", e.reduced_sizes}};
}

inline json path_result_json(const PathResult& r) {
  json records = json::array();
  for (const auto& e : r.entries) records.push_back(path_record(e));
  return json{{"lambdas", r.lambdas}, {"records", records}};
}

// CSV flattening of the per-lambda records (reduced sizes joined by ';').
inline void save_path_csv(const PathResult& r, const std::string& path) {
  auto f = detail::open_out(path);
  f << "lambda,objective,eta_kkt,nnz,time_s,outer_iters,inner_iters,sieve_rounds,"
       "mean_reduced_size,reduced_sizes\n";
  for (const auto& e : r.entries) {
    double mean = 0.0;
    std::string joined;
    for (std::size_t i = 0; i < e.reduced_sizes.size(); ++i) {
      mean += static_cast<double>(e.reduced_sizes[i]);
      if (i) joined += ';';
      joined += std::to_string(e.reduced_sizes[i]);
    }
    if (!e.reduced_sizes.empty()) mean /= static_cast<double>(e.reduced_sizes.size());
    f << detail::fmt_double(e.lambda) << ',' << detail::fmt_double(e.solution.objective) << ','
      << detail::fmt_double(e.solution.kkt_residual) << ',' << e.solution.active_set.size() << ','
      << detail::fmt_double(e.time_s) << ',' << e.outer_iters << ',' << e.inner_iters << ','
      << e.sieve_rounds << ',' << detail::fmt_double(mean) << ',' << joined << "\n";
  }
}

// ---------------------------------------------------------------------------
// problem bundle: A + b + groups (+ optional weights), conventional names

struct ProblemPaths {
  std::string a;
  std::string b;
  std::string groups;
  std::string weights;  // optional
  std::string c;        // optional
};

inline Problem load_problem(const ProblemPaths& paths, double lambda,
                            LossKind loss = LossKind::squared) {
  DesignMatrix a = load_design_matrix(paths.a);
  Vector b = load_vector(paths.b);
  std::vector<int> labels = load_group_labels(paths.groups);
  if (static_cast<Index>(labels.size()) != a.cols())
    throw std::runtime_error("groups file lists " + std::to_string(labels.size()) +
                             " features, matrix has " + std::to_string(a.cols()) + " columns");
  GroupPartition g = GroupPartition::from_labels(labels);
  Vector w, c;
  if (!paths.weights.empty()) w = load_vector(paths.weights);
  if (!paths.c.empty()) c = load_vector(paths.c);
  return Problem::make(std::move(a), std::move(b), std::move(g), lambda, loss, std::move(w),
                       std::move(c));
}

inline void save_problem(const Problem& p, const ProblemPaths& paths) {
  if (p.A.is_sparse())
    save_sparse_triplet(*p.A.sparse(), paths.a);
  else
    save_dense_csv(*p.A.dense(), paths.a);
  save_vector(p.b, paths.b);
  save_group_labels(p.partition, paths.groups);
  if (!paths.weights.empty()) save_vector(p.w, paths.weights);
  if (!paths.c.empty()) save_vector(p.c, paths.c);
}

}  // namespace exlasso
