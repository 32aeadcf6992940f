#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace exlasso {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using Index = Eigen::Index;

enum class SolveStatus { converged, max_iter, time_limit };

inline std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::max_iter: return "max-iter";
    case SolveStatus::time_limit: return "time-limit";
  }
  return "unknown";
}

struct Solution {
  Vector x;
  double kkt_residual = 0.0;
  double objective = 0.0;
  std::vector<Index> active_set;  // { i : x_i != 0 }, ascending
};

struct SolverReport {
  Index outer_iters = 0;
  Index total_inner_iters = 0;
  double wall_time = 0.0;
  std::vector<std::pair<Index, double>> residual_history;  // (iter, eta_kkt)
  SolveStatus status = SolveStatus::converged;
};

inline std::vector<Index> nonzero_indices(const Vector& x) {
  std::vector<Index> idx;
  for (Index i = 0; i < x.size(); ++i)
    if (x[i] != 0.0) idx.push_back(i);
  return idx;
}

}  // namespace exlasso
