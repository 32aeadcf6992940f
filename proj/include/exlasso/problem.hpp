#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "exlasso/design_matrix.hpp"
#include "exlasso/loss.hpp"
#include "exlasso/partition.hpp"
#include "exlasso/prox.hpp"
#include "exlasso/types.hpp"

namespace exlasso {

// min_x h(Ax) - <c,x> + lambda * Delta^{G,w}(x).
// Immutable after construction; copies share the design matrix storage.
struct Problem {
  DesignMatrix A;
  Vector c;  // linear term, zero by default
  LossKind loss = LossKind::squared;
  Vector b;  // responses; labels in {-1,+1} for logistic
  Vector w;  // strictly positive weights
  GroupPartition partition;
  double lambda = 1.0;

  static Problem make(DesignMatrix a, Vector b, GroupPartition g, double lambda,
                      LossKind loss = LossKind::squared, Vector w = Vector(),
                      Vector c = Vector()) {
    Problem p;
    p.A = std::move(a);
    p.b = std::move(b);
    p.partition = std::move(g);
    p.lambda = lambda;
    p.loss = loss;
    const Index n = p.A.cols();
    p.w = w.size() == 0 ? Vector::Ones(n) : std::move(w);
    p.c = c.size() == 0 ? Vector::Zero(n) : std::move(c);
    p.validate();
    return p;
  }

  void validate() const {
    const Index m = A.rows(), n = A.cols();
    if (lambda <= 0.0) throw std::invalid_argument("problem: lambda must be positive");
    if (b.size() != m) throw std::invalid_argument("problem: response length does not match rows");
    if (c.size() != n) throw std::invalid_argument("problem: linear term length does not match columns");
    if (w.size() != n) throw std::invalid_argument("problem: weight length does not match columns");
    for (Index i = 0; i < n; ++i)
      if (w[i] <= 0.0) throw std::invalid_argument("problem: weights must be strictly positive");
    if (partition.num_features() != n)
      throw std::invalid_argument("problem: partition does not cover the feature set");
    if (loss == LossKind::logistic)
      for (Index i = 0; i < m; ++i)
        if (b[i] != 1.0 && b[i] != -1.0)
          throw std::invalid_argument("problem: logistic labels must be in {-1,+1}");
  }

  Index num_samples() const { return A.rows(); }
  Index num_features() const { return A.cols(); }

  double phi(const Vector& x) const { return loss_value(loss, b, A.mul(x)) - c.dot(x); }

  // grad Phi(x) = A^T grad h(Ax) - c.
  Vector grad_phi(const Vector& x) const { return A.tmul(loss_grad(loss, b, A.mul(x))) - c; }

  double penalty(const Vector& x) const { return exclusive_penalty(x, w, partition); }

  double objective(const Vector& x) const { return phi(x) + lambda * penalty(x); }

  Problem with_lambda(double new_lambda) const {
    Problem p = *this;
    p.lambda = new_lambda;
    if (new_lambda <= 0.0) throw std::invalid_argument("problem: lambda must be positive");
    return p;
  }
};

// Reduced problem over the sorted index set I: columns A_I, w_I, c_I, and the
// induced partition with emptied groups dropped.
inline Problem restrict_problem(const Problem& p, const std::vector<Index>& index_set) {
  if (index_set.empty()) throw std::invalid_argument("restrict_problem: empty index set");
  const Index n = p.num_features();
  for (std::size_t k = 0; k < index_set.size(); ++k) {
    if (index_set[k] < 0 || index_set[k] >= n)
      throw std::invalid_argument("restrict_problem: index out of range");
    if (k > 0 && index_set[k] <= index_set[k - 1])
      throw std::invalid_argument("restrict_problem: index set must be sorted and duplicate-free");
  }
  const Index nr = static_cast<Index>(index_set.size());
  Vector wr(nr), cr(nr);
  std::vector<std::vector<Index>> buckets(static_cast<std::size_t>(p.partition.num_groups()));
  for (Index k = 0; k < nr; ++k) {
    Index i = index_set[static_cast<std::size_t>(k)];
    wr[k] = p.w[i];
    cr[k] = p.c[i];
    buckets[static_cast<std::size_t>(p.partition.group_of(i))].push_back(k);
  }
  std::vector<std::vector<Index>> groups;
  for (auto& g : buckets)
    if (!g.empty()) groups.push_back(std::move(g));
  return Problem::make(p.A.select_cols(index_set), p.b,
                       GroupPartition::from_groups(std::move(groups), nr), p.lambda, p.loss,
                       std::move(wr), std::move(cr));
}

// Zero-padded extension of a reduced vector back to n coordinates.
inline Vector embed_solution(const Vector& z, const std::vector<Index>& index_set, Index n) {
  if (static_cast<Index>(index_set.size()) != z.size())
    throw std::invalid_argument("embed_solution: index set size does not match vector length");
  Vector x = Vector::Zero(n);
  for (Index k = 0; k < z.size(); ++k) {
    Index i = index_set[static_cast<std::size_t>(k)];
    if (i < 0 || i >= n) throw std::invalid_argument("embed_solution: index out of range");
    x[i] = z[k];
  }
  return x;
}

// Proximal residual R_lambda(x) = x - Prox_{lambda p}(x - grad Phi(x));
// zero exactly at KKT points.
struct ProximalResidual {
  double norm = 0.0;
  Vector r;
  Vector grad;  // grad Phi(x), reused by callers
};

inline ProximalResidual proximal_residual(const Problem& p, const Vector& x) {
  ProximalResidual out;
  out.grad = p.grad_phi(x);
  out.r = x - prox_exclusive(x - out.grad, p.lambda, p.w, p.partition);
  out.norm = out.r.norm();
  return out;
}

// Relative KKT residual eta = ||R_lambda(x)|| / (1 + ||x|| + ||grad Phi(x)||).
inline double kkt_residual(const Problem& p, const Vector& x) {
  ProximalResidual res = proximal_residual(p, x);
  return res.norm / (1.0 + x.norm() + res.grad.norm());
}

inline Solution make_solution(const Problem& p, Vector x) {
  Solution s;
  s.kkt_residual = kkt_residual(p, x);
  s.objective = p.objective(x);
  s.active_set = nonzero_indices(x);
  s.x = std::move(x);
  return s;
}

}  // namespace exlasso
