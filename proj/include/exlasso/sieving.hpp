#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include "exlasso/ppdna.hpp"

namespace exlasso {

struct SievingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Initial active guess: indices of the ceil(sqrt(n)) largest correlation
// scores s_i = |<a_i, b>| / (||a_i|| ||b||), ties broken by smaller index.
// Zero-norm columns score 0.
inline std::vector<Index> correlation_init(const Problem& p) {
  const Index n = p.num_features();
  const double bnorm = p.b.norm();
  if (bnorm == 0.0) throw std::invalid_argument("correlation_init: response is zero");
  const Vector dots = p.A.tmul(p.b);
  const Vector norms = p.A.col_norms();
  Vector score(n);
  for (Index i = 0; i < n; ++i)
    score[i] = norms[i] == 0.0 ? 0.0 : std::abs(dots[i]) / (norms[i] * bnorm);
  const Index k = static_cast<Index>(std::ceil(std::sqrt(static_cast<double>(n))));
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::nth_element(order.begin(), order.begin() + std::min(k, n), order.end(),
                   [&](Index a, Index c) {
                     return score[a] != score[c] ? score[a] > score[c] : a < c;
                   });
  order.resize(static_cast<std::size_t>(std::min(k, n)));
  std::sort(order.begin(), order.end());
  return order;
}

// Sieve test outside the active set: with x_j = 0 the coordinate projection
// of lambda * dDelta(x) is the interval 2 lambda ||w_g o x_g||_1 [-w_j, w_j],
// so j joins J iff |grad Phi(x)_j| > 2 lambda ||w_g o x_g||_1 w_j +
// eps / sqrt(2 |complement|). Requires x supported on I.
inline std::vector<Index> sieve_candidates(const Problem& p, const Vector& x,
                                           const std::vector<Index>& active, double eps) {
  const Index n = p.num_features();
  std::vector<char> in_active(static_cast<std::size_t>(n), 0);
  for (Index i : active) in_active[static_cast<std::size_t>(i)] = 1;
  const Index n_out = n - static_cast<Index>(active.size());
  if (n_out == 0) return {};

  Vector group_l1 = Vector::Zero(p.partition.num_groups());
  for (Index j = 0; j < p.partition.num_groups(); ++j)
    for (Index i : p.partition.group(j)) group_l1[j] += p.w[i] * std::abs(x[i]);

  const Vector grad = p.grad_phi(x);
  const double slack = eps / std::sqrt(2.0 * static_cast<double>(n_out));
  std::vector<Index> out;
  for (Index i = 0; i < n; ++i) {
    if (in_active[static_cast<std::size_t>(i)]) continue;
    const double bound = 2.0 * p.lambda * group_l1[p.partition.group_of(i)] * p.w[i] + slack;
    if (std::abs(grad[i]) > bound) out.push_back(i);
  }
  return out;
}

struct ReducedSolve {
  Vector z;  // reduced solution
  Vector x;  // zero-padded extension
  SolverReport report;
  bool budget_met = true;  // implicit error vector met eps_abs / sqrt(2)
};

// Solves the problem restricted to I with PPDNA, then applies one reduced
// prox-gradient step z* = Prox_{lambda p}(z - grad Phi(z)). The stepped point
// is the exact solution of the reduced problem perturbed by the computable
// error vector delta = R(z) + grad Phi(z*) - grad Phi(z); the solve is
// retried with a tighter tolerance until ||delta|| <= eps_abs / sqrt(2),
// which is what the sieve's finite-termination argument needs.
inline ReducedSolve solve_reduced(const Problem& p, const std::vector<Index>& active,
                                  double eps_abs, const PpdnaConfig& base,
                                  const Vector& x_warm = Vector()) {
  if (active.empty()) throw std::invalid_argument("solve_reduced: empty active set");
  Problem reduced = restrict_problem(p, active);
  const double target = eps_abs / std::sqrt(2.0);
  PpdnaConfig cfg = base;
  cfg.tol_is_absolute = true;
  cfg.tol = 0.5 * target;
  Vector z0;
  if (x_warm.size() == p.num_features()) {
    z0.resize(static_cast<Index>(active.size()));
    for (std::size_t k = 0; k < active.size(); ++k)
      z0[static_cast<Index>(k)] = x_warm[active[k]];
  }
  ReducedSolve out;
  for (int attempt = 0;; ++attempt) {
    auto [sol, rep] = ppdna_solve(reduced, cfg, z0);
    out.report.outer_iters += rep.outer_iters;
    out.report.total_inner_iters += rep.total_inner_iters;
    out.report.wall_time += rep.wall_time;
    out.report.status = rep.status;
    const Vector g_hat = reduced.grad_phi(sol.x);
    Vector zstar =
        prox_exclusive(sol.x - g_hat, reduced.lambda, reduced.w, reduced.partition);
    const double delta_norm =
        ((sol.x - zstar) + reduced.grad_phi(zstar) - g_hat).norm();
    if (delta_norm <= target) {
      out.budget_met = true;
      out.z = std::move(zstar);
      break;
    }
    if (attempt >= 7) {  // numerical floor; caller decides how to proceed
      out.budget_met = false;
      out.z = std::move(zstar);
      break;
    }
    z0 = std::move(sol.x);
    cfg.tol = std::max(cfg.tol * std::min(0.25, 0.25 * target / delta_norm),
                       1e3 * std::numeric_limits<double>::epsilon() * (1.0 + z0.norm()));
  }
  out.x = embed_solution(out.z, active, p.num_features());
  return out;
}

struct SieveRound {
  Index round = 0;
  Index active_size = 0;
  Index added = 0;
  double residual = 0.0;  // ||R_lambda(x)|| after this round's solve
};

struct PathEntry {
  double lambda = 0.0;
  Solution solution;
  std::vector<SieveRound> rounds;
  std::vector<Index> reduced_sizes;  // one entry per reduced solve
  Index sieve_rounds = 0;            // number of reduced solves
  Index outer_iters = 0;
  Index inner_iters = 0;
  double time_s = 0.0;
};

struct PathResult {
  std::vector<double> lambdas;
  std::vector<PathEntry> entries;
};

struct AsPathOptions {
  double eps_rel = 1e-6;  // per-lambda target: ||R_lambda(x)|| <= eps_rel (1+||x||+||grad Phi||)
  Index max_rounds = 100;
  PpdnaConfig ppdna;
};

// Adaptive sieving over a decreasing lambda grid: correlation-test
// initialization at lambda_0, active sets seeded from the previous solution
// afterwards, and per-lambda rounds of (reduced solve, residual check,
// sieve). Each returned solution satisfies the per-lambda residual bound; a
// round that fails to enlarge the active set while the residual is above
// tolerance, or a round count above `max_rounds`, raises SievingError.
inline PathResult as_path(const Problem& p, const std::vector<double>& lambdas,
                          const AsPathOptions& opts = {}) {
  if (lambdas.empty()) throw std::invalid_argument("as_path: empty lambda sequence");
  for (std::size_t i = 0; i + 1 < lambdas.size(); ++i)
    if (!(lambdas[i] > lambdas[i + 1]))
      throw std::invalid_argument("as_path: lambda sequence must be strictly decreasing");
  if (lambdas.front() <= 0.0 || lambdas.back() <= 0.0)
    throw std::invalid_argument("as_path: lambdas must be positive");

  PathResult result;
  result.lambdas = lambdas;
  Vector x_prev;
  for (std::size_t li = 0; li < lambdas.size(); ++li) {
    const auto t0 = std::chrono::steady_clock::now();
    Problem prob = p.with_lambda(lambdas[li]);
    PathEntry entry;
    entry.lambda = lambdas[li];

    std::vector<Index> active;
    if (li == 0 || x_prev.size() == 0) {
      active = correlation_init(prob);
    } else {
      active = nonzero_indices(x_prev);
      if (active.empty()) active = correlation_init(prob);
    }

    Vector x;
    ProximalResidual res;
    bool budget_met = true;
    double eps_abs = 0.0;
    {
      const Vector& seed =
          x_prev.size() == prob.num_features() ? x_prev : (x = Vector::Zero(prob.num_features()));
      ProximalResidual ref = proximal_residual(prob, seed);
      eps_abs = opts.eps_rel * (1.0 + seed.norm() + ref.grad.norm());
    }

    // Reduced solve whose budget stays consistent with the tolerance measured
    // at its own result: the absolute tolerance scale can shrink sharply once
    // the fit improves (notably at lambda_0), in which case the solve is
    // redone on the same active set against the refreshed budget.
    auto solve_consistent = [&](const Vector& warm) {
      Vector xw = warm;
      for (int redo = 0;; ++redo) {
        ReducedSolve rs = solve_reduced(prob, active, eps_abs, opts.ppdna, xw);
        entry.reduced_sizes.push_back(static_cast<Index>(active.size()));
        entry.outer_iters += rs.report.outer_iters;
        entry.inner_iters += rs.report.total_inner_iters;
        budget_met = rs.budget_met;
        res = proximal_residual(prob, rs.x);
        const double eps_new = opts.eps_rel * (1.0 + rs.x.norm() + res.grad.norm());
        const bool consistent = eps_new >= 0.5 * eps_abs;
        eps_abs = eps_new;
        if (consistent || redo >= 3 || !rs.budget_met) {
          x = std::move(rs.x);
          return;
        }
        xw = std::move(rs.x);
      }
    };

    solve_consistent(x_prev);

    Index round = 0;
    for (;; ++round) {
      SieveRound sr;
      sr.round = round;
      sr.active_size = static_cast<Index>(active.size());
      sr.residual = res.norm;
      if (round > 0 && !entry.rounds.empty())
        sr.added = sr.active_size - entry.rounds.back().active_size;
      entry.rounds.push_back(sr);
      if (res.norm <= eps_abs) break;
      if (round >= opts.max_rounds)
        throw SievingError("as_path: round cap exceeded at lambda = " +
                           std::to_string(lambdas[li]));
      std::vector<Index> extra = sieve_candidates(prob, x, active, eps_abs);
      if (extra.empty()) {
        if (!budget_met)
          throw SievingError(
              "as_path: reduced solve hit its numerical floor before meeting the error "
              "budget at lambda = " +
              std::to_string(lambdas[li]) + "; loosen eps");
        throw SievingError(
            "as_path: residual above tolerance but no sieve candidates at lambda = " +
            std::to_string(lambdas[li]));
      }
      std::vector<Index> merged;
      merged.reserve(active.size() + extra.size());
      std::merge(active.begin(), active.end(), extra.begin(), extra.end(),
                 std::back_inserter(merged));
      active = std::move(merged);
      solve_consistent(x);
    }

    entry.sieve_rounds = static_cast<Index>(entry.reduced_sizes.size());
    entry.solution = make_solution(prob, x);
    entry.time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    x_prev = entry.solution.x;
    result.entries.push_back(std::move(entry));
  }
  return result;
}

}  // namespace exlasso
