#pragma once

#include <Eigen/Cholesky>

#include <chrono>
#include <cmath>
#include <stdexcept>
#include <utility>

#include "exlasso/problem.hpp"

namespace exlasso {

struct FirstOrderConfig {
  Index max_iter = 200000;
  double tol = 1e-6;  // eta_KKT target
  double time_limit = 3600.0;
  // ADMM
  double rho = 1.0;            // initial penalty, adapted by residual balancing
  double step_length = 1.618;  // dual step, must stay in (0, (1+sqrt 5)/2)
  double rho_min = 1e-4;
  double rho_max = 1e4;
  bool adapt_rho = true;
  Index adapt_every = 50;
  Index exact_max_dim = 4000;  // cached factorization cap on min(m, n)
  Index check_every = 1;       // KKT residual check frequency

  void validate() const {
    if (step_length <= 0.0 || step_length >= 0.5 * (1.0 + std::sqrt(5.0)))
      throw std::invalid_argument("admm: step length must be in (0, (1+sqrt(5))/2)");
    if (tol <= 0.0) throw std::invalid_argument("first-order: tol must be positive");
  }
};

namespace detail {

struct FoLoop {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

}  // namespace detail

// ADMM on the splitting  min h(y) - <c,x> + lambda p(w)  s.t.  y = Ax, w = x.
// The x-update solves (I + A^T A) x = rhs through a cached factorization
// (directly at moderate n, through I + A A^T at moderate m); above the cap it
// switches to a prox-linear x-update on the single constraint y = Ax with a
// spectral majorization constant. Dual steps use the given step length.
inline std::pair<Solution, SolverReport> admm_solve(const Problem& p,
                                                    const FirstOrderConfig& cfg = {},
                                                    Vector x0 = Vector()) {
  cfg.validate();
  detail::FoLoop clock;
  const Index m = p.num_samples(), n = p.num_features();
  Vector x = x0.size() == 0 ? Vector::Zero(n) : std::move(x0);

  enum class Mode { factor_n, factor_m, linearized };
  Mode mode;
  Eigen::LLT<Matrix> llt;
  double eta_major = 0.0;  // majorization constant for the linearized mode
  if (std::min(m, n) <= cfg.exact_max_dim) {
    if (n <= m) {
      Matrix g = p.A.gram_ata();
      g.diagonal().array() += 1.0;
      llt.compute(g);
      mode = Mode::factor_n;
    } else {
      Matrix g = p.A.gram_aat();
      g.diagonal().array() += 1.0;
      llt.compute(g);
      mode = Mode::factor_m;
    }
  } else {
    mode = Mode::linearized;
    eta_major = 1.01 * std::max(p.A.lambda_max_aat(), 1e-12);
  }

  double rho = cfg.rho;
  const double kappa = cfg.step_length;
  Vector ax = p.A.mul(x);
  Vector y = ax, w = x;
  Vector u1 = Vector::Zero(m), u2 = Vector::Zero(n);

  SolverReport report;
  report.status = SolveStatus::max_iter;
  Vector best = x;
  double best_eta = kkt_residual(p, best);
  report.residual_history.emplace_back(0, best_eta);
  if (best_eta <= cfg.tol) {
    report.status = SolveStatus::converged;
    report.wall_time = clock.elapsed();
    return {make_solution(p, std::move(best)), report};
  }

  Vector y_old = y, w_old = w;
  for (Index it = 1; it <= cfg.max_iter; ++it) {
    y_old = y;
    w_old = w;
    if (mode == Mode::linearized) {
      Vector grad_q = p.A.tmul(ax - y + u1);
      x = prox_exclusive(x - grad_q / eta_major + p.c / (rho * eta_major),
                         p.lambda / (rho * eta_major), p.w, p.partition);
      ax = p.A.mul(x);
      y = prox_h(p.loss, p.b, ax + u1, 1.0 / rho);
      u1 += kappa * (ax - y);
      w = x;
    } else {
      Vector rhs = w - u2 + p.A.tmul(y - u1) + p.c / rho;
      x = mode == Mode::factor_n ? llt.solve(rhs)
                                 : Vector(rhs - p.A.tmul(llt.solve(p.A.mul(rhs))));
      ax = p.A.mul(x);
      y = prox_h(p.loss, p.b, ax + u1, 1.0 / rho);
      w = prox_exclusive(x + u2, p.lambda / rho, p.w, p.partition);
      u1 += kappa * (ax - y);
      u2 += kappa * (x - w);
    }

    if (it % cfg.check_every == 0) {
      const double eta = kkt_residual(p, w);
      if (eta < best_eta) {
        best_eta = eta;
        best = w;
      }
      if (it % 100 == 0 || eta <= cfg.tol)
        report.residual_history.emplace_back(it, eta);
      if (eta <= cfg.tol) {
        report.status = SolveStatus::converged;
        report.outer_iters = it;
        break;
      }
    }

    if (cfg.adapt_rho && mode != Mode::linearized && it % cfg.adapt_every == 0) {
      const double prim = std::sqrt((ax - y).squaredNorm() + (x - w).squaredNorm());
      const double dual =
          rho * std::sqrt((p.A.tmul(y - y_old) + (w - w_old)).squaredNorm());
      double rho_new = rho;
      if (prim > 10.0 * dual)
        rho_new = std::min(rho * 2.0, cfg.rho_max);
      else if (dual > 10.0 * prim)
        rho_new = std::max(rho / 2.0, cfg.rho_min);
      if (rho_new != rho) {
        const double scale = rho / rho_new;  // keep the unscaled multipliers fixed
        u1 *= scale;
        u2 *= scale;
        rho = rho_new;
      }
    }

    report.outer_iters = it;
    if (clock.elapsed() >= cfg.time_limit) {
      report.status = SolveStatus::time_limit;
      break;
    }
  }

  if (report.status != SolveStatus::converged) {
    const double eta = kkt_residual(p, w);
    if (eta < best_eta) best = w;
  } else {
    best = w;
  }
  Solution sol = make_solution(p, std::move(best));
  if (report.residual_history.empty() ||
      report.residual_history.back().second != sol.kkt_residual)
    report.residual_history.emplace_back(report.outer_iters, sol.kkt_residual);
  report.wall_time = clock.elapsed();
  return {std::move(sol), report};
}

// Accelerated proximal gradient with function-value restart: Nesterov
// extrapolation, spectral step estimate refined by backtracking, restart
// (momentum reset + plain prox-gradient step) whenever the objective would
// increase, so accepted objective values never increase.
inline std::pair<Solution, SolverReport> apg_solve(const Problem& p,
                                                   const FirstOrderConfig& cfg = {},
                                                   Vector x0 = Vector()) {
  cfg.validate();
  detail::FoLoop clock;
  const Index n = p.num_features();
  Vector x = x0.size() == 0 ? Vector::Zero(n) : std::move(x0);

  double lip = std::max(loss_hess_bound(p.loss) * p.A.lambda_max_aat(), 1e-12);
  double t = 1.0;
  Vector y = x;
  double fx = p.objective(x);

  SolverReport report;
  report.status = SolveStatus::max_iter;
  double eta = kkt_residual(p, x);
  report.residual_history.emplace_back(0, eta);
  if (eta <= cfg.tol) {
    report.status = SolveStatus::converged;
    report.wall_time = clock.elapsed();
    return {make_solution(p, std::move(x)), report};
  }

  auto prox_grad_step = [&](const Vector& z) -> Vector {
    // backtracking on the quadratic upper bound of Phi around z
    const Vector az = p.A.mul(z);
    const Vector g = p.A.tmul(loss_grad(p.loss, p.b, az)) - p.c;
    const double phi_z = loss_value(p.loss, p.b, az) - p.c.dot(z);
    for (;;) {
      Vector cand = prox_exclusive(z - g / lip, p.lambda / lip, p.w, p.partition);
      const Vector dz = cand - z;
      const double bound = phi_z + g.dot(dz) + 0.5 * lip * dz.squaredNorm();
      if (p.phi(cand) <= bound + 1e-12 * (1.0 + std::abs(phi_z))) return cand;
      lip *= 2.0;
    }
  };

  for (Index it = 1; it <= cfg.max_iter; ++it) {
    Vector cand = prox_grad_step(y);
    double fc = p.objective(cand);
    if (fc > fx) {
      // restart from x: plain prox-gradient step, guaranteed non-increasing
      t = 1.0;
      y = x;
      cand = prox_grad_step(x);
      fc = p.objective(cand);
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = cand + ((t - 1.0) / t_next) * (cand - x);
    t = t_next;
    x = std::move(cand);
    fx = fc;
    report.outer_iters = it;

    if (it % cfg.check_every == 0) {
      eta = kkt_residual(p, x);
      if (it % 100 == 0 || eta <= cfg.tol) report.residual_history.emplace_back(it, eta);
      if (eta <= cfg.tol) {
        report.status = SolveStatus::converged;
        break;
      }
    }
    if (clock.elapsed() >= cfg.time_limit) {
      report.status = SolveStatus::time_limit;
      break;
    }
  }

  Solution sol = make_solution(p, std::move(x));
  if (report.residual_history.empty() ||
      report.residual_history.back().second != sol.kkt_residual)
    report.residual_history.emplace_back(report.outer_iters, sol.kkt_residual);
  report.wall_time = clock.elapsed();
  return {std::move(sol), report};
}

}  // namespace exlasso
