#pragma once

#include <chrono>
#include <cmath>
#include <limits>
#include <utility>

#include "exlasso/ssn.hpp"

namespace exlasso {

struct PpdnaConfig {
  double sigma0 = 1.0;
  double sigma_growth = 3.0;
  double sigma_max = 1e6;
  double tau = 0.0;  // <= 0: use 1 / lambda_max(A A^T)
  double tol = 1e-6;
  // When true, stop on the absolute residual ||R_lambda(x)|| <= tol instead
  // of the relative eta_KKT (used by the sieving loop's error budget).
  bool tol_is_absolute = false;
  Index max_outer = 200;
  Index max_total_inner = 100000;
  double time_limit = std::numeric_limits<double>::infinity();
  SsnParams ssn;
};

// f_k(x) = h(Ax) - <c,x> + lambda p(x) + ||x - x_anchor||_M^2 / (2 sigma),
// with ||v||_M^2 = ||v||^2 + tau ||Av||^2.
inline double fk_value(const Problem& p, double sigma, double tau, const Vector& x_anchor,
                       const Vector& x) {
  if (sigma <= 0.0) throw std::invalid_argument("fk_value: sigma must be positive");
  const Vector dx = x - x_anchor;
  return p.objective(x) + (0.5 / sigma) * (dx.squaredNorm() + tau * p.A.mul(dx).squaredNorm());
}

// Proximal point loop: each outer step maximizes the dual psi_k by SSN,
// updates x^{k+1} = Prox_{sigma lambda p}(x^k + sigma c - sigma A^T u^{k+1}),
// and terminates the inner solve by the implementable duality-gap criteria
//   gap <= eps_k^2 / (2 sigma)   and   gap <= delta_k^2 ||x^{k+1}-x^k||_M^2 / (2 sigma)
// with eps_k = 0.5^k and delta_k = min(0.5, 0.5^k).
inline std::pair<Solution, SolverReport> ppdna_solve(const Problem& p,
                                                     const PpdnaConfig& cfg = {},
                                                     Vector x0 = Vector()) {
  const auto t_start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  };

  const Index m = p.num_samples(), n = p.num_features();
  Vector x = x0.size() == 0 ? Vector::Zero(n) : std::move(x0);
  if (x.size() != n) throw std::invalid_argument("ppdna: x0 length does not match features");

  const double tau = cfg.tau > 0.0 ? cfg.tau : 1.0 / std::max(p.A.lambda_max_aat(), 1e-12);

  SolverReport report;
  auto metric = [&](const ProximalResidual& r, const Vector& xx) {
    return cfg.tol_is_absolute ? r.norm : r.norm / (1.0 + xx.norm() + r.grad.norm());
  };

  ProximalResidual res = proximal_residual(p, x);
  report.residual_history.emplace_back(0, res.norm / (1.0 + x.norm() + res.grad.norm()));
  if (metric(res, x) <= cfg.tol) {
    report.status = SolveStatus::converged;
    report.wall_time = elapsed();
    return {make_solution(p, std::move(x)), report};
  }

  Vector u = Vector::Zero(m);
  double sigma = cfg.sigma0;
  const double grad_floor_scale = 1.0 + p.b.norm();
  report.status = SolveStatus::max_iter;
  double best_metric = metric(res, x);
  Vector best_x = x;
  Index stalled = 0;

  for (Index k = 0; k < cfg.max_outer; ++k) {
    DualSubproblem sub(p, x, sigma, tau);
    const double eps_k = std::pow(0.5, static_cast<double>(k));
    const double delta_k = std::min(0.5, eps_k);
    const double bound_a = eps_k * eps_k / (2.0 * sigma);
    const double bound_b_coeff = delta_k * delta_k / (2.0 * sigma);

    auto criteria = [&](const DualSubproblem::Eval& e) {
      const double fk = loss_value(p.loss, p.b, e.a_pprox) - p.c.dot(e.pprox) +
                        p.lambda * exclusive_penalty(e.pprox, p.w, p.partition) +
                        (0.5 / sigma) * ((e.pprox - x).squaredNorm() +
                                         tau * (e.a_pprox - sub.ax_anchor()).squaredNorm());
      const double gap = std::max(fk - e.psi, 0.0);
      const double mnorm2 =
          (e.pprox - x).squaredNorm() + tau * (e.a_pprox - sub.ax_anchor()).squaredNorm();
      return gap <= bound_a && gap <= bound_b_coeff * mnorm2;
    };

    SsnResult inner = ssn_solve(sub, u, 1e-12 * grad_floor_scale, cfg.ssn, criteria);
    u = std::move(inner.u);
    x = std::move(inner.x_candidate);
    report.total_inner_iters += inner.iterations;
    report.outer_iters = k + 1;

    res = proximal_residual(p, x);
    const double eta = res.norm / (1.0 + x.norm() + res.grad.norm());
    report.residual_history.emplace_back(k + 1, eta);
    const double cur = metric(res, x);
    if (cur <= cfg.tol) {
      report.status = SolveStatus::converged;
      break;
    }
    if (elapsed() >= cfg.time_limit) {
      report.status = SolveStatus::time_limit;
      break;
    }
    if (report.total_inner_iters >= cfg.max_total_inner) {
      report.status = SolveStatus::max_iter;
      break;
    }
    // numerical floor: residual no longer improving across outer steps
    if (cur >= 0.999 * best_metric) {
      if (++stalled >= 15) {
        report.status = SolveStatus::max_iter;
        break;
      }
    } else {
      stalled = 0;
    }
    if (cur < best_metric) {
      best_metric = cur;
      best_x = x;
    }
    sigma = std::min(sigma * cfg.sigma_growth, cfg.sigma_max);
  }

  if (report.status != SolveStatus::converged && metric(proximal_residual(p, x), x) > best_metric)
    x = std::move(best_x);
  Solution sol = make_solution(p, std::move(x));
  if (report.residual_history.empty() ||
      report.residual_history.back().second != sol.kkt_residual)
    report.residual_history.emplace_back(report.outer_iters, sol.kkt_residual);
  report.wall_time = elapsed();
  return {std::move(sol), report};
}

}  // namespace exlasso
