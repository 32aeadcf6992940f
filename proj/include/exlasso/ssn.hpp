#pragma once

#include <Eigen/Cholesky>

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <utility>

#include "exlasso/problem.hpp"

namespace exlasso {

enum class NewtonStrategy { automatic, cholesky, smw, cg };

struct SsnParams {
  double mu = 1e-4;         // Armijo slope fraction, in (0, 1/2)
  double tau_bar = 0.5;     // forcing-term exponent, in (0, 1]
  double gamma_bar = 1e-3;  // forcing-term cap, in (0, 1)
  double backtrack = 0.5;   // step shrink factor, in (0, 1)
  Index max_iter = 100;
  Index max_line_search = 60;
  NewtonStrategy strategy = NewtonStrategy::automatic;
  Index m_direct = 3000;  // dense Cholesky allowed up to this m
  Index k_direct = 3000;  // SMW allowed up to this |K|
  Index cg_max_iter = 500;
};

// Implicit Newton operator (sigma/tau) Diag(H) + sigma A M A^T, where H is the
// diagonal prox-of-loss Jacobian and M the block HS-Jacobian of the
// regularizer prox; acts only on the active columns A_K.
struct NewtonSystem {
  Vector H_diag;      // > 0 entries
  JacobianElement M;  // active set K and per-group (v_j, c_j)
  Vector rhs;         // grad psi_k(u)
  double sigma = 1.0;
  double tau = 1.0;
  const DesignMatrix* A = nullptr;
};

struct NewtonSolveStats {
  NewtonStrategy used = NewtonStrategy::cholesky;
  Index cg_iters = 0;
  double residual = 0.0;  // ||(sigma/tau) H d + sigma A M A^T d - rhs||
  bool fallback = false;
};

namespace detail {

// Applies Diag(Mhat_1..Mhat_L) in place, Mhat_j = I - c_j v_j v_j^T on the
// contiguous active range of group j.
inline void apply_mhat(const JacobianElement& m, Vector& t) {
  for (const auto& blk : m.blocks) {
    double dot = 0.0;
    for (Index k = blk.begin; k < blk.end; ++k)
      dot += m.vflat[static_cast<std::size_t>(k)] * t[k];
    for (Index k = blk.begin; k < blk.end; ++k)
      t[k] -= blk.c * m.vflat[static_cast<std::size_t>(k)] * dot;
  }
}

inline NewtonStrategy resolve_strategy(NewtonStrategy s, Index m, Index kk, const SsnParams& p) {
  if (s != NewtonStrategy::automatic) return s;
  if (2 * kk <= m && kk <= p.k_direct) return NewtonStrategy::smw;
  if (m <= p.m_direct) return NewtonStrategy::cholesky;
  return NewtonStrategy::cg;
}

}  // namespace detail

// Solves ((sigma/tau) H + sigma A M A^T) d = rhs to residual <= tol via the
// scaled system (I + tau Ahat_K Mhat Ahat_K^T) dhat = Rhat with
// Ahat_K = H^{-1/2} A_K, dhat = H^{1/2} d, Rhat = (tau/sigma) H^{-1/2} rhs.
inline std::pair<Vector, NewtonSolveStats> solve_newton_system(const NewtonSystem& sys,
                                                               NewtonStrategy strategy,
                                                               double tol,
                                                               const SsnParams& params) {
  const Index m = sys.H_diag.size();
  const Index kk = sys.M.active_count();
  const double sig_over_tau = sys.sigma / sys.tau;
  NewtonSolveStats stats;
  stats.used = detail::resolve_strategy(strategy, m, kk, params);

  const Vector sqrt_h = sys.H_diag.cwiseSqrt();
  const Vector inv_sqrt_h = sqrt_h.cwiseInverse();
  const Vector rhat = (1.0 / sig_over_tau) * sys.rhs.cwiseProduct(inv_sqrt_h);
  const Matrix bmat = kk > 0 ? sys.A->gather_cols(sys.M.active, inv_sqrt_h) : Matrix(m, 0);

  // Unscaled-operator application, d -> (sigma/tau) H d + sigma A_K Mhat A_K^T d
  // with A_K = Diag(sqrt_h) B.
  auto apply_unscaled = [&](const Vector& d) -> Vector {
    Vector out = sig_over_tau * sys.H_diag.cwiseProduct(d);
    if (kk > 0) {
      Vector t = bmat.transpose() * d.cwiseProduct(sqrt_h);
      detail::apply_mhat(sys.M, t);
      out += sys.sigma * sqrt_h.cwiseProduct(bmat * t);
    }
    return out;
  };

  Vector dhat;
  if (kk == 0) {
    dhat = rhat;  // operator reduces to (sigma/tau) H
  } else {
    switch (stats.used) {
      case NewtonStrategy::cholesky: {
        Matrix s = Matrix::Zero(m, m);
        s.selfadjointView<Eigen::Lower>().rankUpdate(bmat, sys.tau);
        for (const auto& blk : sys.M.blocks) {
          Vector y = Vector::Zero(m);
          for (Index k = blk.begin; k < blk.end; ++k)
            y += sys.M.vflat[static_cast<std::size_t>(k)] * bmat.col(k);
          s.selfadjointView<Eigen::Lower>().rankUpdate(y, -sys.tau * blk.c);
        }
        s.diagonal().array() += 1.0;
        dhat = Matrix(s.selfadjointView<Eigen::Lower>()).llt().solve(rhat);
        break;
      }
      case NewtonStrategy::smw: {
        // (I + tau B Mhat B^T)^{-1} = I - B ((tau Mhat)^{-1} + B^T B)^{-1} B^T,
        // with (tau Mhat_j)^{-1} = (1/tau)(I + v_j v_j^T / (1/c_j - v_j^T v_j)).
        Matrix g = Matrix::Zero(kk, kk);
        g.selfadjointView<Eigen::Lower>().rankUpdate(bmat.transpose());
        Matrix gfull = g.selfadjointView<Eigen::Lower>();
        for (const auto& blk : sys.M.blocks) {
          double vtv = 0.0;
          for (Index k = blk.begin; k < blk.end; ++k) {
            double v = sys.M.vflat[static_cast<std::size_t>(k)];
            vtv += v * v;
          }
          const double gamma = 1.0 / (1.0 / blk.c - vtv);
          for (Index p = blk.begin; p < blk.end; ++p) {
            for (Index q = blk.begin; q < blk.end; ++q)
              gfull(p, q) += gamma / sys.tau * sys.M.vflat[static_cast<std::size_t>(p)] *
                             sys.M.vflat[static_cast<std::size_t>(q)];
            gfull(p, p) += 1.0 / sys.tau;
          }
        }
        Vector bt_r = bmat.transpose() * rhat;
        dhat = rhat - bmat * gfull.llt().solve(bt_r);
        break;
      }
      case NewtonStrategy::cg: {
        // Jacobi-preconditioned CG on the scaled system; the scaled residual
        // target guarantees the requested unscaled tolerance.
        auto apply_scaled = [&](const Vector& v) -> Vector {
          Vector t = bmat.transpose() * v;
          detail::apply_mhat(sys.M, t);
          return v + sys.tau * (bmat * t);
        };
        Vector diag = Vector::Ones(m) + sys.tau * bmat.rowwise().squaredNorm().matrix();
        for (const auto& blk : sys.M.blocks) {
          Vector y = Vector::Zero(m);
          for (Index k = blk.begin; k < blk.end; ++k)
            y += sys.M.vflat[static_cast<std::size_t>(k)] * bmat.col(k);
          diag -= sys.tau * blk.c * y.cwiseAbs2();
        }
        const double scale_back = sig_over_tau * sqrt_h.maxCoeff();
        double target = tol / std::max(scale_back, 1e-300);
        target = std::max(target, 1e-15 * rhat.norm());

        dhat = Vector::Zero(m);
        Vector r = rhat;
        Vector z = r.cwiseQuotient(diag);
        Vector pvec = z;
        double rz = r.dot(z);
        Index it = 0;
        bool ok = r.norm() <= target;
        for (; it < params.cg_max_iter && !ok; ++it) {
          Vector ap = apply_scaled(pvec);
          double alpha = rz / pvec.dot(ap);
          dhat += alpha * pvec;
          r -= alpha * ap;
          if (r.norm() <= target) {
            ok = true;
            break;
          }
          z = r.cwiseQuotient(diag);
          double rz_new = r.dot(z);
          pvec = z + (rz_new / rz) * pvec;
          rz = rz_new;
        }
        stats.cg_iters = it;
        if (!ok) {
          stats.fallback = true;  // steepest-ascent direction
          Vector d = sys.rhs;
          stats.residual = (apply_unscaled(d) - sys.rhs).norm();
          return {std::move(d), stats};
        }
        break;
      }
      case NewtonStrategy::automatic:
        break;  // unreachable
    }
  }

  Vector d = dhat.cwiseProduct(inv_sqrt_h);
  stats.residual = (apply_unscaled(d) - sys.rhs).norm();
  return {std::move(d), stats};
}

// Inner dual subproblem of one preconditioned proximal-point step: maximize
//   psi_k(u) = -(tau/2s)||Ax^k + (s/t)u||^2 + (t/s) E_{s h/t}(Ax^k + (s/t)u)
//              + (t/2s)||Ax^k||^2 - (1/2s)||xhat||^2 + (1/s) E_{s lam p}(xhat)
//              + (1/2s)||x^k||^2,   xhat = x^k + s c - s A^T u,
// which is smooth, strictly concave, with
//   grad psi_k(u) = -Prox_{s h/t}(Ax^k + (s/t)u) + A Prox_{s lam p}(xhat).
class DualSubproblem {
 public:
  DualSubproblem(const Problem& p, Vector x_anchor, double sigma, double tau)
      : prob_(&p), x_anchor_(std::move(x_anchor)), sigma_(sigma), tau_(tau) {
    if (sigma <= 0.0 || tau <= 0.0)
      throw std::invalid_argument("dual subproblem: sigma and tau must be positive");
    ax_anchor_ = p.A.mul(x_anchor_);
  }

  struct Eval {
    Vector u;
    Vector g1;       // Ax^k + (sigma/tau) u
    Vector hprox;    // Prox_{sigma h / tau}(g1)
    Vector xhat;     // x^k + sigma c - sigma A^T u
    Vector pprox;    // Prox_{sigma lambda p}(xhat): the primal candidate
    Vector a_pprox;  // A * pprox
    JacobianElement jac;
    Vector grad;
    double psi = 0.0;
  };

  Eval evaluate(const Vector& u) const {
    Eval e;
    e.u = u;
    e.g1 = ax_anchor_ + (sigma_ / tau_) * u;
    e.hprox = prox_h(prob_->loss, prob_->b, e.g1, sigma_ / tau_);
    e.xhat = x_anchor_ + sigma_ * prob_->c - sigma_ * prob_->A.tmul(u);
    ExclusiveProxResult pr =
        prox_exclusive_with_jacobian(e.xhat, sigma_ * prob_->lambda, prob_->w, prob_->partition);
    e.pprox = std::move(pr.x);
    e.jac = std::move(pr.jac);
    e.a_pprox = prob_->A.mul(e.pprox);
    e.grad = e.a_pprox - e.hprox;
    e.psi = psi_given(e.u, e.g1, e.hprox, e.xhat, e.pprox);
    return e;
  }

  double psi_value(const Vector& u) const { return evaluate(u).psi; }
  Vector psi_grad(const Vector& u) const { return evaluate(u).grad; }

  // psi at u + alpha d reusing the direction matvec at_d = A^T d.
  double psi_trial(const Eval& base, const Vector& d, const Vector& at_d, double alpha) const {
    Vector u = base.u + alpha * d;
    Vector g1 = base.g1 + (sigma_ / tau_) * alpha * d;
    Vector xhat = base.xhat - sigma_ * alpha * at_d;
    Vector hprox = prox_h(prob_->loss, prob_->b, g1, sigma_ / tau_);
    Vector pprox = prox_exclusive(xhat, sigma_ * prob_->lambda, prob_->w, prob_->partition);
    return psi_given(u, g1, hprox, xhat, pprox);
  }

  NewtonSystem assemble_jacobian(const Eval& e) const {
    NewtonSystem sys;
    sys.H_diag = prox_h_jacobian_diag_at(prob_->loss, prob_->b, e.hprox, sigma_ / tau_);
    sys.M = e.jac;
    sys.rhs = e.grad;
    sys.sigma = sigma_;
    sys.tau = tau_;
    sys.A = &prob_->A;
    return sys;
  }

  NewtonSystem assemble_jacobian(const Vector& u) const { return assemble_jacobian(evaluate(u)); }

  const Problem& problem() const { return *prob_; }
  double sigma() const { return sigma_; }
  double tau() const { return tau_; }
  const Vector& x_anchor() const { return x_anchor_; }
  const Vector& ax_anchor() const { return ax_anchor_; }

 private:
  double psi_given(const Vector& u, const Vector& g1, const Vector& hprox, const Vector& xhat,
                   const Vector& pprox) const {
    // -(tau/2s)(||g1||^2 - ||Ax^k||^2) = -<u, Ax^k> - (s/2t)||u||^2.
    const double quad1 = -u.dot(ax_anchor_) - (sigma_ / (2.0 * tau_)) * u.squaredNorm();
    const double env_h = (sigma_ / tau_) * loss_value(prob_->loss, prob_->b, hprox) +
                         0.5 * (hprox - g1).squaredNorm();
    // -(1/2s)(||xhat||^2 - ||x^k||^2), product form for stability.
    const Vector diff = xhat - x_anchor_;
    const double quad2 = -(1.0 / (2.0 * sigma_)) * diff.dot(xhat + x_anchor_);
    const double env_p =
        sigma_ * prob_->lambda * exclusive_penalty(pprox, prob_->w, prob_->partition) +
        0.5 * (pprox - xhat).squaredNorm();
    return quad1 + (tau_ / sigma_) * env_h + quad2 + (1.0 / sigma_) * env_p;
  }

  const Problem* prob_;
  Vector x_anchor_;
  double sigma_;
  double tau_;
  Vector ax_anchor_;
};

struct SsnResult {
  Vector u;
  Index iterations = 0;
  SolveStatus status = SolveStatus::converged;
  Vector x_candidate;  // Prox_{sigma lambda p}(xhat) at the final u
  double grad_norm = 0.0;
  Index cg_iters = 0;
  bool any_fallback = false;
};

using SsnStopCallback = std::function<bool(const DualSubproblem::Eval&)>;

// Semismooth Newton with Armijo backtracking on the concave dual. Terminates
// when `stop` (the caller's duality-gap criteria) fires, when
// ||grad psi|| <= grad_tol, or at max_iter.
inline SsnResult ssn_solve(const DualSubproblem& sub, Vector u0, double grad_tol,
                           const SsnParams& params, const SsnStopCallback& stop = {}) {
  SsnResult res;
  Vector u = std::move(u0);
  if (u.size() == 0) u = Vector::Zero(sub.ax_anchor().size());

  Index j = 0;
  while (true) {
    DualSubproblem::Eval e = sub.evaluate(u);
    res.grad_norm = e.grad.norm();
    if (stop && stop(e)) {
      res.x_candidate = std::move(e.pprox);
      break;
    }
    if (res.grad_norm <= grad_tol) {
      res.x_candidate = std::move(e.pprox);
      break;
    }
    if (j >= params.max_iter) {
      res.status = SolveStatus::max_iter;
      res.x_candidate = std::move(e.pprox);
      break;
    }

    NewtonSystem sys = sub.assemble_jacobian(e);
    const double dir_tol =
        std::min(params.gamma_bar, std::pow(res.grad_norm, 1.0 + params.tau_bar));
    auto [d, st] = solve_newton_system(sys, params.strategy, dir_tol, params);
    res.cg_iters += st.cg_iters;
    res.any_fallback |= st.fallback;

    double slope = e.grad.dot(d);
    if (!(slope > 0.0)) {  // numerical safeguard: revert to steepest ascent
      d = e.grad;
      slope = res.grad_norm * res.grad_norm;
    }

    const Vector at_d = sub.problem().A.tmul(d);
    double alpha = 1.0;
    for (Index ls = 0; ls < params.max_line_search; ++ls) {
      if (sub.psi_trial(e, d, at_d, alpha) >= e.psi + params.mu * alpha * slope) break;
      alpha *= params.backtrack;
    }
    u += alpha * d;
    ++j;
    if (alpha * d.norm() <= 1e-16 * (1.0 + u.norm())) {
      // step at numerical floor; finish with a final evaluation
      DualSubproblem::Eval ef = sub.evaluate(u);
      res.grad_norm = ef.grad.norm();
      res.x_candidate = std::move(ef.pprox);
      break;
    }
  }
  res.iterations = j;
  res.u = std::move(u);
  return res;
}

}  // namespace exlasso
