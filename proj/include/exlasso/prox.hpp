#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "exlasso/partition.hpp"
#include "exlasso/types.hpp"

namespace exlasso {

// Delta^{G,w}(x) = sum_j ||w_{g_j} o x_{g_j}||_1^2.
inline double exclusive_penalty(const Vector& x, const Vector& w, const GroupPartition& g) {
  double acc = 0.0;
  for (Index j = 0; j < g.num_groups(); ++j) {
    double s = 0.0;
    for (Index i : g.group(j)) s += w[i] * std::abs(x[i]);
    acc += s * s;
  }
  return acc;
}

struct GroupProxResult {
  Vector x;          // prox output
  double alpha_bar;  // the optimal multiplier level computed on |a|
  Vector xi;         // 0-1 active mask, xi_i = 1 iff x_i != 0
  Vector signs;      // sign(a) with sign(0) = 0
};

namespace detail {
inline void check_prox_args(const Vector& a, const Vector& w, double rho) {
  if (a.size() != w.size())
    throw std::invalid_argument("prox: weight length does not match input length");
  if (rho <= 0.0) throw std::invalid_argument("prox: rho must be positive");
  for (Index i = 0; i < w.size(); ++i)
    if (w[i] <= 0.0) throw std::invalid_argument("prox: weights must be strictly positive");
}
}  // namespace detail

// Minimizer of ||x - a||^2/2 + rho ||w o x||_1^2 over x >= 0 for a >= 0:
// sort a_i/w_i non-increasingly (stable, ties by index), take
// alpha_bar = max_i s_i / (1 + 2 rho L_i) over prefix sums s_i of w_i a_i and
// L_i of w_i^2, then x = (a - 2 rho alpha_bar w)^+. O(n log n).
inline GroupProxResult prox_sq_l1_nonneg(const Vector& a, const Vector& w, double rho) {
  detail::check_prox_args(a, w, rho);
  const Index n = a.size();
  for (Index i = 0; i < n; ++i)
    if (a[i] < 0.0) throw std::invalid_argument("prox_sq_l1_nonneg: input must be nonnegative");

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index i, Index j) { return a[i] * w[j] > a[j] * w[i]; });

  double s = 0.0, bigl = 0.0, alpha_bar = 0.0;
  for (Index k = 0; k < n; ++k) {
    Index i = order[static_cast<std::size_t>(k)];
    s += w[i] * a[i];
    bigl += w[i] * w[i];
    alpha_bar = std::max(alpha_bar, s / (1.0 + 2.0 * rho * bigl));
  }

  GroupProxResult res;
  res.alpha_bar = alpha_bar;
  res.x = (a - 2.0 * rho * alpha_bar * w).cwiseMax(0.0);
  res.xi = Vector::Zero(n);
  res.signs = Vector::Zero(n);
  for (Index i = 0; i < n; ++i) {
    // Inactive iff a_i - 2 rho alpha_bar w_i <= 0, exact comparison.
    if (a[i] - 2.0 * rho * alpha_bar * w[i] > 0.0) res.xi[i] = 1.0;
    if (a[i] > 0.0) res.signs[i] = 1.0;
  }
  return res;
}

// Prox_{rho ||w o .||_1^2}(a) = sign(a) o prox_sq_l1_nonneg(|a|).
inline GroupProxResult prox_sq_l1(const Vector& a, const Vector& w, double rho) {
  detail::check_prox_args(a, w, rho);
  GroupProxResult res = prox_sq_l1_nonneg(a.cwiseAbs(), w, rho);
  for (Index i = 0; i < a.size(); ++i) {
    double s = a[i] > 0.0 ? 1.0 : (a[i] < 0.0 ? -1.0 : 0.0);
    res.signs[i] = s;
    res.x[i] *= s;
  }
  return res;
}

// One HS-Jacobian element of prox_sq_l1 at a (the largest admissible active
// set K = I(|a|)): M0 = Diag(xi) - c w~ w~^T with w~ = (sign(a) o xi) o w and
// c = 2 rho / (1 + 2 rho w~^T w~).
struct GroupJacobian {
  Vector xi;       // 0-1 mask
  Vector w_tilde;  // signed weights on active coordinates
  double c;
};

inline GroupJacobian hs_jacobian_from(const GroupProxResult& res, const Vector& w, double rho) {
  GroupJacobian jac;
  jac.xi = res.xi;
  jac.w_tilde = res.signs.cwiseProduct(res.xi).cwiseProduct(w);
  jac.c = 2.0 * rho / (1.0 + 2.0 * rho * jac.w_tilde.squaredNorm());
  return jac;
}

inline GroupJacobian hs_jacobian_group(const Vector& a, const Vector& w, double rho) {
  return hs_jacobian_from(prox_sq_l1(a, w, rho), w, rho);
}

inline Matrix dense_group_jacobian(const GroupJacobian& jac) {
  Matrix m = Matrix(jac.xi.asDiagonal());
  m -= jac.c * jac.w_tilde * jac.w_tilde.transpose();
  return m;
}

// Block-diagonal HS-Jacobian of Prox_{nu p} with p = Delta^{G,w}, kept in
// implicit form: the active index set K (in group order) and per-group
// rank-one data (v_j, c_j). Never materialized densely by the solvers.
struct JacobianElement {
  struct GroupBlock {
    Index begin = 0;  // range into `active` / `vflat`
    Index end = 0;
    double c = 0.0;
  };
  Index n = 0;
  std::vector<Index> active;       // original indices of active coordinates
  std::vector<double> vflat;       // signed weights aligned with `active`
  std::vector<GroupBlock> blocks;  // one entry per group with a nonempty K_j

  Index active_count() const { return static_cast<Index>(active.size()); }

  // y -> P^T Diag(M_1..M_l) P y in original coordinates.
  Vector matvec(const Vector& y) const {
    Vector out = Vector::Zero(n);
    for (const GroupBlock& blk : blocks) {
      double dot = 0.0;
      for (Index k = blk.begin; k < blk.end; ++k)
        dot += vflat[static_cast<std::size_t>(k)] * y[active[static_cast<std::size_t>(k)]];
      for (Index k = blk.begin; k < blk.end; ++k) {
        Index i = active[static_cast<std::size_t>(k)];
        out[i] = y[i] - blk.c * vflat[static_cast<std::size_t>(k)] * dot;
      }
    }
    return out;
  }

  Matrix dense() const {
    Matrix m = Matrix::Zero(n, n);
    for (const GroupBlock& blk : blocks) {
      for (Index k = blk.begin; k < blk.end; ++k) {
        Index i = active[static_cast<std::size_t>(k)];
        m(i, i) = 1.0;
        for (Index k2 = blk.begin; k2 < blk.end; ++k2)
          m(i, active[static_cast<std::size_t>(k2)]) -=
              blk.c * vflat[static_cast<std::size_t>(k)] * vflat[static_cast<std::size_t>(k2)];
      }
    }
    return m;
  }
};

struct ExclusiveProxResult {
  Vector x;
  JacobianElement jac;
};

// Groupwise prox of nu * Delta^{G,w} together with the HS-Jacobian data at
// the same point; shares the per-group sort between the two.
inline ExclusiveProxResult prox_exclusive_with_jacobian(const Vector& x, double nu,
                                                        const Vector& w,
                                                        const GroupPartition& g) {
  if (nu <= 0.0) throw std::invalid_argument("prox_exclusive: nu must be positive");
  if (x.size() != g.num_features() || w.size() != g.num_features())
    throw std::invalid_argument("prox_exclusive: size mismatch with partition");
  ExclusiveProxResult out;
  out.x = Vector::Zero(x.size());
  out.jac.n = x.size();
  for (Index j = 0; j < g.num_groups(); ++j) {
    const auto& idx = g.group(j);
    const Index p = static_cast<Index>(idx.size());
    Vector xg(p), wg(p);
    for (Index k = 0; k < p; ++k) {
      xg[k] = x[idx[static_cast<std::size_t>(k)]];
      wg[k] = w[idx[static_cast<std::size_t>(k)]];
    }
    GroupProxResult r = prox_sq_l1(xg, wg, nu);
    JacobianElement::GroupBlock blk;
    blk.begin = static_cast<Index>(out.jac.active.size());
    double wtw = 0.0;
    for (Index k = 0; k < p; ++k) {
      out.x[idx[static_cast<std::size_t>(k)]] = r.x[k];
      if (r.xi[k] != 0.0) {
        out.jac.active.push_back(idx[static_cast<std::size_t>(k)]);
        double v = r.signs[k] * wg[k];
        out.jac.vflat.push_back(v);
        wtw += v * v;
      }
    }
    blk.end = static_cast<Index>(out.jac.active.size());
    if (blk.end > blk.begin) {
      blk.c = 2.0 * nu / (1.0 + 2.0 * nu * wtw);
      out.jac.blocks.push_back(blk);
    }
  }
  return out;
}

inline Vector prox_exclusive(const Vector& x, double nu, const Vector& w,
                             const GroupPartition& g) {
  return prox_exclusive_with_jacobian(x, nu, w, g).x;
}

inline JacobianElement hs_jacobian_exclusive(const Vector& x, double nu, const Vector& w,
                                             const GroupPartition& g) {
  return prox_exclusive_with_jacobian(x, nu, w, g).jac;
}

// Moreau envelope of nu * Delta^{G,w} at x.
inline double moreau_env_exclusive(const Vector& x, double nu, const Vector& w,
                                   const GroupPartition& g) {
  Vector p = prox_exclusive(x, nu, w, g);
  return nu * exclusive_penalty(p, w, g) + 0.5 * (p - x).squaredNorm();
}

inline double moreau_env_exclusive_at(const Vector& x, const Vector& p, double nu,
                                      const Vector& w, const GroupPartition& g) {
  return nu * exclusive_penalty(p, w, g) + 0.5 * (p - x).squaredNorm();
}

}  // namespace exlasso
