#pragma once

#include <cmath>
#include <stdexcept>
#include <limits>

#include "exlasso/types.hpp"

namespace exlasso {

enum class LossKind { squared, logistic };

inline std::string to_string(LossKind k) {
  return k == LossKind::squared ? "squared" : "logistic";
}

// log(1 + exp(t)) without overflow.
inline double log1p_exp(double t) {
  if (t > 0.0) return t + std::log1p(std::exp(-t));
  return std::log1p(std::exp(t));
}

inline double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  double e = std::exp(t);
  return e / (1.0 + e);
}

namespace detail {
inline void check_same_size(const Vector& b, const Vector& y) {
  if (b.size() != y.size())
    throw std::invalid_argument("loss: response length " + std::to_string(b.size()) +
                                " does not match input length " + std::to_string(y.size()));
}
}  // namespace detail

// h(y) = sum (y_i - b_i)^2 / 2  (squared)  or  sum log(1 + exp(-b_i y_i)).
inline double loss_value(LossKind kind, const Vector& b, const Vector& y) {
  detail::check_same_size(b, y);
  if (kind == LossKind::squared) return 0.5 * (y - b).squaredNorm();
  double acc = 0.0;
  for (Index i = 0; i < y.size(); ++i) acc += log1p_exp(-b[i] * y[i]);
  return acc;
}

inline Vector loss_grad(LossKind kind, const Vector& b, const Vector& y) {
  detail::check_same_size(b, y);
  if (kind == LossKind::squared) return y - b;
  Vector g(y.size());
  for (Index i = 0; i < y.size(); ++i) g[i] = -b[i] * sigmoid(-b[i] * y[i]);
  return g;
}

// Both supported losses have diagonal Hessians.
inline Vector loss_hess_diag(LossKind kind, const Vector& b, const Vector& y) {
  detail::check_same_size(b, y);
  if (kind == LossKind::squared) return Vector::Ones(y.size());
  Vector h(y.size());
  for (Index i = 0; i < y.size(); ++i) {
    double s = sigmoid(-b[i] * y[i]);
    h[i] = s * (1.0 - s);
  }
  return h;
}

// Upper bound on the largest Hessian eigenvalue (step-size estimates).
inline double loss_hess_bound(LossKind kind) {
  return kind == LossKind::squared ? 1.0 : 0.25;
}

namespace detail {
// Solves v - z + nu * (-b * sigmoid(-b v)) = 0 for the scalar logistic prox.
// The map is strictly increasing in v, bracketed by [z - nu, z + nu] since
// |nu h'| <= nu. Safeguarded Newton: a step is accepted only when it stays in
// the bracket and at least halves the previous step, otherwise bisect, so the
// bracket shrinks geometrically (Newton alone zigzags across the sigmoid's
// flat tails). Residual tolerance 1e-12 with a roundoff-scaled floor; a
// collapsed bracket is the root in double precision.
inline double logistic_prox_scalar(double z, double bi, double nu) {
  double lo = z - nu, hi = z + nu;
  double v = z;
  double step_old = hi - lo;
  const double tol = 1e-12 + 1e-15 * (std::abs(z) + nu);
  double s = sigmoid(-bi * v);
  double f = v - z - nu * bi * s;
  for (int it = 0; it < 200; ++it) {
    if (std::abs(f) <= tol) return v;
    if (f > 0.0)
      hi = v;
    else
      lo = v;
    if (hi - lo <= 8.0 * std::numeric_limits<double>::epsilon() * (std::abs(v) + 1.0)) return v;
    const double fp = 1.0 + nu * s * (1.0 - s);
    const double newton = v - f / fp;
    if (std::abs(2.0 * f) <= std::abs(step_old * fp) && newton > lo && newton < hi) {
      step_old = std::abs(f / fp);
      v = newton;
    } else {
      step_old = 0.5 * (hi - lo);
      v = 0.5 * (lo + hi);
    }
    s = sigmoid(-bi * v);
    f = v - z - nu * bi * s;
  }
  throw std::runtime_error("logistic prox: scalar solver did not converge");
}
}  // namespace detail

// Prox_{nu h}(z): the unique w with w - z + nu grad h(w) = 0.
inline Vector prox_h(LossKind kind, const Vector& b, const Vector& z, double nu) {
  detail::check_same_size(b, z);
  if (nu <= 0.0) throw std::invalid_argument("prox_h: nu must be positive");
  if (kind == LossKind::squared) return (z + nu * b) / (1.0 + nu);
  Vector w(z.size());
  for (Index i = 0; i < z.size(); ++i) w[i] = detail::logistic_prox_scalar(z[i], b[i], nu);
  return w;
}

// Diagonal of grad Prox_{nu h}(z) = (I + nu hess h(Prox_{nu h}(z)))^{-1},
// entries in (0, 1]. `w` must be prox_h(kind, b, z, nu).
inline Vector prox_h_jacobian_diag_at(LossKind kind, const Vector& b, const Vector& w, double nu) {
  if (kind == LossKind::squared) return Vector::Constant(w.size(), 1.0 / (1.0 + nu));
  Vector d = loss_hess_diag(kind, b, w);
  return (1.0 + nu * d.array()).inverse().matrix();
}

inline Vector prox_h_jacobian_diag(LossKind kind, const Vector& b, const Vector& z, double nu) {
  return prox_h_jacobian_diag_at(kind, b, prox_h(kind, b, z, nu), nu);
}

// Moreau envelope of nu*h at z: nu h(w) + ||w - z||^2 / 2 at w = Prox_{nu h}(z).
inline double moreau_env_h(LossKind kind, const Vector& b, const Vector& z, double nu) {
  Vector w = prox_h(kind, b, z, nu);
  return nu * loss_value(kind, b, w) + 0.5 * (w - z).squaredNorm();
}

inline double moreau_env_h_at(LossKind kind, const Vector& b, const Vector& z, const Vector& w,
                              double nu) {
  return nu * loss_value(kind, b, w) + 0.5 * (w - z).squaredNorm();
}

}  // namespace exlasso
