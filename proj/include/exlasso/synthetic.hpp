#pragma once

#include <Eigen/Cholesky>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "exlasso/problem.hpp"

namespace exlasso {

// Deterministic generator used everywhere data is synthesized: mt19937_64
// (fixed constants per the C++ standard) with explicit bit-to-double maps, so
// identical seeds produce bitwise identical streams on any platform. Normals
// come from Box-Muller on two uniforms per draw (no cached spare).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  // uniform on [0, 1): 53 high bits
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    // u1 in (0, 1] so the log is finite
    const double u1 = (static_cast<double>(eng_() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  // k distinct values from {0..n-1} by partial Fisher-Yates, returned sorted
  std::vector<Index> sample_without_replacement(Index n, Index k) {
    std::vector<Index> pool(static_cast<std::size_t>(n));
    std::iota(pool.begin(), pool.end(), Index{0});
    for (Index i = 0; i < k; ++i) {
      const Index j = i + static_cast<Index>(eng_() % static_cast<std::uint64_t>(n - i));
      std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
    }
    pool.resize(static_cast<std::size_t>(k));
    std::sort(pool.begin(), pool.end());
    return pool;
  }

 private:
  std::mt19937_64 eng_;
};

struct SyntheticSpec {
  Index m = 200;            // samples
  Index l = 20;             // groups
  Index p = 50;             // features per group
  Index nnz_per_group = 10;
  double corr_in = 0.9;   // within-group Toeplitz base
  double corr_out = 0.3;  // cross-group base
  double noise = 1.0;
  double signal_lo = 0.0;
  double signal_hi = 10.0;
  std::uint64_t seed = 1;
  enum class Task { regression, classification } task = Task::regression;

  Index n() const { return l * p; }

  void validate() const {
    if (m <= 0 || l <= 0 || p <= 0) throw std::invalid_argument("synthetic: counts must be positive");
    if (nnz_per_group <= 0 || nnz_per_group > p)
      throw std::invalid_argument("synthetic: nnz_per_group must be in [1, p]");
    if (corr_in < 0.0 || corr_in >= 1.0 || corr_out < 0.0 || corr_out >= 1.0)
      throw std::invalid_argument("synthetic: correlation bases must be in [0, 1)");
  }
};

struct SyntheticData {
  Matrix A;
  Vector b;
  GroupPartition partition;
  Vector x_true;
};

namespace detail {

// Row covariance Sigma_ij = corr_in^|i-j| within a group, corr_out^|i-j|
// across groups, |i-j| in global feature index.
inline Matrix toeplitz_covariance(const SyntheticSpec& s) {
  const Index n = s.n();
  Matrix sigma(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j <= i; ++j) {
      const bool same = (i / s.p) == (j / s.p);
      const double base = same ? s.corr_in : s.corr_out;
      const double v = i == j ? 1.0 : std::pow(base, static_cast<double>(i - j));
      sigma(i, j) = v;
      sigma(j, i) = v;
    }
  }
  return sigma;
}

}  // namespace detail

// Rows of A are i.i.d. N(0, Sigma). Up to n = 4000 the full blockwise
// Toeplitz covariance is assembled and factored once. Above that, rows are
// drawn by chaining unit-variance AR(1) recursions: factor corr_in inside a
// group and corr_out when stepping across a group boundary. Within-group
// correlations are exact; cross-group ones decay from the exact boundary
// value corr_out instead of following corr_out^|i-j| away from it.
inline SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const Index n = spec.n();

  SyntheticData data;
  data.partition = GroupPartition::contiguous(spec.l, spec.p);
  data.A.resize(spec.m, n);

  if (n <= 4000) {
    Matrix sigma = detail::toeplitz_covariance(spec);
    Eigen::LLT<Matrix> llt(sigma);
    if (llt.info() != Eigen::Success) {
      sigma.diagonal().array() += 1e-10;
      llt.compute(sigma);
      if (llt.info() != Eigen::Success)
        throw std::runtime_error("synthetic: covariance factorization failed");
    }
    const Matrix lfac = llt.matrixL();
    Vector z(n);
    for (Index i = 0; i < spec.m; ++i) {
      for (Index k = 0; k < n; ++k) z[k] = rng.normal();
      data.A.row(i) = (lfac * z).transpose();
    }
  } else {
    for (Index i = 0; i < spec.m; ++i) {
      double prev = rng.normal();
      data.A(i, 0) = prev;
      for (Index k = 1; k < n; ++k) {
        const bool same = (k / spec.p) == ((k - 1) / spec.p);
        const double phi = same ? spec.corr_in : spec.corr_out;
        prev = phi * prev + std::sqrt(1.0 - phi * phi) * rng.normal();
        data.A(i, k) = prev;
      }
    }
  }

  data.x_true = Vector::Zero(n);
  for (Index j = 0; j < spec.l; ++j) {
    const std::vector<Index> pos = rng.sample_without_replacement(spec.p, spec.nnz_per_group);
    for (Index k : pos)
      data.x_true[j * spec.p + k] = rng.uniform(spec.signal_lo, spec.signal_hi);
  }

  Vector eps(spec.m);
  for (Index i = 0; i < spec.m; ++i) eps[i] = spec.noise * rng.normal();
  const Vector signal = data.A * data.x_true + eps;
  if (spec.task == SyntheticSpec::Task::regression) {
    data.b = signal;
  } else {
    data.b.resize(spec.m);
    for (Index i = 0; i < spec.m; ++i) data.b[i] = signal[i] >= 0.0 ? 1.0 : -1.0;
  }
  return data;
}

// `count` values log10-equispaced from hi down to lo, endpoints exact.
inline std::vector<double> lambda_grid(double hi, double lo, Index count) {
  if (!(hi > lo) || lo <= 0.0) throw std::invalid_argument("lambda_grid: need hi > lo > 0");
  if (count < 2) throw std::invalid_argument("lambda_grid: need at least two points");
  std::vector<double> out(static_cast<std::size_t>(count));
  const double lh = std::log10(hi), ll = std::log10(lo);
  for (Index i = 0; i < count; ++i)
    out[static_cast<std::size_t>(i)] =
        std::pow(10.0, lh + (ll - lh) * static_cast<double>(i) / static_cast<double>(count - 1));
  out.front() = hi;
  out.back() = lo;
  return out;
}

}  // namespace exlasso
