#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <variant>
#include <vector>

#include "exlasso/types.hpp"

namespace exlasso {

// Design matrix wrapper: dense by default, sparse optional. Solvers only go
// through matrix-vector products and column gathers, so both storages behave
// identically. Copies share storage (and the cached spectral estimate);
// restriction creates a new node.
class DesignMatrix {
 public:
  DesignMatrix() = default;
  explicit DesignMatrix(Matrix a) : node_(std::make_shared<Node>(std::move(a))) {}
  explicit DesignMatrix(SparseMatrix a) : node_(std::make_shared<Node>(std::move(a))) {}

  Index rows() const {
    return std::visit([](const auto& a) { return a.rows(); }, node_->storage);
  }
  Index cols() const {
    return std::visit([](const auto& a) { return a.cols(); }, node_->storage);
  }
  bool is_sparse() const { return std::holds_alternative<SparseMatrix>(node_->storage); }

  const Matrix* dense() const { return std::get_if<Matrix>(&node_->storage); }
  const SparseMatrix* sparse() const { return std::get_if<SparseMatrix>(&node_->storage); }

  Vector mul(const Vector& x) const {
    return std::visit([&](const auto& a) -> Vector { return a * x; }, node_->storage);
  }
  Vector tmul(const Vector& y) const {
    return std::visit([&](const auto& a) -> Vector { return a.transpose() * y; },
                      node_->storage);
  }

  Vector col_norms() const {
    if (const Matrix* d = dense()) return d->colwise().norm();
    const SparseMatrix& s = *sparse();
    Vector out = Vector::Zero(s.cols());
    for (Index j = 0; j < s.outerSize(); ++j) {
      double acc = 0.0;
      for (SparseMatrix::InnerIterator it(s, j); it; ++it) acc += it.value() * it.value();
      out[j] = std::sqrt(acc);
    }
    return out;
  }

  // Dense m x |idx| gather of the requested columns, rows scaled by
  // `row_scale` (pass an empty vector for no scaling).
  Matrix gather_cols(const std::vector<Index>& idx, const Vector& row_scale) const {
    const Index m = rows();
    Matrix out = Matrix::Zero(m, static_cast<Index>(idx.size()));
    if (const Matrix* d = dense()) {
      for (std::size_t k = 0; k < idx.size(); ++k) out.col(static_cast<Index>(k)) = d->col(idx[k]);
    } else {
      const SparseMatrix& s = *sparse();
      for (std::size_t k = 0; k < idx.size(); ++k)
        for (SparseMatrix::InnerIterator it(s, idx[k]); it; ++it)
          out(it.row(), static_cast<Index>(k)) = it.value();
    }
    if (row_scale.size() > 0) out = row_scale.asDiagonal() * out;
    return out;
  }

  DesignMatrix select_cols(const std::vector<Index>& idx) const {
    if (const Matrix* d = dense()) {
      Matrix out(d->rows(), static_cast<Index>(idx.size()));
      for (std::size_t k = 0; k < idx.size(); ++k) out.col(static_cast<Index>(k)) = d->col(idx[k]);
      return DesignMatrix(std::move(out));
    }
    const SparseMatrix& s = *sparse();
    SparseMatrix out(s.rows(), static_cast<Index>(idx.size()));
    std::vector<Eigen::Triplet<double>> trips;
    for (std::size_t k = 0; k < idx.size(); ++k)
      for (SparseMatrix::InnerIterator it(s, idx[k]); it; ++it)
        trips.emplace_back(it.row(), static_cast<Index>(k), it.value());
    out.setFromTriplets(trips.begin(), trips.end());
    return DesignMatrix(std::move(out));
  }

  // Dense A A^T (used by ADMM factorizations at moderate m).
  Matrix gram_aat() const {
    if (const Matrix* d = dense()) {
      Matrix out(d->rows(), d->rows());
      out.setZero();
      out.selfadjointView<Eigen::Lower>().rankUpdate(*d);
      return Matrix(out.selfadjointView<Eigen::Lower>());
    }
    const SparseMatrix& s = *sparse();
    return Matrix(s * SparseMatrix(s.transpose()));
  }

  // Dense A^T A (used by ADMM factorizations at moderate n).
  Matrix gram_ata() const {
    if (const Matrix* d = dense()) {
      Matrix out(d->cols(), d->cols());
      out.setZero();
      out.selfadjointView<Eigen::Lower>().rankUpdate(d->transpose());
      return Matrix(out.selfadjointView<Eigen::Lower>());
    }
    const SparseMatrix& s = *sparse();
    return Matrix(SparseMatrix(s.transpose()) * s);
  }

  // lambda_max(A A^T) by power iteration (100 iterations, relative tolerance
  // 1e-4, deterministic start). Cached; copies of this matrix share the cache.
  double lambda_max_aat() const {
    double cached = node_->lmax.load(std::memory_order_relaxed);
    if (cached >= 0.0) return cached;
    const Index m = rows();
    Vector v(m);
    std::uint64_t state = 0x9e3779b97f4a7c15ull;
    for (Index i = 0; i < m; ++i) {
      state ^= state << 13;
      state ^= state >> 7;
      state ^= state << 17;
      v[i] = static_cast<double>(state >> 11) * 0x1.0p-53 - 0.5;
    }
    double nv = v.norm();
    if (nv == 0.0) {
      v.setOnes();
      nv = v.norm();
    }
    v /= nv;
    double lam = 0.0;
    for (int it = 0; it < 100; ++it) {
      Vector av = mul(tmul(v));
      double lam_new = v.dot(av);
      double norm = av.norm();
      if (norm == 0.0) {
        lam = 0.0;
        break;
      }
      v = av / norm;
      if (std::abs(lam_new - lam) <= 1e-4 * std::abs(lam_new)) {
        lam = lam_new;
        break;
      }
      lam = lam_new;
    }
    lam = std::max(lam, 0.0);
    node_->lmax.store(lam, std::memory_order_relaxed);
    return lam;
  }

 private:
  struct Node {
    explicit Node(Matrix a) : storage(std::move(a)) {}
    explicit Node(SparseMatrix a) : storage(std::move(a)) {}
    std::variant<Matrix, SparseMatrix> storage;
    mutable std::atomic<double> lmax{-1.0};
  };
  std::shared_ptr<const Node> node_;
};

}  // namespace exlasso
