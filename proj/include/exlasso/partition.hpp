#pragma once

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "exlasso/types.hpp"

namespace exlasso {

// Disjoint index groups covering {0..n-1} together with the permutation that
// places each group contiguously. All in-memory indices are 0-based; the
// on-disk group-id format is 1-based (see io.hpp).
class GroupPartition {
 public:
  GroupPartition() = default;

  // Validates that `groups` forms a partition of {0..n-1} and builds the
  // group-contiguous permutation. Groups are sorted ascending internally.
  static GroupPartition from_groups(std::vector<std::vector<Index>> groups, Index n) {
    GroupPartition g;
    g.n_ = n;
    g.groups_ = std::move(groups);
    g.validate_and_build();
    return g;
  }

  static GroupPartition single_group(Index n) {
    std::vector<Index> all(static_cast<std::size_t>(n));
    std::iota(all.begin(), all.end(), Index{0});
    return from_groups({std::move(all)}, n);
  }

  // l contiguous groups of p features each.
  static GroupPartition contiguous(Index l, Index p) {
    std::vector<std::vector<Index>> groups(static_cast<std::size_t>(l));
    for (Index j = 0; j < l; ++j) {
      groups[static_cast<std::size_t>(j)].resize(static_cast<std::size_t>(p));
      std::iota(groups[static_cast<std::size_t>(j)].begin(),
                groups[static_cast<std::size_t>(j)].end(), j * p);
    }
    return from_groups(std::move(groups), l * p);
  }

  // One group id per feature, ids in {1..l} (the file format convention).
  static GroupPartition from_labels(const std::vector<int>& labels) {
    if (labels.empty()) throw std::invalid_argument("partition: empty label list");
    int l = *std::max_element(labels.begin(), labels.end());
    if (l < 1) throw std::invalid_argument("partition: group ids must be >= 1");
    std::vector<std::vector<Index>> groups(static_cast<std::size_t>(l));
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] < 1 || labels[i] > l)
        throw std::invalid_argument("partition: group id out of range at feature " +
                                    std::to_string(i + 1));
      groups[static_cast<std::size_t>(labels[i] - 1)].push_back(static_cast<Index>(i));
    }
    return from_groups(std::move(groups), static_cast<Index>(labels.size()));
  }

  Index num_features() const { return n_; }
  Index num_groups() const { return static_cast<Index>(groups_.size()); }
  const std::vector<Index>& group(Index j) const { return groups_[static_cast<std::size_t>(j)]; }
  Index group_of(Index i) const { return group_of_[static_cast<std::size_t>(i)]; }
  // Cumulative sizes n_0 = 0, n_1, ..., n_l.
  Index offset(Index j) const { return offsets_[static_cast<std::size_t>(j)]; }
  Index group_size(Index j) const { return offset(j + 1) - offset(j); }
  // perm[k] = original index occupying contiguous position k.
  const std::vector<Index>& perm() const { return perm_; }

  // (P x)(k) = x(perm[k]): group g_j lands at positions [n_{j-1}, n_j).
  Vector to_contiguous(const Vector& x) const {
    Vector y(n_);
    for (Index k = 0; k < n_; ++k) y[k] = x[perm_[static_cast<std::size_t>(k)]];
    return y;
  }

  Vector from_contiguous(const Vector& y) const {
    Vector x(n_);
    for (Index k = 0; k < n_; ++k) x[perm_[static_cast<std::size_t>(k)]] = y[k];
    return x;
  }

 private:
  void validate_and_build() {
    if (n_ <= 0) throw std::invalid_argument("partition: number of features must be positive");
    group_of_.assign(static_cast<std::size_t>(n_), Index{-1});
    offsets_.assign(1, 0);
    perm_.clear();
    perm_.reserve(static_cast<std::size_t>(n_));
    for (std::size_t j = 0; j < groups_.size(); ++j) {
      auto& g = groups_[j];
      if (g.empty())
        throw std::invalid_argument("partition: group " + std::to_string(j + 1) + " is empty");
      std::sort(g.begin(), g.end());
      for (Index i : g) {
        if (i < 0 || i >= n_)
          throw std::invalid_argument("partition: index " + std::to_string(i) +
                                      " out of range [0," + std::to_string(n_ - 1) + "]");
        if (group_of_[static_cast<std::size_t>(i)] != -1)
          throw std::invalid_argument("partition: index " + std::to_string(i) +
                                      " appears in more than one group");
        group_of_[static_cast<std::size_t>(i)] = static_cast<Index>(j);
        perm_.push_back(i);
      }
      offsets_.push_back(offsets_.back() + static_cast<Index>(g.size()));
    }
    for (Index i = 0; i < n_; ++i)
      if (group_of_[static_cast<std::size_t>(i)] == -1)
        throw std::invalid_argument("partition: index " + std::to_string(i) +
                                    " is not covered by any group");
  }

  Index n_ = 0;
  std::vector<std::vector<Index>> groups_;
  std::vector<Index> group_of_;
  std::vector<Index> perm_;
  std::vector<Index> offsets_;
};

// Spec'd validation entry point: throws std::invalid_argument on overlap,
// uncovered index, or empty group.
inline GroupPartition validate_partition(std::vector<std::vector<Index>> groups, Index n) {
  return GroupPartition::from_groups(std::move(groups), n);
}

}  // namespace exlasso
