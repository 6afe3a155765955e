#pragma once

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace glsm {

using Index = Eigen::Index;

/// Multi-index alpha in N_0^d. Entries are non-negative by construction.
class MultiIndex {
 public:
  MultiIndex() = default;
  explicit MultiIndex(int dimension) : entries_(static_cast<std::size_t>(dimension), 0) {}
  explicit MultiIndex(std::vector<int> entries);

  int dimension() const { return static_cast<int>(entries_.size()); }
  int operator[](int axis) const { return entries_[static_cast<std::size_t>(axis)]; }
  const std::vector<int>& entries() const { return entries_; }

  /// |alpha| = alpha_1 + ... + alpha_d.
  int degree() const;
  /// Number of non-zero entries.
  int support_size() const;

  /// Copy with entry `axis` changed by `delta`. Throws if the result would be negative.
  MultiIndex shifted(int axis, int delta) const;

  auto operator<=>(const MultiIndex&) const = default;

 private:
  std::vector<int> entries_;
};

/// Membership rule for the hyperbolic cross.
enum class CrossRule {
  /// prod_j (alpha_j + 1) <= p + 1. Reproduces the tabulated basis sizes.
  kShiftedProduct,
  /// prod_j max(alpha_j, 1) <= p.
  kMaxProduct,
};

/// Downward-closed hyperbolic-cross index set with graded-lexicographic column order.
///
/// Besides the indices themselves the set stores two lookup tables used by the
/// basis evaluator:
///  - `neighbor(n, j)`: column of alpha - e_j (or -1 when alpha_j == 0); this is what
///    turns a basis gradient into a scaled copy of another basis column.
///  - `factor(n)`: column n is column `parent` times the one-dimensional polynomial
///    of order `order` on axis `axis`; the parent always precedes n.
class IndexSet {
 public:
  struct Factor {
    Index parent = -1;
    int axis = -1;
    int order = 0;
  };

  IndexSet(int dimension, int max_order, CrossRule rule, std::vector<MultiIndex> indices);

  int dimension() const { return dimension_; }
  int max_order() const { return max_order_; }
  CrossRule rule() const { return rule_; }
  Index size() const { return static_cast<Index>(indices_.size()); }

  const MultiIndex& operator[](Index n) const { return indices_[static_cast<std::size_t>(n)]; }
  const std::vector<MultiIndex>& indices() const { return indices_; }

  std::optional<Index> position(const MultiIndex& alpha) const;
  bool contains(const MultiIndex& alpha) const { return position(alpha).has_value(); }

  Index neighbor(Index n, int axis) const {
    return neighbors_[static_cast<std::size_t>(n * dimension_ + axis)];
  }
  const Factor& factor(Index n) const { return factors_[static_cast<std::size_t>(n)]; }

  /// Non-zero (axis, order) pairs of column n, in increasing axis order.
  const std::vector<std::pair<int, int>>& support(Index n) const {
    return supports_[static_cast<std::size_t>(n)];
  }

  /// ||I||_0: total count of non-zero entries over all indices, by direct counting.
  Index nonzero_count() const { return nonzero_count_; }
  int max_degree() const;
  int min_degree() const;
  /// Largest single entry over the set (length of the per-axis polynomial tables minus one).
  int max_entry() const { return max_entry_; }

 private:
  int dimension_;
  int max_order_;
  CrossRule rule_;
  std::vector<MultiIndex> indices_;
  std::map<MultiIndex, Index> position_;
  std::vector<Index> neighbors_;
  std::vector<Factor> factors_;
  std::vector<std::vector<std::pair<int, int>>> supports_;
  Index nonzero_count_ = 0;
  int max_entry_ = 0;
};

/// Builds the hyperbolic cross with maximum order `max_order` in `dimension` variables.
/// Throws std::invalid_argument for dimension < 1 or max_order < 1.
IndexSet build_index_set(int dimension, int max_order,
                         CrossRule rule = CrossRule::kShiftedProduct);

/// Membership predicate used by build_index_set.
bool in_hyperbolic_cross(const MultiIndex& alpha, int max_order, CrossRule rule);

/// Cardinality N_b without materializing the set.
Index hyperbolic_cross_size(int dimension, int max_order,
                            CrossRule rule = CrossRule::kShiftedProduct);

/// The shortcut (N_b(p) - N_b(p-1)) * d, reported next to the direct count.
Index nonzero_count_shortcut(int dimension, int max_order,
                             CrossRule rule = CrossRule::kShiftedProduct);

/// Every index with a positive entry has its lower neighbor in the set.
bool is_downward_closed(const IndexSet& set);

/// Text format: header "d p N_b", then one index per line, space separated.
void write_index_set(std::ostream& out, const IndexSet& set);
IndexSet read_index_set(std::istream& in, CrossRule rule = CrossRule::kShiftedProduct);

}  // namespace glsm
