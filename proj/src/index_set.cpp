#include "glsm/index_set.hpp"

#include <algorithm>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace glsm {

namespace {

// Per-entry weight in the product defining the cross.
int entry_weight(int a, CrossRule rule) {
  return rule == CrossRule::kShiftedProduct ? a + 1 : std::max(a, 1);
}

int product_budget(int max_order, CrossRule rule) {
  return rule == CrossRule::kShiftedProduct ? max_order + 1 : max_order;
}

void enumerate(int dimension, int budget, CrossRule rule, std::vector<int>& prefix,
               std::vector<MultiIndex>& out) {
  if (static_cast<int>(prefix.size()) == dimension) {
    out.emplace_back(prefix);
    return;
  }
  for (int a = 0; entry_weight(a, rule) <= budget; ++a) {
    prefix.push_back(a);
    enumerate(dimension, budget / entry_weight(a, rule), rule, prefix, out);
    prefix.pop_back();
  }
}

// Number of vectors in N_0^axes whose weight product is <= budget.
double count_cross(int axes, int budget, CrossRule rule, std::map<std::pair<int, int>, double>& memo) {
  if (axes == 0) return 1.0;
  auto key = std::make_pair(axes, budget);
  if (auto it = memo.find(key); it != memo.end()) return it->second;
  double total = 0.0;
  for (int a = 0; entry_weight(a, rule) <= budget; ++a) {
    total += count_cross(axes - 1, budget / entry_weight(a, rule), rule, memo);
  }
  memo.emplace(key, total);
  return total;
}

bool graded_less(const MultiIndex& a, const MultiIndex& b) {
  const int da = a.degree();
  const int db = b.degree();
  if (da != db) return da < db;
  return a.entries() < b.entries();
}

constexpr double kMaxCardinality = 5e7;

}  // namespace

MultiIndex::MultiIndex(std::vector<int> entries) : entries_(std::move(entries)) {
  for (int e : entries_) {
    if (e < 0) throw std::invalid_argument("MultiIndex: negative entry");
  }
}

int MultiIndex::degree() const { return std::accumulate(entries_.begin(), entries_.end(), 0); }

int MultiIndex::support_size() const {
  return static_cast<int>(std::count_if(entries_.begin(), entries_.end(), [](int e) { return e != 0; }));
}

MultiIndex MultiIndex::shifted(int axis, int delta) const {
  std::vector<int> e = entries_;
  e.at(static_cast<std::size_t>(axis)) += delta;
  return MultiIndex(std::move(e));
}

bool in_hyperbolic_cross(const MultiIndex& alpha, int max_order, CrossRule rule) {
  long long product = 1;
  const long long budget = product_budget(max_order, rule);
  for (int e : alpha.entries()) {
    product *= entry_weight(e, rule);
    if (product > budget) return false;
  }
  return true;
}

IndexSet::IndexSet(int dimension, int max_order, CrossRule rule, std::vector<MultiIndex> indices)
    : dimension_(dimension), max_order_(max_order), rule_(rule), indices_(std::move(indices)) {
  if (dimension_ < 1) throw std::invalid_argument("IndexSet: dimension must be >= 1");
  std::sort(indices_.begin(), indices_.end(), graded_less);
  for (std::size_t n = 0; n < indices_.size(); ++n) {
    if (indices_[n].dimension() != dimension_) {
      throw std::invalid_argument("IndexSet: index dimension mismatch");
    }
    if (!position_.emplace(indices_[n], static_cast<Index>(n)).second) {
      throw std::invalid_argument("IndexSet: duplicate index");
    }
  }

  const std::size_t count = indices_.size();
  neighbors_.assign(count * static_cast<std::size_t>(dimension_), -1);
  factors_.resize(count);
  supports_.resize(count);
  for (std::size_t n = 0; n < count; ++n) {
    const MultiIndex& alpha = indices_[n];
    int last_axis = -1;
    for (int j = 0; j < dimension_; ++j) {
      const int a = alpha[j];
      if (a == 0) continue;
      supports_[n].emplace_back(j, a);
      max_entry_ = std::max(max_entry_, a);
      ++nonzero_count_;
      last_axis = j;
      auto lower = position(alpha.shifted(j, -1));
      if (!lower) {
        throw std::invalid_argument("IndexSet: set is not downward closed");
      }
      neighbors_[n * static_cast<std::size_t>(dimension_) + static_cast<std::size_t>(j)] = *lower;
    }
    if (last_axis >= 0) {
      std::vector<int> parent = alpha.entries();
      parent[static_cast<std::size_t>(last_axis)] = 0;
      auto p = position(MultiIndex(std::move(parent)));
      if (!p) throw std::invalid_argument("IndexSet: set is not downward closed");
      factors_[n] = Factor{*p, last_axis, alpha[last_axis]};
    }
  }
}

std::optional<Index> IndexSet::position(const MultiIndex& alpha) const {
  auto it = position_.find(alpha);
  if (it == position_.end()) return std::nullopt;
  return it->second;
}

int IndexSet::max_degree() const {
  int m = 0;
  for (const auto& a : indices_) m = std::max(m, a.degree());
  return m;
}

int IndexSet::min_degree() const {
  int m = std::numeric_limits<int>::max();
  for (const auto& a : indices_) m = std::min(m, a.degree());
  return m;
}

Index hyperbolic_cross_size(int dimension, int max_order, CrossRule rule) {
  if (dimension < 1 || max_order < 1) {
    throw std::invalid_argument("hyperbolic_cross_size: dimension and max_order must be >= 1");
  }
  std::map<std::pair<int, int>, double> memo;
  const double n = count_cross(dimension, product_budget(max_order, rule), rule, memo);
  if (n > static_cast<double>(std::numeric_limits<Index>::max())) {
    throw std::overflow_error("hyperbolic_cross_size: cardinality overflows");
  }
  return static_cast<Index>(n);
}

IndexSet build_index_set(int dimension, int max_order, CrossRule rule) {
  if (dimension < 1) throw std::invalid_argument("build_index_set: dimension must be >= 1");
  if (max_order < 1) throw std::invalid_argument("build_index_set: max_order must be >= 1");
  std::map<std::pair<int, int>, double> memo;
  const double expected = count_cross(dimension, product_budget(max_order, rule), rule, memo);
  if (expected > kMaxCardinality) {
    std::ostringstream msg;
    msg << "build_index_set: cardinality " << expected << " exceeds the supported maximum";
    throw std::length_error(msg.str());
  }
  std::vector<MultiIndex> indices;
  indices.reserve(static_cast<std::size_t>(expected));
  std::vector<int> prefix;
  enumerate(dimension, product_budget(max_order, rule), rule, prefix, indices);
  return IndexSet(dimension, max_order, rule, std::move(indices));
}

Index nonzero_count_shortcut(int dimension, int max_order, CrossRule rule) {
  const Index lower = max_order > 1 ? hyperbolic_cross_size(dimension, max_order - 1, rule) : 1;
  return (hyperbolic_cross_size(dimension, max_order, rule) - lower) * dimension;
}

bool is_downward_closed(const IndexSet& set) {
  for (const auto& alpha : set.indices()) {
    for (int j = 0; j < alpha.dimension(); ++j) {
      if (alpha[j] > 0 && !set.contains(alpha.shifted(j, -1))) return false;
    }
  }
  return true;
}

void write_index_set(std::ostream& out, const IndexSet& set) {
  out << set.dimension() << ' ' << set.max_order() << ' ' << set.size() << '\n';
  for (const auto& alpha : set.indices()) {
    for (int j = 0; j < alpha.dimension(); ++j) {
      if (j) out << ' ';
      out << alpha[j];
    }
    out << '\n';
  }
}

IndexSet read_index_set(std::istream& in, CrossRule rule) {
  int d = 0;
  int p = 0;
  long long count = 0;
  if (!(in >> d >> p >> count) || d < 1 || p < 1 || count < 1) {
    throw std::runtime_error("read_index_set: malformed header");
  }
  std::vector<MultiIndex> indices;
  indices.reserve(static_cast<std::size_t>(count));
  for (long long n = 0; n < count; ++n) {
    std::vector<int> e(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j) {
      if (!(in >> e[static_cast<std::size_t>(j)])) {
        throw std::runtime_error("read_index_set: truncated index list");
      }
    }
    MultiIndex alpha(std::move(e));
    if (!in_hyperbolic_cross(alpha, p, rule)) {
      throw std::runtime_error("read_index_set: index outside the hyperbolic cross");
    }
    indices.push_back(std::move(alpha));
  }
  return IndexSet(d, p, rule, std::move(indices));
}

}  // namespace glsm
