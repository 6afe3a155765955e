#include <sstream>

#include <gtest/gtest.h>

#include "glsm/index_set.hpp"

using namespace glsm;

namespace {

// Brute-force enumeration over the box [0, p]^d.
std::vector<MultiIndex> brute_force(int d, int p, CrossRule rule) {
  std::vector<MultiIndex> out;
  std::vector<int> e(static_cast<std::size_t>(d), 0);
  while (true) {
    MultiIndex alpha(e);
    if (in_hyperbolic_cross(alpha, p, rule)) out.push_back(alpha);
    int j = 0;
    while (j < d && ++e[static_cast<std::size_t>(j)] > p) e[static_cast<std::size_t>(j++)] = 0;
    if (j == d) break;
  }
  return out;
}

}  // namespace

TEST(IndexSet, TabulatedCardinalities) {
  const std::pair<int, Index> cases[] = {{1, 11}, {2, 29}, {3, 56}, {5, 141}, {10, 581}, {15, 1446}};
  for (auto [d, expected] : cases) {
    EXPECT_EQ(build_index_set(d, 10).size(), expected) << "d=" << d;
    EXPECT_EQ(hyperbolic_cross_size(d, 10), expected) << "d=" << d;
  }
  EXPECT_EQ(build_index_set(20, 10).size(), 2861);
  EXPECT_EQ(build_index_set(2, 20).size(), 70);
}

TEST(IndexSet, SmallestSet) {
  const IndexSet set = build_index_set(1, 1);
  ASSERT_EQ(set.size(), 2);
  EXPECT_EQ(set[0], MultiIndex(std::vector<int>{0}));
  EXPECT_EQ(set[1], MultiIndex(std::vector<int>{1}));
}

TEST(IndexSet, MatchesBruteForce) {
  for (CrossRule rule : {CrossRule::kShiftedProduct, CrossRule::kMaxProduct}) {
    for (int d = 1; d <= 3; ++d) {
      for (int p = 1; p <= 8; ++p) {
        const IndexSet set = build_index_set(d, p, rule);
        const auto expected = brute_force(d, p, rule);
        ASSERT_EQ(set.size(), static_cast<Index>(expected.size())) << d << ' ' << p;
        for (const auto& alpha : expected) EXPECT_TRUE(set.contains(alpha));
      }
    }
  }
  // The max-product rule gives a larger set at (2, 10).
  EXPECT_EQ(build_index_set(2, 10, CrossRule::kMaxProduct).size(), 48);
}

TEST(IndexSet, RejectsInvalidArguments) {
  EXPECT_THROW(build_index_set(0, 3), std::invalid_argument);
  EXPECT_THROW(build_index_set(3, 0), std::invalid_argument);
  std::vector<MultiIndex> gap = {MultiIndex(std::vector<int>{0}), MultiIndex(std::vector<int>{2})};
  EXPECT_THROW(IndexSet(1, 2, CrossRule::kShiftedProduct, gap), std::invalid_argument);
}

TEST(IndexSet, GradedLexOrdering) {
  const IndexSet set = build_index_set(3, 6);
  EXPECT_EQ(set[0].degree(), 0);
  for (Index n = 1; n < set.size(); ++n) {
    const auto& a = set[n - 1];
    const auto& b = set[n];
    ASSERT_TRUE(a.degree() < b.degree() || (a.degree() == b.degree() && a.entries() < b.entries()));
  }
}

TEST(IndexSet, NeighborsAndFactors) {
  const IndexSet set = build_index_set(4, 10);
  for (Index n = 0; n < set.size(); ++n) {
    const auto& alpha = set[n];
    for (int j = 0; j < 4; ++j) {
      if (alpha[j] == 0) {
        EXPECT_EQ(set.neighbor(n, j), -1);
      } else {
        const Index lower = set.neighbor(n, j);
        ASSERT_GE(lower, 0);
        EXPECT_EQ(set[lower], alpha.shifted(j, -1));
      }
    }
    const auto& f = set.factor(n);
    if (alpha.degree() == 0) {
      EXPECT_LT(f.parent, 0);
    } else {
      auto parent = set[f.parent].entries();
      EXPECT_EQ(parent[static_cast<std::size_t>(f.axis)], 0);
      parent[static_cast<std::size_t>(f.axis)] = f.order;
      EXPECT_EQ(MultiIndex(parent), alpha);
    }
  }
}

TEST(IndexSet, DownwardClosedAndMonotone) {
  for (int d = 1; d <= 6; ++d) {
    Index prev = 0;
    for (int p = 1; p <= 12; ++p) {
      const IndexSet set = build_index_set(d, p);
      EXPECT_TRUE(is_downward_closed(set));
      EXPECT_GE(set.size(), prev);
      if (d > 1) EXPECT_GE(set.size(), hyperbolic_cross_size(d - 1, p));
      prev = set.size();
    }
  }
}

TEST(IndexSet, NonzeroCount) {
  const std::pair<int, Index> cases[] = {{1, 10}, {2, 36}, {3, 81}, {5, 240}, {10, 1180}};
  for (auto [d, expected] : cases) EXPECT_EQ(build_index_set(d, 10).nonzero_count(), expected) << d;
  for (int p : {4, 6, 10}) {
    for (int d : {2, 5, 10, 20}) {
      const IndexSet set = build_index_set(d, p);
      EXPECT_LE(static_cast<double>(set.nonzero_count()) / static_cast<double>(set.size()), d);
    }
  }
}

TEST(IndexSet, ShortcutIsReportedSeparately) {
  // The shortcut formula disagrees with direct counting in general.
  EXPECT_NE(nonzero_count_shortcut(2, 10), build_index_set(2, 10).nonzero_count());
  EXPECT_EQ(nonzero_count_shortcut(1, 10), 1);
}

TEST(IndexSet, TextRoundTrip) {
  const IndexSet set = build_index_set(3, 7);
  std::stringstream io;
  write_index_set(io, set);
  std::string header;
  std::getline(io, header);
  EXPECT_EQ(header, "3 7 " + std::to_string(set.size()));
  io.seekg(0);
  const IndexSet back = read_index_set(io);
  ASSERT_EQ(back.size(), set.size());
  for (Index n = 0; n < set.size(); ++n) EXPECT_EQ(back[n], set[n]);
}

TEST(IndexSet, RejectsHugeSets) { EXPECT_THROW(build_index_set(200, 60), std::length_error); }
