#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

namespace drbc {
namespace {

using test::complete_graph;
using test::cycle_graph;
using test::pair_count_bc;
using test::path_graph;
using test::star_graph;

void expect_near_all(const BcScores& a, const std::vector<double>& b, double tol) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t v = 0; v < a.size(); ++v) EXPECT_NEAR(a[v], b[v], tol) << "node " << v;
}

TEST(BrandesTest, ThreePath) {
  const BcScores bc = brandes_bc(path_graph(3));
  EXPECT_EQ(bc[0], 0.0);
  EXPECT_DOUBLE_EQ(bc[1], 1.0 / 3.0);
  EXPECT_EQ(bc[2], 0.0);
}

TEST(BrandesTest, StarCenter) {
  const BcScores bc = brandes_bc(star_graph(4));
  EXPECT_DOUBLE_EQ(bc[0], 0.6);
  for (NodeId v = 1; v <= 4; ++v) EXPECT_EQ(bc[v], 0.0);
}

TEST(BrandesTest, FourCycleMatchesPairCountOracle) {
  const BcScores bc = brandes_bc(cycle_graph(4));
  expect_near_all(bc, pair_count_bc(cycle_graph(4)), 1e-15);
  for (double x : bc) EXPECT_NEAR(x, 1.0 / 12.0, 1e-15);
}

TEST(BrandesTest, TinyGraphsAreZero) {
  EXPECT_TRUE(brandes_bc(Graph{}).empty());
  EXPECT_EQ(brandes_bc(Graph::from_edges(1, {})), BcScores{0.0});
}

TEST(BrandesTest, DisconnectedComponents) {
  // Two 3-paths: each middle node carries 2 ordered pairs out of 6*5.
  const std::vector<Graph> parts = {path_graph(3), path_graph(3)};
  const Graph g = disjoint_union(parts);
  const BcScores bc = brandes_bc(g);
  for (double x : bc) EXPECT_TRUE(std::isfinite(x));
  EXPECT_DOUBLE_EQ(bc[1], 2.0 / 30.0);
  EXPECT_DOUBLE_EQ(bc[4], 2.0 / 30.0);
  expect_near_all(bc, pair_count_bc(g), 1e-15);
}

TEST(BrandesTest, RelabelInvariance) {
  const Graph g = gen_powerlaw_cluster(80, 3, 0.2, 17);
  const auto perm = test::random_permutation(80, 99);
  const BcScores bc = brandes_bc(g);
  const BcScores relabeled = brandes_bc(relabel(g, perm));
  for (NodeId v = 0; v < 80; ++v) EXPECT_NEAR(relabeled[perm[v]], bc[v], 1e-15);
}

TEST(BrandesTest, MatchesPairCountOracleOnRandomGraphs) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Graph g = gen_erdos_renyi(40, 0.08, seed);
    SCOPED_TRACE(seed);
    expect_near_all(brandes_bc(g), pair_count_bc(g), 1e-12);
  }
}

TEST(BrandesTest, ThreadCountDoesNotChangeScores) {
  const Graph g = gen_powerlaw_cluster(300, 4, 0.05, 3);
  const BcScores one = brandes_bc(g, 1);
  for (unsigned t : {2u, 3u, 7u}) {
    const BcScores many = brandes_bc(g, t);
    for (std::size_t v = 0; v < one.size(); ++v) EXPECT_NEAR(many[v], one[v], 1e-12 * std::max(one[v], 1e-300));
  }
}

TEST(BrandesTest, LowDegreeNodesScoreZero) {
  const Graph g = gen_powerlaw_cluster(400, 1, 0.0, 8);
  const BcScores bc = brandes_bc(g);
  for (NodeId v = 0; v < g.node_count(); ++v) {
    if (g.degree(v) <= 1) {
      EXPECT_EQ(bc[v], 0.0) << "node " << v;
    }
    EXPECT_GE(bc[v], 0.0);
    EXPECT_LE(bc[v], 1.0);
  }
}

TEST(BruteForceTest, ClosedForms) {
  for (double x : brute_force_bc(complete_graph(4))) EXPECT_EQ(x, 0.0);
  const BcScores path = brute_force_bc(path_graph(3));
  EXPECT_DOUBLE_EQ(path[1], 1.0 / 3.0);
  EXPECT_EQ(path[0], 0.0);
}

TEST(BruteForceTest, AgreesWithBrandesOnPowerlawCluster) {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const Graph g = gen_powerlaw_cluster(20, 2, 0.3, seed);
    SCOPED_TRACE(seed);
    expect_near_all(brute_force_bc(g), brandes_bc(g), 1e-9);
  }
}

TEST(BruteForceTest, SizeLimit) {
  EXPECT_THROW(brute_force_bc(path_graph(65)), SizeError);
  EXPECT_NO_THROW(brute_force_bc(path_graph(10), 10));
  EXPECT_THROW(brute_force_bc(path_graph(11), 10), SizeError);
}

TEST(SampledSourceTest, FullSampleEqualsExact) {
  const Graph g = gen_powerlaw_cluster(60, 3, 0.1, 5);
  EXPECT_EQ(sampled_source_bc(g, 60, 42), brandes_bc(g));
}

TEST(SampledSourceTest, SingleSourceOnCompleteGraph) {
  for (double x : sampled_source_bc(complete_graph(4), 1, 3)) EXPECT_EQ(x, 0.0);
}

TEST(SampledSourceTest, RejectsOutOfRange) {
  const Graph g = path_graph(5);
  EXPECT_THROW(sampled_source_bc(g, 0, 1), ParameterError);
  EXPECT_THROW(sampled_source_bc(g, 6, 1), ParameterError);
}

TEST(SampledSourceTest, MoreSourcesRankBetter) {
  const Graph g = gen_powerlaw_cluster(100, 4, 0.05, 21);
  const BcScores exact = brandes_bc(g);
  double tau5 = 0, tau50 = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    tau5 += kendall_tau(sampled_source_bc(g, 5, seed), exact);
    tau50 += kendall_tau(sampled_source_bc(g, 50, seed), exact);
  }
  EXPECT_GT(tau50 / 20, tau5 / 20);
}

TEST(ScoreFileTest, RoundTripWithIds) {
  auto dir = test::scratch_dir("scores");
  const BcScores bc = brandes_bc(gen_powerlaw_cluster(30, 2, 0.1, 1));
  std::vector<std::uint64_t> ids(30);
  for (std::size_t v = 0; v < 30; ++v) ids[v] = 1000 - 7 * v;
  const auto path = (dir / "bc.txt").string();
  save_bc_scores(path, bc, ids);
  EXPECT_EQ(align_scores(load_bc_scores(path), ids), bc);
}

TEST(ScoreFileTest, SeventeenDigits) {
  EXPECT_EQ(format_score(1.0 / 3.0), "0.33333333333333331");
  EXPECT_EQ(std::stod(format_score(0.1 + 0.2)), 0.1 + 0.2);
}

TEST(ScoreFileTest, AlignRejectsIncompleteOrForeignIds) {
  const std::vector<ScoreRecord> recs = {{5, 0.1}, {9, 0.2}};
  EXPECT_THROW(align_scores(recs, {5, 9, 11}), ShapeError);
  EXPECT_THROW(align_scores(recs, {5}), ShapeError);
}

TEST(ScoreFileTest, MalformedLine) {
  auto dir = test::scratch_dir("scores_bad");
  test::write_file(dir / "bad.txt", "0 0.5\n1 abc\n");
  try {
    load_bc_scores((dir / "bad.txt").string());
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

}  // namespace
}  // namespace drbc
