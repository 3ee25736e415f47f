#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "support.hpp"

namespace drbc {
namespace {

using test::random_batch;
using test::small_params;

PairBatch single_pair(double logit) {
  PairBatch b;
  b.push(0, 1, logit);
  return b;
}

TEST(PairSamplingTest, CountRangeAndNoSelfPairs) {
  const BcScores bc(10, 0.1);
  const PairBatch b = sample_pairs(10, 5, bc, 3);
  ASSERT_EQ(b.size(), 50u);
  for (std::size_t k = 0; k < b.size(); ++k) {
    EXPECT_LT(b.source[k], 10u);
    EXPECT_LT(b.target[k], 10u);
    EXPECT_NE(b.source[k], b.target[k]);
  }
}

TEST(PairSamplingTest, EqualScoresGiveHalf) {
  const BcScores bc = {0.2, 0.2, 0.0, 0.0};
  PairBatch b;
  b.push(0, 1, pair_logit(bc, 0, 1));
  b.push(2, 3, pair_logit(bc, 2, 3));
  EXPECT_EQ(b.label[0], 0.5);
  EXPECT_EQ(b.label[1], 0.5);
  EXPECT_EQ(b.complement[0], 0.5);
}

TEST(PairSamplingTest, LabelsFollowLogTransform) {
  const BcScores bc = {0.3, 0.01};
  const double b = std::log(0.3 + 1e-8) - std::log(0.01 + 1e-8);
  PairBatch batch;
  batch.push(0, 1, pair_logit(bc, 0, 1));
  EXPECT_NEAR(batch.label[0], 1.0 / (1.0 + std::exp(-b)), 1e-15);
  EXPECT_NEAR(batch.label[0] + batch.complement[0], 1.0, 1e-15);
}

TEST(PairSamplingTest, SourceFrequencyWithinFourSigma) {
  // 100 nodes, 10k pairs: each source count is Binomial(10000, 1/100).
  const BcScores bc(100, 0.0);
  const PairBatch b = sample_pairs(100, 100, bc, 12);
  std::vector<int> counts(100, 0);
  for (NodeId s : b.source) ++counts[s];
  const double sigma = std::sqrt(10000 * 0.01 * 0.99);
  for (int c : counts) EXPECT_LT(std::abs(c - 100.0), 4 * sigma);
  // Also 500 +- 4 sigma at factor 500.
  const PairBatch big = sample_pairs(100, 500, bc, 13);
  std::fill(counts.begin(), counts.end(), 0);
  for (NodeId s : big.source) ++counts[s];
  const double sigma_big = std::sqrt(50000 * 0.01 * 0.99);
  for (int c : counts) EXPECT_LT(std::abs(c - 500.0), 4 * sigma_big);
}

TEST(PairSamplingTest, Errors) {
  EXPECT_THROW(sample_pairs(1, 5, BcScores(1, 0.0), 1), ParameterError);
  EXPECT_THROW(sample_pairs(5, 5, BcScores(4, 0.0), 1), ShapeError);
}

TEST(LossTest, ZeroDifferencesGiveLn2) {
  const BcScores bc = {0.1, 0.5, 0.0, 0.2};
  const PairBatch b = sample_pairs(4, 5, bc, 1);
  const std::vector<double> y(4, 0.7);
  EXPECT_NEAR(pairwise_ranking_loss<double>(y, b), 20 * std::log(2.0), 1e-12);
}

TEST(LossTest, Saturation) {
  const PairBatch b = single_pair(800.0);  // label 1
  ASSERT_EQ(b.label[0], 1.0);
  const std::vector<double> high = {30.0, 0.0};
  const std::vector<double> low = {-30.0, 0.0};
  EXPECT_LT(pairwise_ranking_loss<double>(high, b), 1e-12);
  const double l = pairwise_ranking_loss<double>(low, b);
  EXPECT_TRUE(std::isfinite(l));
  EXPECT_NEAR(l, 30.0, 1e-12);
  const std::vector<double> extreme = {-1e300, 1e300};
  EXPECT_TRUE(std::isfinite(pairwise_ranking_loss<double>(std::vector<double>{-1e6, 0.0}, b)));
  EXPECT_FALSE(std::isnan(pairwise_ranking_loss<double>(extreme, b)));
}

TEST(LossTest, NaNScoresRejected) {
  const std::vector<double> y = {std::nan(""), 0.0};
  EXPECT_THROW(pairwise_ranking_loss<double>(y, single_pair(0.0)), NumericError);
  EXPECT_THROW(pairwise_ranking_loss<double>(std::vector<double>{0.0}, single_pair(0.0)), ShapeError);
}

TEST(LossTest, ShiftInvariance) {
  // Dyadic scores and shifts keep every difference exact.
  const BcScores bc = brandes_bc(gen_powerlaw_cluster(30, 2, 0.1, 3));
  const PairBatch b = sample_pairs(30, 5, bc, 4);
  std::vector<double> y(30), shifted(30);
  Rng rng(5);
  for (std::size_t v = 0; v < 30; ++v) {
    y[v] = static_cast<double>(rng.below(257)) / 64.0 - 2.0;
    shifted[v] = y[v] + 3.25;
  }
  EXPECT_EQ(pairwise_ranking_loss<double>(y, b), pairwise_ranking_loss<double>(shifted, b));
}

TEST(LossTest, SwapInvarianceIsExact) {
  const BcScores bc = brandes_bc(gen_powerlaw_cluster(30, 2, 0.1, 3));
  const std::vector<double> y = predict<double>(gen_powerlaw_cluster(30, 2, 0.1, 3), small_params(8, 4, 1), 3);
  const PairBatch b = sample_pairs(30, 5, bc, 6);
  for (std::size_t k = 0; k < b.size(); ++k) {
    PairBatch one, swapped;
    one.push(b.source[k], b.target[k], pair_logit(bc, b.source[k], b.target[k]));
    swapped.push(b.target[k], b.source[k], pair_logit(bc, b.target[k], b.source[k]));
    EXPECT_EQ(swapped.label[0], one.complement[0]);
    EXPECT_EQ(pairwise_ranking_loss<double>(y, one), pairwise_ranking_loss<double>(y, swapped));
  }
}

TEST(LossGradientTest, MatchesNumericDerivativeOfLoss) {
  const BcScores bc = brandes_bc(gen_powerlaw_cluster(20, 2, 0.1, 9));
  const PairBatch b = sample_pairs(20, 5, bc, 10);
  std::vector<double> y(20);
  Rng rng(11);
  for (double& v : y) v = rng.uniform(-2, 2);
  const auto grad = ranking_loss_gradient(y, b);
  // Central differences in long double keep round-off far below 1e-8.
  const std::vector<long double> wide(y.begin(), y.end());
  const long double h = 1e-5L;
  for (std::size_t v = 0; v < 20; ++v) {
    auto up = wide, down = wide;
    up[v] += h;
    down[v] -= h;
    const auto numeric = static_cast<double>(
        (pairwise_ranking_loss<long double>(up, b) - pairwise_ranking_loss<long double>(down, b)) / (2 * h));
    EXPECT_NEAR(grad[v], numeric, 1e-8 * std::max(1.0, std::abs(numeric)));
  }
}

TEST(BackwardTest, ZeroGradientWhenBalanced) {
  // Every node shares one score (zero weights) and every label is 0.5.
  const Graph g = gen_powerlaw_cluster(25, 2, 0.1, 1);
  DrbcParams params = small_params(8, 4, 2);
  params.W4.setZero();
  const BcScores flat(25, 0.04);
  const PairBatch b = sample_pairs(25, 5, flat, 3);
  const DrbcParams grad = backward_gradients(forward(g, params, 3), b, params, g);
  for (const auto* m : grad.tensors()) EXPECT_EQ(m->cwiseAbs().maxCoeff(), 0.0);
}

TEST(BackwardTest, DuplicatedPairsDoubleGradients) {
  const Graph g = gen_powerlaw_cluster(20, 2, 0.2, 4);
  const BcScores bc = brandes_bc(g);
  const DrbcParams params = small_params(8, 4, 5);
  const PairBatch b = sample_pairs(20, 3, bc, 6);
  PairBatch doubled = b;
  doubled.append(b, 0);
  const auto fwd = forward(g, params, 3);
  const DrbcParams g1 = backward_gradients(fwd, b, params, g);
  const DrbcParams g2 = backward_gradients(fwd, doubled, params, g);
  auto t1 = g1.tensors();
  auto t2 = g2.tensors();
  for (std::size_t k = 0; k < t1.size(); ++k) {
    EXPECT_LT((*t2[k] - 2.0 * *t1[k]).cwiseAbs().maxCoeff(), 1e-12 * std::max(1.0, t1[k]->cwiseAbs().maxCoeff()))
        << DrbcParams::kNames[k];
  }
}

TEST(BackwardTest, CacheMismatchIsStateError) {
  const Graph g = gen_powerlaw_cluster(20, 2, 0.2, 4);
  const Graph other = gen_powerlaw_cluster(21, 2, 0.2, 4);
  const DrbcParams params = small_params(8, 4, 5);
  const PairBatch b = sample_pairs(20, 3, brandes_bc(g), 6);
  EXPECT_THROW(backward_gradients(forward(g, params, 3), b, params, other), StateError);
  EXPECT_THROW(backward_gradients(forward(g, params, 3), b, small_params(6, 4, 5), g), StateError);
}

struct CheckCase {
  Graph graph;
  DrbcParams params;
  PairBatch batch;
};

CheckCase make_case(std::uint64_t seed) {
  CheckCase c;
  c.graph = gen_powerlaw_cluster(20, 2, 0.3, 100 + seed);
  c.params = small_params(8, 4, 7 + seed);
  c.batch = random_batch(c.graph, brandes_bc(c.graph), 50, 5 + seed);
  return c;
}

TEST(GradientCheckTest, AnalyticMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const CheckCase c = make_case(seed);
    const auto res = gradient_check(c.graph, c.params, c.batch, 3, 1e-5, 1e-4);
    EXPECT_TRUE(res.passed) << "seed " << seed << " error " << res.max_relative_error << " in " << res.worst_tensor;
    EXPECT_EQ(res.coordinates, 3u * 8 + 6u * 64 + 8u * 4 + 4u);
  }
}

TEST(GradientCheckTest, DetectsCorruptedEntry) {
  const CheckCase c = make_case(1);
  DrbcParams analytic = backward_gradients(forward(c.graph, c.params, 3), c.batch, c.params, c.graph);
  analytic.W3(2, 5) += 1.0;
  const auto res = compare_gradients(c.graph, c.params, c.batch, 3, analytic, 1e-5, 1e-4);
  EXPECT_GT(res.max_relative_error, 0.1);
  EXPECT_FALSE(res.passed);
  EXPECT_EQ(res.worst_tensor, "W3");
}

TEST(GradientCheckTest, StepSizeRobust) {
  for (std::uint64_t seed = 3; seed < 5; ++seed) {
    const CheckCase c = make_case(seed);
    const auto coarse = gradient_check(c.graph, c.params, c.batch, 3, 1e-5, 1e-4);
    const auto fine = gradient_check(c.graph, c.params, c.batch, 3, 1e-6, 1e-4);
    EXPECT_EQ(coarse.passed, fine.passed);
  }
}

TEST(GradientCheckTest, SampledCoordinates) {
  const CheckCase c = make_case(2);
  const auto res = gradient_check(c.graph, c.params, c.batch, 3, 1e-5, 1e-4, 4);
  EXPECT_EQ(res.coordinates, 9u * 4);
  EXPECT_TRUE(res.passed);
}

// --- configuration ----------------------------------------------------------

TEST(TrainConfigTest, DefaultsMatchHyperparameterTable) {
  const TrainConfig cfg;
  EXPECT_EQ(cfg.learning_rate, 1e-4);
  EXPECT_EQ(cfg.embedding_dim, 128u);
  EXPECT_EQ(cfg.batch_graphs, 16u);
  EXPECT_EQ(cfg.pair_factor, 5u);
  EXPECT_EQ(cfg.max_episodes, 10000u);
  EXPECT_EQ(cfg.layers, 5u);
  EXPECT_EQ(cfg.validation_graphs, 100u);
  EXPECT_NO_THROW(cfg.validate());
}

TEST(TrainConfigTest, ParsesFileAndRejectsUnknownKeys) {
  std::istringstream in(
      "# comment\nlearning_rate = 0.001\nembedding_dim=32  # trailing\n\ngraph_model = er\ngen_p = 0.1\n"
      "min_nodes = 30\nmax_nodes = 40\n");
  const TrainConfig cfg = read_train_config(in);
  EXPECT_EQ(cfg.learning_rate, 0.001);
  EXPECT_EQ(cfg.embedding_dim, 32u);
  EXPECT_EQ(cfg.graphs.model, GraphModel::ErdosRenyi);
  EXPECT_EQ(cfg.graphs.p, 0.1);
  EXPECT_EQ(cfg.graphs.min_nodes, 30u);
  std::istringstream bad("nonsense = 3\n");
  EXPECT_THROW(read_train_config(bad), ParseError);
  std::istringstream no_eq("learning_rate 3\n");
  EXPECT_THROW(read_train_config(no_eq), ParseError);
  std::istringstream bad_value("layers = -2\n");
  EXPECT_THROW(read_train_config(bad_value), ParseError);
}

TEST(TrainConfigTest, Validation) {
  TrainConfig cfg;
  cfg.learning_rate = 0;
  EXPECT_THROW(cfg.validate(), ParameterError);
  cfg = {};
  cfg.graphs.min_nodes = 300;
  EXPECT_THROW(cfg.validate(), ParameterError);
  cfg = {};
  cfg.graphs.min_nodes = 4;
  EXPECT_THROW(cfg.validate(), ParameterError);
  EXPECT_THROW(parse_graph_model("ws"), ParameterError);
}

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.embedding_dim = 8;
  cfg.hidden_dim = 4;
  cfg.batch_graphs = 2;
  cfg.layers = 3;
  cfg.graphs.min_nodes = 20;
  cfg.graphs.max_nodes = 30;
  cfg.graphs.m = 2;
  cfg.validation_graphs = 5;
  cfg.validation_interval = 5;
  cfg.learning_rate = 1e-2;
  cfg.max_episodes = 40;
  cfg.patience = 100;
  cfg.seed = 3;
  return cfg;
}

TEST(TrainTest, ZeroEpisodesReturnsInitialParams) {
  TrainConfig cfg = tiny_config();
  cfg.max_episodes = 0;
  const TrainResult r = train(cfg);
  EXPECT_TRUE(r.history.empty());
  TrainConfig other = tiny_config();
  other.max_episodes = 0;
  EXPECT_TRUE(train(other).params == r.params);
  EXPECT_EQ(r.params.embedding_dim(), 8u);
}

TEST(TrainTest, DeterministicPerSeed) {
  const TrainResult a = train(tiny_config());
  const TrainResult b = train(tiny_config());
  EXPECT_TRUE(a.params == b.params);
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t k = 0; k < a.history.size(); ++k) {
    EXPECT_EQ(a.history[k].iteration, b.history[k].iteration);
    EXPECT_EQ(a.history[k].loss, b.history[k].loss);
    EXPECT_EQ(a.history[k].val_top1, b.history[k].val_top1);
  }
}

TEST(TrainTest, HistoryAndBestParameters) {
  const TrainConfig cfg = tiny_config();
  const TrainResult r = train(cfg);
  ASSERT_EQ(r.history.size(), 8u);
  double best = -1;
  for (std::size_t k = 0; k < r.history.size(); ++k) {
    EXPECT_EQ(r.history[k].iteration, 5 * (k + 1));
    if (k > 0) {
      EXPECT_GT(r.history[k].iteration, r.history[k - 1].iteration);
    }
    best = std::max(best, r.history[k].val_top1);
  }
  EXPECT_EQ(r.best_val_top1, best);
  // Rebuild the validation set exactly as train() does and re-score.
  Rng master(cfg.seed);
  master.fork();
  Rng val_rng(master.fork());
  std::vector<LabeledGraph> validation;
  for (std::size_t i = 0; i < cfg.validation_graphs; ++i) {
    Graph g = cfg.graphs.draw(val_rng);
    BcScores bc = brandes_bc(g);
    validation.push_back({std::move(g), std::move(bc)});
  }
  EXPECT_EQ(mean_top1(validation, r.params, cfg.layers), best);
}

TEST(TrainTest, EarlyStoppingHonoursPatience) {
  TrainConfig cfg = tiny_config();
  cfg.learning_rate = 1e-12;  // frozen: validation never improves after the first point
  cfg.patience = 2;
  cfg.max_episodes = 500;
  const TrainResult r = train(cfg);
  EXPECT_EQ(r.history.size(), 3u);
}

TEST(TrainTest, HistoryCsv) {
  auto dir = test::scratch_dir("history");
  TrainHistory h = {{5, 0.5, 0.25, 1.5}, {10, 0.25, 0.5, 3.0}};
  save_history_csv((dir / "h.csv").string(), h);
  EXPECT_EQ(test::read_file(dir / "h.csv"), "iteration,loss,val_top1,seconds\n5,0.5,0.25,1.5\n10,0.25,0.5,3\n");
}

}  // namespace
}  // namespace drbc
