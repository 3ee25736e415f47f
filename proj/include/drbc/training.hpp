#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <numeric>
#include <algorithm>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "drbc/errors.hpp"
#include "drbc/evalkit.hpp"
#include "drbc/exact_bc.hpp"
#include "drbc/graph.hpp"
#include "drbc/model.hpp"
#include "drbc/numerics.hpp"
#include "drbc/rng.hpp"

namespace drbc {

// ---------------------------------------------------------------------------
// Pairs and loss

/// Offset added before the log transform of ground-truth betweenness.
inline constexpr double kLogOffset = 1e-8;

/// Node pairs with soft labels g(b_ij). `complement[k]` holds 1 - label[k]
/// evaluated as g(-b_ij), so reversing a pair swaps the two exactly.
struct PairBatch {
  std::vector<NodeId> source;
  std::vector<NodeId> target;
  std::vector<double> label;
  std::vector<double> complement;

  std::size_t size() const noexcept { return source.size(); }

  void push(NodeId i, NodeId j, double logit) {
    source.push_back(i);
    target.push_back(j);
    label.push_back(sigmoid(logit));
    complement.push_back(sigmoid(-logit));
  }

  void append(const PairBatch& other, NodeId offset) {
    for (std::size_t k = 0; k < other.size(); ++k) {
      source.push_back(other.source[k] + offset);
      target.push_back(other.target[k] + offset);
      label.push_back(other.label[k]);
      complement.push_back(other.complement[k]);
    }
  }
};

/// Label logit for the ordered pair (i, j): ln(b_i + 1e-8) - ln(b_j + 1e-8).
inline double pair_logit(const BcScores& bc, NodeId i, NodeId j) {
  return std::log(bc[i] + kLogOffset) - std::log(bc[j] + kLogOffset);
}

/// factor * n pairs with sources and targets drawn uniformly with
/// replacement; a target equal to its source is redrawn.
inline PairBatch sample_pairs(std::size_t n, std::size_t factor, const BcScores& bc, Rng& rng) {
  if (n < 2) throw ParameterError("pair sampling needs at least two nodes");
  if (bc.size() != n) throw ShapeError("ground truth length differs from node count");
  PairBatch batch;
  const std::size_t count = factor * n;
  batch.source.reserve(count);
  batch.target.reserve(count);
  batch.label.reserve(count);
  batch.complement.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const auto i = static_cast<NodeId>(rng.below(n));
    NodeId j;
    do {
      j = static_cast<NodeId>(rng.below(n));
    } while (j == i);
    batch.push(i, j, pair_logit(bc, i, j));
  }
  return batch;
}

inline PairBatch sample_pairs(std::size_t n, std::size_t factor, const BcScores& bc, std::uint64_t seed) {
  Rng rng(seed);
  return sample_pairs(n, factor, bc, rng);
}

namespace detail {

template <class S>
void check_scores(std::span<const S> y, const PairBatch& batch) {
  for (S v : y) {
    if (std::isnan(v)) throw NumericError("NaN in ranking scores");
  }
  for (std::size_t k = 0; k < batch.size(); ++k) {
    if (batch.source[k] >= y.size() || batch.target[k] >= y.size()) {
      throw ShapeError("pair index outside the score vector");
    }
  }
}

}  // namespace detail

/// Binary cross-entropy on score differences y_i - y_j, summed over pairs:
/// g log(1 + e^-x) + (1-g) log(1 + e^x).
template <class S>
S pairwise_ranking_loss(std::span<const S> y, const PairBatch& batch) {
  detail::check_scores(y, batch);
  S loss = 0;
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const S x = y[batch.source[k]] - y[batch.target[k]];
    loss += static_cast<S>(batch.label[k]) * softplus(-x) + static_cast<S>(batch.complement[k]) * softplus(x);
  }
  return loss;
}

/// dLoss/dy; per pair dC/dx = sigmoid(x) - g.
inline std::vector<double> ranking_loss_gradient(std::span<const double> y, const PairBatch& batch) {
  detail::check_scores<double>(y, batch);
  std::vector<double> grad(y.size(), 0.0);
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const double x = y[batch.source[k]] - y[batch.target[k]];
    const double d = batch.complement[k] * sigmoid(x) - batch.label[k] * sigmoid(-x);
    grad[batch.source[k]] += d;
    grad[batch.target[k]] -= d;
  }
  return grad;
}

// ---------------------------------------------------------------------------
// Backpropagation

/// Exact gradient of pairwise_ranking_loss with respect to every parameter,
/// using the activations of forward(g, params, L).
inline DrbcParams backward_gradients(const ForwardResult& fwd, const PairBatch& batch, const DrbcParams& params,
                                     const Graph& g) {
  const ForwardCache& cache = fwd.cache;
  const auto n = static_cast<Eigen::Index>(g.node_count());
  const auto p = static_cast<Eigen::Index>(params.embedding_dim());
  if (cache.node_count != g.node_count() || cache.layers.empty() || cache.z.rows() != n || cache.z.cols() != p ||
      cache.decoder_pre.cols() != params.W4.cols() || fwd.scores.size() != g.node_count()) {
    throw StateError("forward cache does not belong to this graph and parameter set");
  }
  params.validate_shapes();
  const std::size_t layers = cache.layers.size();
  DrbcParams grad = params.zeros_like();

  // Decoder.
  const std::vector<double> dy_vec = ranking_loss_gradient(fwd.scores, batch);
  const Eigen::Map<const Vector> dy(dy_vec.data(), n);
  const Matrix hidden = relu(cache.decoder_pre);
  grad.W5.col(0).noalias() = hidden.transpose() * dy;
  Matrix d_pre = (dy * params.W5.col(0).transpose()).cwiseProduct(
      (cache.decoder_pre.array() > 0.0).cast<double>().matrix());
  grad.W4.noalias() = cache.z.transpose() * d_pre;
  const Matrix dz = d_pre * params.W4.transpose();

  // Max-pool routing.
  std::vector<Matrix> dh(layers, Matrix::Zero(n, p));
  for (Eigen::Index v = 0; v < n; ++v) {
    for (Eigen::Index k = 0; k < p; ++k) {
      dh[cache.argmax[static_cast<std::size_t>(v * p + k)]](v, k) += dz(v, k);
    }
  }

  const NeighborPropagator propagate(g);
  for (std::size_t l = layers - 1; l >= 1; --l) {
    const auto& layer = cache.layers[l];
    const Matrix& h_prev = cache.layers[l - 1].h;
    const Matrix d_gru = row_l2_normalize_backward(dh[l], layer.h, layer.norms);
    const auto& u = layer.update;
    const auto& r = layer.reset;
    const auto& f = layer.candidate;

    const Matrix d_u = d_gru.cwiseProduct(f - h_prev);
    const Matrix d_f = d_gru.cwiseProduct(u);
    Matrix d_hprev = d_gru - d_gru.cwiseProduct(u);

    const Matrix d_af = d_f.array() * (1.0 - f.array().square());
    const Matrix reset_h = r.cwiseProduct(h_prev);
    grad.W3.noalias() += d_af.transpose() * layer.nbr;
    grad.U3.noalias() += d_af.transpose() * reset_h;
    Matrix d_nbr = d_af * params.W3;
    const Matrix d_reset_h = d_af * params.U3;
    const Matrix d_r = d_reset_h.cwiseProduct(h_prev);
    d_hprev += d_reset_h.cwiseProduct(r);

    const Matrix d_au = d_u.array() * u.array() * (1.0 - u.array());
    grad.W1.noalias() += d_au.transpose() * layer.nbr;
    grad.U1.noalias() += d_au.transpose() * h_prev;
    d_nbr.noalias() += d_au * params.W1;
    d_hprev.noalias() += d_au * params.U1;

    const Matrix d_ar = d_r.array() * r.array() * (1.0 - r.array());
    grad.W2.noalias() += d_ar.transpose() * layer.nbr;
    grad.U2.noalias() += d_ar.transpose() * h_prev;
    d_nbr.noalias() += d_ar * params.W2;
    d_hprev.noalias() += d_ar * params.U2;

    // The propagation operator is symmetric.
    d_hprev += propagate.apply(d_nbr);
    dh[l - 1] += d_hprev;
  }

  const auto& first = cache.layers[0];
  const Matrix d_relu = row_l2_normalize_backward(dh[0], first.h, first.norms);
  const Matrix d_a1 = d_relu.cwiseProduct((first.pre.array() > 0.0).cast<double>().matrix());
  grad.W0.noalias() = cache.features.transpose() * d_a1;
  return grad;
}

// ---------------------------------------------------------------------------
// Finite-difference verification

struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::size_t coordinates = 0;
  bool passed = true;
  std::string worst_tensor;
};

/// Compares `analytic` against central differences of the loss, coordinate
/// by coordinate. The loss is evaluated in long double so that round-off in
/// the difference quotient stays well below the truncation error. When `max_coordinates_per_tensor` is non-zero, that many
/// coordinates per tensor are sampled with `seed`; otherwise all are checked.
inline GradientCheckResult compare_gradients(const Graph& g, const DrbcParams& params, const PairBatch& batch,
                                             std::size_t layers, const DrbcParams& analytic, double step,
                                             double tol, std::size_t max_coordinates_per_tensor = 0,
                                             std::uint64_t seed = 1) {
  GradientCheckResult result;
  using Wide = long double;
  ParamSet<Wide> probe = params.cast<Wide>();
  auto probe_tensors = probe.tensors();
  auto grad_tensors = analytic.tensors();
  Rng rng(seed);
  auto loss_at = [&]() {
    const std::vector<Wide> y = predict<Wide>(g, probe, layers);
    return pairwise_ranking_loss<Wide>(y, batch);
  };
  for (std::size_t t = 0; t < DrbcParams::kTensorCount; ++t) {
    MatrixT<Wide>& m = *probe_tensors[t];
    const auto size = static_cast<std::size_t>(m.size());
    std::vector<std::size_t> coords;
    if (max_coordinates_per_tensor == 0 || max_coordinates_per_tensor >= size) {
      coords.resize(size);
      std::iota(coords.begin(), coords.end(), std::size_t{0});
    } else {
      for (std::size_t k = 0; k < max_coordinates_per_tensor; ++k) coords.push_back(rng.below(size));
    }
    for (std::size_t c : coords) {
      const Wide saved = m.data()[c];
      m.data()[c] = saved + step;
      const Wide plus = loss_at();
      m.data()[c] = saved - step;
      const Wide minus = loss_at();
      m.data()[c] = saved;
      const auto numeric = static_cast<double>((plus - minus) / (2 * static_cast<Wide>(step)));
      const double exact = grad_tensors[t]->data()[c];
      const double denom = std::max({std::abs(exact), std::abs(numeric), 1e-8});
      const double err = std::abs(exact - numeric) / denom;
      if (err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst_tensor = std::string(DrbcParams::kNames[t]);
      }
      ++result.coordinates;
    }
  }
  result.passed = result.max_relative_error < tol;
  return result;
}

/// Max relative error of backward_gradients against central differences.
inline GradientCheckResult gradient_check(const Graph& g, const DrbcParams& params, const PairBatch& batch,
                                          std::size_t layers, double step = 1e-5, double tol = 1e-4,
                                          std::size_t max_coordinates_per_tensor = 0) {
  const ForwardResult fwd = forward(g, params, layers);
  const DrbcParams analytic = backward_gradients(fwd, batch, params, g);
  return compare_gradients(g, params, batch, layers, analytic, step, tol, max_coordinates_per_tensor);
}

// ---------------------------------------------------------------------------
// Training

enum class GraphModel { PowerlawCluster, ErdosRenyi, BarabasiAlbert };

inline GraphModel parse_graph_model(const std::string& name) {
  if (name == "plc" || name == "powerlaw-cluster") return GraphModel::PowerlawCluster;
  if (name == "er" || name == "erdos-renyi") return GraphModel::ErdosRenyi;
  if (name == "ba" || name == "barabasi-albert") return GraphModel::BarabasiAlbert;
  throw ParameterError("unknown graph model '" + name + "' (expected plc, er or ba)");
}

inline std::string graph_model_name(GraphModel m) {
  switch (m) {
    case GraphModel::PowerlawCluster: return "plc";
    case GraphModel::ErdosRenyi: return "er";
    case GraphModel::BarabasiAlbert: return "ba";
  }
  return "plc";
}

/// A distribution over random graphs with node counts uniform in
/// [min_nodes, max_nodes]. For ER, `p` is the edge probability; for
/// powerlaw-cluster it is the triangle probability.
struct GraphDistribution {
  GraphModel model = GraphModel::PowerlawCluster;
  std::size_t min_nodes = 100;
  std::size_t max_nodes = 200;
  std::size_t m = 4;
  double p = 0.05;

  Graph draw(Rng& rng) const {
    const auto n = static_cast<std::size_t>(rng.between(min_nodes, max_nodes));
    const std::uint64_t seed = rng.fork();
    switch (model) {
      case GraphModel::PowerlawCluster: return gen_powerlaw_cluster(n, m, p, seed);
      case GraphModel::ErdosRenyi: return gen_erdos_renyi(n, p, seed);
      case GraphModel::BarabasiAlbert: return gen_barabasi_albert(n, m, seed);
    }
    return {};
  }
};

struct TrainConfig {
  double learning_rate = 1e-4;
  std::size_t embedding_dim = kDefaultEmbeddingDim;
  std::size_t hidden_dim = kDefaultHiddenDim;
  std::size_t batch_graphs = 16;
  std::size_t pair_factor = 5;
  std::size_t max_episodes = 10000;
  std::size_t layers = kDefaultLayers;
  GraphDistribution graphs;
  std::size_t validation_graphs = 100;
  std::size_t validation_interval = 100;
  std::size_t patience = 10;
  /// 0 draws fresh graphs every episode; otherwise episodes sample from a
  /// fixed pool of this many graphs.
  std::size_t pool_size = 0;
  std::uint64_t seed = 1;
  unsigned threads = 1;

  void validate() const {
    if (!(learning_rate > 0.0)) throw ParameterError("learning_rate must be positive");
    if (embedding_dim < 1 || hidden_dim < 1 || layers < 1) throw ParameterError("model dimensions must be positive");
    if (batch_graphs < 1 || pair_factor < 1) throw ParameterError("batch_graphs and pair_factor must be positive");
    if (validation_graphs < 1 || validation_interval < 1 || patience < 1) {
      throw ParameterError("validation settings must be positive");
    }
    if (graphs.min_nodes < 2 || graphs.min_nodes > graphs.max_nodes) {
      throw ParameterError("node-size range must be nonempty with at least two nodes");
    }
    if (graphs.model != GraphModel::ErdosRenyi && graphs.min_nodes <= graphs.m) {
      throw ParameterError("min_nodes must exceed the attachment count m");
    }
  }
};

/// Applies one "key = value" setting. Keys use the TrainConfig field names.
inline void apply_setting(TrainConfig& cfg, const std::string& key, const std::string& value) {
  auto as_size = [&]() -> std::size_t {
    std::uint64_t v = 0;
    if (!detail::parse_u64(value, v)) throw ParameterError("setting '" + key + "' expects a non-negative integer");
    return static_cast<std::size_t>(v);
  };
  auto as_double = [&]() {
    char* end = nullptr;
    const double v = std::strtod(value.c_str(), &end);
    if (value.empty() || end != value.c_str() + value.size()) throw ParameterError("setting '" + key + "' expects a number");
    return v;
  };
  if (key == "learning_rate") cfg.learning_rate = as_double();
  else if (key == "embedding_dim") cfg.embedding_dim = as_size();
  else if (key == "hidden_dim") cfg.hidden_dim = as_size();
  else if (key == "batch_graphs") cfg.batch_graphs = as_size();
  else if (key == "pair_factor") cfg.pair_factor = as_size();
  else if (key == "max_episodes") cfg.max_episodes = as_size();
  else if (key == "layers") cfg.layers = as_size();
  else if (key == "graph_model") cfg.graphs.model = parse_graph_model(value);
  else if (key == "min_nodes") cfg.graphs.min_nodes = as_size();
  else if (key == "max_nodes") cfg.graphs.max_nodes = as_size();
  else if (key == "gen_m") cfg.graphs.m = as_size();
  else if (key == "gen_p") cfg.graphs.p = as_double();
  else if (key == "validation_graphs") cfg.validation_graphs = as_size();
  else if (key == "validation_interval") cfg.validation_interval = as_size();
  else if (key == "patience") cfg.patience = as_size();
  else if (key == "pool_size") cfg.pool_size = as_size();
  else if (key == "seed") cfg.seed = as_size();
  else if (key == "threads") cfg.threads = static_cast<unsigned>(as_size());
  else throw ParameterError("unknown training setting '" + key + "'");
}

/// Parses a flat "key = value" file; '#' starts a comment.
inline TrainConfig read_train_config(std::istream& in, TrainConfig cfg = {}) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    auto s = detail::trim(line);
    if (s.empty()) continue;
    auto eq = s.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected 'key = value'", line_no);
    const std::string key(detail::trim(s.substr(0, eq)));
    const std::string value(detail::trim(s.substr(eq + 1)));
    try {
      apply_setting(cfg, key, value);
    } catch (const ParameterError& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return cfg;
}

inline TrainConfig load_train_config(const std::string& path, TrainConfig cfg = {}) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  return read_train_config(in, cfg);
}

struct HistoryRecord {
  std::size_t iteration = 0;
  double loss = 0.0;  // mean per-pair loss of that episode
  double val_top1 = 0.0;
  double seconds = 0.0;
};

using TrainHistory = std::vector<HistoryRecord>;

inline void save_history_csv(const std::string& path, const TrainHistory& history) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write history '" + path + "'");
  out << "iteration,loss,val_top1,seconds\n";
  for (const auto& h : history) {
    out << h.iteration << ',' << format_score(h.loss) << ',' << format_score(h.val_top1) << ',' << h.seconds << '\n';
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

struct TrainResult {
  DrbcParams params;
  TrainHistory history;
  double best_val_top1 = 0.0;
};

struct LabeledGraph {
  Graph graph;
  BcScores bc;
};

/// Mean top-1% accuracy of `params` over a labeled set.
inline double mean_top1(const std::vector<LabeledGraph>& set, const DrbcParams& params, std::size_t layers) {
  double total = 0.0;
  for (const auto& item : set) total += top_n_percent_accuracy(predict<double>(item.graph, params, layers), item.bc, 1);
  return set.empty() ? 0.0 : total / static_cast<double>(set.size());
}

/// Episode loop: draw a batch of graphs, label them with exact betweenness,
/// run one forward pass over their disjoint union, sample pairs within each
/// graph and take one Adam step on the summed loss. Validation every
/// `validation_interval` episodes keeps the best parameters; training stops
/// after `patience` validations without improvement.
inline TrainResult train(const TrainConfig& cfg, std::ostream* log = nullptr) {
  cfg.validate();
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  Rng master(cfg.seed);
  const std::uint64_t init_seed = master.fork();
  Rng val_rng(master.fork());
  Rng graph_rng(master.fork());
  Rng pair_rng(master.fork());

  TrainResult result;
  DrbcParams params = init_params(kFeatureDim, cfg.embedding_dim, cfg.hidden_dim, init_seed);
  result.params = params;
  if (cfg.max_episodes == 0) return result;

  auto label = [&](Graph g) {
    BcScores bc = brandes_bc(g, cfg.threads);
    return LabeledGraph{std::move(g), std::move(bc)};
  };
  std::vector<LabeledGraph> validation;
  validation.reserve(cfg.validation_graphs);
  for (std::size_t i = 0; i < cfg.validation_graphs; ++i) validation.push_back(label(cfg.graphs.draw(val_rng)));
  std::vector<LabeledGraph> pool;
  for (std::size_t i = 0; i < cfg.pool_size; ++i) pool.push_back(label(cfg.graphs.draw(graph_rng)));

  AdamState adam;
  const AdamConfig adam_cfg{cfg.learning_rate};
  double best = -1.0;
  std::size_t stale = 0;
  std::vector<Graph> parts;
  std::vector<const BcScores*> truths;
  std::vector<LabeledGraph> fresh;

  for (std::size_t episode = 1; episode <= cfg.max_episodes; ++episode) {
    parts.clear();
    truths.clear();
    fresh.clear();
    if (pool.empty()) {
      for (std::size_t b = 0; b < cfg.batch_graphs; ++b) fresh.push_back(label(cfg.graphs.draw(graph_rng)));
      for (const auto& item : fresh) {
        parts.push_back(item.graph);
        truths.push_back(&item.bc);
      }
    } else {
      for (std::size_t b = 0; b < cfg.batch_graphs; ++b) {
        const auto& item = pool[graph_rng.below(pool.size())];
        parts.push_back(item.graph);
        truths.push_back(&item.bc);
      }
    }
    const Graph batch_graph = disjoint_union(parts);
    PairBatch pairs;
    NodeId offset = 0;
    for (std::size_t b = 0; b < parts.size(); ++b) {
      pairs.append(sample_pairs(parts[b].node_count(), cfg.pair_factor, *truths[b], pair_rng), offset);
      offset += static_cast<NodeId>(parts[b].node_count());
    }

    const ForwardResult fwd = forward(batch_graph, params, cfg.layers);
    const double loss = pairwise_ranking_loss<double>(fwd.scores, pairs);
    if (!std::isfinite(loss)) throw NumericError("non-finite training loss at episode " + std::to_string(episode));
    const DrbcParams grad = backward_gradients(fwd, pairs, params, batch_graph);
    auto p_tensors = params.tensors();
    auto g_tensors = grad.tensors();
    adam_step(p_tensors, g_tensors, adam, adam_cfg);

    if (episode % cfg.validation_interval == 0) {
      HistoryRecord rec;
      rec.iteration = episode;
      rec.loss = loss / static_cast<double>(pairs.size());
      rec.val_top1 = mean_top1(validation, params, cfg.layers);
      rec.seconds = std::chrono::duration<double>(clock::now() - start).count();
      result.history.push_back(rec);
      if (log) {
        *log << "episode " << episode << " loss " << rec.loss << " val_top1 " << rec.val_top1 << " elapsed "
             << rec.seconds << "s\n";
      }
      if (rec.val_top1 > best) {
        best = rec.val_top1;
        result.params = params;
        stale = 0;
      } else if (++stale >= cfg.patience) {
        if (log) *log << "early stop after " << stale << " validations without improvement\n";
        break;
      }
    }
  }
  // Runs shorter than one validation interval keep the last parameters.
  if (result.history.empty()) result.params = params;
  result.best_val_top1 = std::max(best, 0.0);
  return result;
}

}  // namespace drbc
