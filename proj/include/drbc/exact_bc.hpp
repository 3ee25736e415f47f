#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include "drbc/errors.hpp"
#include "drbc/graph.hpp"
#include "drbc/rng.hpp"

namespace drbc {

/// Normalized betweenness per node, b(w) in [0, 1].
using BcScores = std::vector<double>;

namespace detail {

// Scratch buffers for one single-source shortest-path pass. Predecessor lists
// are implicit: w precedes v on a shortest path iff dist[w] + 1 == dist[v].
struct ShortestPathState {
  std::vector<double> sigma;
  std::vector<std::int64_t> dist;
  std::vector<double> delta;
  std::vector<NodeId> order;

  explicit ShortestPathState(std::size_t n) : sigma(n), dist(n), delta(n) { order.reserve(n); }

  void run(const Graph& g, NodeId source) {
    std::fill(sigma.begin(), sigma.end(), 0.0);
    std::fill(dist.begin(), dist.end(), -1);
    std::fill(delta.begin(), delta.end(), 0.0);
    order.clear();
    sigma[source] = 1.0;
    dist[source] = 0;
    order.push_back(source);
    // `order` doubles as the BFS queue.
    for (std::size_t head = 0; head < order.size(); ++head) {
      NodeId v = order[head];
      for (NodeId w : g.neighbors(v)) {
        if (dist[w] < 0) {
          dist[w] = dist[v] + 1;
          order.push_back(w);
        }
        if (dist[w] == dist[v] + 1) sigma[w] += sigma[v];
      }
    }
    // Reverse accumulation: delta[w] = sum over successors s of
    // sigma[w] / sigma[s] * (1 + delta[s]).
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      NodeId s = *it;
      const double coeff = (1.0 + delta[s]) / sigma[s];
      for (NodeId w : g.neighbors(s)) {
        if (dist[w] + 1 == dist[s]) delta[w] += sigma[w] * coeff;
      }
    }
  }
};

// Sums source dependencies over `sources`, split into contiguous chunks
// across `threads` workers; per-worker partial sums are added in chunk order.
inline std::vector<double> accumulate_dependencies(const Graph& g, const std::vector<NodeId>& sources,
                                                   unsigned threads) {
  const std::size_t n = g.node_count();
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(1, sources.size()))));
  std::vector<std::vector<double>> partial(threads, std::vector<double>(n, 0.0));
  auto work = [&](unsigned t) {
    ShortestPathState state(n);
    const std::size_t lo = sources.size() * t / threads;
    const std::size_t hi = sources.size() * (t + 1) / threads;
    auto& acc = partial[t];
    for (std::size_t k = lo; k < hi; ++k) {
      const NodeId s = sources[k];
      state.run(g, s);
      for (NodeId w : state.order) {
        if (w != s) acc[w] += state.delta[w];
      }
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t);
    for (auto& th : pool) th.join();
  }
  for (unsigned t = 1; t < threads; ++t) {
    for (std::size_t v = 0; v < n; ++v) partial[0][v] += partial[t][v];
  }
  return std::move(partial[0]);
}

inline BcScores normalize_dependencies(std::vector<double> raw, std::size_t n, double scale) {
  const double denom = static_cast<double>(n) * static_cast<double>(n - 1);
  for (double& x : raw) x = x * scale / denom;
  return raw;
}

}  // namespace detail

/// Exact normalized betweenness by Brandes' algorithm (unweighted BFS per
/// source, reverse dependency accumulation). Every ordered pair counts once,
/// so values are divided by |V|(|V|-1).
inline BcScores brandes_bc(const Graph& g, unsigned threads = 1) {
  const std::size_t n = g.node_count();
  if (n < 2) return BcScores(n, 0.0);
  std::vector<NodeId> sources(n);
  std::iota(sources.begin(), sources.end(), NodeId{0});
  return detail::normalize_dependencies(detail::accumulate_dependencies(g, sources, threads), n, 1.0);
}

inline constexpr std::size_t kBruteForceMaxNodes = 64;

/// Betweenness by explicit enumeration of every shortest path between every
/// ordered pair. Exponential in the worst case; a test oracle only.
inline BcScores brute_force_bc(const Graph& g, std::size_t max_nodes = kBruteForceMaxNodes) {
  const std::size_t n = g.node_count();
  if (n > max_nodes) {
    throw SizeError("brute-force betweenness limited to " + std::to_string(max_nodes) + " nodes, got " +
                    std::to_string(n));
  }
  BcScores bc(n, 0.0);
  if (n < 2) return bc;

  // All-pairs hop distances by Floyd-Warshall.
  constexpr std::size_t inf = std::numeric_limits<std::size_t>::max() / 4;
  std::vector<std::size_t> d(n * n, inf);
  for (std::size_t v = 0; v < n; ++v) {
    d[v * n + v] = 0;
    for (NodeId w : g.neighbors(static_cast<NodeId>(v))) d[v * n + w] = 1;
  }
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        d[i * n + j] = std::min(d[i * n + j], d[i * n + k] + d[k * n + j]);

  std::vector<NodeId> path;
  std::vector<double> through(n);
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = 0; v < n; ++v) {
      if (u == v || d[u * n + v] >= inf) continue;
      std::fill(through.begin(), through.end(), 0.0);
      double paths = 0.0;
      path.assign(1, static_cast<NodeId>(u));
      // Depth-first walk over neighbors that stay on a shortest u -> v path.
      auto walk = [&](auto&& self, NodeId at) -> void {
        if (at == v) {
          paths += 1.0;
          for (std::size_t k = 1; k + 1 < path.size(); ++k) through[path[k]] += 1.0;
          return;
        }
        for (NodeId w : g.neighbors(at)) {
          if (d[u * n + w] == d[u * n + at] + 1 && d[w * n + v] + d[u * n + w] == d[u * n + v]) {
            path.push_back(w);
            self(self, w);
            path.pop_back();
          }
        }
      };
      walk(walk, static_cast<NodeId>(u));
      for (std::size_t w = 0; w < n; ++w) bc[w] += through[w] / paths;
    }
  }
  const double denom = static_cast<double>(n) * static_cast<double>(n - 1);
  for (double& x : bc) x /= denom;
  return bc;
}

/// Source-sampling estimate: Brandes passes from k distinct uniformly chosen
/// sources, dependencies scaled by |V|/k.
inline BcScores sampled_source_bc(const Graph& g, std::size_t k, std::uint64_t seed, unsigned threads = 1) {
  const std::size_t n = g.node_count();
  if (k < 1 || k > n) throw ParameterError("sample count must lie in [1, |V|]");
  if (n < 2) return BcScores(n, 0.0);
  std::vector<NodeId> ids(n);
  std::iota(ids.begin(), ids.end(), NodeId{0});
  Rng rng(seed);
  for (std::size_t i = 0; i < k; ++i) std::swap(ids[i], ids[i + rng.below(n - i)]);
  ids.resize(k);
  // Ascending order makes k = |V| reproduce brandes_bc bit for bit.
  std::sort(ids.begin(), ids.end());
  const double scale = static_cast<double>(n) / static_cast<double>(k);
  return detail::normalize_dependencies(detail::accumulate_dependencies(g, ids, threads), n, scale);
}

// ---------------------------------------------------------------------------
// Score files: one "node_id score" line per node, 17 significant digits.

struct ScoreRecord {
  std::uint64_t node_id;
  double score;
};

inline std::string format_score(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// Writes scores under `ids` (dense ids when empty).
inline void save_bc_scores(const std::string& path, const BcScores& scores, const std::vector<std::uint64_t>& ids = {}) {
  if (!ids.empty() && ids.size() != scores.size()) throw ShapeError("id list length differs from score count");
  std::ofstream out(path);
  if (!out) throw IoError("cannot write score file '" + path + "'");
  for (std::size_t v = 0; v < scores.size(); ++v) {
    out << (ids.empty() ? v : ids[v]) << ' ' << format_score(scores[v]) << '\n';
  }
  out.flush();
  if (!out) throw IoError("write failed for '" + path + "'");
}

inline std::vector<ScoreRecord> load_bc_scores(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open score file '" + path + "'");
  std::vector<ScoreRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto s = detail::trim(line);
    if (s.empty() || s.front() == '#') continue;
    auto tokens = detail::split_ws(s);
    ScoreRecord rec{};
    char* end = nullptr;
    std::string value;
    if (tokens.size() == 2) {
      value = std::string(tokens[1]);
      rec.score = std::strtod(value.c_str(), &end);
    }
    if (tokens.size() != 2 || !detail::parse_u64(tokens[0], rec.node_id) || end != value.c_str() + value.size()) {
      throw ParseError("expected 'node_id score'", line_no, path);
    }
    out.push_back(rec);
  }
  return out;
}

/// Arranges score records in the node order of a loaded graph.
inline BcScores align_scores(const std::vector<ScoreRecord>& records, const std::vector<std::uint64_t>& original_ids) {
  std::vector<std::uint64_t> sorted_ids = original_ids;
  const bool identity = std::is_sorted(sorted_ids.begin(), sorted_ids.end());
  std::vector<std::size_t> order(original_ids.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (!identity) {
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return original_ids[a] < original_ids[b]; });
    for (std::size_t k = 0; k < order.size(); ++k) sorted_ids[k] = original_ids[order[k]];
  }
  BcScores out(original_ids.size(), 0.0);
  std::vector<bool> seen(original_ids.size(), false);
  for (const auto& rec : records) {
    auto it = std::lower_bound(sorted_ids.begin(), sorted_ids.end(), rec.node_id);
    if (it == sorted_ids.end() || *it != rec.node_id) {
      throw ShapeError("score file names node " + std::to_string(rec.node_id) + " absent from the graph");
    }
    const std::size_t v = order[static_cast<std::size_t>(it - sorted_ids.begin())];
    out[v] = rec.score;
    seen[v] = true;
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
    throw ShapeError("score file does not cover every graph node");
  }
  return out;
}

}  // namespace drbc
