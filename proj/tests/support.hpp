#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "drbc/drbc.hpp"

namespace drbc::test {

inline Graph path_graph(std::size_t n) {
  std::vector<Edge> e;
  for (NodeId v = 0; v + 1 < n; ++v) e.emplace_back(v, v + 1);
  return Graph::from_edges(n, e);
}

inline Graph cycle_graph(std::size_t n) {
  std::vector<Edge> e;
  for (NodeId v = 0; v < n; ++v) e.emplace_back(v, static_cast<NodeId>((v + 1) % n));
  return Graph::from_edges(n, e);
}

/// Node 0 is the center.
inline Graph star_graph(std::size_t leaves) {
  std::vector<Edge> e;
  for (NodeId v = 1; v <= leaves; ++v) e.emplace_back(0, v);
  return Graph::from_edges(leaves + 1, e);
}

inline Graph complete_graph(std::size_t n) {
  std::vector<Edge> e;
  for (NodeId i = 0; i < n; ++i)
    for (NodeId j = i + 1; j < n; ++j) e.emplace_back(i, j);
  return Graph::from_edges(n, e);
}

inline std::vector<NodeId> random_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<NodeId> perm(n);
  std::iota(perm.begin(), perm.end(), NodeId{0});
  std::mt19937_64 gen(seed);
  std::shuffle(perm.begin(), perm.end(), gen);
  return perm;
}

/// Kendall tau straight from the definition: every unordered pair, ties in
/// either vector count as neither concordant nor discordant.
inline double quadratic_tau(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = a.size();
  std::int64_t concordant = 0, discordant = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double s = (a[i] - a[j]) * (b[i] - b[j]);
      if (s > 0) ++concordant;
      else if (s < 0) ++discordant;
    }
  }
  return 2.0 * static_cast<double>(concordant - discordant) / (static_cast<double>(n) * static_cast<double>(n - 1));
}

/// Betweenness from all-pairs BFS distances and path counts, using
/// sigma_uv(w) = sigma_uw * sigma_wv whenever d(u,w) + d(w,v) = d(u,v).
inline std::vector<double> pair_count_bc(const Graph& g) {
  const std::size_t n = g.node_count();
  std::vector<std::vector<long>> dist(n, std::vector<long>(n, -1));
  std::vector<std::vector<double>> sigma(n, std::vector<double>(n, 0.0));
  for (std::size_t s = 0; s < n; ++s) {
    std::vector<NodeId> queue = {static_cast<NodeId>(s)};
    dist[s][s] = 0;
    sigma[s][s] = 1;
    for (std::size_t head = 0; head < queue.size(); ++head) {
      NodeId v = queue[head];
      for (NodeId w : g.neighbors(v)) {
        if (dist[s][w] < 0) {
          dist[s][w] = dist[s][v] + 1;
          queue.push_back(w);
        }
        if (dist[s][w] == dist[s][v] + 1) sigma[s][w] += sigma[s][v];
      }
    }
  }
  std::vector<double> bc(n, 0.0);
  if (n < 2) return bc;
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = 0; v < n; ++v) {
      if (u == v || dist[u][v] < 0) continue;
      for (std::size_t w = 0; w < n; ++w) {
        if (w == u || w == v || dist[u][w] < 0 || dist[w][v] < 0) continue;
        if (dist[u][w] + dist[w][v] == dist[u][v]) bc[w] += sigma[u][w] * sigma[w][v] / sigma[u][v];
      }
    }
  for (double& x : bc) x /= static_cast<double>(n) * static_cast<double>(n - 1);
  return bc;
}

/// Fresh scratch directory under the system temp path.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("drbc_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

/// Small random parameter set at the given dimensions.
inline DrbcParams small_params(std::size_t p, std::size_t q, std::uint64_t seed) {
  return init_params(kFeatureDim, p, q, seed);
}

/// A random subset of sample_pairs output, for compact gradient checks.
inline PairBatch random_batch(const Graph& g, const BcScores& bc, std::size_t pairs, std::uint64_t seed) {
  Rng rng(seed);
  PairBatch full = sample_pairs(g.node_count(), (pairs + g.node_count() - 1) / g.node_count(), bc, rng);
  PairBatch out;
  for (std::size_t k = 0; k < pairs; ++k) {
    out.push(full.source[k], full.target[k], pair_logit(bc, full.source[k], full.target[k]));
  }
  return out;
}

}  // namespace drbc::test
