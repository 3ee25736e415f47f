#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "drbc/errors.hpp"
#include "drbc/matrix.hpp"
#include "drbc/rng.hpp"

namespace drbc {

using NodeId = std::uint32_t;
using Edge = std::pair<NodeId, NodeId>;

/// Immutable undirected simple graph in compressed adjacency form.
///
/// Neighbor lists are strictly ascending, symmetric and free of self-loops.
class Graph {
 public:
  Graph() : offsets_(1, 0) {}

  /// Builds a simple graph on `node_count` nodes. Self-loops are dropped and
  /// duplicate or reversed edges collapse to one.
  static Graph from_edges(std::size_t node_count, std::span<const Edge> edges) {
    std::vector<std::size_t> degree(node_count, 0);
    for (const auto& [a, b] : edges) {
      if (a >= node_count || b >= node_count) {
        throw ParameterError("edge endpoint out of range");
      }
      if (a == b) continue;
      ++degree[a];
      ++degree[b];
    }
    Graph g;
    g.offsets_.assign(node_count + 1, 0);
    for (std::size_t v = 0; v < node_count; ++v) g.offsets_[v + 1] = g.offsets_[v] + degree[v];
    g.targets_.resize(g.offsets_.back());
    std::vector<std::size_t> fill(g.offsets_.begin(), g.offsets_.end() - 1);
    for (const auto& [a, b] : edges) {
      if (a == b) continue;
      g.targets_[fill[a]++] = b;
      g.targets_[fill[b]++] = a;
    }
    // Sort and dedupe each list, then compact.
    std::size_t write = 0;
    std::vector<std::size_t> new_offsets(node_count + 1, 0);
    for (std::size_t v = 0; v < node_count; ++v) {
      auto first = g.targets_.begin() + static_cast<std::ptrdiff_t>(g.offsets_[v]);
      auto last = g.targets_.begin() + static_cast<std::ptrdiff_t>(g.offsets_[v + 1]);
      std::sort(first, last);
      last = std::unique(first, last);
      for (auto it = first; it != last; ++it) g.targets_[write++] = *it;
      new_offsets[v + 1] = write;
    }
    g.targets_.resize(write);
    g.offsets_ = std::move(new_offsets);
    return g;
  }

  std::size_t node_count() const noexcept { return offsets_.size() - 1; }
  std::size_t edge_count() const noexcept { return targets_.size() / 2; }

  std::span<const NodeId> neighbors(NodeId v) const noexcept {
    return {targets_.data() + offsets_[v], offsets_[v + 1] - offsets_[v]};
  }

  std::size_t degree(NodeId v) const noexcept { return offsets_[v + 1] - offsets_[v]; }

  bool has_edge(NodeId a, NodeId b) const noexcept {
    auto nbrs = neighbors(a);
    return std::binary_search(nbrs.begin(), nbrs.end(), b);
  }

  std::span<const std::size_t> offsets() const noexcept { return offsets_; }
  std::span<const NodeId> targets() const noexcept { return targets_; }

  /// Every undirected edge once, as (i, j) with i < j, in ascending order.
  std::vector<Edge> edges() const {
    std::vector<Edge> out;
    out.reserve(edge_count());
    for (NodeId v = 0; v < node_count(); ++v) {
      for (NodeId w : neighbors(v)) {
        if (v < w) out.emplace_back(v, w);
      }
    }
    return out;
  }

  friend bool operator==(const Graph&, const Graph&) = default;

 private:
  std::vector<std::size_t> offsets_;
  std::vector<NodeId> targets_;
};

/// Node v of `g` becomes node perm[v] of the result.
inline Graph relabel(const Graph& g, std::span<const NodeId> perm) {
  if (perm.size() != g.node_count()) throw ShapeError("permutation length differs from node count");
  auto edges = g.edges();
  for (auto& [a, b] : edges) {
    a = perm[a];
    b = perm[b];
  }
  return Graph::from_edges(g.node_count(), edges);
}

/// Disjoint union; the nodes of parts[k] occupy a contiguous block after the
/// nodes of parts[0..k).
inline Graph disjoint_union(std::span<const Graph> parts) {
  std::size_t total = 0;
  std::vector<Edge> edges;
  for (const auto& part : parts) {
    for (auto [a, b] : part.edges()) {
      edges.emplace_back(static_cast<NodeId>(a + total), static_cast<NodeId>(b + total));
    }
    total += part.node_count();
  }
  return Graph::from_edges(total, edges);
}

// ---------------------------------------------------------------------------
// Random graph generators

namespace detail {

// Draws m distinct entries of `pool` (uniform over the multiset), rejecting
// repeats. Returned in draw order.
inline std::vector<NodeId> random_subset(const std::vector<NodeId>& pool, std::size_t m, Rng& rng) {
  std::vector<NodeId> chosen;
  chosen.reserve(m);
  while (chosen.size() < m) {
    NodeId x = pool[rng.below(pool.size())];
    if (std::find(chosen.begin(), chosen.end(), x) == chosen.end()) chosen.push_back(x);
  }
  return chosen;
}

}  // namespace detail

/// Holme-Kim powerlaw-cluster graph: m isolated seed nodes, then every new
/// node attaches m edges by preferential attachment; after the first, each
/// edge is replaced with probability p by one closing a triangle through the
/// previous target.
inline Graph gen_powerlaw_cluster(std::size_t n, std::size_t m, double p, std::uint64_t seed) {
  if (m < 1 || n <= m) throw ParameterError("powerlaw-cluster requires n > m >= 1");
  if (!(p >= 0.0 && p <= 1.0)) throw ParameterError("powerlaw-cluster triangle probability must lie in [0, 1]");
  Rng rng(seed);
  std::vector<std::vector<NodeId>> adj(n);
  std::vector<Edge> edges;
  edges.reserve((n - m) * m);
  std::vector<NodeId> repeated;
  repeated.reserve(2 * n * m);
  for (NodeId v = 0; v < m; ++v) repeated.push_back(v);

  auto link = [&](NodeId a, NodeId b) {
    adj[a].push_back(b);
    adj[b].push_back(a);
    edges.emplace_back(a, b);
    repeated.push_back(b);
  };
  auto linked = [&](NodeId a, NodeId b) {
    return std::find(adj[a].begin(), adj[a].end(), b) != adj[a].end();
  };

  std::vector<NodeId> candidates;
  for (auto source = static_cast<NodeId>(m); source < n; ++source) {
    auto targets = detail::random_subset(repeated, m, rng);
    NodeId target = targets.back();
    targets.pop_back();
    link(source, target);
    std::size_t count = 1;
    while (count < m) {
      if (rng.uniform() < p) {
        candidates.clear();
        for (NodeId w : adj[target]) {
          if (w != source && !linked(source, w)) candidates.push_back(w);
        }
        if (!candidates.empty()) {
          NodeId w = candidates[rng.below(candidates.size())];
          link(source, w);
          // A closed-triangle endpoint is no longer an attachment candidate.
          if (auto it = std::find(targets.begin(), targets.end(), w); it != targets.end()) targets.erase(it);
          ++count;
          continue;
        }
      }
      target = targets.back();
      targets.pop_back();
      link(source, target);
      ++count;
    }
    for (std::size_t k = 0; k < m; ++k) repeated.push_back(source);
  }
  return Graph::from_edges(n, edges);
}

/// G(n, p): each unordered pair independently with probability p_edge.
inline Graph gen_erdos_renyi(std::size_t n, double p_edge, std::uint64_t seed) {
  if (n < 1) throw ParameterError("erdos-renyi requires n >= 1");
  if (!(p_edge >= 0.0 && p_edge <= 1.0)) throw ParameterError("erdos-renyi edge probability must lie in [0, 1]");
  Rng rng(seed);
  std::vector<Edge> edges;
  for (NodeId i = 0; i < n; ++i) {
    for (NodeId j = i + 1; j < n; ++j) {
      if (rng.uniform() < p_edge) edges.emplace_back(i, j);
    }
  }
  return Graph::from_edges(n, edges);
}

/// Barabasi-Albert preferential attachment starting from m isolated nodes;
/// the first arriving node links to all of them.
inline Graph gen_barabasi_albert(std::size_t n, std::size_t m, std::uint64_t seed) {
  if (m < 1 || n <= m) throw ParameterError("barabasi-albert requires n > m >= 1");
  Rng rng(seed);
  std::vector<Edge> edges;
  edges.reserve((n - m) * m);
  std::vector<NodeId> targets(m);
  for (NodeId v = 0; v < m; ++v) targets[v] = v;
  std::vector<NodeId> repeated;
  repeated.reserve(2 * n * m);
  for (auto source = static_cast<NodeId>(m); source < n; ++source) {
    for (NodeId t : targets) {
      edges.emplace_back(source, t);
      repeated.push_back(t);
    }
    for (std::size_t k = 0; k < m; ++k) repeated.push_back(source);
    if (source + 1 < n) targets = detail::random_subset(repeated, m, rng);
  }
  return Graph::from_edges(n, edges);
}

// ---------------------------------------------------------------------------
// Edge-list files

struct EdgeListFile {
  Graph graph;
  /// original_ids[v] is the id node v carried in the file.
  std::vector<std::uint64_t> original_ids;
  std::size_t self_loops_dropped = 0;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  constexpr std::string_view ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

inline bool parse_u64(std::string_view token, std::uint64_t& out) {
  if (token.empty()) return false;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), out);
  return ec == std::errc() && ptr == token.data() + token.size();
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace detail

/// Reads a whitespace-separated edge list. Lines starting with '#' are
/// comments, except a "# nodes N ..." directive (written by save_edge_list)
/// which fixes the node count and keeps ids as-is so isolated nodes survive.
/// Without the directive, ids are compacted to 0..|V|-1 in ascending order.
inline EdgeListFile read_edge_list(std::istream& in) {
  std::vector<std::pair<std::uint64_t, std::uint64_t>> raw;
  std::optional<std::uint64_t> declared_nodes;
  std::string line;
  std::size_t line_no = 0;
  EdgeListFile out;
  while (std::getline(in, line)) {
    ++line_no;
    auto s = detail::trim(line);
    if (s.empty()) continue;
    if (s.front() == '#') {
      auto tokens = detail::split_ws(s.substr(1));
      std::uint64_t n = 0;
      if (tokens.size() >= 2 && tokens[0] == "nodes" && detail::parse_u64(tokens[1], n)) declared_nodes = n;
      continue;
    }
    auto tokens = detail::split_ws(s);
    std::uint64_t a = 0, b = 0;
    if (tokens.size() != 2 || !detail::parse_u64(tokens[0], a) || !detail::parse_u64(tokens[1], b)) {
      throw ParseError("expected two non-negative integer node ids, got '" + std::string(s) + "'", line_no);
    }
    if (a == b) {
      ++out.self_loops_dropped;
      continue;
    }
    if (declared_nodes && (a >= *declared_nodes || b >= *declared_nodes)) {
      throw ParseError("node id exceeds declared node count", line_no);
    }
    raw.emplace_back(a, b);
  }

  std::vector<Edge> edges;
  edges.reserve(raw.size());
  if (declared_nodes) {
    out.original_ids.resize(*declared_nodes);
    for (std::uint64_t v = 0; v < *declared_nodes; ++v) out.original_ids[v] = v;
    for (auto [a, b] : raw) edges.emplace_back(static_cast<NodeId>(a), static_cast<NodeId>(b));
  } else {
    std::vector<std::uint64_t> ids;
    ids.reserve(raw.size() * 2);
    for (auto [a, b] : raw) {
      ids.push_back(a);
      ids.push_back(b);
    }
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    auto dense = [&](std::uint64_t id) {
      return static_cast<NodeId>(std::lower_bound(ids.begin(), ids.end(), id) - ids.begin());
    };
    for (auto [a, b] : raw) edges.emplace_back(dense(a), dense(b));
    out.original_ids = std::move(ids);
  }
  out.graph = Graph::from_edges(out.original_ids.size(), edges);
  return out;
}

inline EdgeListFile load_edge_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open edge list '" + path + "'");
  try {
    return read_edge_list(in);
  } catch (const ParseError& e) {
    throw ParseError(e.detail(), e.line(), path);
  }
}

inline void write_edge_list(const Graph& g, std::ostream& out) {
  out << "# nodes " << g.node_count() << " edges " << g.edge_count() << '\n';
  for (auto [a, b] : g.edges()) out << a << ' ' << b << '\n';
}

inline void save_edge_list(const Graph& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write edge list '" + path + "'");
  write_edge_list(g, out);
  out.flush();
  if (!out) throw IoError("write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------

/// |V| x 3 matrix whose row v is [d_v, 1, 1].
using NodeFeatures = Matrix;

inline constexpr std::size_t kFeatureDim = 3;

inline NodeFeatures initial_features(const Graph& g) {
  NodeFeatures x(static_cast<Eigen::Index>(g.node_count()), kFeatureDim);
  for (NodeId v = 0; v < g.node_count(); ++v) {
    x(v, 0) = static_cast<double>(g.degree(v));
    x(v, 1) = 1.0;
    x(v, 2) = 1.0;
  }
  return x;
}

}  // namespace drbc
