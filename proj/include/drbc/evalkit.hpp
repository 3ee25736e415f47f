#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "drbc/errors.hpp"
#include "drbc/exact_bc.hpp"
#include "drbc/graph.hpp"
#include "drbc/model.hpp"

namespace drbc {

/// The k highest-scoring node ids in descending score order; equal scores
/// are ordered by ascending id.
inline std::vector<NodeId> rank_top_k(std::span<const double> scores, std::size_t k) {
  if (k < 1 || k > scores.size()) throw ParameterError("k must lie in [1, |V|]");
  std::vector<NodeId> ids(scores.size());
  std::iota(ids.begin(), ids.end(), NodeId{0});
  auto before = [&](NodeId a, NodeId b) { return scores[a] > scores[b] || (scores[a] == scores[b] && a < b); };
  auto mid = ids.begin() + static_cast<std::ptrdiff_t>(k);
  if (k == ids.size()) {
    std::sort(ids.begin(), ids.end(), before);
  } else {
    std::partial_sort(ids.begin(), mid, ids.end(), before);
    ids.erase(mid, ids.end());
  }
  return ids;
}

/// ceil(|V| * N / 100), at least 1.
inline std::size_t top_n_count(std::size_t n, double n_percent) {
  const auto k = static_cast<std::size_t>(std::ceil(static_cast<double>(n) * n_percent / 100.0));
  return std::clamp<std::size_t>(k, 1, n);
}

/// Overlap of the predicted and true top-N% node sets, divided by their size.
inline double top_n_percent_accuracy(std::span<const double> pred, std::span<const double> truth, double n_percent) {
  if (pred.size() != truth.size()) throw ShapeError("prediction and ground truth differ in length");
  if (!(n_percent > 0.0 && n_percent <= 100.0)) throw ParameterError("N must lie in (0, 100]");
  if (pred.empty()) throw ShapeError("cannot rank an empty score vector");
  const std::size_t k = top_n_count(pred.size(), n_percent);
  auto a = rank_top_k(pred, k);
  auto b = rank_top_k(truth, k);
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::vector<NodeId> common;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
  return static_cast<double>(common.size()) / static_cast<double>(k);
}

namespace detail {

// Counts strict inversions of `v` while merge-sorting it in place.
inline std::int64_t count_inversions(std::vector<double>& v, std::vector<double>& scratch, std::size_t lo,
                                     std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::int64_t swaps = count_inversions(v, scratch, lo, mid) + count_inversions(v, scratch, mid, hi);
  std::size_t i = lo, j = mid, out = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += static_cast<std::int64_t>(mid - i);
      scratch[out++] = v[j++];
    } else {
      scratch[out++] = v[i++];
    }
  }
  while (i < mid) scratch[out++] = v[i++];
  while (j < hi) scratch[out++] = v[j++];
  std::copy(scratch.begin() + static_cast<std::ptrdiff_t>(lo), scratch.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return swaps;
}

template <class Equal>
std::int64_t tied_pairs(std::size_t n, Equal equal_to_previous) {
  std::int64_t total = 0, run = 1;
  for (std::size_t i = 1; i < n; ++i) {
    if (equal_to_previous(i)) {
      ++run;
    } else {
      total += run * (run - 1) / 2;
      run = 1;
    }
  }
  return total + run * (run - 1) / 2;
}

}  // namespace detail

/// Kendall tau 2(C - D) / (n(n-1)) in O(n log n). Pairs tied in either
/// vector count as neither concordant nor discordant.
inline double kendall_tau(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("kendall tau inputs differ in length");
  const std::size_t n = a.size();
  if (n < 2) throw ParameterError("kendall tau needs at least two entries");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return a[i] < a[j] || (a[i] == a[j] && b[i] < b[j]); });
  const std::int64_t ties_a = detail::tied_pairs(n, [&](std::size_t i) { return a[order[i]] == a[order[i - 1]]; });
  const std::int64_t ties_joint = detail::tied_pairs(
      n, [&](std::size_t i) { return a[order[i]] == a[order[i - 1]] && b[order[i]] == b[order[i - 1]]; });
  std::vector<double> seq(n), scratch(n);
  for (std::size_t i = 0; i < n; ++i) seq[i] = b[order[i]];
  const std::int64_t discordant = detail::count_inversions(seq, scratch, 0, n);
  // seq is now b sorted ascending.
  const std::int64_t ties_b = detail::tied_pairs(n, [&](std::size_t i) { return seq[i] == seq[i - 1]; });
  const auto pairs = static_cast<std::int64_t>(n) * static_cast<std::int64_t>(n - 1) / 2;
  const std::int64_t concordant = pairs - ties_a - ties_b + ties_joint - discordant;
  return 2.0 * static_cast<double>(concordant - discordant) / (static_cast<double>(n) * static_cast<double>(n - 1));
}

// ---------------------------------------------------------------------------
// Benchmark reports

struct SampledStats {
  std::size_t sources = 0;
  double top1 = 0, top5 = 0, top10 = 0, kendall_tau = 0;
  double seconds = 0;
};

struct EvalRecord {
  std::string graph_id;
  std::size_t nodes = 0;
  std::size_t edges = 0;
  double top1 = 0, top5 = 0, top10 = 0, kendall_tau = 0;
  double inference_seconds = 0;
  /// Set when ground truth was computed during the run.
  std::optional<double> exact_bc_seconds;
  std::optional<SampledStats> sampled;
};

struct ColumnStats {
  double mean = 0;
  double stddev = 0;
};

struct EvalReport {
  std::vector<EvalRecord> records;

  /// Mean and sample standard deviation of a numeric column.
  ColumnStats stats(const std::function<double(const EvalRecord&)>& column) const {
    ColumnStats s;
    if (records.empty()) return s;
    for (const auto& r : records) s.mean += column(r);
    s.mean /= static_cast<double>(records.size());
    if (records.size() > 1) {
      double ss = 0;
      for (const auto& r : records) ss += (column(r) - s.mean) * (column(r) - s.mean);
      s.stddev = std::sqrt(ss / static_cast<double>(records.size() - 1));
    }
    return s;
  }
};

using Ranker = std::function<RankScores(const Graph&)>;

inline EvalRecord score_against_truth(std::string graph_id, const Graph& g, std::span<const double> pred,
                                      std::span<const double> truth) {
  EvalRecord r;
  r.graph_id = std::move(graph_id);
  r.nodes = g.node_count();
  r.edges = g.edge_count();
  r.top1 = top_n_percent_accuracy(pred, truth, 1);
  r.top5 = top_n_percent_accuracy(pred, truth, 5);
  r.top10 = top_n_percent_accuracy(pred, truth, 10);
  r.kendall_tau = pred.size() >= 2 ? kendall_tau(pred, truth) : 1.0;
  return r;
}

struct BenchmarkOptions {
  /// Ids written into the report; defaults to the graph index.
  std::vector<std::string> graph_ids;
  /// Fraction of nodes used as sources for the sampling baseline; 0 disables.
  double sample_fraction = 0.0;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  /// Run and time exact betweenness even when ground truth is supplied.
  bool time_exact = false;
};

/// Times ranking (scoring plus a full sort) on every graph and scores the
/// ranking against the aligned ground truth. Graphs with no supplied truth
/// (empty vector) get exact betweenness computed and timed on the spot.
inline EvalReport run_benchmark(const Ranker& ranker, std::span<const Graph> graphs,
                                std::span<const BcScores> truth, const BenchmarkOptions& options = {}) {
  if (graphs.size() != truth.size()) throw ShapeError("graph and ground-truth lists differ in length");
  using clock = std::chrono::steady_clock;
  auto seconds_since = [](clock::time_point t0) {
    return std::chrono::duration<double>(clock::now() - t0).count();
  };
  EvalReport report;
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    const Graph& g = graphs[i];
    BcScores exact = truth[i];
    std::optional<double> exact_seconds;
    if ((exact.empty() || options.time_exact) && g.node_count() > 0) {
      auto t0 = clock::now();
      BcScores computed = brandes_bc(g, options.threads);
      exact_seconds = seconds_since(t0);
      if (exact.empty()) exact = std::move(computed);
    }
    if (exact.size() != g.node_count()) {
      throw ShapeError("ground truth for graph " + std::to_string(i) + " has " + std::to_string(exact.size()) +
                       " entries for " + std::to_string(g.node_count()) + " nodes");
    }
    auto t0 = clock::now();
    RankScores pred = ranker(g);
    rank_top_k(pred, pred.size());
    const double inference = seconds_since(t0);

    const std::string id = i < options.graph_ids.size() ? options.graph_ids[i] : std::to_string(i);
    EvalRecord rec = score_against_truth(id, g, pred, exact);
    rec.inference_seconds = inference;
    rec.exact_bc_seconds = exact_seconds;
    if (options.sample_fraction > 0.0) {
      SampledStats s;
      s.sources = std::clamp<std::size_t>(
          static_cast<std::size_t>(std::ceil(options.sample_fraction * static_cast<double>(g.node_count()))), 1,
          g.node_count());
      auto ts = clock::now();
      BcScores approx = sampled_source_bc(g, s.sources, options.seed + i, options.threads);
      rank_top_k(approx, approx.size());
      s.seconds = seconds_since(ts);
      auto scored = score_against_truth(id, g, approx, exact);
      s.top1 = scored.top1;
      s.top5 = scored.top5;
      s.top10 = scored.top10;
      s.kendall_tau = scored.kendall_tau;
      rec.sampled = s;
    }
    report.records.push_back(std::move(rec));
  }
  return report;
}

inline EvalReport run_benchmark(const Model& model, std::span<const Graph> graphs, std::span<const BcScores> truth,
                                const BenchmarkOptions& options = {}) {
  Ranker ranker = [&model](const Graph& g) { return predict<double>(g, model.params, model.meta.layers); };
  return run_benchmark(ranker, graphs, truth, options);
}

namespace detail {

inline std::string fmt_value(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

struct ReportColumn {
  std::string name;
  std::function<double(const EvalRecord&)> get;
};

inline std::vector<ReportColumn> report_columns(const EvalReport& report) {
  std::vector<ReportColumn> cols = {
      {"nodes", [](const EvalRecord& r) { return static_cast<double>(r.nodes); }},
      {"edges", [](const EvalRecord& r) { return static_cast<double>(r.edges); }},
      {"top1", [](const EvalRecord& r) { return r.top1; }},
      {"top5", [](const EvalRecord& r) { return r.top5; }},
      {"top10", [](const EvalRecord& r) { return r.top10; }},
      {"kendall_tau", [](const EvalRecord& r) { return r.kendall_tau; }},
      {"inference_seconds", [](const EvalRecord& r) { return r.inference_seconds; }},
      {"exact_bc_seconds", [](const EvalRecord& r) { return r.exact_bc_seconds.value_or(NAN); }},
  };
  const bool sampled = std::any_of(report.records.begin(), report.records.end(),
                                   [](const EvalRecord& r) { return r.sampled.has_value(); });
  if (sampled) {
    auto s = [](auto field) {
      return [field](const EvalRecord& r) { return r.sampled ? field(*r.sampled) : NAN; };
    };
    cols.push_back({"sampled_sources", s([](const SampledStats& x) { return static_cast<double>(x.sources); })});
    cols.push_back({"sampled_top1", s([](const SampledStats& x) { return x.top1; })});
    cols.push_back({"sampled_top5", s([](const SampledStats& x) { return x.top5; })});
    cols.push_back({"sampled_top10", s([](const SampledStats& x) { return x.top10; })});
    cols.push_back({"sampled_kendall_tau", s([](const SampledStats& x) { return x.kendall_tau; })});
    cols.push_back({"sampled_seconds", s([](const SampledStats& x) { return x.seconds; })});
  }
  return cols;
}

}  // namespace detail

/// One CSV row per graph followed by "mean" and "std" aggregate rows. Missing
/// values are left empty.
inline void write_report_csv(std::ostream& out, const EvalReport& report) {
  const auto cols = detail::report_columns(report);
  out << "graph";
  for (const auto& c : cols) out << ',' << c.name;
  out << '\n';
  auto cell = [](double x) { return std::isnan(x) ? std::string() : detail::fmt_value(x); };
  for (const auto& r : report.records) {
    out << r.graph_id;
    for (const auto& c : cols) out << ',' << cell(c.get(r));
    out << '\n';
  }
  std::vector<ColumnStats> stats;
  for (const auto& c : cols) stats.push_back(report.stats(c.get));
  out << "mean";
  for (const auto& s : stats) out << ',' << cell(s.mean);
  out << "\nstd";
  for (const auto& s : stats) out << ',' << cell(s.stddev);
  out << '\n';
}

inline void save_report_csv(const std::string& path, const EvalReport& report) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write report '" + path + "'");
  write_report_csv(out, report);
  if (!out) throw IoError("write failed for '" + path + "'");
}

/// Aligned summary: accuracies and tau scaled by 100 as "mean±std".
inline void write_report_table(std::ostream& out, const EvalReport& report) {
  auto pct = [&](auto get) {
    auto s = report.stats(get);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.1f±%.1f", 100 * s.mean, 100 * s.stddev);
    return std::string(buf);
  };
  auto sec = [&](auto get) {
    auto s = report.stats(get);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f±%.3f", s.mean, s.stddev);
    return std::string(buf);
  };
  char line[256];
  std::snprintf(line, sizeof line, "%-8s %-14s %-14s %-14s %-14s %-16s\n", "graphs", "top1%", "top5%", "top10%",
                "kendall", "time/s");
  out << line;
  std::snprintf(line, sizeof line, "%-8zu %-14s %-14s %-14s %-14s %-16s\n", report.records.size(),
                pct([](const EvalRecord& r) { return r.top1; }).c_str(),
                pct([](const EvalRecord& r) { return r.top5; }).c_str(),
                pct([](const EvalRecord& r) { return r.top10; }).c_str(),
                pct([](const EvalRecord& r) { return r.kendall_tau; }).c_str(),
                sec([](const EvalRecord& r) { return r.inference_seconds; }).c_str());
  out << line;
}

}  // namespace drbc
