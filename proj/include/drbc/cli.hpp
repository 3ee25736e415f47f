#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "drbc/errors.hpp"
#include "drbc/evalkit.hpp"
#include "drbc/exact_bc.hpp"
#include "drbc/graph.hpp"
#include "drbc/model.hpp"
#include "drbc/training.hpp"

namespace drbc::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// Raised for bad invocations detected after flag parsing.
class UsageError : public Error {
 public:
  using Error::Error;
};

namespace fs = std::filesystem;

/// A directory expands to its regular files sorted by name; any other path is
/// read as a list file with one graph path per line (relative to the list).
inline std::vector<fs::path> resolve_graph_paths(const std::string& location) {
  const fs::path root(location);
  std::vector<fs::path> out;
  if (fs::is_directory(root)) {
    for (const auto& entry : fs::directory_iterator(root)) {
      if (entry.is_regular_file()) out.push_back(entry.path());
    }
    std::sort(out.begin(), out.end());
  } else {
    std::ifstream in(root);
    if (!in) throw UsageError("cannot open graph list '" + location + "'");
    std::string line;
    while (std::getline(in, line)) {
      auto s = detail::trim(line);
      if (s.empty() || s.front() == '#') continue;
      fs::path p{std::string(s)};
      out.push_back(p.is_absolute() ? p : root.parent_path() / p);
    }
  }
  if (out.empty()) throw UsageError("no graphs found in '" + location + "'");
  return out;
}

struct EvalInputs {
  std::vector<Graph> graphs;
  std::vector<BcScores> truth;  // empty entries are computed during the run
  std::vector<std::string> ids;
};

inline EvalInputs load_eval_inputs(const std::string& graphs_arg, const std::string& truth_dir) {
  EvalInputs in;
  for (const auto& path : resolve_graph_paths(graphs_arg)) {
    EdgeListFile file = load_edge_list(path.string());
    BcScores truth;
    if (!truth_dir.empty()) {
      const fs::path truth_path = fs::path(truth_dir) / path.filename();
      if (!fs::exists(truth_path)) throw UsageError("missing ground truth '" + truth_path.string() + "'");
      truth = align_scores(load_bc_scores(truth_path.string()), file.original_ids);
    }
    in.graphs.push_back(std::move(file.graph));
    in.truth.push_back(std::move(truth));
    in.ids.push_back(path.filename().string());
  }
  return in;
}

inline unsigned default_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

/// Entry point shared by the `drbc` executable and the tests. Returns the
/// process exit code: 0 success, 1 usage error, 2 runtime error.
inline int run_cli(std::vector<std::string> args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Rank graph nodes by betweenness centrality with a learned encoder-decoder model", "drbc"};
  app.require_subcommand(1);
  app.fallthrough();
  unsigned threads = default_threads();
  app.add_option("--threads", threads, "Worker threads for exact betweenness")->check(CLI::PositiveNumber);

  // generate
  auto* gen = app.add_subcommand("generate", "Write a random graph as an edge list");
  std::string gen_model;
  std::size_t gen_n = 0, gen_m = 4;
  double gen_p = 0.05;
  std::uint64_t gen_seed = 1;
  std::string gen_out;
  gen->add_option("--model", gen_model, "Generator: plc (powerlaw-cluster), er (Erdos-Renyi), ba (Barabasi-Albert)")
      ->required()
      ->check(CLI::IsMember({"plc", "er", "ba"}));
  gen->add_option("--n", gen_n, "Node count")->required();
  gen->add_option("--m", gen_m, "Edges per arriving node (plc, ba)")->capture_default_str();
  gen->add_option("--p", gen_p, "Triangle probability (plc) or edge probability (er)")->capture_default_str();
  gen->add_option("--seed", gen_seed, "RNG seed")->capture_default_str();
  gen->add_option("--out", gen_out, "Output edge-list path")->required();

  // exact
  auto* exact = app.add_subcommand("exact", "Compute exact betweenness and write a score file");
  std::string exact_graph, exact_out;
  bool exact_brute = false;
  exact->add_option("--graph", exact_graph, "Input edge list")->required()->check(CLI::ExistingFile);
  exact->add_option("--out", exact_out, "Output score file")->required();
  exact->add_flag("--brute", exact_brute, "Use path enumeration (graphs up to 64 nodes)");

  // train
  auto* tr = app.add_subcommand("train", "Train a model on random graphs");
  std::string tr_config, tr_model_out, tr_history;
  bool tr_quiet = false;
  tr->add_option("--config", tr_config, "key = value config file")->check(CLI::ExistingFile);
  tr->add_option("--out-model", tr_model_out, "Output model file")->required();
  tr->add_option("--history", tr_history, "Output history CSV");
  tr->add_flag("--quiet", tr_quiet, "Suppress progress lines");
  struct Override {
    const char* flag;
    const char* key;
    const char* help;
    std::string value;
  };
  std::vector<Override> overrides = {
      {"--learning-rate", "learning_rate", "Adam learning rate", {}},
      {"--embedding-dim", "embedding_dim", "Embedding dimension p", {}},
      {"--hidden-dim", "hidden_dim", "Decoder hidden width q", {}},
      {"--batch-graphs", "batch_graphs", "Graphs per episode", {}},
      {"--pair-factor", "pair_factor", "Pairs sampled per node", {}},
      {"--max-episodes", "max_episodes", "Episode limit", {}},
      {"--layers", "layers", "Encoder layers L", {}},
      {"--graph-model", "graph_model", "Training graph generator (plc, er, ba)", {}},
      {"--min-nodes", "min_nodes", "Smallest training graph", {}},
      {"--max-nodes", "max_nodes", "Largest training graph", {}},
      {"--gen-m", "gen_m", "Generator attachment count m", {}},
      {"--gen-p", "gen_p", "Generator probability p", {}},
      {"--validation-graphs", "validation_graphs", "Held-out validation graphs", {}},
      {"--validation-interval", "validation_interval", "Episodes between validations", {}},
      {"--patience", "patience", "Validations without improvement before stopping", {}},
      {"--pool-size", "pool_size", "Fixed training pool size (0 = fresh graphs each episode)", {}},
      {"--seed", "seed", "RNG seed", {}},
  };
  for (auto& o : overrides) tr->add_option(o.flag, o.value, o.help);

  // rank
  auto* rank = app.add_subcommand("rank", "Print the top-k nodes of a graph under a trained model");
  std::string rank_model, rank_graph, rank_embeddings;
  std::size_t rank_k = 10;
  rank->add_option("--model", rank_model, "Model file")->required()->check(CLI::ExistingFile);
  rank->add_option("--graph", rank_graph, "Input edge list")->required()->check(CLI::ExistingFile);
  rank->add_option("--top-k", rank_k, "Number of nodes to print")->capture_default_str();
  rank->add_option("--export-embeddings", rank_embeddings, "Write node embeddings as CSV");

  // eval / bench
  std::string ev_model, ev_graphs, ev_truth, ev_report;
  bool ev_table = false;
  double bench_fraction = 0.1;
  std::uint64_t bench_seed = 1;
  auto add_eval_flags = [&](CLI::App* sub) {
    sub->add_option("--model", ev_model, "Model file")->required()->check(CLI::ExistingFile);
    sub->add_option("--graphs", ev_graphs, "Directory of edge lists, or a file listing them")
        ->required()
        ->check(CLI::ExistingPath);
    sub->add_option("--truth", ev_truth, "Directory of score files named like the graphs")
        ->check(CLI::ExistingDirectory);
    sub->add_option("--report", ev_report, "Output report CSV")->required();
    sub->add_flag("--table", ev_table, "Also print an aligned summary table");
  };
  auto* ev = app.add_subcommand("eval", "Score a model against ground truth");
  add_eval_flags(ev);
  auto* bench = app.add_subcommand("bench", "eval plus exact-betweenness timing and a source-sampling baseline");
  add_eval_flags(bench);
  bench->add_option("--sample-fraction", bench_fraction, "Fraction of nodes used as sampled sources")
      ->capture_default_str()
      ->check(CLI::Range(1e-9, 1.0));
  bench->add_option("--seed", bench_seed, "Sampling seed")->capture_default_str();

  // CLI11 takes the arguments (without the program name) in reverse order.
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen) {
      Graph g;
      if (gen_model == "plc") g = gen_powerlaw_cluster(gen_n, gen_m, gen_p, gen_seed);
      else if (gen_model == "er") g = gen_erdos_renyi(gen_n, gen_p, gen_seed);
      else g = gen_barabasi_albert(gen_n, gen_m, gen_seed);
      save_edge_list(g, gen_out);
      err << "wrote " << g.node_count() << " nodes, " << g.edge_count() << " edges to " << gen_out << '\n';
    } else if (*exact) {
      EdgeListFile file = load_edge_list(exact_graph);
      if (file.self_loops_dropped) err << "dropped " << file.self_loops_dropped << " self-loop lines\n";
      BcScores bc = exact_brute ? brute_force_bc(file.graph) : brandes_bc(file.graph, threads);
      save_bc_scores(exact_out, bc, file.original_ids);
    } else if (*tr) {
      TrainConfig cfg;
      if (!tr_config.empty()) cfg = load_train_config(tr_config);
      for (const auto& o : overrides) {
        if (!o.value.empty()) apply_setting(cfg, o.key, o.value);
      }
      cfg.threads = threads;
      TrainResult result = train(cfg, tr_quiet ? nullptr : &err);
      ModelMeta meta{kFeatureDim, cfg.embedding_dim, cfg.hidden_dim, cfg.layers, 1};
      save_model(result.params, meta, tr_model_out);
      if (!tr_history.empty()) save_history_csv(tr_history, result.history);
      err << "best validation top-1% " << result.best_val_top1 << '\n';
    } else if (*rank) {
      Model model = load_model(rank_model);
      EdgeListFile file = load_edge_list(rank_graph);
      const std::size_t n = file.graph.node_count();
      if (rank_k < 1 || rank_k > n) throw UsageError("--top-k must lie in [1, " + std::to_string(n) + "]");
      EmbeddingMatrix z = encode(file.graph, model.params, model.meta.layers);
      RankScores y = decode(z, model.params);
      for (std::size_t r = 0; auto v : rank_top_k(y, rank_k)) {
        out << ++r << ' ' << file.original_ids[v] << ' ' << format_score(y[v]) << '\n';
      }
      if (!rank_embeddings.empty()) save_embeddings_csv(rank_embeddings, z, file.original_ids);
    } else if (*ev || *bench) {
      Model model = load_model(ev_model);
      EvalInputs inputs = load_eval_inputs(ev_graphs, ev_truth);
      BenchmarkOptions opts;
      opts.graph_ids = inputs.ids;
      opts.threads = threads;
      if (*bench) {
        opts.time_exact = true;
        opts.sample_fraction = bench_fraction;
        opts.seed = bench_seed;
      }
      EvalReport report = run_benchmark(model, inputs.graphs, inputs.truth, opts);
      save_report_csv(ev_report, report);
      if (ev_table) write_report_table(out, report);
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ParameterError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace drbc::cli
