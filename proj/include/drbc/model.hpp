#pragma once

#include <array>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "drbc/errors.hpp"
#include "drbc/graph.hpp"
#include "drbc/matrix.hpp"
#include "drbc/numerics.hpp"
#include "drbc/rng.hpp"

namespace drbc {

/// Learnable encoder and decoder weights. Biases are absent by construction.
///
/// Shapes: W0 is c x p, the six GRU matrices are p x p, W4 is p x q and W5 is
/// q x 1. Layer 1 computes ReLU(X W0); GRU matrices act on column vectors
/// (u = sigmoid(W1 h_N + U1 h)), i.e. on row blocks as H W1^T; the decoder
/// computes ReLU(Z W4) W5.
template <class S>
struct ParamSet {
  using M = MatrixT<S>;
  M W0, W1, U1, W2, U2, W3, U3, W4, W5;

  static constexpr std::size_t kTensorCount = 9;
  static constexpr std::array<std::string_view, kTensorCount> kNames = {"W0", "W1", "U1", "W2", "U2",
                                                                        "W3", "U3", "W4", "W5"};

  std::array<M*, kTensorCount> tensors() { return {&W0, &W1, &U1, &W2, &U2, &W3, &U3, &W4, &W5}; }
  std::array<const M*, kTensorCount> tensors() const { return {&W0, &W1, &U1, &W2, &U2, &W3, &U3, &W4, &W5}; }

  std::size_t feature_dim() const { return static_cast<std::size_t>(W0.rows()); }
  std::size_t embedding_dim() const { return static_cast<std::size_t>(W0.cols()); }
  std::size_t hidden_dim() const { return static_cast<std::size_t>(W4.cols()); }

  /// Same shapes, all entries zero.
  ParamSet zeros_like() const {
    ParamSet z;
    auto dst = z.tensors();
    auto src = tensors();
    for (std::size_t k = 0; k < kTensorCount; ++k) *dst[k] = M::Zero(src[k]->rows(), src[k]->cols());
    return z;
  }

  template <class T>
  ParamSet<T> cast() const {
    ParamSet<T> out;
    auto dst = out.tensors();
    auto src = tensors();
    for (std::size_t k = 0; k < kTensorCount; ++k) *dst[k] = src[k]->template cast<T>();
    return out;
  }

  void validate_shapes() const {
    const auto p = W0.cols();
    auto square = [p](const M& m) { return m.rows() == p && m.cols() == p; };
    if (!(square(W1) && square(U1) && square(W2) && square(U2) && square(W3) && square(U3))) {
      throw ShapeError("GRU weights must be p x p with p = " + std::to_string(p));
    }
    if (W4.rows() != p || W5.rows() != W4.cols() || W5.cols() != 1) {
      throw ShapeError("decoder weights inconsistent with embedding dimension");
    }
  }

  friend bool operator==(const ParamSet& a, const ParamSet& b) {
    auto ta = a.tensors();
    auto tb = b.tensors();
    for (std::size_t k = 0; k < kTensorCount; ++k) {
      if (ta[k]->rows() != tb[k]->rows() || ta[k]->cols() != tb[k]->cols() || *ta[k] != *tb[k]) return false;
    }
    return true;
  }
};

using DrbcParams = ParamSet<double>;

inline constexpr std::size_t kDefaultEmbeddingDim = 128;
inline constexpr std::size_t kDefaultHiddenDim = 64;
inline constexpr std::size_t kDefaultLayers = 5;

/// Glorot-uniform initialization, deterministic per seed.
inline DrbcParams init_params(std::size_t c, std::size_t p, std::size_t q, std::uint64_t seed) {
  if (c < 1 || p < 1 || q < 1) throw ParameterError("model dimensions must be positive");
  Rng rng(seed);
  auto glorot = [&rng](std::size_t rows, std::size_t cols) {
    const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-bound, bound);
    return m;
  };
  DrbcParams out;
  out.W0 = glorot(c, p);
  out.W1 = glorot(p, p);
  out.U1 = glorot(p, p);
  out.W2 = glorot(p, p);
  out.U2 = glorot(p, p);
  out.W3 = glorot(p, p);
  out.U3 = glorot(p, p);
  out.W4 = glorot(p, q);
  out.W5 = glorot(q, 1);
  return out;
}

// ---------------------------------------------------------------------------
// Encoder

template <class S>
struct GruOutput {
  MatrixT<S> h;
  MatrixT<S> update;
  MatrixT<S> reset;
  MatrixT<S> candidate;
};

/// GRU combine of each node's previous state with its aggregated
/// neighborhood, one row per node.
template <class S>
GruOutput<S> gru_cell(const MatrixT<S>& h_prev, const MatrixT<S>& h_nbr, const ParamSet<S>& params) {
  using M = MatrixT<S>;
  const auto p = params.W1.rows();
  if (h_prev.cols() != p || h_nbr.cols() != p || h_prev.rows() != h_nbr.rows()) {
    throw ShapeError("GRU inputs must both be |V| x p with p = " + std::to_string(p));
  }
  GruOutput<S> out;
  out.update = sigmoid<S>(M(h_nbr * params.W1.transpose() + h_prev * params.U1.transpose()));
  out.reset = sigmoid<S>(M(h_nbr * params.W2.transpose() + h_prev * params.U2.transpose()));
  out.candidate =
      tanh<S>(M(h_nbr * params.W3.transpose() + out.reset.cwiseProduct(h_prev) * params.U3.transpose()));
  out.h = out.update.cwiseProduct(out.candidate) + (M::Ones(h_prev.rows(), p) - out.update).cwiseProduct(h_prev);
  return out;
}

/// Per-node embeddings z_v, one row each, coordinates in [-1, 1].
using EmbeddingMatrix = Matrix;
/// Per-node ranking scores y_v; only the order is meaningful.
using RankScores = std::vector<double>;

/// Activations retained by a forward pass for exact backpropagation.
template <class S>
struct BasicForwardCache {
  struct Layer {
    MatrixT<S> h;      // post-normalization output
    VectorT<S> norms;  // normalization divisors
    MatrixT<S> pre;    // layer 1 only: pre-ReLU X W0
    MatrixT<S> nbr;    // aggregated neighborhood input
    MatrixT<S> update, reset, candidate;
  };
  std::vector<Layer> layers;
  MatrixT<S> features;
  MatrixT<S> z;
  /// Per (node, coordinate): index of the layer the max-pool selected.
  std::vector<std::uint8_t> argmax;
  MatrixT<S> decoder_pre;  // Z W4
  std::size_t node_count = 0;
};

using ForwardCache = BasicForwardCache<double>;

namespace detail {

template <class S>
void check_encoder_inputs(const ParamSet<S>& params, std::size_t layers) {
  if (layers < 1) throw ParameterError("encoder needs at least one layer");
  if (layers > 255) throw ParameterError("encoder supports at most 255 layers");
  if (params.feature_dim() != kFeatureDim) {
    throw ShapeError("W0 expects " + std::to_string(params.feature_dim()) + " input features, graph provides " +
                     std::to_string(kFeatureDim));
  }
  params.validate_shapes();
}

}  // namespace detail

/// Runs the encoder. When `cache` is non-null every intermediate needed by
/// backpropagation is stored there; otherwise only the running max is kept.
template <class S>
MatrixT<S> encode(const Graph& g, const ParamSet<S>& params, std::size_t layers,
                  BasicForwardCache<S>* cache = nullptr) {
  using M = MatrixT<S>;
  detail::check_encoder_inputs(params, layers);
  const auto n = static_cast<Eigen::Index>(g.node_count());
  const auto p = static_cast<Eigen::Index>(params.embedding_dim());
  const NeighborPropagator propagate(g);

  M features = initial_features(g).template cast<S>();
  M pre = features * params.W0;
  VectorT<S> norms;
  M h = row_l2_normalize<S>(relu<S>(pre), kNormEps, &norms);
  M z = h;
  std::vector<std::uint8_t> argmax;
  if (cache) {
    cache->layers.clear();
    cache->layers.reserve(layers);
    cache->node_count = g.node_count();
    argmax.assign(static_cast<std::size_t>(n * p), 0);
    typename BasicForwardCache<S>::Layer first;
    first.h = h;
    first.norms = norms;
    first.pre = std::move(pre);
    cache->layers.push_back(std::move(first));
    cache->features = std::move(features);
  }

  for (std::size_t l = 1; l < layers; ++l) {
    M nbr = propagate.apply(h);
    GruOutput<S> gru = gru_cell<S>(h, nbr, params);
    h = row_l2_normalize<S>(gru.h, kNormEps, &norms);
    for (Eigen::Index v = 0; v < n; ++v) {
      for (Eigen::Index k = 0; k < p; ++k) {
        // Strict comparison: ties keep the lower layer.
        if (h(v, k) > z(v, k)) {
          z(v, k) = h(v, k);
          if (cache) argmax[static_cast<std::size_t>(v * p + k)] = static_cast<std::uint8_t>(l);
        }
      }
    }
    if (cache) {
      typename BasicForwardCache<S>::Layer layer;
      layer.h = h;
      layer.norms = norms;
      layer.nbr = std::move(nbr);
      layer.update = std::move(gru.update);
      layer.reset = std::move(gru.reset);
      layer.candidate = std::move(gru.candidate);
      cache->layers.push_back(std::move(layer));
    }
  }
  if (cache) {
    cache->z = z;
    cache->argmax = std::move(argmax);
  }
  return z;
}

/// Two-layer MLP y_v = W5 . ReLU(W4^T z_v).
template <class S>
std::vector<S> decode(const MatrixT<S>& z, const ParamSet<S>& params, MatrixT<S>* pre_activation = nullptr) {
  if (z.cols() != params.W4.rows()) {
    throw ShapeError("embedding has " + std::to_string(z.cols()) + " columns, decoder expects " +
                     std::to_string(params.W4.rows()));
  }
  if (params.W5.rows() != params.W4.cols() || params.W5.cols() != 1) throw ShapeError("W5 must be q x 1");
  MatrixT<S> pre = z * params.W4;
  VectorT<S> y = relu<S>(pre) * params.W5.col(0);
  if (pre_activation) *pre_activation = std::move(pre);
  return std::vector<S>(y.data(), y.data() + y.size());
}

struct ForwardResult {
  RankScores scores;
  ForwardCache cache;
};

/// Encoder followed by decoder, keeping the full cache for backpropagation.
inline ForwardResult forward(const Graph& g, const DrbcParams& params, std::size_t layers) {
  ForwardResult out;
  EmbeddingMatrix z = encode(g, params, layers, &out.cache);
  out.scores = decode(z, params, &out.cache.decoder_pre);
  return out;
}

/// Inference-only scores; same arithmetic as forward() without the cache.
template <class S>
std::vector<S> predict(const Graph& g, const ParamSet<S>& params, std::size_t layers) {
  return decode<S>(encode<S>(g, params, layers), params);
}

// ---------------------------------------------------------------------------
// Model files
//
//   drbc-model v1 <c> <p> <q> <L>
//   <name> <rows> <cols>
//   <rows lines of cols values, 17 significant digits>
//   ... one block per tensor in DrbcParams::kNames order.

struct ModelMeta {
  std::size_t c = kFeatureDim;
  std::size_t p = kDefaultEmbeddingDim;
  std::size_t q = kDefaultHiddenDim;
  std::size_t layers = kDefaultLayers;
  int version = 1;
};

struct Model {
  DrbcParams params;
  ModelMeta meta;
};

inline void write_model(std::ostream& out, const DrbcParams& params, const ModelMeta& meta) {
  params.validate_shapes();
  if (params.feature_dim() != meta.c || params.embedding_dim() != meta.p || params.hidden_dim() != meta.q) {
    throw ShapeError("model metadata disagrees with parameter shapes");
  }
  out << "drbc-model v" << meta.version << ' ' << meta.c << ' ' << meta.p << ' ' << meta.q << ' ' << meta.layers
      << '\n';
  char buf[40];
  auto tensors = params.tensors();
  for (std::size_t k = 0; k < DrbcParams::kTensorCount; ++k) {
    const Matrix& m = *tensors[k];
    out << DrbcParams::kNames[k] << ' ' << m.rows() << ' ' << m.cols() << '\n';
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
        if (j) out << ' ';
        out << buf;
      }
      out << '\n';
    }
  }
}

inline void save_model(const DrbcParams& params, const ModelMeta& meta, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write model file '" + path + "'");
  write_model(out, params, meta);
  out.flush();
  if (!out) throw IoError("write failed for '" + path + "'");
}

inline Model read_model(std::istream& in) {
  Model model;
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty model file");
  {
    std::istringstream header(line);
    std::string magic, version;
    header >> magic >> version;
    if (magic != "drbc-model") throw FormatError("not a drbc model file (header '" + line + "')");
    if (version != "v1") throw FormatError("unsupported model version '" + version + "'");
    if (!(header >> model.meta.c >> model.meta.p >> model.meta.q >> model.meta.layers)) {
      throw FormatError("malformed model header '" + line + "'");
    }
  }
  const auto& meta = model.meta;
  const std::array<std::pair<std::size_t, std::size_t>, DrbcParams::kTensorCount> shapes = {{
      {meta.c, meta.p}, {meta.p, meta.p}, {meta.p, meta.p}, {meta.p, meta.p}, {meta.p, meta.p},
      {meta.p, meta.p}, {meta.p, meta.p}, {meta.p, meta.q}, {meta.q, 1},
  }};
  auto tensors = model.params.tensors();
  for (std::size_t k = 0; k < DrbcParams::kTensorCount; ++k) {
    const std::string name(DrbcParams::kNames[k]);
    if (!std::getline(in, line)) throw FormatError("missing block " + name);
    std::istringstream block(line);
    std::string found;
    std::size_t rows = 0, cols = 0;
    block >> found;
    if (found != name) throw FormatError("expected block " + name + ", found '" + found + "'");
    if (!(block >> rows >> cols)) throw FormatError("malformed header of block " + name);
    if (rows != shapes[k].first || cols != shapes[k].second) {
      throw FormatError("block " + name + " is " + std::to_string(rows) + "x" + std::to_string(cols) +
                        ", header implies " + std::to_string(shapes[k].first) + "x" +
                        std::to_string(shapes[k].second));
    }
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < rows; ++i) {
      if (!std::getline(in, line)) throw FormatError("block " + name + " truncated at row " + std::to_string(i));
      const char* cursor = line.c_str();
      for (std::size_t j = 0; j < cols; ++j) {
        char* end = nullptr;
        const double x = std::strtod(cursor, &end);
        if (end == cursor) {
          throw FormatError("block " + name + " row " + std::to_string(i) + " has fewer than " +
                            std::to_string(cols) + " values");
        }
        m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = x;
        cursor = end;
      }
      while (*cursor == ' ' || *cursor == '\t' || *cursor == '\r') ++cursor;
      if (*cursor != '\0') throw FormatError("block " + name + " row " + std::to_string(i) + " has extra values");
    }
    if (!m.allFinite()) throw FormatError("block " + name + " contains non-finite values");
    *tensors[k] = std::move(m);
  }
  return model;
}

inline Model load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open model file '" + path + "'");
  return read_model(in);
}

/// CSV with header "node,z0,...,z{p-1}".
inline void save_embeddings_csv(const std::string& path, const EmbeddingMatrix& z,
                                const std::vector<std::uint64_t>& ids = {}) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write embedding file '" + path + "'");
  out << "node";
  for (Eigen::Index k = 0; k < z.cols(); ++k) out << ",z" << k;
  out << '\n';
  char buf[40];
  for (Eigen::Index v = 0; v < z.rows(); ++v) {
    out << (ids.empty() ? static_cast<std::uint64_t>(v) : ids[static_cast<std::size_t>(v)]);
    for (Eigen::Index k = 0; k < z.cols(); ++k) {
      std::snprintf(buf, sizeof buf, "%.17g", z(v, k));
      out << ',' << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace drbc
