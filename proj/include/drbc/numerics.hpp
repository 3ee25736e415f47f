#pragma once

#include <cmath>
#include <concepts>
#include <span>
#include <vector>

#include "drbc/errors.hpp"
#include "drbc/graph.hpp"
#include "drbc/matrix.hpp"

namespace drbc {

// ---------------------------------------------------------------------------
// Element-wise activations

/// Logistic function evaluated without exponentiating positive arguments.
template <std::floating_point S>
S sigmoid(S x) noexcept {
  using std::exp;
  if (x >= S(0)) return S(1) / (S(1) + exp(-x));
  const S e = exp(x);
  return e / (S(1) + e);
}

/// log(1 + e^x), stable for large |x|.
template <std::floating_point S>
S softplus(S x) noexcept {
  using std::abs, std::exp, std::log1p, std::max;
  return max(x, S(0)) + log1p(exp(-abs(x)));
}

template <class S>
MatrixT<S> relu(const MatrixT<S>& x) {
  return x.cwiseMax(S(0));
}

template <class S>
MatrixT<S> sigmoid(const MatrixT<S>& x) {
  return x.unaryExpr([](S v) { return sigmoid(v); });
}

template <class S>
MatrixT<S> tanh(const MatrixT<S>& x) {
  return x.array().tanh().matrix();
}

// ---------------------------------------------------------------------------
// Degree-normalized neighbor sum

/// Sparse operator out[v] = sum_{j in N(v)} h[j] / (sqrt(d_v+1) sqrt(d_j+1)).
///
/// Edge weights are computed once as 1/sqrt((d_v+1)(d_j+1)), which is exactly
/// symmetric, so the same operator serves as its own transpose in backprop.
class NeighborPropagator {
 public:
  explicit NeighborPropagator(const Graph& g) : graph_(&g), weights_(g.targets().size()) {
    auto offsets = g.offsets();
    auto targets = g.targets();
    for (NodeId v = 0; v < g.node_count(); ++v) {
      const double dv = static_cast<double>(g.degree(v)) + 1.0;
      for (std::size_t e = offsets[v]; e < offsets[v + 1]; ++e) {
        const double dj = static_cast<double>(g.degree(targets[e])) + 1.0;
        weights_[e] = 1.0 / std::sqrt(dv * dj);
      }
    }
  }

  template <class S>
  MatrixT<S> apply(const MatrixT<S>& h) const {
    const auto& g = *graph_;
    if (static_cast<std::size_t>(h.rows()) != g.node_count()) {
      throw ShapeError("propagation input has " + std::to_string(h.rows()) + " rows for " +
                       std::to_string(g.node_count()) + " nodes");
    }
    MatrixT<S> out = MatrixT<S>::Zero(h.rows(), h.cols());
    auto offsets = g.offsets();
    auto targets = g.targets();
    for (Eigen::Index v = 0; v < h.rows(); ++v) {
      auto row = out.row(v);
      for (std::size_t e = offsets[v]; e < offsets[v + 1]; ++e) {
        row.noalias() += static_cast<S>(weights_[e]) * h.row(targets[e]);
      }
    }
    return out;
  }

 private:
  const Graph* graph_;
  std::vector<double> weights_;
};

template <class S>
MatrixT<S> propagate_neighbors(const Graph& g, const MatrixT<S>& h) {
  return NeighborPropagator(g).apply(h);
}

// ---------------------------------------------------------------------------
// Row normalization

inline constexpr double kNormEps = 1e-12;

/// Divides every row by max(||row||_2, eps). Writes the divisors to `norms`
/// when given.
template <class S>
MatrixT<S> row_l2_normalize(const MatrixT<S>& h, double eps = kNormEps, VectorT<S>* norms = nullptr) {
  MatrixT<S> out(h.rows(), h.cols());
  if (norms) norms->resize(h.rows());
  for (Eigen::Index v = 0; v < h.rows(); ++v) {
    const S d = std::max(h.row(v).norm(), static_cast<S>(eps));
    out.row(v) = h.row(v) / d;
    if (norms) (*norms)(v) = d;
  }
  return out;
}

/// Backward pass of row_l2_normalize given the forward output and divisors.
inline Matrix row_l2_normalize_backward(const Matrix& grad_out, const Matrix& out, const Vector& norms, double eps = kNormEps) {
  Matrix grad_in(out.rows(), out.cols());
  for (Eigen::Index v = 0; v < out.rows(); ++v) {
    if (norms(v) > eps) {
      const double proj = out.row(v).dot(grad_out.row(v));
      grad_in.row(v) = (grad_out.row(v) - proj * out.row(v)) / norms(v);
    } else {
      grad_in.row(v) = grad_out.row(v) / eps;
    }
  }
  return grad_in;
}

// ---------------------------------------------------------------------------
// Adam

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First and second moment estimates for a fixed list of parameter tensors.
struct AdamState {
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
  std::uint64_t step = 0;
};

/// One bias-corrected Adam update applied in place to `params`.
inline void adam_step(std::span<Matrix* const> params, std::span<const Matrix* const> grads, AdamState& state,
                      const AdamConfig& cfg) {
  if (params.size() != grads.size()) throw ShapeError("parameter and gradient lists differ in length");
  if (state.step == 0 && state.first_moment.empty()) {
    for (const Matrix* p : params) {
      state.first_moment.push_back(Matrix::Zero(p->rows(), p->cols()));
      state.second_moment.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
  }
  if (state.first_moment.size() != params.size()) throw ShapeError("optimizer state does not match parameter list");
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params[k]->rows() != grads[k]->rows() || params[k]->cols() != grads[k]->cols() ||
        state.first_moment[k].rows() != params[k]->rows() || state.first_moment[k].cols() != params[k]->cols()) {
      throw ShapeError("shape mismatch in Adam tensor " + std::to_string(k));
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto m = state.first_moment[k].array();
    auto v = state.second_moment[k].array();
    auto g = grads[k]->array();
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.square();
    params[k]->array() -= cfg.learning_rate * (m / correction1) / ((v / correction2).sqrt() + cfg.eps);
  }
}

}  // namespace drbc
