// Shared fixtures and independent oracles for the unit and acceptance tests.
// Oracles are straight-line loops over plain arrays; they never call the
// library's tensor ops.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "samgpt/adapt.hpp"
#include "samgpt/checkpoint.hpp"
#include "samgpt/graphstore.hpp"
#include "samgpt/pretrain.hpp"
#include "samgpt/rng.hpp"

namespace samgpt::testing {

inline Matrix random_matrix(Rng& rng, Index rows, Index cols, double lo = -1.0, double hi = 1.0) {
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = rng.uniform(lo, hi);
  return m;
}

/// Erdos-Renyi graph with uniform [-1, 1] features and random labels.
inline GraphBundle random_graph(Rng& rng, std::size_t n, double p, Index dim, std::size_t classes = 2,
                                const std::string& name = "rand") {
  std::vector<Edge> edges;
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = u + 1; v < n; ++v)
      if (rng.uniform() < p) edges.emplace_back(static_cast<NodeId>(u), static_cast<NodeId>(v));
  std::vector<int> labels(n);
  for (auto& y : labels) y = static_cast<int>(rng.below(classes));
  return GraphBundle::from_edges(name, n, edges, random_matrix(rng, static_cast<Index>(n), dim), labels, classes);
}

inline std::vector<std::vector<double>> dense_adjacency(const GraphBundle& g) {
  const std::size_t n = g.num_nodes();
  std::vector<std::vector<double>> a(n, std::vector<double>(n, 0.0));
  for (const auto& [u, v] : g.undirected_edges()) {
    a[static_cast<std::size_t>(u)][static_cast<std::size_t>(v)] = 1.0;
    a[static_cast<std::size_t>(v)][static_cast<std::size_t>(u)] = 1.0;
  }
  return a;
}

/// Encoder oracle on a dense adjacency. Per layer:
///   z[v] = Σ_{u≠v} a[v][u]/sqrt((d_v+1)(d_u+1)) · h[u]⊙m + h[v]/(d_v+1),  h' = z·W,
/// relu on every layer but the last. `mods` empty means no modulation.
inline Matrix dense_encode(const std::vector<std::vector<double>>& a, const Matrix& x, const std::vector<Matrix>& w,
                           const std::vector<Matrix>& mods = {}) {
  const std::size_t n = a.size();
  std::vector<double> deg(n, 0.0);
  for (std::size_t v = 0; v < n; ++v)
    for (std::size_t u = 0; u < n; ++u) deg[v] += a[v][u];
  Matrix h = x;
  for (std::size_t l = 0; l < w.size(); ++l) {
    Matrix z = Matrix::Zero(h.rows(), h.cols());
    for (std::size_t v = 0; v < n; ++v) {
      for (std::size_t u = 0; u < n; ++u) {
        if (u == v || a[v][u] == 0.0) continue;
        const double c = 1.0 / std::sqrt((deg[v] + 1.0) * (deg[u] + 1.0));
        for (Index k = 0; k < h.cols(); ++k) {
          const double m = mods.empty() ? 1.0 : mods[l](0, k);
          z(static_cast<Index>(v), k) += c * h(static_cast<Index>(u), k) * m;
        }
      }
      for (Index k = 0; k < h.cols(); ++k) z(static_cast<Index>(v), k) += h(static_cast<Index>(v), k) / (deg[v] + 1.0);
    }
    Matrix next = Matrix::Zero(h.rows(), w[l].cols());
    for (Index r = 0; r < z.rows(); ++r)
      for (Index c = 0; c < w[l].cols(); ++c) {
        double s = 0.0;
        for (Index k = 0; k < z.cols(); ++k) s += z(r, k) * w[l](k, c);
        next(r, c) = (l + 1 < w.size()) ? std::max(s, 0.0) : s;
      }
    h = next;
  }
  return h;
}

inline double cosine(const Matrix& a, Index i, const Matrix& b, Index j) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (Index k = 0; k < a.cols(); ++k) {
    dot += a(i, k) * b(j, k);
    na += a(i, k) * a(i, k);
    nb += b(j, k) * b(j, k);
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

/// Contrastive loss, read directly off the formula.
inline double contrastive_oracle(const Matrix& h, const ContrastiveBatch& batch, double tau) {
  double loss = 0.0;
  for (std::size_t k = 0; k < batch.anchors.size(); ++k) {
    const Index o = batch.anchors[k];
    double num = 0.0, den = 0.0;
    for (Index a : batch.positives[k]) num += std::exp(cosine(h, a, h, o) / tau);
    for (Index b : batch.negatives[k]) den += std::exp(cosine(h, b, h, o) / tau);
    loss -= std::log(num / den);
  }
  return loss;
}

/// Downstream prototype loss, read directly off the formula.
inline double downstream_oracle(const Matrix& h, const std::vector<int>& labels, const Matrix& protos, double tau) {
  double loss = 0.0;
  for (Index i = 0; i < h.rows(); ++i) {
    double den = 0.0;
    for (Index c = 0; c < protos.rows(); ++c) den += std::exp(cosine(h, i, protos, c) / tau);
    const double num = std::exp(cosine(h, i, protos, labels[static_cast<std::size_t>(i)]) / tau);
    loss -= std::log(num / den);
  }
  return loss;
}

/// Cyclic Jacobi eigensolver for a symmetric matrix. Returns eigenvalues in
/// descending order with matching eigenvector columns.
inline std::pair<std::vector<double>, std::vector<std::vector<double>>> jacobi_eigen(std::vector<std::vector<double>> a) {
  const std::size_t n = a.size();
  std::vector<std::vector<double>> v(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) v[i][i] = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a[p][q]) < 1e-300) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k][p], vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&a](std::size_t x, std::size_t y) { return a[x][x] > a[y][y]; });
  std::vector<double> values;
  std::vector<std::vector<double>> vectors;
  for (std::size_t i : order) {
    values.push_back(a[i][i]);
    std::vector<double> col(n);
    for (std::size_t k = 0; k < n; ++k) col[k] = v[k][i];
    vectors.push_back(col);
  }
  return {values, vectors};
}

/// |a - n| / max(|a|, |n|, floor). The floor keeps entries whose true
/// derivative is ~0 from turning rounding noise into a huge ratio.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Central differences of f over every entry of `param`, compared against
/// `analytic`. Returns the max relative error.
inline double fd_max_rel_error(Matrix& param, const Matrix& analytic, const std::function<double()>& f,
                               double h = 1e-6) {
  double worst = 0.0;
  for (Index r = 0; r < param.rows(); ++r)
    for (Index c = 0; c < param.cols(); ++c) {
      const double keep = param(r, c);
      param(r, c) = keep + h;
      const double up = f();
      param(r, c) = keep - h;
      const double down = f();
      param(r, c) = keep;
      worst = std::max(worst, relative_error(analytic(r, c), (up - down) / (2.0 * h)));
    }
  return worst;
}

/// Checkpoint with random weights and tokens (not all-ones) over `roster`.
inline Checkpoint random_checkpoint(Rng& rng, const std::vector<std::string>& roster, EncoderConfig cfg,
                                    double alpha = 1.0, double tau = 0.5) {
  PretrainConfig pc;
  pc.encoder = cfg;
  pc.alpha = alpha;
  pc.tau = tau;
  pc.seed = rng.next_u64();
  Checkpoint c = init_model(roster, pc);
  for (auto& per_layer : c.structure.tokens)
    for (auto& t : per_layer) t.value() = random_matrix(rng, 1, t.cols(), 0.5, 1.5);
  for (auto& f : c.features.tokens) f.value() = random_matrix(rng, 1, f.cols(), 0.5, 1.5);
  return c;
}

}  // namespace samgpt::testing
