#pragma once
// Message-passing candidate over extracted subgraphs. One architecture,
// parameterized by the spectral factor zeta:
//
//   h_{k+1} = act( D^(zeta-1) * (A + I) * D^zeta * h_k * W_k )
//   scores  = [ h_K[i_q] ‖ h_K[i_p] ] * head,   probs = softmax(scores)
//
// The normalization is applied exactly in this asymmetric form. Self-loops
// of weight 1 are added before computing the degree matrix, so isolated
// nodes get degree 1 and the propagation degenerates to the identity.
//
// Per-signal instances share node features (built from the whole typed
// subgraph) and differ only in which edges enter A. The "any" mode sums
// weights across signals first; "het-all" averages the five per-signal
// propagation operators.

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "relens/core.hpp"
#include "relens/graphstore.hpp"
#include "relens/linalg.hpp"
#include "relens/loss.hpp"
#include "relens/rng.hpp"

namespace relens {

enum class Activation { ReLU, Identity };

inline const char* to_string(Activation a) {
  return a == Activation::ReLU ? "relu" : "identity";
}
inline Activation activation_from_string(std::string_view s) {
  if (s == "relu") return Activation::ReLU;
  if (s == "identity") return Activation::Identity;
  throw DataError("unknown activation: '" + std::string(s) + "'");
}

// ── propagation operator ─────────────────────────────────────────────────

struct Propagation {
  struct Entry {
    int row, col;
    double val;
  };
  int n = 0;
  std::vector<Entry> entries;

  // out = N * h
  Matrix apply(const Matrix& h) const {
    Matrix out(n, h.cols);
    for (const auto& e : entries) {
      const double* src = h.row(e.col);
      double* dst = out.row(e.row);
      for (int j = 0; j < h.cols; ++j) dst[j] += e.val * src[j];
    }
    return out;
  }

  // out = N^T * h
  Matrix apply_transposed(const Matrix& h) const {
    Matrix out(n, h.cols);
    for (const auto& e : entries) {
      const double* src = h.row(e.row);
      double* dst = out.row(e.col);
      for (int j = 0; j < h.cols; ++j) dst[j] += e.val * src[j];
    }
    return out;
  }
};

namespace detail {

// N = D^(zeta-1) (A + I) D^zeta for one adjacency given as (u, v, w) with
// u != v; self-loops are added here.
inline Propagation normalize_adjacency(int n,
                                       const std::vector<std::tuple<int, int, double>>& edges,
                                       double zeta) {
  std::vector<double> degree(static_cast<std::size_t>(n), 1.0);  // self-loop weight
  for (const auto& [u, v, w] : edges) {
    degree[static_cast<std::size_t>(u)] += w;
    degree[static_cast<std::size_t>(v)] += w;
  }
  std::vector<double> dl(static_cast<std::size_t>(n)), dr(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    dl[static_cast<std::size_t>(i)] = std::pow(degree[static_cast<std::size_t>(i)], zeta - 1.0);
    dr[static_cast<std::size_t>(i)] = std::pow(degree[static_cast<std::size_t>(i)], zeta);
  }
  Propagation prop;
  prop.n = n;
  prop.entries.reserve(edges.size() * 2 + static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    prop.entries.push_back({i, i, dl[static_cast<std::size_t>(i)] * dr[static_cast<std::size_t>(i)]});
  }
  for (const auto& [u, v, w] : edges) {
    prop.entries.push_back({u, v, dl[static_cast<std::size_t>(u)] * w * dr[static_cast<std::size_t>(v)]});
    prop.entries.push_back({v, u, dl[static_cast<std::size_t>(v)] * w * dr[static_cast<std::size_t>(u)]});
  }
  return prop;
}

}  // namespace detail

inline Propagation build_propagation(const Subgraph& sub, SignalKind signal, double zeta) {
  const int n = sub.size();
  if (signal == SignalKind::HetAll) {
    // Average of the five per-signal operators.
    Propagation out;
    out.n = n;
    std::vector<double> dense(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0.0);
    for (const SignalKind s : kBaseSignals) {
      std::vector<std::tuple<int, int, double>> edges;
      for (const auto& e : sub.edges) {
        if (e.signal == s) edges.emplace_back(e.u, e.v, e.weight);
      }
      const Propagation p = detail::normalize_adjacency(n, edges, zeta);
      for (const auto& e : p.entries) {
        dense[static_cast<std::size_t>(e.row) * static_cast<std::size_t>(n) +
              static_cast<std::size_t>(e.col)] += e.val / kNumBaseSignals;
      }
    }
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const double v = dense[static_cast<std::size_t>(i) * static_cast<std::size_t>(n) +
                               static_cast<std::size_t>(j)];
        if (v != 0.0) out.entries.push_back({i, j, v});
      }
    }
    return out;
  }

  std::vector<std::tuple<int, int, double>> edges;
  if (signal == SignalKind::Any) {
    std::map<std::pair<int, int>, double> acc;
    for (const auto& e : sub.edges) acc[{e.u, e.v}] += e.weight;
    for (const auto& [key, w] : acc) edges.emplace_back(key.first, key.second, w);
  } else {
    for (const auto& e : sub.edges) {
      if (e.signal == signal) edges.emplace_back(e.u, e.v, e.weight);
    }
  }
  return detail::normalize_adjacency(n, edges, zeta);
}

// ── node features ────────────────────────────────────────────────────────
// Deterministic stand-in for learned embeddings: node-type bit, per-signal
// degree buckets, and a hashed node-id slot, all folded into `dim` columns.

inline Matrix build_node_features(const Subgraph& sub, int dim) {
  Matrix h(sub.size(), dim);
  std::array<double, kNumBaseSignals> degree;
  for (int i = 0; i < sub.size(); ++i) {
    degree.fill(0.0);
    for (const auto& e : sub.edges) {
      if (e.u == i || e.v == i) degree[static_cast<std::size_t>(e.signal)] += e.weight;
    }
    const auto& node = sub.nodes[static_cast<std::size_t>(i)];
    const auto slot = [&](std::uint64_t hash) -> double& {
      return h.at(i, static_cast<int>(hash % static_cast<std::uint64_t>(dim)));
    };
    slot(fnv1a64(node.is_query ? "nt:q" : "nt:p")) += 1.0;
    for (int s = 0; s < kNumBaseSignals; ++s) {
      const double d = degree[static_cast<std::size_t>(s)];
      if (d <= 0.0) continue;
      const int bucket = std::min(5, static_cast<int>(std::floor(std::log2(1.0 + d))));
      slot(fnv1a64(std::string("deg:") + to_string(static_cast<SignalKind>(s)) + ':' +
                   std::to_string(bucket))) += 1.0;
    }
    slot(fnv1a64(std::string("id:") + node.key())) += 1.0;
  }
  return h;
}

// ── model ────────────────────────────────────────────────────────────────

struct GnnCandidate {
  SignalKind signal = SignalKind::Any;
  int layers = 2;
  int dim = 16;
  double zeta = 0.0;
  Activation activation = Activation::ReLU;
  std::vector<Matrix> w;  // layers, each dim x dim
  Matrix head;            // 2*dim x 4

  std::size_t parameter_count() const {
    std::size_t n = head.a.size();
    for (const auto& m : w) n += m.a.size();
    return n;
  }
};

struct GnnForwardCache {
  std::vector<Matrix> h;  // post-activation, h[0] = input
  std::vector<Matrix> z;  // pre-activation per layer
  std::array<double, kNumLabels> scores{};
  LabelDistribution probs;
};

inline LabelDistribution gnn_forward(const GnnCandidate& model, const Subgraph& sub,
                                     const Matrix& h0, GnnForwardCache* cache = nullptr) {
  if (h0.rows != sub.size() || h0.cols != model.dim) {
    throw DataError("gnn_forward: feature matrix is " + std::to_string(h0.rows) + "x" +
                    std::to_string(h0.cols) + ", expected " + std::to_string(sub.size()) +
                    "x" + std::to_string(model.dim));
  }
  if (sub.anchor_query < 0 || sub.anchor_query >= sub.size() || sub.anchor_product < 0 ||
      sub.anchor_product >= sub.size()) {
    throw DataError("gnn_forward: anchor indices out of range");
  }
  const Propagation prop = build_propagation(sub, model.signal, model.zeta);

  Matrix h = h0;
  if (cache) {
    cache->h.clear();
    cache->z.clear();
    cache->h.push_back(h);
  }
  for (int k = 0; k < model.layers; ++k) {
    Matrix z = prop.apply(matmul(h, model.w[static_cast<std::size_t>(k)]));
    if (cache) cache->z.push_back(z);
    if (model.activation == Activation::ReLU) {
      for (auto& v : z.a) v = v > 0.0 ? v : 0.0;
    }
    h = std::move(z);
    if (cache) cache->h.push_back(h);
  }

  std::array<double, kNumLabels> scores{0.0, 0.0, 0.0, 0.0};
  const double* hq = h.row(sub.anchor_query);
  const double* hp = h.row(sub.anchor_product);
  for (int j = 0; j < model.dim; ++j) {
    const double* wq = model.head.row(j);
    const double* wp = model.head.row(model.dim + j);
    for (int c = 0; c < kNumLabels; ++c) {
      scores[static_cast<std::size_t>(c)] += hq[j] * wq[c] + hp[j] * wp[c];
    }
  }
  const LabelDistribution probs = softmax4(scores);
  if (cache) {
    cache->scores = scores;
    cache->probs = probs;
  }
  return probs;
}

// Convenience entry point used by the pipeline.
inline LabelDistribution gnn_predict(const GnnCandidate& model, const Subgraph& sub) {
  return gnn_forward(model, sub, build_node_features(sub, model.dim));
}

// ── gradients ────────────────────────────────────────────────────────────

struct GnnGradients {
  std::vector<Matrix> w;
  Matrix head;
};

// Loss and exact parameter gradients for one example.
inline double gnn_loss_and_grad(const GnnCandidate& model, const Subgraph& sub,
                                const Matrix& h0, EsciLabel label, double row_weight,
                                GnnGradients* grads) {
  GnnForwardCache cache;
  gnn_forward(model, sub, h0, &cache);
  const double loss = label_cross_entropy(cache.probs, label, row_weight);
  if (!grads) return loss;

  const Propagation prop = build_propagation(sub, model.signal, model.zeta);
  const auto g_scores = cross_entropy_score_gradient(cache.probs, label, row_weight);

  grads->w.assign(static_cast<std::size_t>(model.layers), Matrix());
  grads->head = Matrix(2 * model.dim, kNumLabels);

  const Matrix& h_final = cache.h.back();
  Matrix dh(h_final.rows, h_final.cols);
  const double* hq = h_final.row(sub.anchor_query);
  const double* hp = h_final.row(sub.anchor_product);
  for (int j = 0; j < model.dim; ++j) {
    for (int c = 0; c < kNumLabels; ++c) {
      grads->head.at(j, c) = hq[j] * g_scores[static_cast<std::size_t>(c)];
      grads->head.at(model.dim + j, c) = hp[j] * g_scores[static_cast<std::size_t>(c)];
      dh.at(sub.anchor_query, j) +=
          model.head.at(j, c) * g_scores[static_cast<std::size_t>(c)];
      dh.at(sub.anchor_product, j) +=
          model.head.at(model.dim + j, c) * g_scores[static_cast<std::size_t>(c)];
    }
  }

  for (int k = model.layers - 1; k >= 0; --k) {
    if (model.activation == Activation::ReLU) {
      const Matrix& z = cache.z[static_cast<std::size_t>(k)];
      for (std::size_t i = 0; i < dh.a.size(); ++i) {
        if (z.a[i] <= 0.0) dh.a[i] = 0.0;
      }
    }
    // z = N (h W)  =>  d(hW) = N^T dz;  dW = h^T d(hW);  dh = d(hW) W^T
    const Matrix dt = prop.apply_transposed(dh);
    grads->w[static_cast<std::size_t>(k)] = matmul_at(cache.h[static_cast<std::size_t>(k)], dt);
    dh = matmul_bt(dt, model.w[static_cast<std::size_t>(k)]);
  }
  return loss;
}

// ── training ─────────────────────────────────────────────────────────────

struct GnnTrainParams {
  SignalKind signal = SignalKind::Any;
  int layers = 2;
  int dim = 16;
  double zeta = 0.0;
  Activation activation = Activation::ReLU;
  double lr = 0.05;
  int epochs = 6;
  int batch_size = 32;
  std::array<double, kNumLabels> class_weights{1.0, 1.0, 1.0, 1.0};
  std::uint64_t seed = 1;
};

struct GnnExample {
  const Subgraph* sub = nullptr;
  EsciLabel label = EsciLabel::Exact;
};

// epoch_loss receives the running mean of per-row losses observed during
// each epoch (evaluated before the update that consumes the row).
inline GnnCandidate gnn_train(const std::vector<GnnExample>& examples,
                              const GnnTrainParams& params,
                              std::vector<double>* epoch_loss = nullptr) {
  if (examples.empty()) throw DataError("gnn_train: all rows lack graphs");
  if (params.dim < 1 || params.layers < 1) throw ConfigError("gnn_train: bad dimensions");
  if (!(params.zeta >= 0.0 && params.zeta <= 1.0)) {
    throw ConfigError("gnn_train: zeta must be in [0, 1]");
  }

  GnnCandidate model;
  model.signal = params.signal;
  model.layers = params.layers;
  model.dim = params.dim;
  model.zeta = params.zeta;
  model.activation = params.activation;

  Rng rng(params.seed);
  const double w_scale = 1.0 / std::sqrt(static_cast<double>(params.dim));
  for (int k = 0; k < params.layers; ++k) {
    model.w.push_back(Matrix::random(params.dim, params.dim, w_scale, rng));
  }
  model.head = Matrix::random(2 * params.dim, kNumLabels,
                              1.0 / std::sqrt(2.0 * params.dim), rng);

  // Features are parameter-independent; build them once.
  std::vector<Matrix> features;
  features.reserve(examples.size());
  for (const auto& ex : examples) {
    if (!ex.sub) throw DataError("gnn_train: null subgraph");
    features.push_back(build_node_features(*ex.sub, params.dim));
  }

  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const int batch = std::max(1, params.batch_size);

  GnnGradients row_grads;
  for (int epoch = 0; epoch < params.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(batch));
      GnnGradients acc;
      acc.w.assign(static_cast<std::size_t>(params.layers), Matrix(params.dim, params.dim));
      acc.head = Matrix(2 * params.dim, kNumLabels);
      for (std::size_t bi = start; bi < stop; ++bi) {
        const std::size_t i = order[bi];
        const double w =
            params.class_weights[static_cast<std::size_t>(label_code(examples[i].label))];
        epoch_total += gnn_loss_and_grad(model, *examples[i].sub, features[i],
                                         examples[i].label, w, &row_grads);
        for (int k = 0; k < params.layers; ++k) {
          axpy(acc.w[static_cast<std::size_t>(k)], 1.0, row_grads.w[static_cast<std::size_t>(k)]);
        }
        axpy(acc.head, 1.0, row_grads.head);
      }
      const double step = params.lr / static_cast<double>(stop - start);
      for (int k = 0; k < params.layers; ++k) {
        axpy(model.w[static_cast<std::size_t>(k)], -step, acc.w[static_cast<std::size_t>(k)]);
      }
      axpy(model.head, -step, acc.head);
    }
    if (epoch_loss) epoch_loss->push_back(epoch_total / static_cast<double>(examples.size()));
  }
  return model;
}

}  // namespace relens
