#pragma once
// Independent reference implementations used only by tests. Each oracle
// recomputes the documented behavior from first principles, sharing no
// code with the implementation it checks.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "relens/core.hpp"
#include "relens/gbdt.hpp"
#include "relens/gnn.hpp"

namespace oracles {

// ── TF-IDF top-gamma filter ──────────────────────────────────────────────
// Scores every token position by TF(t, p) * ln(|P| / DF(t, P)), keeps the
// gamma best (earlier positions win ties), restores input order.
inline std::vector<std::string> tfidf_filter(
    const std::vector<std::string>& product,
    const std::vector<std::vector<std::string>>& corpus, std::size_t gamma) {
  if (product.size() <= gamma) return product;
  std::map<std::string, int> tf;
  for (const auto& tok : product) ++tf[tok];
  std::map<std::string, int> df;
  for (const auto& doc : corpus) {
    std::set<std::string> uniq(doc.begin(), doc.end());
    for (const auto& tok : uniq) ++df[tok];
  }
  std::vector<double> scores(product.size());
  for (std::size_t i = 0; i < product.size(); ++i) {
    const auto it = df.find(product[i]);
    const double d = it == df.end() ? 1.0 : static_cast<double>(it->second);
    scores[i] = static_cast<double>(tf[product[i]]) *
                std::log(static_cast<double>(corpus.size()) / d);
  }
  std::vector<std::size_t> idx(product.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  idx.resize(gamma);
  std::sort(idx.begin(), idx.end());
  std::vector<std::string> out;
  for (const std::size_t i : idx) out.push_back(product[i]);
  return out;
}

// ── BFS reachability ─────────────────────────────────────────────────────
// Nodes within k hops of either anchor, by naive repeated edge relaxation
// over an undirected edge list of (query node, product node) string keys.
inline std::set<std::string> reachable_within_k(
    const std::vector<std::pair<std::string, std::string>>& edges,
    const std::string& q_key, const std::string& p_key, int k) {
  std::set<std::string> frontier{q_key, p_key};
  std::set<std::string> seen = frontier;
  for (int hop = 0; hop < k; ++hop) {
    std::set<std::string> next;
    for (const auto& [u, v] : edges) {
      if (frontier.count(u) && !seen.count(v)) next.insert(v);
      if (frontier.count(v) && !seen.count(u)) next.insert(u);
    }
    if (next.empty()) break;
    seen.insert(next.begin(), next.end());
    frontier = std::move(next);
  }
  return seen;
}

// ── exhaustive split search ──────────────────────────────────────────────
// Best (feature, threshold) over the full candidate set, re-deriving the
// documented arithmetic: thresholds are guarded midpoints of consecutive
// distinct values in (value, row-index) order, left aggregates are prefix
// sums in that order, right aggregates are node totals minus left, missing
// rows join the larger-cover side, and ties keep the earliest candidate.
struct OracleSplit {
  bool found = false;
  int feature = -1;
  double threshold = 0.0;
  bool default_left = true;
  double gain = 1e-12;
};

inline OracleSplit exhaustive_split(const std::vector<relens::FeatureRow>& data,
                                    const std::vector<int>& node_rows,
                                    const std::vector<double>& grad,
                                    const std::vector<double>& hess,
                                    const std::vector<double>& weight, double lambda) {
  OracleSplit best;
  if (node_rows.empty()) return best;
  const int n_features = static_cast<int>(data[static_cast<std::size_t>(node_rows[0])].size());

  double g_total = 0.0, h_total = 0.0;
  for (const int i : node_rows) {
    g_total += grad[static_cast<std::size_t>(i)];
    h_total += hess[static_cast<std::size_t>(i)];
  }
  const double parent = g_total * g_total / (h_total + lambda);

  for (int f = 0; f < n_features; ++f) {
    std::vector<int> present, missing;
    for (const int i : node_rows) {
      if (std::isnan(data[static_cast<std::size_t>(i)][static_cast<std::size_t>(f)])) {
        missing.push_back(i);
      } else {
        present.push_back(i);
      }
    }
    if (present.size() < 2) continue;
    std::stable_sort(present.begin(), present.end(), [&](int a, int b) {
      return data[static_cast<std::size_t>(a)][static_cast<std::size_t>(f)] <
             data[static_cast<std::size_t>(b)][static_cast<std::size_t>(f)];
    });
    double g_miss = 0.0, h_miss = 0.0;
    for (const int i : missing) {
      g_miss += grad[static_cast<std::size_t>(i)];
      h_miss += hess[static_cast<std::size_t>(i)];
    }
    double cover_all = 0.0;
    for (const int i : present) cover_all += weight[static_cast<std::size_t>(i)];

    double g_left = 0.0, h_left = 0.0, cover_left = 0.0;
    for (std::size_t k = 0; k + 1 < present.size(); ++k) {
      const int i = present[k];
      g_left += grad[static_cast<std::size_t>(i)];
      h_left += hess[static_cast<std::size_t>(i)];
      cover_left += weight[static_cast<std::size_t>(i)];
      const double a = data[static_cast<std::size_t>(i)][static_cast<std::size_t>(f)];
      const double b = data[static_cast<std::size_t>(present[k + 1])][static_cast<std::size_t>(f)];
      if (a == b) continue;
      double thr = (a + b) / 2.0;
      if (!(thr >= a && thr < b)) thr = a;
      const bool miss_left = cover_left >= cover_all - cover_left;
      const double gl = g_left + (miss_left ? g_miss : 0.0);
      const double hl = h_left + (miss_left ? h_miss : 0.0);
      const double gr = g_total - gl;
      const double hr = h_total - hl;
      const double gain = gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent;
      if (gain > best.gain) {
        best.found = true;
        best.feature = f;
        best.threshold = thr;
        best.default_left = miss_left;
        best.gain = gain;
      }
    }
  }
  return best;
}

// ── finite-difference gradient check ─────────────────────────────────────
// Central differences over every GNN parameter. Relative error uses
// |a - b| / max(1, |a|, |b|) so near-zero gradients are judged absolutely.
inline double gnn_gradcheck_max_err(relens::GnnCandidate& model, const relens::Subgraph& sub,
                                    const relens::Matrix& h0, relens::EsciLabel label,
                                    double row_weight, double step) {
  relens::GnnGradients analytic;
  relens::gnn_loss_and_grad(model, sub, h0, label, row_weight, &analytic);

  const auto loss_at = [&]() {
    return relens::gnn_loss_and_grad(model, sub, h0, label, row_weight, nullptr);
  };
  double max_err = 0.0;
  const auto check_param = [&](double& param, double analytic_grad) {
    const double saved = param;
    param = saved + step;
    const double up = loss_at();
    param = saved - step;
    const double down = loss_at();
    param = saved;
    const double fd = (up - down) / (2.0 * step);
    const double err = std::abs(fd - analytic_grad) /
                       std::max({1.0, std::abs(fd), std::abs(analytic_grad)});
    max_err = std::max(max_err, err);
  };
  for (std::size_t k = 0; k < model.w.size(); ++k) {
    for (std::size_t i = 0; i < model.w[k].a.size(); ++i) {
      check_param(model.w[k].a[i], analytic.w[k].a[i]);
    }
  }
  for (std::size_t i = 0; i < model.head.a.size(); ++i) {
    check_param(model.head.a[i], analytic.head.a[i]);
  }
  return max_err;
}

// True when any ReLU pre-activation sits close enough to its kink to spoil
// a finite-difference probe.
inline bool gnn_near_relu_kink(const relens::GnnCandidate& model, const relens::Subgraph& sub,
                               const relens::Matrix& h0, double margin) {
  if (model.activation != relens::Activation::ReLU) return false;
  relens::GnnForwardCache cache;
  relens::gnn_forward(model, sub, h0, &cache);
  for (const auto& z : cache.z) {
    for (const double v : z.a) {
      if (std::abs(v) < margin) return true;
    }
  }
  return false;
}

}  // namespace oracles
