#pragma once
// Multi-class gradient-boosted decision trees over candidate probability
// columns plus locale one-hots. Stagewise additive scores with shrinkage
// and one regression tree per class per iteration; prediction is the
// softmax of the summed scores. The literal ensemble-mean form
// (score = base + (1/T) * sum of tree outputs) is available as an
// alternative score mode; with zero base scores the two differ only by a
// positive rescaling of the pre-softmax scores.
//
// Split search is exact (no histograms). The split arithmetic is pinned so
// an independent search can reproduce it bit for bit:
//   - candidate thresholds are midpoints of consecutive distinct values in
//     (value, row-index) order; a midpoint that rounds up to the right
//     value falls back to the left value;
//   - left aggregates are prefix sums in that order; right aggregates are
//     node totals minus left; node totals accumulate in the node's row
//     order (ascending original index);
//   - rows with a missing value (NaN) join the side with the larger
//     weight cover (ties go left), which becomes the node's default
//     direction;
//   - gain = GL^2/(HL + lambda) + GR^2/(HR + lambda) - GP^2/(HP + lambda),
//     accepted only when strictly greater than the incumbent, scanning
//     features then thresholds in ascending order;
//   - leaf value = -G/(H + lambda), clamped to +/-1e4.
//
// Gradients/hessians come from the class-weighted one-vs-rest
// cross-entropy in loss.hpp, with curvature 2 * w * p * (1 - p).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "relens/core.hpp"
#include "relens/loss.hpp"
#include "relens/rng.hpp"

namespace relens {

using FeatureRow = std::vector<double>;

inline constexpr double kMissingValue = std::numeric_limits<double>::quiet_NaN();
inline constexpr double kMaxLeafValue = 1e4;

inline bool is_missing(double v) { return std::isnan(v); }

// ── feature schema ───────────────────────────────────────────────────────

struct FeatureSchema {
  struct Column {
    std::string group;  // candidate name, or "locale"
    std::string name;
  };
  std::vector<Column> columns;
  std::vector<std::string> candidate_order;
  std::vector<std::string> locales;

  int size() const { return static_cast<int>(columns.size()); }

  // Four probability columns per candidate, in registry order, then the
  // locale one-hot block.
  static FeatureSchema make(const std::vector<std::string>& candidates,
                            const std::vector<std::string>& locales) {
    FeatureSchema schema;
    schema.candidate_order = candidates;
    schema.locales = locales;
    for (const auto& cand : candidates) {
      for (int c = 0; c < kNumLabels; ++c) {
        schema.columns.push_back({cand, cand + ":p_" + to_string(static_cast<EsciLabel>(c))});
      }
    }
    for (const auto& loc : locales) {
      schema.columns.push_back({"locale", "locale:" + loc});
    }
    return schema;
  }

  std::vector<int> group_columns(const std::string& group) const {
    std::vector<int> out;
    for (int i = 0; i < size(); ++i) {
      if (columns[static_cast<std::size_t>(i)].group == group) out.push_back(i);
    }
    return out;
  }

  std::vector<std::string> group_names() const {
    std::vector<std::string> out;
    for (const auto& col : columns) {
      if (std::find(out.begin(), out.end(), col.group) == out.end()) out.push_back(col.group);
    }
    return out;
  }
};

// Candidate predictions per pair keyed by candidate name; std::nullopt is
// the explicit missing marker (all four columns become NaN).
using CandidatePredictions = std::map<std::string, std::optional<LabelDistribution>>;

inline std::vector<FeatureRow> build_features(
    const std::vector<CandidatePredictions>& predictions,
    const std::vector<std::string>& pair_locales, const FeatureSchema& schema) {
  if (predictions.size() != pair_locales.size()) {
    throw DataError("build_features: predictions/locales length mismatch");
  }
  std::vector<FeatureRow> rows;
  rows.reserve(predictions.size());
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    for (const auto& [name, dist] : predictions[i]) {
      if (std::find(schema.candidate_order.begin(), schema.candidate_order.end(), name) ==
          schema.candidate_order.end()) {
        throw DataError("build_features: unknown candidate name '" + name + "'");
      }
    }
    FeatureRow row;
    row.reserve(static_cast<std::size_t>(schema.size()));
    for (const auto& cand : schema.candidate_order) {
      const auto it = predictions[i].find(cand);
      if (it == predictions[i].end()) {
        throw DataError("build_features: pair " + std::to_string(i) +
                        " has no prediction or missing marker for candidate '" + cand + "'");
      }
      for (int c = 0; c < kNumLabels; ++c) {
        row.push_back(it->second ? (*it->second)[c] : kMissingValue);
      }
    }
    for (const auto& loc : schema.locales) {
      row.push_back(loc == pair_locales[i] ? 1.0 : 0.0);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

// ── trees ────────────────────────────────────────────────────────────────

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  bool default_left = true;
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf value
  double cover = 0.0;  // sum of training row weights through this node
};

struct RegressionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root; empty tree = 0

  int route(const FeatureRow& row) const {
    if (nodes.empty()) return -1;
    int idx = 0;
    while (nodes[static_cast<std::size_t>(idx)].feature >= 0) {
      const auto& n = nodes[static_cast<std::size_t>(idx)];
      const double v = row[static_cast<std::size_t>(n.feature)];
      const bool left = is_missing(v) ? n.default_left : v <= n.threshold;
      idx = left ? n.left : n.right;
    }
    return idx;
  }

  double predict(const FeatureRow& row) const {
    const int leaf = route(row);
    return leaf < 0 ? 0.0 : nodes[static_cast<std::size_t>(leaf)].value;
  }

  int leaf_count() const {
    int n = 0;
    for (const auto& node : nodes) n += node.feature < 0 ? 1 : 0;
    return n;
  }
};

// ── ensemble ─────────────────────────────────────────────────────────────

enum class ScoreMode { Shrinkage, Average };

struct GbdtParams {
  int iterations = 1500;
  double lr = 0.005;
  int max_leaves = 15;
  int max_depth = 15;
  int bagging_freq = 200;        // 0 disables bagging
  double bagging_fraction = 1.0;
  double lambda_l2 = 0.0;
  std::array<double, kNumLabels> class_weights{1.0, 1.0, 1.0, 1.0};
  std::uint64_t seed = 1;
  ScoreMode mode = ScoreMode::Shrinkage;
};

struct TreeEnsemble {
  GbdtParams params;
  FeatureSchema schema;
  std::array<double, kNumLabels> base_scores{0.0, 0.0, 0.0, 0.0};
  std::vector<std::array<RegressionTree, kNumLabels>> trees;  // per iteration
  std::vector<double> iteration_loss;  // full-data loss after each iteration

  int iterations() const { return static_cast<int>(trees.size()); }

  double tree_scale() const {
    if (params.mode == ScoreMode::Average) {
      return trees.empty() ? 1.0 : 1.0 / static_cast<double>(trees.size());
    }
    return params.lr;
  }

  std::array<double, kNumLabels> predict_scores(const FeatureRow& row,
                                                int iteration_limit = -1) const {
    if (static_cast<int>(row.size()) != schema.size()) {
      throw DataError("predict: row has " + std::to_string(row.size()) +
                      " features, schema expects " + std::to_string(schema.size()));
    }
    const int limit = iteration_limit < 0
                          ? iterations()
                          : std::min(iteration_limit, iterations());
    const double scale = tree_scale();
    std::array<double, kNumLabels> scores = base_scores;
    for (int t = 0; t < limit; ++t) {
      for (int c = 0; c < kNumLabels; ++c) {
        scores[static_cast<std::size_t>(c)] +=
            scale * trees[static_cast<std::size_t>(t)][static_cast<std::size_t>(c)].predict(row);
      }
    }
    return scores;
  }

  LabelDistribution predict(const FeatureRow& row) const {
    return softmax4(predict_scores(row));
  }
};

// Eq-9-style reporting loss over predicted distributions.
inline double gbdt_loss(const std::vector<EsciLabel>& labels,
                        const std::vector<LabelDistribution>& predictions,
                        const std::array<double, kNumLabels>& class_weights) {
  if (labels.empty()) return 0.0;
  return dataset_cross_entropy(labels, predictions, class_weights);
}

// ── training ─────────────────────────────────────────────────────────────

namespace gbdt_detail {

struct SplitDecision {
  bool found = false;
  int feature = -1;
  double threshold = 0.0;
  bool default_left = true;
  double gain = 1e-12;  // minimum gain required to split
};

// Rows of one node, presorted per feature. `order[f]` lists the node's
// non-missing rows for feature f in (value, index) order; `missing[f]`
// lists the rest in ascending index order. `all` is ascending index order.
struct NodeRows {
  std::vector<std::vector<int>> order;
  std::vector<std::vector<int>> missing;
  std::vector<int> all;
};

inline SplitDecision best_split(const NodeRows& rows,
                                const std::vector<FeatureRow>& data,
                                const std::vector<double>& grad,
                                const std::vector<double>& hess,
                                const std::vector<double>& weight, double lambda) {
  double g_total = 0.0, h_total = 0.0;
  for (const int i : rows.all) {
    g_total += grad[static_cast<std::size_t>(i)];
    h_total += hess[static_cast<std::size_t>(i)];
  }
  const double parent_obj = g_total * g_total / (h_total + lambda);

  SplitDecision best;
  const int n_features = static_cast<int>(rows.order.size());
  for (int f = 0; f < n_features; ++f) {
    const auto& ord = rows.order[static_cast<std::size_t>(f)];
    if (ord.size() < 2) continue;
    double g_miss = 0.0, h_miss = 0.0;
    for (const int i : rows.missing[static_cast<std::size_t>(f)]) {
      g_miss += grad[static_cast<std::size_t>(i)];
      h_miss += hess[static_cast<std::size_t>(i)];
    }
    double g_left = 0.0, h_left = 0.0, cover_left = 0.0;
    double cover_nonmiss = 0.0;
    for (const int i : ord) cover_nonmiss += weight[static_cast<std::size_t>(i)];

    for (std::size_t k = 0; k + 1 < ord.size(); ++k) {
      const int i = ord[k];
      g_left += grad[static_cast<std::size_t>(i)];
      h_left += hess[static_cast<std::size_t>(i)];
      cover_left += weight[static_cast<std::size_t>(i)];
      const double a = data[static_cast<std::size_t>(i)][static_cast<std::size_t>(f)];
      const double b = data[static_cast<std::size_t>(ord[k + 1])][static_cast<std::size_t>(f)];
      if (a == b) continue;
      double thr = (a + b) / 2.0;
      if (!(thr >= a && thr < b)) thr = a;

      const double cover_right = cover_nonmiss - cover_left;
      const bool miss_left = cover_left >= cover_right;
      const double gl = g_left + (miss_left ? g_miss : 0.0);
      const double hl = h_left + (miss_left ? h_miss : 0.0);
      const double gr = g_total - gl;
      const double hr = h_total - hl;
      const double gain =
          gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent_obj;
      // Strictly-greater beats the incumbent, so the earliest
      // (feature, threshold) wins ties; 1e-12 is the minimum gain.
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

}  // namespace gbdt_detail

inline TreeEnsemble gbdt_train(const std::vector<FeatureRow>& rows,
                               const std::vector<EsciLabel>& labels,
                               const GbdtParams& params, const FeatureSchema& schema) {
  if (rows.size() != labels.size()) throw DataError("gbdt_train: rows/labels mismatch");
  if (rows.empty()) throw DataError("gbdt_train: empty training set");
  if (params.iterations < 1 || params.lr <= 0.0 || params.max_leaves < 2 ||
      params.max_depth < 1 || params.bagging_fraction <= 0.0 ||
      params.bagging_fraction > 1.0) {
    throw ConfigError("gbdt_train: bad parameters");
  }
  {
    bool seen[kNumLabels] = {};
    int distinct = 0;
    for (const auto& l : labels) {
      if (!seen[label_code(l)]) {
        seen[label_code(l)] = true;
        ++distinct;
      }
    }
    if (distinct < 2) throw DataError("gbdt_train: single-class input");
  }
  const int n_features = schema.size();
  for (const auto& row : rows) {
    if (static_cast<int>(row.size()) != n_features) {
      throw DataError("gbdt_train: row width does not match schema");
    }
    for (const double v : row) {
      if (std::isinf(v)) throw DataError("gbdt_train: non-finite feature value");
    }
  }

  const std::size_t n = rows.size();
  TreeEnsemble ens;
  ens.params = params;
  ens.schema = schema;

  std::vector<double> weight(n);
  for (std::size_t i = 0; i < n; ++i) {
    weight[i] = params.class_weights[static_cast<std::size_t>(label_code(labels[i]))];
  }

  // Global presort per feature.
  std::vector<std::vector<int>> global_order(static_cast<std::size_t>(n_features));
  std::vector<std::vector<int>> global_missing(static_cast<std::size_t>(n_features));
  for (int f = 0; f < n_features; ++f) {
    auto& ord = global_order[static_cast<std::size_t>(f)];
    for (std::size_t i = 0; i < n; ++i) {
      if (is_missing(rows[i][static_cast<std::size_t>(f)])) {
        global_missing[static_cast<std::size_t>(f)].push_back(static_cast<int>(i));
      } else {
        ord.push_back(static_cast<int>(i));
      }
    }
    std::stable_sort(ord.begin(), ord.end(), [&](int a, int b) {
      return rows[static_cast<std::size_t>(a)][static_cast<std::size_t>(f)] <
             rows[static_cast<std::size_t>(b)][static_cast<std::size_t>(f)];
    });
  }

  std::vector<std::array<double, kNumLabels>> scores(
      n, std::array<double, kNumLabels>{0.0, 0.0, 0.0, 0.0});
  std::vector<double> grad(n), hess(n);

  Rng bag_rng(params.seed);
  std::vector<char> active(n, 1);
  const bool bagging = params.bagging_freq > 0 && params.bagging_fraction < 1.0;

  // Training always accumulates shrinkage-scaled scores; the average-form
  // prediction mode is applied by predict_scores only.
  const double scale = params.lr;

  for (int iter = 0; iter < params.iterations; ++iter) {
    if (bagging && iter % params.bagging_freq == 0) {
      std::vector<int> idx(n);
      for (std::size_t i = 0; i < n; ++i) idx[i] = static_cast<int>(i);
      bag_rng.shuffle(idx);
      const std::size_t keep = std::max<std::size_t>(
          1, static_cast<std::size_t>(params.bagging_fraction * static_cast<double>(n)));
      std::fill(active.begin(), active.end(), 0);
      for (std::size_t i = 0; i < keep; ++i) active[static_cast<std::size_t>(idx[i])] = 1;
    }

    std::vector<LabelDistribution> probs(n);
    for (std::size_t i = 0; i < n; ++i) probs[i] = softmax4(scores[i]);

    for (int c = 0; c < kNumLabels; ++c) {
      for (std::size_t i = 0; i < n; ++i) {
        const auto g = cross_entropy_score_gradient(probs[i], labels[i], weight[i]);
        grad[i] = g[static_cast<std::size_t>(c)];
        const double p = clamp_prob(probs[i][c]);
        hess[i] = std::max(2.0 * weight[i] * p * (1.0 - p), 1e-16);
      }

      // Root rows (active only), presorted per feature.
      gbdt_detail::NodeRows root;
      root.order.resize(static_cast<std::size_t>(n_features));
      root.missing.resize(static_cast<std::size_t>(n_features));
      for (int f = 0; f < n_features; ++f) {
        for (const int i : global_order[static_cast<std::size_t>(f)]) {
          if (active[static_cast<std::size_t>(i)]) root.order[static_cast<std::size_t>(f)].push_back(i);
        }
        for (const int i : global_missing[static_cast<std::size_t>(f)]) {
          if (active[static_cast<std::size_t>(i)]) root.missing[static_cast<std::size_t>(f)].push_back(i);
        }
      }
      for (std::size_t i = 0; i < n; ++i) {
        if (active[i]) root.all.push_back(static_cast<int>(i));
      }

      RegressionTree tree;
      struct Leaf {
        gbdt_detail::NodeRows rows;
        int node = 0;
        int depth = 0;
        gbdt_detail::SplitDecision split;
      };
      std::vector<Leaf> leaves;
      {
        double g_sum = 0.0, h_sum = 0.0, cover = 0.0;
        for (const int i : root.all) {
          g_sum += grad[static_cast<std::size_t>(i)];
          h_sum += hess[static_cast<std::size_t>(i)];
          cover += weight[static_cast<std::size_t>(i)];
        }
        TreeNode root_node;
        root_node.value = std::clamp(-g_sum / (h_sum + params.lambda_l2), -kMaxLeafValue,
                                     kMaxLeafValue);
        root_node.cover = cover;
        tree.nodes.push_back(root_node);
        Leaf leaf;
        leaf.rows = std::move(root);
        leaf.node = 0;
        leaf.depth = 0;
        leaf.split = gbdt_detail::best_split(leaf.rows, rows, grad, hess, weight,
                                             params.lambda_l2);
        leaves.push_back(std::move(leaf));
      }

      // Leaf-wise growth: split the leaf with the best gain until the leaf
      // or depth budget is exhausted. Ties go to the older leaf.
      while (static_cast<int>(leaves.size()) < params.max_leaves) {
        int best_leaf = -1;
        for (std::size_t li = 0; li < leaves.size(); ++li) {
          if (leaves[li].depth >= params.max_depth || !leaves[li].split.found) continue;
          if (best_leaf < 0 ||
              leaves[li].split.gain > leaves[static_cast<std::size_t>(best_leaf)].split.gain) {
            best_leaf = static_cast<int>(li);
          }
        }
        if (best_leaf < 0) break;

        Leaf leaf = std::move(leaves[static_cast<std::size_t>(best_leaf)]);
        leaves.erase(leaves.begin() + best_leaf);
        const auto& split = leaf.split;
        const int f = split.feature;

        // Partition rows; missing values follow the default direction.
        std::vector<char> goes_left(n, 0);
        Leaf lchild, rchild;
        lchild.depth = rchild.depth = leaf.depth + 1;
        for (const int i : leaf.rows.all) {
          const double v = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(f)];
          const bool left = is_missing(v) ? split.default_left : v <= split.threshold;
          goes_left[static_cast<std::size_t>(i)] = left ? 1 : 0;
          (left ? lchild.rows.all : rchild.rows.all).push_back(i);
        }
        lchild.rows.order.resize(static_cast<std::size_t>(n_features));
        lchild.rows.missing.resize(static_cast<std::size_t>(n_features));
        rchild.rows.order.resize(static_cast<std::size_t>(n_features));
        rchild.rows.missing.resize(static_cast<std::size_t>(n_features));
        for (int ff = 0; ff < n_features; ++ff) {
          for (const int i : leaf.rows.order[static_cast<std::size_t>(ff)]) {
            (goes_left[static_cast<std::size_t>(i)] ? lchild : rchild)
                .rows.order[static_cast<std::size_t>(ff)]
                .push_back(i);
          }
          for (const int i : leaf.rows.missing[static_cast<std::size_t>(ff)]) {
            (goes_left[static_cast<std::size_t>(i)] ? lchild : rchild)
                .rows.missing[static_cast<std::size_t>(ff)]
                .push_back(i);
          }
        }

        const auto leaf_stats = [&](const Leaf& l) {
          double g = 0.0, h = 0.0, cover = 0.0;
          for (const int i : l.rows.all) {
            g += grad[static_cast<std::size_t>(i)];
            h += hess[static_cast<std::size_t>(i)];
            cover += weight[static_cast<std::size_t>(i)];
          }
          return std::array<double, 3>{g, h, cover};
        };
        const auto lstats = leaf_stats(lchild);
        const auto rstats = leaf_stats(rchild);

        auto& parent = tree.nodes[static_cast<std::size_t>(leaf.node)];
        parent.feature = f;
        parent.threshold = split.threshold;
        parent.default_left = split.default_left;
        parent.left = static_cast<int>(tree.nodes.size());
        parent.right = static_cast<int>(tree.nodes.size()) + 1;

        TreeNode lnode, rnode;
        lnode.value = std::clamp(-lstats[0] / (lstats[1] + params.lambda_l2),
                                 -kMaxLeafValue, kMaxLeafValue);
        lnode.cover = lstats[2];
        rnode.value = std::clamp(-rstats[0] / (rstats[1] + params.lambda_l2),
                                 -kMaxLeafValue, kMaxLeafValue);
        rnode.cover = rstats[2];
        lchild.node = static_cast<int>(tree.nodes.size());
        rchild.node = static_cast<int>(tree.nodes.size()) + 1;
        tree.nodes.push_back(lnode);
        tree.nodes.push_back(rnode);

        lchild.split = gbdt_detail::best_split(lchild.rows, rows, grad, hess, weight,
                                               params.lambda_l2);
        rchild.split = gbdt_detail::best_split(rchild.rows, rows, grad, hess, weight,
                                               params.lambda_l2);
        leaves.push_back(std::move(lchild));
        leaves.push_back(std::move(rchild));
      }

      for (std::size_t i = 0; i < n; ++i) {
        scores[i][static_cast<std::size_t>(c)] += scale * tree.predict(rows[i]);
      }
      if (c == 0) ens.trees.emplace_back();
      ens.trees.back()[static_cast<std::size_t>(c)] = std::move(tree);
    }

    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      loss += label_cross_entropy(softmax4(scores[i]), labels[i], weight[i]);
    }
    ens.iteration_loss.push_back(loss);
  }
  return ens;
}

// ── checkpoint ───────────────────────────────────────────────────────────

inline constexpr const char* kGbdtCkptVersion = "relens.gbdt.v1";

inline void save_ensemble(const TreeEnsemble& ens, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write ensemble checkpoint: " + path);
  out << kGbdtCkptVersion << '\n';
  const auto& p = ens.params;
  out << "params\t" << p.iterations << '\t' << fmt_double(p.lr) << '\t' << p.max_leaves
      << '\t' << p.max_depth << '\t' << p.bagging_freq << '\t'
      << fmt_double(p.bagging_fraction) << '\t' << fmt_double(p.lambda_l2) << '\t'
      << p.seed << '\t' << (p.mode == ScoreMode::Average ? "average" : "shrinkage")
      << '\n';
  out << "class_weights";
  for (double w : p.class_weights) out << '\t' << fmt_double(w);
  out << '\n';
  out << "base";
  for (double b : ens.base_scores) out << '\t' << fmt_double(b);
  out << '\n';
  out << "schema\t" << ens.schema.columns.size() << '\t' << ens.schema.candidate_order.size()
      << '\t' << ens.schema.locales.size() << '\n';
  for (const auto& cand : ens.schema.candidate_order) out << "cand\t" << escape_field(cand) << '\n';
  for (const auto& loc : ens.schema.locales) out << "locale\t" << escape_field(loc) << '\n';
  out << "trees\t" << ens.trees.size() << '\n';
  for (std::size_t t = 0; t < ens.trees.size(); ++t) {
    for (int c = 0; c < kNumLabels; ++c) {
      const auto& tree = ens.trees[t][static_cast<std::size_t>(c)];
      out << "tree\t" << t << '\t' << c << '\t' << tree.nodes.size() << '\n';
      for (const auto& node : tree.nodes) {
        out << node.feature << '\t' << fmt_double(node.threshold) << '\t'
            << (node.default_left ? 1 : 0) << '\t' << node.left << '\t' << node.right
            << '\t' << fmt_double(node.value) << '\t' << fmt_double(node.cover) << '\n';
      }
    }
  }
  if (!out) throw DataError("I/O failure writing " + path);
}

inline TreeEnsemble load_ensemble(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open ensemble checkpoint: " + path);
  std::string line;
  if (!std::getline(in, line) || line != kGbdtCkptVersion) {
    throw DataError("ensemble checkpoint " + path + ": bad version header");
  }
  const auto next = [&](const char* tag, std::size_t min_fields) {
    if (!std::getline(in, line)) throw DataError("ensemble checkpoint " + path + ": truncated");
    const auto fields = split_tsv(line);
    if (fields.empty() || fields[0] != tag || fields.size() < min_fields) {
      throw DataError("ensemble checkpoint " + path + ": expected '" + tag + "'");
    }
    return fields;
  };

  TreeEnsemble ens;
  {
    const auto f = next("params", 10);
    ens.params.iterations = static_cast<int>(parse_int(f[1]));
    ens.params.lr = parse_double(f[2]);
    ens.params.max_leaves = static_cast<int>(parse_int(f[3]));
    ens.params.max_depth = static_cast<int>(parse_int(f[4]));
    ens.params.bagging_freq = static_cast<int>(parse_int(f[5]));
    ens.params.bagging_fraction = parse_double(f[6]);
    ens.params.lambda_l2 = parse_double(f[7]);
    ens.params.seed = parse_uint(f[8]);
    ens.params.mode = f[9] == "average" ? ScoreMode::Average : ScoreMode::Shrinkage;
  }
  {
    const auto f = next("class_weights", 1 + kNumLabels);
    for (int c = 0; c < kNumLabels; ++c) {
      ens.params.class_weights[static_cast<std::size_t>(c)] = parse_double(f[static_cast<std::size_t>(c) + 1]);
    }
  }
  {
    const auto f = next("base", 1 + kNumLabels);
    for (int c = 0; c < kNumLabels; ++c) ens.base_scores[static_cast<std::size_t>(c)] = parse_double(f[static_cast<std::size_t>(c) + 1]);
  }
  {
    const auto f = next("schema", 4);
    const auto n_cands = parse_int(f[2]);
    const auto n_locales = parse_int(f[3]);
    std::vector<std::string> cands, locales;
    for (long long i = 0; i < n_cands; ++i) cands.push_back(unescape_field(next("cand", 2)[1]));
    for (long long i = 0; i < n_locales; ++i) locales.push_back(unescape_field(next("locale", 2)[1]));
    ens.schema = FeatureSchema::make(cands, locales);
  }
  const auto n_trees = parse_int(next("trees", 2)[1]);
  for (long long t = 0; t < n_trees; ++t) {
    ens.trees.emplace_back();
    for (int c = 0; c < kNumLabels; ++c) {
      const auto f = next("tree", 4);
      if (parse_int(f[1]) != t || parse_int(f[2]) != c) {
        throw DataError("ensemble checkpoint " + path + ": tree order corrupt");
      }
      const auto n_nodes = parse_int(f[3]);
      auto& tree = ens.trees.back()[static_cast<std::size_t>(c)];
      for (long long i = 0; i < n_nodes; ++i) {
        if (!std::getline(in, line)) throw DataError("ensemble checkpoint " + path + ": truncated");
        const auto nf = split_tsv(line);
        if (nf.size() != 7) throw DataError("ensemble checkpoint " + path + ": bad node line");
        TreeNode node;
        node.feature = static_cast<int>(parse_int(nf[0]));
        node.threshold = parse_double(nf[1]);
        node.default_left = parse_int(nf[2]) != 0;
        node.left = static_cast<int>(parse_int(nf[3]));
        node.right = static_cast<int>(parse_int(nf[4]));
        node.value = parse_double(nf[5]);
        node.cover = parse_double(nf[6]);
        tree.nodes.push_back(node);
      }
    }
  }
  return ens;
}

}  // namespace relens
