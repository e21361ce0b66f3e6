#pragma once
// Shapley attributions for the tree ensemble, computed under
// interventional semantics against an explicit background set: absent
// features take the background row's value, and the game value of a
// feature subset is the mean model output over the background.
//
// Two routes compute the same quantity:
//   - explain(): per-tree path recursion over (explained row, background
//     row) pairs with closed-form coalition weights — linear-time in the
//     ensemble and exact in score space;
//   - explain_brute_force(): literal subset enumeration with the
//     |F|! (|X|-|F|-1)! / |X|! weights, tractable for |X| <= 12.
//
// Explanations default to pre-softmax score space for the predicted
// class, where additivity (base + sum of attributions = model score) is
// exact. Probability-space attributions are exposed through the
// enumeration route only.

#include <array>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "relens/core.hpp"
#include "relens/gbdt.hpp"

namespace relens {

enum class ExplainMode { Score, Probability };

struct Attribution {
  ExplainMode mode = ExplainMode::Score;
  int explained_class = 0;
  double base_value = 0.0;    // expected output over the background
  double model_output = 0.0;  // output for the explained row
  std::vector<double> per_feature;
  std::vector<std::pair<std::string, double>> per_group;  // schema group order

  double attribution_sum() const {
    double s = 0.0;
    for (double v : per_feature) s += v;
    return s;
  }
};

namespace shap_detail {

inline const std::vector<double>& factorials() {
  static const std::vector<double> table = [] {
    std::vector<double> f(64, 1.0);
    for (std::size_t i = 1; i < f.size(); ++i) f[i] = f[i - 1] * static_cast<double>(i);
    return f;
  }();
  return table;
}

// Leaf contribution weights for disjoint path sets A (row side, size a)
// and B (background side, size b):
//   i in A:  +( (a-1)! b! / (a+b)! ) * leaf
//   i in B:  -( a! (b-1)! / (a+b)! ) * leaf
inline double coalition_weight(int a, int b) {
  const auto& f = factorials();
  return f[static_cast<std::size_t>(a)] * f[static_cast<std::size_t>(b)] /
         f[static_cast<std::size_t>(a + b + 1)];
}

struct PathState {
  std::vector<int> in_row;  // per-feature membership flags for O(1) lookup
  std::vector<int> in_bg;
  std::vector<int> row_feats;  // the same memberships as stacks
  std::vector<int> bg_feats;
};

inline void recurse_tree(const RegressionTree& tree, int node, const FeatureRow& x,
                         const FeatureRow& z, PathState& state, std::vector<double>& phi) {
  const auto& nd = tree.nodes[static_cast<std::size_t>(node)];
  if (nd.feature < 0) {
    const int a = static_cast<int>(state.row_feats.size());
    const int b = static_cast<int>(state.bg_feats.size());
    if (a + b == 0) return;  // both rows share the whole path: no attribution
    if (a > 0) {
      const double w = coalition_weight(a - 1, b) * nd.value;
      for (const int f : state.row_feats) phi[static_cast<std::size_t>(f)] += w;
    }
    if (b > 0) {
      const double w = coalition_weight(a, b - 1) * nd.value;
      for (const int f : state.bg_feats) phi[static_cast<std::size_t>(f)] -= w;
    }
    return;
  }

  const auto child = [&](const FeatureRow& row) {
    const double v = row[static_cast<std::size_t>(nd.feature)];
    const bool left = is_missing(v) ? nd.default_left : v <= nd.threshold;
    return left ? nd.left : nd.right;
  };
  const int x_child = child(x);
  const int z_child = child(z);

  if (x_child == z_child) {
    recurse_tree(tree, x_child, x, z, state, phi);
    return;
  }
  const std::size_t f = static_cast<std::size_t>(nd.feature);
  if (state.in_row[f] > 0) {
    recurse_tree(tree, x_child, x, z, state, phi);
    return;
  }
  if (state.in_bg[f] > 0) {
    recurse_tree(tree, z_child, x, z, state, phi);
    return;
  }
  ++state.in_row[f];
  state.row_feats.push_back(nd.feature);
  recurse_tree(tree, x_child, x, z, state, phi);
  state.row_feats.pop_back();
  --state.in_row[f];

  ++state.in_bg[f];
  state.bg_feats.push_back(nd.feature);
  recurse_tree(tree, z_child, x, z, state, phi);
  state.bg_feats.pop_back();
  --state.in_bg[f];
}

inline int resolve_class(const TreeEnsemble& ens, const FeatureRow& row, int requested) {
  if (requested >= 0 && requested < kNumLabels) return requested;
  const auto scores = ens.predict_scores(row);
  int best = 0;
  for (int c = 1; c < kNumLabels; ++c) {
    if (scores[static_cast<std::size_t>(c)] > scores[static_cast<std::size_t>(best)]) best = c;
  }
  return best;
}

inline void fill_groups(Attribution& attr, const FeatureSchema& schema) {
  attr.per_group.clear();
  for (const auto& group : schema.group_names()) {
    double sum = 0.0;
    for (const int col : schema.group_columns(group)) {
      sum += attr.per_feature[static_cast<std::size_t>(col)];
    }
    attr.per_group.emplace_back(group, sum);
  }
}

}  // namespace shap_detail

// ── fast path ────────────────────────────────────────────────────────────

inline Attribution explain(const TreeEnsemble& ens, const FeatureRow& row,
                           const std::vector<FeatureRow>& background,
                           ExplainMode mode = ExplainMode::Score,
                           int explained_class = -1);

// ── exact enumeration ────────────────────────────────────────────────────

inline Attribution explain_brute_force(const TreeEnsemble& ens, const FeatureRow& row,
                                       const std::vector<FeatureRow>& background,
                                       ExplainMode mode = ExplainMode::Score,
                                       int explained_class = -1) {
  const int n = ens.schema.size();
  if (n > 12) {
    throw ConfigError("explain_brute_force: " + std::to_string(n) +
                      " features exceed the enumeration bound of 12");
  }
  if (background.empty()) throw DataError("explain_brute_force: empty background");
  if (static_cast<int>(row.size()) != n) throw DataError("explain_brute_force: schema mismatch");
  for (const auto& z : background) {
    if (static_cast<int>(z.size()) != n) {
      throw DataError("explain_brute_force: background schema mismatch");
    }
  }

  Attribution attr;
  attr.mode = mode;
  attr.explained_class = shap_detail::resolve_class(ens, row, explained_class);
  const int cls = attr.explained_class;

  const auto output = [&](const FeatureRow& r) {
    const auto scores = ens.predict_scores(r);
    if (mode == ExplainMode::Score) return scores[static_cast<std::size_t>(cls)];
    return softmax4(scores)[cls];
  };

  // Game value per subset: mean output of the composite row.
  const std::size_t n_masks = std::size_t{1} << n;
  std::vector<double> value(n_masks, 0.0);
  FeatureRow composite(static_cast<std::size_t>(n));
  for (std::size_t mask = 0; mask < n_masks; ++mask) {
    double acc = 0.0;
    for (const auto& z : background) {
      for (int i = 0; i < n; ++i) {
        composite[static_cast<std::size_t>(i)] =
            (mask >> i) & 1U ? row[static_cast<std::size_t>(i)] : z[static_cast<std::size_t>(i)];
      }
      acc += output(composite);
    }
    value[mask] = acc / static_cast<double>(background.size());
  }

  const auto& fact = shap_detail::factorials();
  attr.per_feature.assign(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    double phi = 0.0;
    for (std::size_t mask = 0; mask < n_masks; ++mask) {
      if ((mask >> i) & 1U) continue;
      const int size = __builtin_popcountll(mask);
      const double w = fact[static_cast<std::size_t>(size)] *
                       fact[static_cast<std::size_t>(n - size - 1)] /
                       fact[static_cast<std::size_t>(n)];
      phi += w * (value[mask | (std::size_t{1} << i)] - value[mask]);
    }
    attr.per_feature[static_cast<std::size_t>(i)] = phi;
  }

  attr.base_value = value[0];
  attr.model_output = output(row);
  shap_detail::fill_groups(attr, ens.schema);
  return attr;
}

inline Attribution explain(const TreeEnsemble& ens, const FeatureRow& row,
                           const std::vector<FeatureRow>& background, ExplainMode mode,
                           int explained_class) {
  if (mode == ExplainMode::Probability) {
    // Probability space is nonlinear in the trees; only the enumeration
    // route is exact there.
    return explain_brute_force(ens, row, background, mode, explained_class);
  }
  if (background.empty()) throw DataError("explain: empty background");
  const int n = ens.schema.size();
  if (static_cast<int>(row.size()) != n) throw DataError("explain: schema mismatch");
  for (const auto& z : background) {
    if (static_cast<int>(z.size()) != n) throw DataError("explain: background schema mismatch");
  }

  Attribution attr;
  attr.mode = ExplainMode::Score;
  attr.explained_class = shap_detail::resolve_class(ens, row, explained_class);
  const int cls = attr.explained_class;

  attr.per_feature.assign(static_cast<std::size_t>(n), 0.0);
  std::vector<double> phi(static_cast<std::size_t>(n), 0.0);
  shap_detail::PathState state;
  state.in_row.assign(static_cast<std::size_t>(n), 0);
  state.in_bg.assign(static_cast<std::size_t>(n), 0);

  double base = 0.0;
  for (const auto& z : background) {
    for (const auto& iteration : ens.trees) {
      const auto& tree = iteration[static_cast<std::size_t>(cls)];
      if (tree.nodes.empty()) continue;
      shap_detail::recurse_tree(tree, 0, row, z, state, phi);
      base += tree.predict(z);
    }
  }
  const double scale = ens.tree_scale() / static_cast<double>(background.size());
  for (int i = 0; i < n; ++i) {
    attr.per_feature[static_cast<std::size_t>(i)] = phi[static_cast<std::size_t>(i)] * scale;
  }
  attr.base_value = ens.base_scores[static_cast<std::size_t>(cls)] + base * scale;
  attr.model_output = ens.predict_scores(row)[static_cast<std::size_t>(cls)];
  shap_detail::fill_groups(attr, ens.schema);
  return attr;
}

// ── global importance ────────────────────────────────────────────────────

struct GlobalImportance {
  struct Group {
    std::string name;
    double mean_abs = 0.0;  // mean |attribution| summed over the group's columns
    double share = 0.0;     // normalized to sum 1 over all groups
  };
  std::vector<Group> groups;  // schema group order

  double share_of(const std::string& name) const {
    for (const auto& g : groups) {
      if (g.name == name) return g.share;
    }
    throw DataError("global importance: unknown group '" + name + "'");
  }
};

// Mean absolute per-feature attribution over the evaluation rows,
// aggregated by schema group and normalized to shares. Explanations are
// taken in score space for each row's predicted class.
inline GlobalImportance global_importance(const TreeEnsemble& ens,
                                          const std::vector<FeatureRow>& rows,
                                          const std::vector<FeatureRow>& background) {
  if (rows.empty()) throw DataError("global_importance: need at least one row");
  const int n = ens.schema.size();
  std::vector<double> mean_abs(static_cast<std::size_t>(n), 0.0);
  for (const auto& row : rows) {
    const Attribution attr = explain(ens, row, background);
    for (int i = 0; i < n; ++i) {
      mean_abs[static_cast<std::size_t>(i)] += std::abs(attr.per_feature[static_cast<std::size_t>(i)]);
    }
  }
  for (auto& v : mean_abs) v /= static_cast<double>(rows.size());

  GlobalImportance gi;
  double total = 0.0;
  for (const auto& group : ens.schema.group_names()) {
    GlobalImportance::Group g;
    g.name = group;
    for (const int col : ens.schema.group_columns(group)) {
      g.mean_abs += mean_abs[static_cast<std::size_t>(col)];
    }
    total += g.mean_abs;
    gi.groups.push_back(std::move(g));
  }
  if (total > 0.0) {
    for (auto& g : gi.groups) g.share = g.mean_abs / total;
  }
  return gi;
}

// Relation-level rollup: graph candidates grouped by their signal,
// renormalized within the graph share. candidate_to_relation maps a
// candidate group name to its relation label (e.g. "purchases").
inline std::vector<std::pair<std::string, double>> relation_importance(
    const GlobalImportance& gi, const std::map<std::string, std::string>& candidate_to_relation) {
  std::vector<std::pair<std::string, double>> out;
  double total = 0.0;
  for (const auto& g : gi.groups) {
    const auto it = candidate_to_relation.find(g.name);
    if (it == candidate_to_relation.end()) continue;
    bool found = false;
    for (auto& [rel, v] : out) {
      if (rel == it->second) {
        v += g.mean_abs;
        found = true;
        break;
      }
    }
    if (!found) out.emplace_back(it->second, g.mean_abs);
    total += g.mean_abs;
  }
  if (total > 0.0) {
    for (auto& [rel, v] : out) v /= total;
  }
  return out;
}

}  // namespace relens
