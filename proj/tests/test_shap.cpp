#include <catch2/catch_amalgamated.hpp>

#include "relens/gbdt.hpp"
#include "relens/rng.hpp"
#include "relens/shap.hpp"

using namespace relens;

namespace {

FeatureSchema schema_of(int n_features) {
  std::vector<std::string> cands;
  int remaining = n_features;
  int i = 0;
  while (remaining >= kNumLabels) {
    cands.push_back("cand" + std::to_string(i++));
    remaining -= kNumLabels;
  }
  std::vector<std::string> locales;
  for (int l = 0; l < remaining; ++l) locales.push_back("loc" + std::to_string(l));
  return FeatureSchema::make(cands, locales);
}

// Random ensemble over random data; depth and tree count stay small so the
// brute-force route remains cheap.
TreeEnsemble random_ensemble(Rng& rng, int n_features, int max_iterations, int max_depth,
                             std::vector<FeatureRow>* rows_out = nullptr) {
  const auto schema = schema_of(n_features);
  const int n_rows = 30 + static_cast<int>(rng.uniform_index(30));
  std::vector<FeatureRow> rows;
  std::vector<EsciLabel> labels;
  for (int i = 0; i < n_rows; ++i) {
    FeatureRow row;
    for (int f = 0; f < n_features; ++f) {
      row.push_back(rng.uniform() < 0.1 ? kMissingValue : rng.uniform());
    }
    rows.push_back(row);
    double key = 0.0;
    for (const double v : row) {
      if (!is_missing(v)) key += v;
    }
    labels.push_back(static_cast<EsciLabel>(
        std::min<int>(kNumLabels - 1, static_cast<int>(key / n_features * 4.0))));
  }
  // Guarantee at least two classes.
  labels[0] = EsciLabel::Exact;
  labels[1] = EsciLabel::Irrelevant;
  GbdtParams params;
  params.iterations = 1 + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(max_iterations)));
  params.lr = 0.3;
  params.max_depth = max_depth;
  params.max_leaves = 1 << max_depth;
  params.bagging_freq = 0;
  params.seed = rng.next_u64();
  if (rows_out) *rows_out = rows;
  return gbdt_train(rows, labels, params, schema);
}

FeatureRow random_row(Rng& rng, int n_features, double missing_rate = 0.1) {
  FeatureRow row;
  for (int f = 0; f < n_features; ++f) {
    row.push_back(rng.uniform() < missing_rate ? kMissingValue : rng.uniform());
  }
  return row;
}

}  // namespace

TEST_CASE("shap: constant trees attribute nothing") {
  TreeEnsemble ens;
  ens.schema = schema_of(3);
  ens.params.lr = 0.5;
  ens.trees.emplace_back();
  for (int c = 0; c < kNumLabels; ++c) {
    RegressionTree tree;
    TreeNode leaf;
    leaf.value = 1.5 + c;
    tree.nodes.push_back(leaf);
    ens.trees.back()[static_cast<std::size_t>(c)] = tree;
  }
  const std::vector<FeatureRow> bg{{0.1, 0.2, 0.3}, {0.9, 0.8, 0.7}};
  const auto attr = explain(ens, {0.5, 0.5, 0.5}, bg, ExplainMode::Score, 2);
  for (const double phi : attr.per_feature) CHECK(phi == 0.0);
  CHECK(attr.base_value == Catch::Approx(attr.model_output));
}

TEST_CASE("shap: a tree splitting only on feature 3 gives zero elsewhere") {
  TreeEnsemble ens;
  ens.schema = schema_of(5);
  ens.params.lr = 1.0;
  ens.trees.emplace_back();
  RegressionTree tree;
  TreeNode root;
  root.feature = 3;
  root.threshold = 0.5;
  root.left = 1;
  root.right = 2;
  tree.nodes.push_back(root);
  TreeNode l, r;
  l.value = -2.0;
  r.value = 3.0;
  tree.nodes.push_back(l);
  tree.nodes.push_back(r);
  ens.trees.back()[0] = tree;

  Rng rng(301);
  std::vector<FeatureRow> bg;
  for (int i = 0; i < 8; ++i) bg.push_back(random_row(rng, 5, 0.0));
  const auto attr = explain(ens, random_row(rng, 5, 0.0), bg, ExplainMode::Score, 0);
  for (int f = 0; f < 5; ++f) {
    if (f != 3) CHECK(std::abs(attr.per_feature[static_cast<std::size_t>(f)]) <= 1e-9);
  }
}

TEST_CASE("shap: single feature attribution is f(x) minus the background mean") {
  TreeEnsemble ens;
  ens.schema = schema_of(1);
  ens.params.lr = 1.0;
  ens.trees.emplace_back();
  RegressionTree tree;
  TreeNode root;
  root.feature = 0;
  root.threshold = 0.5;
  root.left = 1;
  root.right = 2;
  tree.nodes.push_back(root);
  TreeNode l, r;
  l.value = 1.0;
  r.value = 5.0;
  tree.nodes.push_back(l);
  tree.nodes.push_back(r);
  ens.trees.back()[0] = tree;

  const std::vector<FeatureRow> bg{{0.1}, {0.9}, {0.95}};
  const auto attr = explain_brute_force(ens, {0.2}, bg, ExplainMode::Score, 0);
  const double expected_base = (1.0 + 5.0 + 5.0) / 3.0;
  CHECK(attr.base_value == Catch::Approx(expected_base));
  REQUIRE(attr.per_feature.size() == 1);
  CHECK(attr.per_feature[0] == Catch::Approx(1.0 - expected_base));
}

TEST_CASE("shap: symmetric duplicate features receive equal attributions") {
  // Two trees, one splitting on each feature identically; the explained
  // row and backgrounds keep the two columns equal.
  TreeEnsemble ens;
  ens.schema = schema_of(2);
  ens.params.lr = 1.0;
  ens.trees.emplace_back();
  for (int f = 0; f < 2; ++f) {
    RegressionTree tree;
    TreeNode root;
    root.feature = f;
    root.threshold = 0.5;
    root.left = 1;
    root.right = 2;
    tree.nodes.push_back(root);
    TreeNode l, r;
    l.value = 0.0;
    r.value = 4.0;
    tree.nodes.push_back(l);
    tree.nodes.push_back(r);
    if (f == 0) {
      ens.trees.back()[0] = tree;
    } else {
      // Same class so both contribute to the same output.
      auto& cls = ens.trees.back()[0];
      // Append as a second iteration instead.
      ens.trees.emplace_back();
      ens.trees.back()[0] = tree;
      (void)cls;
    }
  }
  const std::vector<FeatureRow> bg{{0.2, 0.2}, {0.8, 0.8}};
  const auto fast = explain(ens, {0.9, 0.9}, bg, ExplainMode::Score, 0);
  CHECK(fast.per_feature[0] == Catch::Approx(fast.per_feature[1]).margin(1e-12));
  const auto brute = explain_brute_force(ens, {0.9, 0.9}, bg, ExplainMode::Score, 0);
  CHECK(brute.per_feature[0] == Catch::Approx(brute.per_feature[1]).margin(1e-12));
}

TEST_CASE("shap: fast path equals brute force on random small ensembles") {
  Rng rng(302);
  for (int trial = 0; trial < 40; ++trial) {
    const int n_features = 2 + static_cast<int>(rng.uniform_index(7));  // up to 8
    const auto ens = random_ensemble(rng, n_features, 6, 3);
    std::vector<FeatureRow> bg;
    const int n_bg = 1 + static_cast<int>(rng.uniform_index(6));
    for (int i = 0; i < n_bg; ++i) bg.push_back(random_row(rng, n_features));
    const auto row = random_row(rng, n_features);
    for (int cls = 0; cls < kNumLabels; ++cls) {
      const auto fast = explain(ens, row, bg, ExplainMode::Score, cls);
      const auto brute = explain_brute_force(ens, row, bg, ExplainMode::Score, cls);
      REQUIRE(fast.per_feature.size() == brute.per_feature.size());
      for (std::size_t f = 0; f < fast.per_feature.size(); ++f) {
        CHECK(fast.per_feature[f] == Catch::Approx(brute.per_feature[f]).margin(1e-9));
      }
      CHECK(fast.base_value == Catch::Approx(brute.base_value).margin(1e-9));
    }
  }
}

TEST_CASE("shap: additivity holds on random rows") {
  Rng rng(303);
  for (int trial = 0; trial < 10; ++trial) {
    const int n_features = 4 + static_cast<int>(rng.uniform_index(8));
    std::vector<FeatureRow> train_rows;
    const auto ens = random_ensemble(rng, n_features, 10, 3, &train_rows);
    std::vector<FeatureRow> bg(train_rows.begin(),
                               train_rows.begin() + std::min<std::size_t>(10, train_rows.size()));
    for (int probe = 0; probe < 20; ++probe) {
      const auto row = random_row(rng, n_features);
      const auto attr = explain(ens, row, bg);
      CHECK(attr.base_value + attr.attribution_sum() ==
            Catch::Approx(attr.model_output).margin(1e-6));
    }
  }
}

TEST_CASE("shap: group sums partition the feature attributions") {
  Rng rng(304);
  const int n_features = 11;  // 2 candidates + 3 locale columns
  const auto ens = random_ensemble(rng, n_features, 8, 3);
  std::vector<FeatureRow> bg;
  for (int i = 0; i < 5; ++i) bg.push_back(random_row(rng, n_features));
  const auto attr = explain(ens, random_row(rng, n_features), bg);
  double group_total = 0.0;
  for (const auto& [name, sum] : attr.per_group) group_total += sum;
  CHECK(group_total == Catch::Approx(attr.attribution_sum()).margin(1e-12));
}

TEST_CASE("shap: probability mode is additive and matches enumeration") {
  Rng rng(305);
  const int n_features = 5;
  const auto ens = random_ensemble(rng, n_features, 5, 2);
  std::vector<FeatureRow> bg;
  for (int i = 0; i < 4; ++i) bg.push_back(random_row(rng, n_features));
  const auto row = random_row(rng, n_features);
  const auto attr = explain(ens, row, bg, ExplainMode::Probability, 1);
  CHECK(attr.mode == ExplainMode::Probability);
  CHECK(attr.base_value + attr.attribution_sum() ==
        Catch::Approx(attr.model_output).margin(1e-9));
  CHECK(attr.model_output == Catch::Approx(ens.predict(row)[1]).margin(1e-12));
}

TEST_CASE("shap: brute force rejects wide schemas") {
  Rng rng(306);
  const auto ens = random_ensemble(rng, 16, 3, 2);
  std::vector<FeatureRow> bg{random_row(rng, 16)};
  CHECK_THROWS_AS(explain_brute_force(ens, random_row(rng, 16), bg), ConfigError);
}

TEST_CASE("shap: schema mismatch and empty background are errors") {
  Rng rng(307);
  const auto ens = random_ensemble(rng, 4, 3, 2);
  std::vector<FeatureRow> bg{random_row(rng, 4)};
  CHECK_THROWS_AS(explain(ens, {0.1, 0.2}, bg), DataError);
  CHECK_THROWS_AS(explain(ens, random_row(rng, 4), {}), DataError);
}

TEST_CASE("global importance: graph-ignoring model gives graph groups zero share") {
  // Features: cand0 (4 cols) + cand1 (4 cols) + 2 locales = 10 columns.
  // Build trees that split only on cand0's columns.
  TreeEnsemble ens;
  ens.schema = FeatureSchema::make({"cand0", "cand1"}, {"es", "us"});
  ens.params.lr = 1.0;
  for (int t = 0; t < 3; ++t) {
    ens.trees.emplace_back();
    RegressionTree tree;
    TreeNode root;
    root.feature = t % 4;  // always a cand0 column
    root.threshold = 0.4;
    root.left = 1;
    root.right = 2;
    tree.nodes.push_back(root);
    TreeNode l, r;
    l.value = -1.0;
    r.value = 2.0;
    tree.nodes.push_back(l);
    tree.nodes.push_back(r);
    ens.trees.back()[static_cast<std::size_t>(t % kNumLabels)] = tree;
  }
  Rng rng(308);
  std::vector<FeatureRow> rows, bg;
  for (int i = 0; i < 10; ++i) rows.push_back(random_row(rng, 10, 0.0));
  for (int i = 0; i < 5; ++i) bg.push_back(random_row(rng, 10, 0.0));
  const auto gi = global_importance(ens, rows, bg);
  CHECK(gi.share_of("cand1") == 0.0);
  CHECK(gi.share_of("locale") == 0.0);
  CHECK(gi.share_of("cand0") == Catch::Approx(1.0));
  double total = 0.0;
  for (const auto& g : gi.groups) total += g.share;
  CHECK(total == Catch::Approx(1.0));
}

TEST_CASE("global importance: dominant candidate takes the top share") {
  // cand0's columns copy the label signal; cand1's are weak noise.
  Rng rng(309);
  const auto schema = FeatureSchema::make({"cand0", "cand1"}, {"us"});
  std::vector<FeatureRow> rows;
  std::vector<EsciLabel> labels;
  for (int i = 0; i < 200; ++i) {
    const auto label = static_cast<EsciLabel>(rng.uniform_index(kNumLabels));
    FeatureRow row(static_cast<std::size_t>(schema.size()), 0.0);
    for (int c = 0; c < kNumLabels; ++c) {
      row[static_cast<std::size_t>(c)] = c == label_code(label) ? 0.85 : 0.05;
      row[static_cast<std::size_t>(kNumLabels + c)] = rng.uniform();
    }
    row[8] = 1.0;
    rows.push_back(row);
    labels.push_back(label);
  }
  GbdtParams params;
  params.iterations = 25;
  params.lr = 0.2;
  params.max_depth = 3;
  params.max_leaves = 8;
  params.bagging_freq = 0;
  const auto ens = gbdt_train(rows, labels, params, schema);
  std::vector<FeatureRow> bg(rows.begin(), rows.begin() + 20);
  std::vector<FeatureRow> eval_rows(rows.begin() + 20, rows.begin() + 80);
  const auto gi = global_importance(ens, eval_rows, bg);
  for (const auto& g : gi.groups) {
    if (g.name != "cand0") CHECK(gi.share_of("cand0") > g.share);
  }
}

TEST_CASE("relation importance renormalizes within graph candidates") {
  GlobalImportance gi;
  gi.groups = {{"semantic", 0.5, 0.5},
               {"gnn-purchases", 0.3, 0.3},
               {"gnn-adds", 0.1, 0.1},
               {"locale", 0.1, 0.1}};
  const auto rel = relation_importance(
      gi, {{"gnn-purchases", "purchases"}, {"gnn-adds", "adds"}});
  REQUIRE(rel.size() == 2);
  CHECK(rel[0].first == "purchases");
  CHECK(rel[0].second == Catch::Approx(0.75));
  CHECK(rel[1].second == Catch::Approx(0.25));
}
