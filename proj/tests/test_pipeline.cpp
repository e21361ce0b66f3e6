#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <set>

#include "relens/pipeline.hpp"
#include "relens/synth.hpp"

using namespace relens;

namespace {

struct Fixture {
  std::vector<QueryProductPair> pairs;
  GraphSet graphs;
  SubgraphCache cache;
};

std::string temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "relens_test_pipeline" / name;
  std::filesystem::create_directories(dir);
  return dir.string();
}

Fixture make_fixture(int n_pairs, std::uint64_t seed) {
  SynthConfig cfg;
  cfg.seed = seed;
  cfg.n_pairs = n_pairs;
  cfg.n_queries = std::max(20, n_pairs / 4);
  cfg.n_products = std::max(40, n_pairs / 2);
  cfg.behavioral_rows = n_pairs * 5;
  const auto data = generate(cfg);

  Fixture fx;
  fx.pairs = data.pairs;
  const auto dir = temp_dir("fixture" + std::to_string(seed));
  const auto edges_path = dir + "/edges.tsv";
  write_edges(data.edges, edges_path);
  fx.graphs = load_edges(edges_path);
  fx.cache = build_cache(fx.pairs, fx.graphs, 2, 40, 2);
  return fx;
}

PipelineConfig small_config(std::uint64_t seed = 5) {
  PipelineConfig cfg;
  cfg.seed = seed;
  cfg.workers = 2;
  cfg.stacking_folds = 2;
  cfg.gamma = 32;
  cfg.max_len = 64;
  cfg.gbdt = desk_gbdt_params();
  cfg.gbdt.iterations = 25;
  cfg.gbdt.max_depth = 4;
  cfg.gbdt.max_leaves = 8;
  {
    SemanticTrainParams p;
    p.epochs = 6;
    p.lr = 0.5;
    cfg.candidates.push_back({"semantic", p});
  }
  {
    GnnTrainParams p;
    p.signal = SignalKind::Purchases;
    p.dim = 6;
    p.epochs = 2;
    p.lr = 0.1;
    cfg.candidates.push_back({"gnn-purchases", p});
  }
  return cfg;
}

}  // namespace

TEST_CASE("train_all: smoke run trains and reconciles the manifest") {
  const auto fx = make_fixture(200, 1001);
  RunManifest manifest;
  const auto model = train_all(fx.pairs, fx.cache, small_config(), &manifest);
  CHECK(model.candidates.size() == 2);
  CHECK(model.ensemble.iterations() == 25);
  CHECK(manifest.reconciles());
  // Every pair got a cache entry, so nothing is skipped.
  for (const auto& stage : manifest.stages) {
    for (const auto& [reason, count] : stage.skipped) CHECK(count == 0);
  }
  CHECK_FALSE(model.background.empty());

  // Inference over the training pairs produces one row per pair.
  const auto result = infer_batch(fx.pairs, fx.cache, model, {}, Policy::Availability, 2);
  CHECK(result.predictions.size() == fx.pairs.size());
  CHECK(result.errors.empty());
  CHECK(result.manifest.reconciles());
  for (const auto& row : result.predictions) CHECK(row.dist.is_valid(1e-9));
}

TEST_CASE("train_all: candidate failure aborts with the stage identity") {
  const auto fx = make_fixture(60, 1002);
  auto cfg = small_config();
  // An empty cache starves the graph candidate.
  SubgraphCache empty_cache;
  CHECK_THROWS_WITH(train_all(fx.pairs, empty_cache, cfg),
                    Catch::Matchers::ContainsSubstring("gnn-purchases"));
}

TEST_CASE("train_all: unlabeled rows are counted, all-unlabeled errors") {
  auto fx = make_fixture(80, 1003);
  for (std::size_t i = 0; i < 10; ++i) fx.pairs[i].label.reset();
  RunManifest manifest;
  const auto model = train_all(fx.pairs, fx.cache, small_config(), &manifest);
  (void)model;
  CHECK(manifest.stage("ingest").skipped.at("unlabeled") == 10);

  for (auto& p : fx.pairs) p.label.reset();
  CHECK_THROWS_AS(train_all(fx.pairs, fx.cache, small_config()), DataError);
}

TEST_CASE("identical seeds give identical checkpoint digests") {
  const auto fx = make_fixture(150, 1004);
  RunManifest m1, m2;
  const auto model1 = train_all(fx.pairs, fx.cache, small_config(42), &m1);
  const auto model2 = train_all(fx.pairs, fx.cache, small_config(42), &m2);
  const auto dir1 = temp_dir("digest1");
  const auto dir2 = temp_dir("digest2");
  save_model(model1, dir1, &m1);
  save_model(model2, dir2, &m2);
  REQUIRE(m1.digests.size() == m2.digests.size());
  for (const auto& [name, digest] : m1.digests) {
    CHECK(m2.digests.at(name) == digest);
  }
}

TEST_CASE("model bundle round-trips through its directory") {
  const auto fx = make_fixture(120, 1005);
  const auto model = train_all(fx.pairs, fx.cache, small_config());
  const auto dir = temp_dir("bundle");
  save_model(model, dir);
  const auto back = load_model(dir);
  CHECK(back.candidates.size() == model.candidates.size());
  CHECK(back.background.size() == model.background.size());
  const auto a = infer_batch(fx.pairs, fx.cache, model, {}, Policy::Availability, 1);
  const auto b = infer_batch(fx.pairs, fx.cache, back, {}, Policy::Availability, 1);
  REQUIRE(a.predictions.size() == b.predictions.size());
  for (std::size_t i = 0; i < a.predictions.size(); ++i) {
    for (int c = 0; c < kNumLabels; ++c) {
      CHECK(a.predictions[i].dist[c] == b.predictions[i].dist[c]);
    }
  }
}

TEST_CASE("policies: availability scores a superset and agrees on covered pairs") {
  const auto fx = make_fixture(200, 1006);
  const auto model = train_all(fx.pairs, fx.cache, small_config(), nullptr);

  // Rebuild the cache with 20% of the pairs missing.
  std::vector<QueryProductPair> covered(fx.pairs.begin(),
                                        fx.pairs.begin() + 160);
  const auto partial_cache = build_cache(covered, fx.graphs, 2, 40, 2);

  const auto rel = infer_batch(fx.pairs, partial_cache, model, {}, Policy::Reliability, 2);
  const auto avail = infer_batch(fx.pairs, partial_cache, model, {}, Policy::Availability, 2);

  // Reliability scores exactly the covered pairs; availability scores all.
  std::set<std::size_t> covered_keys;
  for (std::size_t i = 0; i < fx.pairs.size(); ++i) {
    if (partial_cache.find(fx.pairs[i].query_id, fx.pairs[i].product_id)) {
      covered_keys.insert(i);
    }
  }
  CHECK(rel.predictions.size() == covered_keys.size());
  CHECK(avail.predictions.size() == fx.pairs.size());
  CHECK(avail.errors.empty());
  CHECK(rel.predictions.size() + rel.errors.size() == fx.pairs.size());

  // Scored sets are nested and identical where both score.
  std::map<std::size_t, LabelDistribution> avail_by_index;
  for (const auto& row : avail.predictions) avail_by_index[row.pair_index] = row.dist;
  for (const auto& row : rel.predictions) {
    CHECK(covered_keys.count(row.pair_index) == 1);
    const auto& other = avail_by_index.at(row.pair_index);
    for (int c = 0; c < kNumLabels; ++c) {
      CHECK(row.dist[c] == Catch::Approx(other[c]).margin(1e-9));
    }
  }
}

TEST_CASE("inference is identical across worker counts") {
  const auto fx = make_fixture(180, 1007);
  const auto model = train_all(fx.pairs, fx.cache, small_config());
  const auto w1 = infer_batch(fx.pairs, fx.cache, model, {}, Policy::Availability, 1);
  const auto w8 = infer_batch(fx.pairs, fx.cache, model, {}, Policy::Availability, 8);
  REQUIRE(w1.predictions.size() == w8.predictions.size());
  for (std::size_t i = 0; i < w1.predictions.size(); ++i) {
    CHECK(w1.predictions[i].pair_index == w8.predictions[i].pair_index);
    for (int c = 0; c < kNumLabels; ++c) {
      CHECK(w1.predictions[i].dist[c] == w8.predictions[i].dist[c]);
    }
  }
}

TEST_CASE("infer: selection subsets leave the rest as missing markers") {
  const auto fx = make_fixture(100, 1008);
  const auto model = train_all(fx.pairs, fx.cache, small_config());
  const auto semantic_only =
      infer_batch(fx.pairs, fx.cache, model, {"semantic"}, Policy::Reliability, 1);
  CHECK(semantic_only.predictions.size() == fx.pairs.size());
  // The GBDT still runs; outputs just differ from the full-candidate run.
  const auto full = infer_batch(fx.pairs, fx.cache, model, {}, Policy::Reliability, 1);
  bool any_different = false;
  for (std::size_t i = 0; i < full.predictions.size(); ++i) {
    if (std::abs(full.predictions[i].dist[0] - semantic_only.predictions[i].dist[0]) > 1e-12) {
      any_different = true;
    }
  }
  CHECK(any_different);
  CHECK_THROWS_AS(infer_batch(fx.pairs, fx.cache, model, {"ghost"}, Policy::Reliability, 1),
                  DataError);
}

TEST_CASE("cross_validate: 100 rows split into 10 holdout and 72/18 folds") {
  const auto fx = make_fixture(100, 1009);
  auto cfg = small_config();
  const auto result = cross_validate(fx.pairs, fx.cache, cfg, 5, 0.1);
  CHECK(result.holdout_indices.size() == 10);
  REQUIRE(result.fold_metrics.size() == 5);
  // Fold sizes: 90 rows in 5 stratified folds -> each validation fold has
  // exactly 18 rows, each training side 72.
  long long total_validation = 0;
  for (const auto& rep : result.fold_metrics) total_validation += rep.total;
  CHECK(total_validation == 90);
  for (const auto& rep : result.fold_metrics) CHECK(rep.total == 18);
  CHECK(result.test_metrics.total == 10);
  CHECK(result.candidate_test_metrics.size() == cfg.candidates.size());
}

TEST_CASE("cross_validate: fold union is the full non-holdout set") {
  const auto fx = make_fixture(90, 1010);
  std::vector<EsciLabel> labels;
  std::vector<std::string> keys;
  for (const auto& p : fx.pairs) {
    labels.push_back(*p.label);
    keys.push_back(pair_key(p));
  }
  const auto folds = stratified_folds(labels, keys, 5, 77);
  std::array<int, 5> counts{};
  for (const int f : folds) {
    REQUIRE(f >= 0);
    REQUIRE(f < 5);
    ++counts[static_cast<std::size_t>(f)];
  }
  int total = 0;
  for (const int c : counts) total += c;
  CHECK(total == 90);
  // Fold sizes differ by at most one.
  const auto [mn, mx] = std::minmax_element(counts.begin(), counts.end());
  CHECK(*mx - *mn <= 1);
}

TEST_CASE("cross_validate: fold assignment is invariant to input order") {
  const auto fx = make_fixture(80, 1011);
  std::vector<EsciLabel> labels;
  std::vector<std::string> keys;
  for (const auto& p : fx.pairs) {
    labels.push_back(*p.label);
    keys.push_back(pair_key(p));
  }
  const auto folds = stratified_folds(labels, keys, 4, 123);
  std::map<std::string, int> by_key;
  for (std::size_t i = 0; i < keys.size(); ++i) by_key[keys[i]] = folds[i];

  // Reverse the input order; every pair must keep its fold.
  auto rev_labels = labels;
  auto rev_keys = keys;
  std::reverse(rev_labels.begin(), rev_labels.end());
  std::reverse(rev_keys.begin(), rev_keys.end());
  const auto rev_folds = stratified_folds(rev_labels, rev_keys, 4, 123);
  for (std::size_t i = 0; i < rev_keys.size(); ++i) {
    CHECK(rev_folds[i] == by_key.at(rev_keys[i]));
  }
}

TEST_CASE("cross_validate: perturbing a holdout label changes no checkpoint digest") {
  const auto fx = make_fixture(110, 1012);
  auto cfg = small_config(9);

  RunManifest m1;
  const auto r1 = cross_validate(fx.pairs, fx.cache, cfg, 3, 0.1, &m1);
  REQUIRE_FALSE(r1.holdout_indices.empty());

  auto perturbed = fx.pairs;
  const std::size_t victim = r1.holdout_indices.front();
  const auto old_label = *perturbed[victim].label;
  perturbed[victim].label =
      old_label == EsciLabel::Exact ? EsciLabel::Irrelevant : EsciLabel::Exact;

  RunManifest m2;
  const auto r2 = cross_validate(perturbed, fx.cache, cfg, 3, 0.1, &m2);

  const auto dir1 = temp_dir("leak1");
  const auto dir2 = temp_dir("leak2");
  RunManifest d1, d2;
  save_model(r1.model, dir1, &d1);
  save_model(r2.model, dir2, &d2);
  for (const auto& [name, digest] : d1.digests) {
    CHECK(d2.digests.at(name) == digest);
  }
}

TEST_CASE("cross_validate rejects tiny datasets") {
  const auto fx = make_fixture(60, 1013);
  std::vector<QueryProductPair> tiny(fx.pairs.begin(), fx.pairs.begin() + 8);
  CHECK_THROWS_AS(cross_validate(tiny, fx.cache, small_config(), 5, 0.1), DataError);
}

TEST_CASE("class weights: balanced mode inverts class frequencies") {
  std::vector<EsciLabel> labels;
  for (int i = 0; i < 60; ++i) labels.push_back(EsciLabel::Exact);
  for (int i = 0; i < 20; ++i) labels.push_back(EsciLabel::Substitute);
  for (int i = 0; i < 20; ++i) labels.push_back(EsciLabel::Irrelevant);
  const auto w = compute_class_weights(labels, true);
  CHECK(w[0] == Catch::Approx(100.0 / (4.0 * 60.0)));
  CHECK(w[1] == Catch::Approx(100.0 / (4.0 * 20.0)));
  CHECK(w[2] == 1.0);  // absent class keeps weight 1
  const auto uniform = compute_class_weights(labels, false);
  for (const double v : uniform) CHECK(v == 1.0);
}
