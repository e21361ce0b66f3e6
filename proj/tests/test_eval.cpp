#include <catch2/catch_amalgamated.hpp>

#include "relens/eval.hpp"
#include "relens/rng.hpp"

using namespace relens;

namespace {
const auto E = EsciLabel::Exact;
const auto S = EsciLabel::Substitute;
const auto C = EsciLabel::Complement;
const auto I = EsciLabel::Irrelevant;
}  // namespace

TEST_CASE("perfect predictions score 1 everywhere") {
  const std::vector<EsciLabel> truth{E, S, C, I, E, S};
  const auto rep = score(truth, truth);
  CHECK(rep.accuracy == 1.0);
  CHECK(rep.macro_f1 == 1.0);
  CHECK(rep.weighted_f1 == 1.0);
}

TEST_CASE("hand-computed confusion example") {
  // truth [E,E,S,I], predicted [E,S,S,I]
  const auto rep = score({E, E, S, I}, {E, S, S, I});
  CHECK(rep.accuracy == Catch::Approx(0.75));
  // Per class: E has P=1, R=1/2, F1=2/3; S has P=1/2, R=1, F1=2/3; I has F1=1.
  // C is absent from both truth and predictions, so macro averages 3 classes.
  CHECK(rep.macro_f1 == Catch::Approx((2.0 / 3 + 2.0 / 3 + 1.0) / 3.0));
  CHECK(rep.weighted_f1 == Catch::Approx((2 * (2.0 / 3) + 1 * (2.0 / 3) + 1 * 1.0) / 4.0));
}

TEST_CASE("constant predictor on a uniform truth scores 0.25 accuracy") {
  const auto rep = score({E, S, C, I}, {E, E, E, E});
  CHECK(rep.accuracy == Catch::Approx(0.25));
}

TEST_CASE("class present in truth but never predicted contributes zero F1") {
  const auto rep = score({E, E, C}, {E, E, E});
  // E: F1 = 2*(2/3)*1/(2/3+1) = 0.8; C: F1 = 0. Macro over {E, C}.
  CHECK(rep.macro_f1 == Catch::Approx((0.8 + 0.0) / 2.0));
}

TEST_CASE("macro and weighted coincide under equal supports") {
  Rng rng(55);
  std::vector<EsciLabel> truth, pred;
  for (int c = 0; c < kNumLabels; ++c) {
    for (int i = 0; i < 25; ++i) {
      truth.push_back(static_cast<EsciLabel>(c));
      pred.push_back(static_cast<EsciLabel>(rng.uniform_index(kNumLabels)));
    }
  }
  const auto rep = score(truth, pred);
  // All four classes get predictions with high probability at n=100.
  CHECK(rep.macro_f1 == Catch::Approx(rep.weighted_f1).margin(1e-12));
}

TEST_CASE("metrics are invariant to joint permutation") {
  Rng rng(56);
  std::vector<EsciLabel> truth, pred;
  for (int i = 0; i < 80; ++i) {
    truth.push_back(static_cast<EsciLabel>(rng.uniform_index(kNumLabels)));
    pred.push_back(static_cast<EsciLabel>(rng.uniform_index(kNumLabels)));
  }
  const auto rep1 = score(truth, pred);
  std::vector<std::size_t> order(truth.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<EsciLabel> truth2, pred2;
  for (const std::size_t i : order) {
    truth2.push_back(truth[i]);
    pred2.push_back(pred[i]);
  }
  const auto rep2 = score(truth2, pred2);
  CHECK(rep1.accuracy == rep2.accuracy);
  CHECK(rep1.macro_f1 == rep2.macro_f1);
  CHECK(rep1.weighted_f1 == rep2.weighted_f1);
}

TEST_CASE("score rejects empty and mismatched input") {
  CHECK_THROWS_AS(score({}, {}), DataError);
  CHECK_THROWS_AS(score({E}, {E, S}), DataError);
}

TEST_CASE("compare sorts descending and keeps input order on ties") {
  MetricsReport a, b, c;
  a.macro_f1 = 0.5;
  b.macro_f1 = 0.9;
  c.macro_f1 = 0.5;
  const auto ranked = compare({{"a", a}, {"b", b}, {"c", c}}, MetricName::MacroF1);
  REQUIRE(ranked.size() == 3);
  CHECK(ranked[0].name == "b");
  CHECK(ranked[1].name == "a");  // tie with c, input order preserved
  CHECK(ranked[2].name == "c");
}

TEST_CASE("compare single report and sort-oracle agreement") {
  MetricsReport solo;
  solo.accuracy = 0.7;
  CHECK(compare({{"only", solo}}, MetricName::Accuracy).size() == 1);

  Rng rng(57);
  std::vector<NamedReport> reports;
  for (int i = 0; i < 10; ++i) {
    MetricsReport r;
    r.macro_f1 = rng.uniform();
    reports.push_back({"m" + std::to_string(i), r});
  }
  const auto ranked = compare(reports, MetricName::MacroF1);
  for (std::size_t i = 1; i < ranked.size(); ++i) {
    CHECK(ranked[i - 1].report.macro_f1 >= ranked[i].report.macro_f1);
  }
  CHECK_THROWS_AS(compare({}, MetricName::MacroF1), DataError);
}

TEST_CASE("tables render") {
  MetricsReport r;
  r.accuracy = 0.5;
  const auto table = metrics_table({{"m", r}});
  CHECK(table.find("model\taccuracy") == 0);
  CHECK(metrics_detail(r).find("accuracy\t0.5") == 0);
}
