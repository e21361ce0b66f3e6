#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "relens/core.hpp"
#include "relens/rng.hpp"

using namespace relens;

namespace {

std::string temp_path(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "relens_test_core";
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

}  // namespace

TEST_CASE("label codes are stable and bijective") {
  CHECK(label_code(EsciLabel::Exact) == 0);
  CHECK(label_code(EsciLabel::Substitute) == 1);
  CHECK(label_code(EsciLabel::Complement) == 2);
  CHECK(label_code(EsciLabel::Irrelevant) == 3);
  for (const auto label : kAllLabels) {
    CHECK(label_from_string(to_string(label)) == label);
    CHECK(label_from_code(label_code(label)) == label);
  }
  CHECK(label_from_string("exact") == EsciLabel::Exact);
  CHECK_THROWS_AS(label_from_string("Exact"), DataError);
  CHECK_THROWS_AS(label_from_code(4), DataError);
}

TEST_CASE("signal names round-trip") {
  for (int s = 0; s < kNumBaseSignals; ++s) {
    const auto kind = static_cast<SignalKind>(s);
    CHECK(signal_from_string(to_string(kind)) == kind);
  }
  CHECK(signal_from_string("any") == SignalKind::Any);
  CHECK(signal_from_string("het-all") == SignalKind::HetAll);
  CHECK_THROWS_AS(signal_from_string("views"), DataError);
}

TEST_CASE("pairs file: single valid row") {
  const auto path = temp_path("one_row.tsv");
  write_text(path, "q1\tp1\tred shoe\tcomfy red shoe\tus\texact\n");
  const auto pairs = read_pairs(path);
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].query_id == "q1");
  CHECK(pairs[0].product_id == "p1");
  CHECK(pairs[0].locale == "us");
  REQUIRE(pairs[0].label.has_value());
  CHECK(*pairs[0].label == EsciLabel::Exact);
}

TEST_CASE("pairs file: missing query_id errors with the line number") {
  const auto path = temp_path("missing_qid.tsv");
  write_text(path, "\tp1\ttext\ttext\tus\texact\n");
  CHECK_THROWS_WITH(read_pairs(path), Catch::Matchers::ContainsSubstring("line 1"));
}

TEST_CASE("pairs file: unknown label string errors") {
  const auto path = temp_path("bad_label.tsv");
  write_text(path, "q1\tp1\ttext\ttext\tus\tperfect\n");
  CHECK_THROWS_WITH(read_pairs(path), Catch::Matchers::ContainsSubstring("unknown label"));
}

TEST_CASE("pairs file: missing file errors") {
  CHECK_THROWS_AS(read_pairs(temp_path("does_not_exist.tsv")), DataError);
}

TEST_CASE("pairs round-trip preserves order and content") {
  Rng rng(99);
  std::vector<QueryProductPair> pairs;
  const std::string alphabet = "abc \txy\nz\\d";
  for (int i = 0; i < 100; ++i) {
    QueryProductPair p;
    p.query_id = "q" + std::to_string(i);
    p.product_id = "p" + std::to_string(static_cast<int>(rng.uniform_index(40)));
    for (int t = 0; t < 8; ++t) p.query_text += alphabet[rng.uniform_index(alphabet.size())];
    for (int t = 0; t < 20; ++t) p.product_text += alphabet[rng.uniform_index(alphabet.size())];
    p.locale = rng.uniform() < 0.5 ? "us" : "jp";
    if (rng.uniform() < 0.8) {
      p.label = static_cast<EsciLabel>(rng.uniform_index(kNumLabels));
    }
    pairs.push_back(p);
  }
  const auto path = temp_path("roundtrip.tsv");
  write_pairs(pairs, path);
  const auto back = read_pairs(path);
  REQUIRE(back.size() == pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    CHECK(back[i].query_id == pairs[i].query_id);
    CHECK(back[i].product_id == pairs[i].product_id);
    CHECK(back[i].query_text == pairs[i].query_text);
    CHECK(back[i].product_text == pairs[i].product_text);
    CHECK(back[i].locale == pairs[i].locale);
    CHECK(back[i].label == pairs[i].label);
  }
}

TEST_CASE("predictions: empty sequence writes header only") {
  const auto path = temp_path("empty_preds.tsv");
  write_predictions({}, path);
  std::ifstream in(path);
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == kPredictionsHeader);
  CHECK_FALSE(std::getline(in, line));
}

TEST_CASE("predictions: one-hot row has argmax exact") {
  PredictionRow row;
  row.pair_index = 0;
  row.dist = LabelDistribution{{1.0, 0.0, 0.0, 0.0}};
  row.predicted = row.dist.argmax();
  CHECK(row.predicted == EsciLabel::Exact);
  const auto path = temp_path("onehot.tsv");
  write_predictions({row}, path);
  const auto back = read_predictions(path);
  REQUIRE(back.size() == 1);
  CHECK(back[0].predicted == EsciLabel::Exact);
}

TEST_CASE("predictions: 100 random rows round-trip to 1e-9") {
  Rng rng(4242);
  std::vector<PredictionRow> rows;
  for (int i = 0; i < 100; ++i) {
    PredictionRow row;
    row.pair_index = static_cast<std::size_t>(i);
    std::array<double, kNumLabels> raw;
    double total = 0.0;
    for (auto& v : raw) {
      v = rng.uniform() + 1e-6;
      total += v;
    }
    for (int c = 0; c < kNumLabels; ++c) row.dist[c] = raw[static_cast<std::size_t>(c)] / total;
    row.predicted = row.dist.argmax();
    rows.push_back(row);
  }
  const auto path = temp_path("random_preds.tsv");
  write_predictions(rows, path);
  const auto back = read_predictions(path);
  REQUIRE(back.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(back[i].pair_index == rows[i].pair_index);
    CHECK(back[i].predicted == rows[i].predicted);
    for (int c = 0; c < kNumLabels; ++c) {
      CHECK(back[i].dist[c] == Catch::Approx(rows[i].dist[c]).margin(1e-9));
    }
  }
}

TEST_CASE("field escaping survives tabs, newlines and backslashes") {
  Rng rng(7);
  const std::string alphabet = "ab\t\n\r\\c ";
  for (int trial = 0; trial < 200; ++trial) {
    std::string s;
    const auto len = rng.uniform_index(24);
    for (std::uint64_t i = 0; i < len; ++i) s += alphabet[rng.uniform_index(alphabet.size())];
    const auto escaped = escape_field(s);
    CHECK(escaped.find('\t') == std::string::npos);
    CHECK(escaped.find('\n') == std::string::npos);
    CHECK(unescape_field(escaped) == s);
  }
}

TEST_CASE("doubles round-trip through text exactly") {
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    const double v = (rng.uniform() - 0.5) * std::pow(10.0, rng.uniform(-12, 12));
    CHECK(parse_double(fmt_double(v)) == v);
  }
  CHECK(std::isnan(parse_double(fmt_double(std::numeric_limits<double>::quiet_NaN()))));
}

TEST_CASE("softmax of zeros is uniform") {
  const auto dist = softmax4({0.0, 0.0, 0.0, 0.0});
  for (int c = 0; c < kNumLabels; ++c) CHECK(dist[c] == Catch::Approx(0.25));
  CHECK(dist.is_valid());
}
