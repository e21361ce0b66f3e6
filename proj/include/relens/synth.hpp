#pragma once
// Synthetic desk-scale dataset generator. Reproduces the structural
// properties the pipeline claims depend on:
//   - behavioral edge rows split across the five signals by a configured
//     mix (defaults follow the production edge-distribution table, where
//     proportions are taken over behavioral rows plus labeled pair rows);
//   - per-signal association with the relevance label via a multiplier
//     exp(knob * (relevance - 1.5)) applied when sampling which labeled
//     pairs carry the signal — knob 0 means independence, and the default
//     knobs make purchases/adds far more label-correlated than
//     clicks/impressions;
//   - product texts drawn from a label-and-category-conditioned
//     vocabulary, with query-token overlap for exact matches, so the
//     semantic candidate has a learnable but imperfect signal.
//
// Generation is single-threaded and fully determined by the seed.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "relens/core.hpp"
#include "relens/denoiser.hpp"
#include "relens/rng.hpp"

namespace relens {

struct SynthConfig {
  std::uint64_t seed = 7;
  int n_queries = 4000;
  int n_products = 18000;
  int n_pairs = 20000;
  long long behavioral_rows = 120000;
  // Relative mix across impressions/clicks/adds/purchases/consumes;
  // normalized internally, defaults are the production percentages.
  std::array<double, kNumBaseSignals> signal_proportions{40.15, 49.86, 5.25, 1.93, 0.17};
  // Relative mix across exact/substitute/complement/irrelevant.
  std::array<double, kNumLabels> label_proportions{1.72, 0.58, 0.08, 0.27};
  // Per-signal label-association strength (0 = independent).
  std::array<double, kNumBaseSignals> correlation{0.05, 0.15, 0.9, 2.2, 1.5};
  // Fraction of labeled pairs carrying each signal before tilting.
  std::array<double, kNumBaseSignals> pair_coverage{0.45, 0.55, 0.14, 0.11, 0.01};
  int n_categories = 40;
  int vocab_per_category = 30;
  int marker_pool = 10;        // label-marker vocabulary size per label
  double marker_own = 0.6;     // P(product text carries its own label's marker)
  double marker_cross = 0.05;  // P(it carries some other label's marker)
  double product_reuse = 0.15; // P(a pair reuses an existing product)
  std::vector<std::pair<std::string, double>> locale_mix{
      {"us", 0.6}, {"es", 0.25}, {"jp", 0.15}};
};

// Relevance scale used for correlation accounting: E=3, S=2, C=1, I=0.
inline double relevance_score(EsciLabel label) {
  switch (label) {
    case EsciLabel::Exact: return 3.0;
    case EsciLabel::Substitute: return 2.0;
    case EsciLabel::Complement: return 1.0;
    case EsciLabel::Irrelevant: return 0.0;
  }
  return 0.0;
}

struct SynthStats {
  std::array<long long, kNumBaseSignals> edge_rows{};
  std::array<long long, kNumLabels> label_rows{};
  long long universe_rows = 0;  // edge rows + labeled pair rows
  std::array<double, kNumBaseSignals> edge_share{};   // of the universe
  std::array<double, kNumLabels> label_share{};       // of the universe
  std::array<double, kNumBaseSignals> label_correlation{};  // point-biserial
};

namespace synth_detail {

inline std::array<long long, kNumBaseSignals> signal_budgets(const SynthConfig& cfg) {
  double total = 0.0;
  for (const double p : cfg.signal_proportions) {
    if (p < 0.0) throw ConfigError("synth: negative signal proportion");
    total += p;
  }
  if (total <= 0.0) throw ConfigError("synth: signal proportions sum to zero");
  // Largest-remainder allocation so the budget is met exactly.
  std::array<long long, kNumBaseSignals> out{};
  std::array<double, kNumBaseSignals> exact{};
  long long assigned = 0;
  for (int s = 0; s < kNumBaseSignals; ++s) {
    exact[static_cast<std::size_t>(s)] =
        static_cast<double>(cfg.behavioral_rows) * cfg.signal_proportions[static_cast<std::size_t>(s)] / total;
    out[static_cast<std::size_t>(s)] = static_cast<long long>(std::floor(exact[static_cast<std::size_t>(s)]));
    assigned += out[static_cast<std::size_t>(s)];
  }
  std::array<int, kNumBaseSignals> order{0, 1, 2, 3, 4};
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const double ra = exact[static_cast<std::size_t>(a)] - std::floor(exact[static_cast<std::size_t>(a)]);
    const double rb = exact[static_cast<std::size_t>(b)] - std::floor(exact[static_cast<std::size_t>(b)]);
    if (ra != rb) return ra > rb;
    return a < b;
  });
  for (int i = 0; assigned < cfg.behavioral_rows; ++i) {
    ++out[static_cast<std::size_t>(order[static_cast<std::size_t>(i % kNumBaseSignals)])];
    ++assigned;
  }
  return out;
}

inline std::vector<EsciLabel> label_quota(const SynthConfig& cfg, Rng& rng) {
  double total = 0.0;
  for (const double p : cfg.label_proportions) {
    if (p < 0.0) throw ConfigError("synth: negative label proportion");
    total += p;
  }
  if (total <= 0.0) throw ConfigError("synth: label proportions sum to zero");
  std::array<long long, kNumLabels> counts{};
  std::array<double, kNumLabels> exact{};
  long long assigned = 0;
  for (int c = 0; c < kNumLabels; ++c) {
    exact[static_cast<std::size_t>(c)] = cfg.n_pairs * cfg.label_proportions[static_cast<std::size_t>(c)] / total;
    counts[static_cast<std::size_t>(c)] = static_cast<long long>(std::floor(exact[static_cast<std::size_t>(c)]));
    assigned += counts[static_cast<std::size_t>(c)];
  }
  std::array<int, kNumLabels> order{0, 1, 2, 3};
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const double ra = exact[static_cast<std::size_t>(a)] - std::floor(exact[static_cast<std::size_t>(a)]);
    const double rb = exact[static_cast<std::size_t>(b)] - std::floor(exact[static_cast<std::size_t>(b)]);
    if (ra != rb) return ra > rb;
    return a < b;
  });
  for (int i = 0; assigned < cfg.n_pairs; ++i) {
    ++counts[static_cast<std::size_t>(order[static_cast<std::size_t>(i % kNumLabels)])];
    ++assigned;
  }
  std::vector<EsciLabel> quota;
  quota.reserve(static_cast<std::size_t>(cfg.n_pairs));
  for (int c = 0; c < kNumLabels; ++c) {
    for (long long i = 0; i < counts[static_cast<std::size_t>(c)]; ++i) {
      quota.push_back(static_cast<EsciLabel>(c));
    }
  }
  rng.shuffle(quota);
  return quota;
}

inline std::string category_token(int category, int k) {
  return "c" + std::to_string(category) + "w" + std::to_string(k);
}

inline std::string marker_token(EsciLabel label, int k) {
  static const char* tags[kNumLabels] = {"mke", "mks", "mkc", "mki"};
  return std::string(tags[label_code(label)]) + std::to_string(k);
}

inline const std::string& pick_locale(const SynthConfig& cfg, Rng& rng) {
  double total = 0.0;
  for (const auto& [loc, w] : cfg.locale_mix) total += w;
  double x = rng.uniform() * total;
  for (const auto& [loc, w] : cfg.locale_mix) {
    x -= w;
    if (x <= 0.0) return loc;
  }
  return cfg.locale_mix.back().first;
}

}  // namespace synth_detail

struct SynthDataset {
  std::vector<QueryProductPair> pairs;
  struct EdgeRow {
    std::string query_id, product_id;
    SignalKind signal;
    double weight;
  };
  std::vector<EdgeRow> edges;
  SynthStats stats;
};

inline SynthDataset generate(const SynthConfig& cfg) {
  if (cfg.n_queries < 1 || cfg.n_products < 1 || cfg.n_pairs < 1 ||
      cfg.behavioral_rows < 0 || cfg.n_categories < 2 || cfg.vocab_per_category < 4 ||
      cfg.locale_mix.empty()) {
    throw ConfigError("synth: invalid configuration");
  }
  const auto budgets = synth_detail::signal_budgets(cfg);
  for (int s = 0; s < kNumBaseSignals; ++s) {
    // Each on-pair edge needs a distinct pair and each background edge a
    // distinct (q, p) slot; fail early if the universe cannot host them.
    const double universe = static_cast<double>(cfg.n_queries) * cfg.n_products;
    if (static_cast<double>(budgets[static_cast<std::size_t>(s)]) > 0.8 * universe) {
      throw ConfigError("synth: infeasible proportions, signal budget exceeds slot universe");
    }
  }

  Rng root(cfg.seed);
  Rng rng_query = root.fork(1);
  Rng rng_pairs = root.fork(2);
  Rng rng_text = root.fork(3);
  Rng rng_edges = root.fork(4);

  // Queries: category, locale, 2-4 category tokens.
  struct Query {
    int category;
    std::string locale;
    std::string text;
  };
  std::vector<Query> queries(static_cast<std::size_t>(cfg.n_queries));
  for (int i = 0; i < cfg.n_queries; ++i) {
    auto& q = queries[static_cast<std::size_t>(i)];
    q.category = static_cast<int>(rng_query.uniform_index(static_cast<std::uint64_t>(cfg.n_categories)));
    q.locale = synth_detail::pick_locale(cfg, rng_query);
    const int n_toks = 2 + static_cast<int>(rng_query.uniform_index(3));
    for (int t = 0; t < n_toks; ++t) {
      if (t) q.text += ' ';
      q.text += synth_detail::category_token(
          q.category, static_cast<int>(rng_query.uniform_index(
                          static_cast<std::uint64_t>(cfg.vocab_per_category))));
    }
  }

  // Products are created lazily; text is conditioned on the label of the
  // pair that created them, so reused products carry label noise.
  struct Product {
    int category = 0;
    std::string text;
  };
  std::vector<Product> products;
  std::vector<std::vector<int>> by_category(static_cast<std::size_t>(cfg.n_categories));

  SynthDataset data;
  data.pairs.reserve(static_cast<std::size_t>(cfg.n_pairs));
  const auto quota = synth_detail::label_quota(cfg, rng_pairs);
  std::set<std::pair<int, int>> used_pairs;

  const auto make_product = [&](int category, EsciLabel label, const Query& q) -> int {
    Product p;
    p.category = category;
    const int n_base = 4 + static_cast<int>(rng_text.uniform_index(6));
    std::vector<std::string> toks;
    for (int t = 0; t < n_base; ++t) {
      toks.push_back(synth_detail::category_token(
          category, static_cast<int>(rng_text.uniform_index(
                        static_cast<std::uint64_t>(cfg.vocab_per_category)))));
    }
    for (int m = 0; m < kNumLabels; ++m) {
      const double pr = m == label_code(label) ? cfg.marker_own : cfg.marker_cross;
      if (rng_text.uniform() < pr) {
        const int reps = 2 + static_cast<int>(rng_text.uniform_index(2));
        for (int r = 0; r < reps; ++r) {
          toks.push_back(synth_detail::marker_token(
              static_cast<EsciLabel>(m),
              static_cast<int>(rng_text.uniform_index(static_cast<std::uint64_t>(cfg.marker_pool)))));
        }
      }
    }
    // Exact matches share query tokens; substitutes sometimes do.
    const auto query_tokens = tokenize(q.text);
    if (!query_tokens.empty()) {
      int copies = 0;
      if (label == EsciLabel::Exact) copies = 2 + static_cast<int>(rng_text.uniform_index(2));
      else if (label == EsciLabel::Substitute && rng_text.uniform() < 0.3) copies = 1;
      for (int cpy = 0; cpy < copies; ++cpy) {
        toks.push_back(query_tokens[rng_text.uniform_index(query_tokens.size())]);
      }
    }
    for (std::size_t t = 0; t < toks.size(); ++t) {
      if (t) p.text += ' ';
      p.text += toks[t];
    }
    const int idx = static_cast<int>(products.size());
    products.push_back(std::move(p));
    by_category[static_cast<std::size_t>(category)].push_back(idx);
    return idx;
  };

  for (int i = 0; i < cfg.n_pairs; ++i) {
    const EsciLabel label = quota[static_cast<std::size_t>(i)];
    int q_idx = 0, p_idx = -1;
    for (int attempt = 0; attempt < 256 && p_idx < 0; ++attempt) {
      q_idx = static_cast<int>(rng_pairs.uniform_index(static_cast<std::uint64_t>(cfg.n_queries)));
      const Query& q = queries[static_cast<std::size_t>(q_idx)];
      int category;
      switch (label) {
        case EsciLabel::Exact:
        case EsciLabel::Substitute: category = q.category; break;
        case EsciLabel::Complement: category = (q.category + 1) % cfg.n_categories; break;
        default: {
          category = static_cast<int>(rng_pairs.uniform_index(static_cast<std::uint64_t>(cfg.n_categories - 1)));
          if (category >= q.category) ++category;
        }
      }
      const auto& pool = by_category[static_cast<std::size_t>(category)];
      int candidate = -1;
      const bool can_create = static_cast<int>(products.size()) < cfg.n_products;
      if (attempt >= 64 && !products.empty()) {
        // Category-faithful placement keeps colliding with used pairs;
        // widen to the whole catalog rather than fail.
        candidate = static_cast<int>(rng_pairs.uniform_index(products.size()));
      } else if (!pool.empty() && (rng_pairs.uniform() < cfg.product_reuse || !can_create)) {
        candidate = pool[rng_pairs.uniform_index(pool.size())];
      } else if (can_create) {
        candidate = make_product(category, label, q);
      } else if (!pool.empty()) {
        candidate = pool[rng_pairs.uniform_index(pool.size())];
      } else if (!products.empty()) {
        candidate = static_cast<int>(rng_pairs.uniform_index(products.size()));
      } else {
        continue;
      }
      if (used_pairs.emplace(q_idx, candidate).second) p_idx = candidate;
    }
    if (p_idx < 0) {
      throw ConfigError("synth: could not place pair " + std::to_string(i) +
                        "; increase queries or products");
    }
    QueryProductPair pair;
    pair.query_id = "q" + std::to_string(q_idx);
    pair.product_id = "p" + std::to_string(p_idx);
    pair.query_text = queries[static_cast<std::size_t>(q_idx)].text;
    pair.product_text = products[static_cast<std::size_t>(p_idx)].text;
    pair.locale = queries[static_cast<std::size_t>(q_idx)].locale;
    pair.label = label;
    data.pairs.push_back(std::move(pair));
  }

  // Behavioral edges: a tilted sample of labeled pairs carries each
  // signal; the remaining budget lands on random background slots.
  std::set<std::tuple<int, int, int>> used_edges;
  std::array<std::vector<char>, kNumBaseSignals> pair_has_signal;
  for (auto& v : pair_has_signal) v.assign(static_cast<std::size_t>(cfg.n_pairs), 0);
  std::map<std::pair<int, int>, int> pair_row;  // (q, p) -> pair index
  for (int i = 0; i < cfg.n_pairs; ++i) {
    const auto& pr = data.pairs[static_cast<std::size_t>(i)];
    pair_row[{static_cast<int>(parse_int(std::string_view(pr.query_id).substr(1))),
              static_cast<int>(parse_int(std::string_view(pr.product_id).substr(1)))}] = i;
  }

  for (int s = 0; s < kNumBaseSignals; ++s) {
    const long long budget = budgets[static_cast<std::size_t>(s)];
    const long long want_on_pairs = std::min<long long>(
        budget, std::llround(cfg.pair_coverage[static_cast<std::size_t>(s)] * cfg.n_pairs));

    // Weighted sample without replacement via exponential keys.
    std::vector<std::pair<double, int>> keyed(static_cast<std::size_t>(cfg.n_pairs));
    for (int i = 0; i < cfg.n_pairs; ++i) {
      const double rel = relevance_score(*data.pairs[static_cast<std::size_t>(i)].label);
      const double w = std::exp(cfg.correlation[static_cast<std::size_t>(s)] * (rel - 1.5));
      double u = rng_edges.uniform();
      while (u <= 0.0) u = rng_edges.uniform();
      keyed[static_cast<std::size_t>(i)] = {-std::log(u) / w, i};
    }
    std::sort(keyed.begin(), keyed.end());
    long long emitted = 0;
    for (long long i = 0; i < want_on_pairs && i < static_cast<long long>(keyed.size()); ++i) {
      const int pi = keyed[static_cast<std::size_t>(i)].second;
      const auto& pr = data.pairs[static_cast<std::size_t>(pi)];
      const int q_idx = static_cast<int>(parse_int(std::string_view(pr.query_id).substr(1)));
      const int p_idx = static_cast<int>(parse_int(std::string_view(pr.product_id).substr(1)));
      if (!used_edges.emplace(q_idx, p_idx, s).second) continue;
      const double weight = 1.0 + static_cast<double>(rng_edges.uniform_index(3));
      data.edges.push_back({pr.query_id, pr.product_id, static_cast<SignalKind>(s), weight});
      pair_has_signal[static_cast<std::size_t>(s)][static_cast<std::size_t>(pi)] = 1;
      ++emitted;
    }
    long long guard = 0;
    while (emitted < budget) {
      if (++guard > budget * 64 + 4096) {
        throw StageError("synth: infeasible proportions, cannot place background edges");
      }
      const int q_idx = static_cast<int>(rng_edges.uniform_index(static_cast<std::uint64_t>(cfg.n_queries)));
      const int p_idx = static_cast<int>(rng_edges.uniform_index(static_cast<std::uint64_t>(
          std::max(1, static_cast<int>(products.size())))));
      if (products.empty()) throw StageError("synth: no products for background edges");
      if (!used_edges.emplace(q_idx, p_idx, s).second) continue;
      const double weight = 1.0 + static_cast<double>(rng_edges.uniform_index(3));
      data.edges.push_back({"q" + std::to_string(q_idx), "p" + std::to_string(p_idx),
                            static_cast<SignalKind>(s), weight});
      // Background edges can land on labeled pairs; the realized
      // correlation accounting must see them.
      const auto hit = pair_row.find({q_idx, p_idx});
      if (hit != pair_row.end()) {
        pair_has_signal[static_cast<std::size_t>(s)][static_cast<std::size_t>(hit->second)] = 1;
      }
      ++emitted;
    }
    data.stats.edge_rows[static_cast<std::size_t>(s)] = emitted;
  }

  // Realized statistics.
  for (const auto& pr : data.pairs) {
    ++data.stats.label_rows[static_cast<std::size_t>(label_code(*pr.label))];
  }
  long long universe = static_cast<long long>(data.pairs.size());
  for (const long long c : data.stats.edge_rows) universe += c;
  data.stats.universe_rows = universe;
  for (int s = 0; s < kNumBaseSignals; ++s) {
    data.stats.edge_share[static_cast<std::size_t>(s)] =
        static_cast<double>(data.stats.edge_rows[static_cast<std::size_t>(s)]) / static_cast<double>(universe);
  }
  for (int c = 0; c < kNumLabels; ++c) {
    data.stats.label_share[static_cast<std::size_t>(c)] =
        static_cast<double>(data.stats.label_rows[static_cast<std::size_t>(c)]) / static_cast<double>(universe);
  }
  {
    std::vector<double> rel(data.pairs.size());
    for (std::size_t i = 0; i < data.pairs.size(); ++i) {
      rel[i] = relevance_score(*data.pairs[i].label);
    }
    double mean_y = 0.0;
    for (const double y : rel) mean_y += y;
    mean_y /= static_cast<double>(rel.size());
    double var_y = 0.0;
    for (const double y : rel) var_y += (y - mean_y) * (y - mean_y);
    var_y /= static_cast<double>(rel.size());
    for (int s = 0; s < kNumBaseSignals; ++s) {
      const auto& has = pair_has_signal[static_cast<std::size_t>(s)];
      long long n1 = 0;
      double sum1 = 0.0;
      for (std::size_t i = 0; i < has.size(); ++i) {
        if (has[i]) {
          ++n1;
          sum1 += rel[i];
        }
      }
      const long long n0 = static_cast<long long>(has.size()) - n1;
      if (n1 == 0 || n0 == 0 || var_y <= 0.0) {
        data.stats.label_correlation[static_cast<std::size_t>(s)] = 0.0;
        continue;
      }
      const double mean1 = sum1 / static_cast<double>(n1);
      const double mean0 = (mean_y * static_cast<double>(has.size()) - sum1) / static_cast<double>(n0);
      const double p1 = static_cast<double>(n1) / static_cast<double>(has.size());
      data.stats.label_correlation[static_cast<std::size_t>(s)] =
          (mean1 - mean0) * std::sqrt(p1 * (1.0 - p1)) / std::sqrt(var_y);
    }
  }
  return data;
}

inline void write_edges(const std::vector<SynthDataset::EdgeRow>& edges,
                        const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write edges file: " + path);
  for (const auto& e : edges) {
    out << escape_field(e.query_id) << '\t' << escape_field(e.product_id) << '\t'
        << to_string(e.signal) << '\t' << fmt_double(e.weight) << '\n';
  }
  if (!out) throw DataError("I/O failure writing " + path);
}

// ── describe ─────────────────────────────────────────────────────────────
// Recomputes the dataset statistics from the files alone.

inline SynthStats describe(const std::string& pairs_path, const std::string& edges_path) {
  SynthStats stats;
  std::vector<QueryProductPair> pairs = read_pairs(pairs_path);
  std::map<std::pair<std::string, std::string>, std::array<char, kNumBaseSignals>> pair_signals;
  std::vector<std::size_t> labeled;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (pairs[i].label) {
      ++stats.label_rows[static_cast<std::size_t>(label_code(*pairs[i].label))];
      labeled.push_back(i);
      pair_signals.emplace(std::make_pair(pairs[i].query_id, pairs[i].product_id),
                           std::array<char, kNumBaseSignals>{});
    }
  }

  {
    std::ifstream in(edges_path, std::ios::binary);
    if (!in) throw DataError("cannot open edge file: " + edges_path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      const auto fields = split_tsv(line);
      if (fields.size() != 4) {
        throw DataError("edge file " + edges_path + " line " + std::to_string(line_no) +
                        ": expected 4 fields");
      }
      const SignalKind sig = signal_from_string(fields[2]);
      if (sig == SignalKind::Any || sig == SignalKind::HetAll) {
        throw DataError("edge file " + edges_path + ": derived signal in storage");
      }
      ++stats.edge_rows[static_cast<std::size_t>(sig)];
      const auto it = pair_signals.find(
          {unescape_field(fields[0]), unescape_field(fields[1])});
      if (it != pair_signals.end()) {
        it->second[static_cast<std::size_t>(sig)] = 1;
      }
    }
  }

  long long universe = 0;
  for (const long long c : stats.label_rows) universe += c;
  for (const long long c : stats.edge_rows) universe += c;
  stats.universe_rows = universe;
  if (universe > 0) {
    for (int s = 0; s < kNumBaseSignals; ++s) {
      stats.edge_share[static_cast<std::size_t>(s)] =
          static_cast<double>(stats.edge_rows[static_cast<std::size_t>(s)]) / static_cast<double>(universe);
    }
    for (int c = 0; c < kNumLabels; ++c) {
      stats.label_share[static_cast<std::size_t>(c)] =
          static_cast<double>(stats.label_rows[static_cast<std::size_t>(c)]) / static_cast<double>(universe);
    }
  }

  if (!labeled.empty()) {
    std::vector<double> rel;
    std::array<std::vector<char>, kNumBaseSignals> has;
    rel.reserve(labeled.size());
    for (auto& v : has) v.reserve(labeled.size());
    for (const std::size_t i : labeled) {
      rel.push_back(relevance_score(*pairs[i].label));
      const auto& sigs = pair_signals.at({pairs[i].query_id, pairs[i].product_id});
      for (int s = 0; s < kNumBaseSignals; ++s) {
        has[static_cast<std::size_t>(s)].push_back(sigs[static_cast<std::size_t>(s)]);
      }
    }
    double mean_y = 0.0;
    for (const double y : rel) mean_y += y;
    mean_y /= static_cast<double>(rel.size());
    double var_y = 0.0;
    for (const double y : rel) var_y += (y - mean_y) * (y - mean_y);
    var_y /= static_cast<double>(rel.size());
    for (int s = 0; s < kNumBaseSignals; ++s) {
      long long n1 = 0;
      double sum1 = 0.0;
      for (std::size_t i = 0; i < rel.size(); ++i) {
        if (has[static_cast<std::size_t>(s)][i]) {
          ++n1;
          sum1 += rel[i];
        }
      }
      const long long n0 = static_cast<long long>(rel.size()) - n1;
      if (n1 == 0 || n0 == 0 || var_y <= 0.0) continue;
      const double mean1 = sum1 / static_cast<double>(n1);
      const double mean0 =
          (mean_y * static_cast<double>(rel.size()) - sum1) / static_cast<double>(n0);
      const double p1 = static_cast<double>(n1) / static_cast<double>(rel.size());
      stats.label_correlation[static_cast<std::size_t>(s)] =
          (mean1 - mean0) * std::sqrt(p1 * (1.0 - p1)) / std::sqrt(var_y);
    }
  }
  return stats;
}

inline std::string stats_table(const SynthStats& stats) {
  std::string out = "relation\trows\tshare\tlabel_correlation\n";
  for (int s = 0; s < kNumBaseSignals; ++s) {
    out += std::string(to_string(static_cast<SignalKind>(s))) + '\t' +
           std::to_string(stats.edge_rows[static_cast<std::size_t>(s)]) + '\t' +
           fmt_double(stats.edge_share[static_cast<std::size_t>(s)]) + '\t' +
           fmt_double(stats.label_correlation[static_cast<std::size_t>(s)]) + '\n';
  }
  for (int c = 0; c < kNumLabels; ++c) {
    out += std::string(to_string(static_cast<EsciLabel>(c))) + '\t' +
           std::to_string(stats.label_rows[static_cast<std::size_t>(c)]) + '\t' +
           fmt_double(stats.label_share[static_cast<std::size_t>(c)]) + "\t-\n";
  }
  out += "total\t" + std::to_string(stats.universe_rows) + "\t1\t-\n";
  return out;
}

}  // namespace relens
