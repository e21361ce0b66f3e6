#pragma once
// Core domain types for query-product relevance classification, plus the
// tab-separated file formats shared by every stage.
//
// Label taxonomy: exact / substitute / complement / irrelevant, with fixed
// integer codes 0..3. Behavioral signals: impressions, clicks, adds,
// purchases, consumes, plus the derived "any" (union) and "het-all"
// (edge-typed union) views.

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "relens/rng.hpp"

namespace relens {

// ── errors ──────────────────────────────────────────────────────────────
// Three buckets so the CLI can map failures to distinct exit codes.

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct StageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ── labels ──────────────────────────────────────────────────────────────

enum class EsciLabel : int {
  Exact = 0,
  Substitute = 1,
  Complement = 2,
  Irrelevant = 3,
};

inline constexpr int kNumLabels = 4;

inline constexpr std::array<EsciLabel, kNumLabels> kAllLabels = {
    EsciLabel::Exact, EsciLabel::Substitute, EsciLabel::Complement,
    EsciLabel::Irrelevant};

inline const char* to_string(EsciLabel label) {
  switch (label) {
    case EsciLabel::Exact: return "exact";
    case EsciLabel::Substitute: return "substitute";
    case EsciLabel::Complement: return "complement";
    case EsciLabel::Irrelevant: return "irrelevant";
  }
  throw DataError("invalid label code");
}

inline EsciLabel label_from_string(std::string_view s) {
  if (s == "exact") return EsciLabel::Exact;
  if (s == "substitute") return EsciLabel::Substitute;
  if (s == "complement") return EsciLabel::Complement;
  if (s == "irrelevant") return EsciLabel::Irrelevant;
  throw DataError("unknown label string: '" + std::string(s) + "'");
}

inline EsciLabel label_from_code(int code) {
  if (code < 0 || code >= kNumLabels) throw DataError("label code out of range");
  return static_cast<EsciLabel>(code);
}

inline int label_code(EsciLabel label) { return static_cast<int>(label); }

// ── behavioral signals ──────────────────────────────────────────────────

enum class SignalKind : int {
  Impressions = 0,
  Clicks = 1,
  Adds = 2,
  Purchases = 3,
  Consumes = 4,
  Any = 5,     // union of the five base signals, weights summed
  HetAll = 6,  // all five base signals kept edge-typed
};

inline constexpr int kNumBaseSignals = 5;

inline constexpr std::array<SignalKind, kNumBaseSignals> kBaseSignals = {
    SignalKind::Impressions, SignalKind::Clicks, SignalKind::Adds,
    SignalKind::Purchases, SignalKind::Consumes};

inline const char* to_string(SignalKind s) {
  switch (s) {
    case SignalKind::Impressions: return "impressions";
    case SignalKind::Clicks: return "clicks";
    case SignalKind::Adds: return "adds";
    case SignalKind::Purchases: return "purchases";
    case SignalKind::Consumes: return "consumes";
    case SignalKind::Any: return "any";
    case SignalKind::HetAll: return "het-all";
  }
  throw DataError("invalid signal code");
}

inline SignalKind signal_from_string(std::string_view s) {
  if (s == "impressions") return SignalKind::Impressions;
  if (s == "clicks") return SignalKind::Clicks;
  if (s == "adds") return SignalKind::Adds;
  if (s == "purchases") return SignalKind::Purchases;
  if (s == "consumes") return SignalKind::Consumes;
  if (s == "any") return SignalKind::Any;
  if (s == "het-all") return SignalKind::HetAll;
  throw DataError("unknown signal string: '" + std::string(s) + "'");
}

// ── label distributions ─────────────────────────────────────────────────

struct LabelDistribution {
  std::array<double, kNumLabels> probs{0.0, 0.0, 0.0, 0.0};

  static LabelDistribution uniform() {
    return LabelDistribution{{0.25, 0.25, 0.25, 0.25}};
  }

  double operator[](int i) const { return probs[static_cast<std::size_t>(i)]; }
  double& operator[](int i) { return probs[static_cast<std::size_t>(i)]; }

  EsciLabel argmax() const {
    int best = 0;
    for (int i = 1; i < kNumLabels; ++i) {
      if (probs[static_cast<std::size_t>(i)] > probs[static_cast<std::size_t>(best)]) best = i;
    }
    return static_cast<EsciLabel>(best);
  }

  bool is_valid(double tol = 1e-9) const {
    double sum = 0.0;
    for (double p : probs) {
      if (!(p >= 0.0 && p <= 1.0 + tol) || std::isnan(p)) return false;
      sum += p;
    }
    return std::abs(sum - 1.0) <= tol;
  }
};

inline LabelDistribution softmax4(const std::array<double, kNumLabels>& scores) {
  double mx = scores[0];
  for (double s : scores) mx = std::max(mx, s);
  LabelDistribution out;
  double z = 0.0;
  for (int i = 0; i < kNumLabels; ++i) {
    out[i] = std::exp(scores[static_cast<std::size_t>(i)] - mx);
    z += out[i];
  }
  for (int i = 0; i < kNumLabels; ++i) out[i] /= z;
  return out;
}

// ── query-product pairs ─────────────────────────────────────────────────

// One labeled example. label is absent for inference-only rows.
struct QueryProductPair {
  std::string query_id;
  std::string product_id;
  std::string query_text;
  std::string product_text;
  std::string locale;  // region tag, e.g. "us", "es", "jp"
  std::optional<EsciLabel> label;
};

// ── number formatting ───────────────────────────────────────────────────
// Shortest representation that round-trips exactly; locale-independent.

inline std::string fmt_double(double v) {
  std::array<char, 64> buf;
  auto [p, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  (void)ec;
  return std::string(buf.data(), p);
}

inline double parse_double(std::string_view s) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [p, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || p != last) {
    throw DataError("bad number: '" + std::string(s) + "'");
  }
  return v;
}

inline long long parse_int(std::string_view s) {
  long long v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) {
    throw DataError("bad integer: '" + std::string(s) + "'");
  }
  return v;
}

inline std::uint64_t parse_uint(std::string_view s) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) {
    throw DataError("bad unsigned integer: '" + std::string(s) + "'");
  }
  return v;
}

// ── field escaping ──────────────────────────────────────────────────────
// Text fields may contain anything; tab, newline and backslash are escaped
// so one record is always one line.

inline std::string escape_field(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string unescape_field(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size()) {
      ++i;
      switch (s[i]) {
        case '\\': out += '\\'; break;
        case 't': out += '\t'; break;
        case 'n': out += '\n'; break;
        case 'r': out += '\r'; break;
        default: out += '\\'; out += s[i];
      }
    } else {
      out += s[i];
    }
  }
  return out;
}

inline std::vector<std::string_view> split_tsv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return out;
}

// ── pairs file ──────────────────────────────────────────────────────────
// Headerless TSV, one record per line:
//   query_id  product_id  query_text  product_text  locale  label
// label is a lowercase word or empty for unlabeled rows.

inline std::vector<QueryProductPair> read_pairs(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open pairs file: " + path);
  std::vector<QueryProductPair> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_tsv(line);
    if (fields.size() != 6) {
      throw DataError("pairs file " + path + " line " + std::to_string(line_no) +
                      ": expected 6 fields, got " + std::to_string(fields.size()));
    }
    QueryProductPair p;
    p.query_id = unescape_field(fields[0]);
    p.product_id = unescape_field(fields[1]);
    p.query_text = unescape_field(fields[2]);
    p.product_text = unescape_field(fields[3]);
    p.locale = unescape_field(fields[4]);
    if (p.query_id.empty()) {
      throw DataError("pairs file " + path + " line " + std::to_string(line_no) +
                      ": missing query_id");
    }
    if (p.product_id.empty()) {
      throw DataError("pairs file " + path + " line " + std::to_string(line_no) +
                      ": missing product_id");
    }
    if (!fields[5].empty()) {
      try {
        p.label = label_from_string(fields[5]);
      } catch (const DataError& e) {
        throw DataError("pairs file " + path + " line " + std::to_string(line_no) +
                        ": " + e.what());
      }
    }
    pairs.push_back(std::move(p));
  }
  return pairs;
}

inline void write_pairs(const std::vector<QueryProductPair>& pairs,
                        const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write pairs file: " + path);
  for (const auto& p : pairs) {
    out << escape_field(p.query_id) << '\t' << escape_field(p.product_id) << '\t'
        << escape_field(p.query_text) << '\t' << escape_field(p.product_text)
        << '\t' << escape_field(p.locale) << '\t'
        << (p.label ? to_string(*p.label) : "") << '\n';
  }
  if (!out) throw DataError("I/O failure writing " + path);
}

// ── predictions file ────────────────────────────────────────────────────

struct PredictionRow {
  std::size_t pair_index = 0;
  LabelDistribution dist;
  EsciLabel predicted = EsciLabel::Exact;
};

inline constexpr const char* kPredictionsHeader =
    "pair_index\tp_exact\tp_substitute\tp_complement\tp_irrelevant\tpredicted";

inline void write_predictions(const std::vector<PredictionRow>& rows,
                              const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write predictions file: " + path);
  out << kPredictionsHeader << '\n';
  for (const auto& r : rows) {
    out << r.pair_index;
    for (int c = 0; c < kNumLabels; ++c) out << '\t' << fmt_double(r.dist[c]);
    out << '\t' << to_string(r.predicted) << '\n';
  }
  if (!out) throw DataError("I/O failure writing " + path);
}

inline std::vector<PredictionRow> read_predictions(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open predictions file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty predictions file: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kPredictionsHeader) {
    throw DataError("predictions file " + path + ": bad header");
  }
  std::vector<PredictionRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_tsv(line);
    if (fields.size() != 6) {
      throw DataError("predictions file " + path + " line " +
                      std::to_string(line_no) + ": expected 6 fields");
    }
    PredictionRow r;
    r.pair_index = static_cast<std::size_t>(parse_int(fields[0]));
    for (int c = 0; c < kNumLabels; ++c) r.dist[c] = parse_double(fields[1 + static_cast<std::size_t>(c)]);
    r.predicted = label_from_string(fields[5]);
    rows.push_back(r);
  }
  return rows;
}

// File digest used for determinism checks and manifests.
inline std::uint64_t file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file for digest: " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  std::array<char, 1 << 16> buf;
  while (in.read(buf.data(), static_cast<std::streamsize>(buf.size())) || in.gcount() > 0) {
    h = fnv1a64(buf.data(), static_cast<std::size_t>(in.gcount()), h);
  }
  return h;
}

inline std::string digest_hex(std::uint64_t h) {
  static const char* hexd = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = hexd[h & 0xf];
    h >>= 4;
  }
  return out;
}

}  // namespace relens
