#pragma once
// Product-text denoising: rank description tokens by TF-IDF against the
// product corpus and keep the top-gamma, then assemble the model input
// sequence  query ‖ [SEP] ‖ product'.
//
// TF is the raw in-product count, IDF uses the natural log of
// doc_count / doc_freq, and unseen tokens get doc_freq 1. Ties at the
// budget boundary are broken toward earlier positions, so the kept set
// never exceeds gamma.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "relens/core.hpp"

namespace relens {

inline constexpr const char* kSepToken = "[SEP]";

// Lowercase and split on whitespace/punctuation. ASCII letters and digits
// are word characters; bytes >= 0x80 are kept verbatim so multi-byte UTF-8
// sequences stay inside one token.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    const bool word_char =
        (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
    if (word_char) {
      current += static_cast<char>((c >= 'A' && c <= 'Z') ? c - 'A' + 'a' : c);
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

// ── corpus statistics ────────────────────────────────────────────────────

struct CorpusStats {
  std::int64_t doc_count = 0;
  std::unordered_map<std::string, std::int64_t> doc_freq;

  std::int64_t df(const std::string& token) const {
    const auto it = doc_freq.find(token);
    return it == doc_freq.end() ? 1 : it->second;  // unseen tokens: DF = 1
  }
};

inline CorpusStats fit_corpus(const std::vector<std::vector<std::string>>& products) {
  if (products.empty()) throw DataError("fit_corpus: empty corpus");
  CorpusStats stats;
  stats.doc_count = static_cast<std::int64_t>(products.size());
  std::unordered_map<std::string, std::int64_t> last_doc;
  for (std::size_t d = 0; d < products.size(); ++d) {
    for (const auto& tok : products[d]) {
      auto it = last_doc.try_emplace(tok, -1).first;
      if (it->second != static_cast<std::int64_t>(d)) {
        it->second = static_cast<std::int64_t>(d);
        ++stats.doc_freq[tok];
      }
    }
  }
  return stats;
}

inline double tfidf(std::int64_t tf, std::int64_t df, std::int64_t doc_count) {
  if (df < 1) df = 1;
  return static_cast<double>(tf) *
         std::log(static_cast<double>(doc_count) / static_cast<double>(df));
}

// Keep the top-gamma tokens by TF-IDF, original order preserved.
inline std::vector<std::string> denoise(const std::vector<std::string>& product_tokens,
                                        const CorpusStats& stats, std::size_t gamma) {
  if (gamma < 1) throw ConfigError("denoise: gamma must be >= 1");
  if (product_tokens.size() <= gamma) return product_tokens;

  std::unordered_map<std::string, std::int64_t> tf;
  for (const auto& tok : product_tokens) ++tf[tok];

  std::vector<std::size_t> order(product_tokens.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<double> score(product_tokens.size());
  for (std::size_t i = 0; i < product_tokens.size(); ++i) {
    const auto& tok = product_tokens[i];
    score[i] = tfidf(tf[tok], stats.df(tok), stats.doc_count);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (score[a] != score[b]) return score[a] > score[b];
    return a < b;
  });
  order.resize(gamma);
  std::sort(order.begin(), order.end());

  std::vector<std::string> kept;
  kept.reserve(gamma);
  for (std::size_t i : order) kept.push_back(product_tokens[i]);
  return kept;
}

// ── input sequence ───────────────────────────────────────────────────────

struct TokenSeq {
  std::vector<std::string> tokens;
  std::size_t sep_index = 0;

  std::vector<std::string> query_part() const {
    return {tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(sep_index)};
  }
  std::vector<std::string> product_part() const {
    return {tokens.begin() + static_cast<std::ptrdiff_t>(sep_index) + 1, tokens.end()};
  }
};

// query ‖ [SEP] ‖ product', truncating the product tail to fit max_len.
// The query is never truncated; a query that leaves no room is an error.
inline TokenSeq assemble(const std::vector<std::string>& query_tokens,
                         const std::vector<std::string>& product_tokens,
                         std::size_t max_len) {
  if (query_tokens.size() + 1 >= max_len) {
    throw DataError("assemble: query of length " + std::to_string(query_tokens.size()) +
                    " leaves no room for product tokens at max_len " +
                    std::to_string(max_len));
  }
  TokenSeq seq;
  seq.tokens = query_tokens;
  seq.sep_index = query_tokens.size();
  seq.tokens.push_back(kSepToken);
  const std::size_t room = max_len - query_tokens.size() - 1;
  const std::size_t take = std::min(room, product_tokens.size());
  seq.tokens.insert(seq.tokens.end(), product_tokens.begin(),
                    product_tokens.begin() + static_cast<std::ptrdiff_t>(take));
  return seq;
}

// ── denoised-product cache ───────────────────────────────────────────────
// product_id -> p'. Tokens contain no whitespace, so a space join is
// lossless. Exact-match lookups only.

struct ProductCache {
  std::unordered_map<std::string, std::vector<std::string>> entries;

  const std::vector<std::string>* find(const std::string& product_id) const {
    const auto it = entries.find(product_id);
    return it == entries.end() ? nullptr : &it->second;
  }
};

inline constexpr const char* kProductCacheVersion = "relens.denoise.v1";

inline void save_product_cache(const ProductCache& cache, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write product cache: " + path);
  out << kProductCacheVersion << '\n';
  std::vector<const std::string*> keys;
  keys.reserve(cache.entries.size());
  for (const auto& [k, v] : cache.entries) keys.push_back(&k);
  std::sort(keys.begin(), keys.end(),
            [](const std::string* a, const std::string* b) { return *a < *b; });
  for (const auto* k : keys) {
    out << escape_field(*k) << '\t';
    const auto& toks = cache.entries.at(*k);
    for (std::size_t i = 0; i < toks.size(); ++i) {
      if (i) out << ' ';
      out << toks[i];
    }
    out << '\n';
  }
  if (!out) throw DataError("I/O failure writing " + path);
}

inline ProductCache load_product_cache(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open product cache: " + path);
  std::string line;
  if (!std::getline(in, line) || line != kProductCacheVersion) {
    throw DataError("product cache " + path + ": bad version header");
  }
  ProductCache cache;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw DataError("product cache " + path + ": bad line");
    const std::string id = unescape_field(std::string_view(line).substr(0, tab));
    std::vector<std::string> toks;
    std::size_t start = tab + 1;
    while (start <= line.size()) {
      std::size_t sp = line.find(' ', start);
      if (sp == std::string::npos) sp = line.size();
      if (sp > start) toks.emplace_back(line.substr(start, sp - start));
      start = sp + 1;
    }
    cache.entries.emplace(id, std::move(toks));
  }
  return cache;
}

// ── corpus stats serialization ───────────────────────────────────────────

inline constexpr const char* kCorpusVersion = "relens.corpus.v1";

inline void save_corpus_stats(const CorpusStats& stats, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write corpus stats: " + path);
  out << kCorpusVersion << '\n';
  out << "doc_count\t" << stats.doc_count << '\n';
  std::vector<const std::string*> keys;
  keys.reserve(stats.doc_freq.size());
  for (const auto& [k, v] : stats.doc_freq) keys.push_back(&k);
  std::sort(keys.begin(), keys.end(),
            [](const std::string* a, const std::string* b) { return *a < *b; });
  for (const auto* k : keys) {
    out << escape_field(*k) << '\t' << stats.doc_freq.at(*k) << '\n';
  }
  if (!out) throw DataError("I/O failure writing " + path);
}

inline CorpusStats load_corpus_stats(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open corpus stats: " + path);
  std::string line;
  if (!std::getline(in, line) || line != kCorpusVersion) {
    throw DataError("corpus stats " + path + ": bad version header");
  }
  CorpusStats stats;
  if (!std::getline(in, line)) throw DataError("corpus stats " + path + ": truncated");
  {
    const auto fields = split_tsv(line);
    if (fields.size() != 2 || fields[0] != "doc_count") {
      throw DataError("corpus stats " + path + ": missing doc_count");
    }
    stats.doc_count = parse_int(fields[1]);
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_tsv(line);
    if (fields.size() != 2) throw DataError("corpus stats " + path + ": bad line");
    stats.doc_freq.emplace(unescape_field(fields[0]), parse_int(fields[1]));
  }
  return stats;
}

}  // namespace relens
