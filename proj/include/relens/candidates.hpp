#pragma once
// Uniform candidate-model surface: anything that maps a query-product pair
// to a probability vector over the four labels. Two native families live
// behind it — the bag-of-words semantic model and the per-signal GNN —
// plus versioned checkpoints so trained candidates reload without
// retraining.

#include <fstream>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "relens/core.hpp"
#include "relens/gnn.hpp"
#include "relens/semantic.hpp"

namespace relens {

struct CandidateModel {
  std::string name;
  std::variant<SemanticCandidate, GnnCandidate> impl;

  bool requires_graph() const { return std::holds_alternative<GnnCandidate>(impl); }

  SignalKind signal() const {
    if (const auto* g = std::get_if<GnnCandidate>(&impl)) return g->signal;
    throw DataError("candidate '" + name + "' has no signal");
  }

  // Graph candidates need a subgraph; the pipeline decides whether a
  // missing one is an error or a skip.
  LabelDistribution predict(const TokenSeq& seq, const std::string& locale,
                            const Subgraph* sub) const {
    if (const auto* s = std::get_if<SemanticCandidate>(&impl)) {
      return s->predict(seq, locale);
    }
    const auto& g = std::get<GnnCandidate>(impl);
    if (!sub) {
      throw DataError("candidate '" + name + "' requires a subgraph but none was provided");
    }
    return gnn_predict(g, *sub);
  }

  std::size_t parameter_count() const {
    if (const auto* s = std::get_if<SemanticCandidate>(&impl)) return s->parameter_count();
    return std::get<GnnCandidate>(impl).parameter_count();
  }
};

inline void validate_registry(const std::vector<CandidateModel>& registry) {
  for (std::size_t i = 0; i < registry.size(); ++i) {
    if (registry[i].name.empty()) throw ConfigError("candidate with empty name");
    for (std::size_t j = i + 1; j < registry.size(); ++j) {
      if (registry[i].name == registry[j].name) {
        throw ConfigError("duplicate candidate name: '" + registry[i].name + "'");
      }
    }
  }
}

// ── checkpoints ──────────────────────────────────────────────────────────

inline constexpr const char* kSemanticCkptVersion = "relens.semantic.v1";
inline constexpr const char* kGnnCkptVersion = "relens.gnn.v1";

namespace detail {

inline void write_matrix(std::ofstream& out, const Matrix& m) {
  out << m.rows << '\t' << m.cols << '\n';
  for (int r = 0; r < m.rows; ++r) {
    const double* row = m.row(r);
    for (int c = 0; c < m.cols; ++c) {
      if (c) out << ' ';
      out << fmt_double(row[c]);
    }
    out << '\n';
  }
}

inline Matrix read_matrix(std::ifstream& in, const std::string& path) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("checkpoint " + path + ": truncated matrix");
  const auto dims = split_tsv(line);
  if (dims.size() != 2) throw DataError("checkpoint " + path + ": bad matrix dims");
  Matrix m(static_cast<int>(parse_int(dims[0])), static_cast<int>(parse_int(dims[1])));
  for (int r = 0; r < m.rows; ++r) {
    if (!std::getline(in, line)) throw DataError("checkpoint " + path + ": truncated matrix");
    std::size_t start = 0;
    for (int c = 0; c < m.cols; ++c) {
      std::size_t sp = line.find(' ', start);
      if (sp == std::string::npos) sp = line.size();
      m.at(r, c) = parse_double(std::string_view(line).substr(start, sp - start));
      start = sp + 1;
    }
  }
  return m;
}

}  // namespace detail

inline void save_candidate(const CandidateModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  if (const auto* s = std::get_if<SemanticCandidate>(&model.impl)) {
    out << kSemanticCkptVersion << '\n';
    out << "name\t" << escape_field(model.name) << '\n';
    out << "vocab\t" << s->vocab.size() << '\n';
    std::vector<std::pair<std::string, int>> entries(s->vocab.begin(), s->vocab.end());
    std::sort(entries.begin(), entries.end());
    for (const auto& [tok, idx] : entries) out << escape_field(tok) << '\t' << idx << '\n';
    out << "locales\t" << s->locales.size() << '\n';
    for (const auto& loc : s->locales) out << escape_field(loc) << '\n';
    out << "weights\n";
    detail::write_matrix(out, s->weights);
    out << "bias";
    for (double b : s->bias) out << '\t' << fmt_double(b);
    out << '\n';
  } else {
    const auto& g = std::get<GnnCandidate>(model.impl);
    out << kGnnCkptVersion << '\n';
    out << "name\t" << escape_field(model.name) << '\n';
    out << "signal\t" << to_string(g.signal) << '\n';
    out << "arch\t" << g.layers << '\t' << g.dim << '\t' << fmt_double(g.zeta) << '\t'
        << to_string(g.activation) << '\n';
    for (int k = 0; k < g.layers; ++k) {
      out << "w\t" << k << '\n';
      detail::write_matrix(out, g.w[static_cast<std::size_t>(k)]);
    }
    out << "head\n";
    detail::write_matrix(out, g.head);
  }
  if (!out) throw DataError("I/O failure writing " + path);
}

inline CandidateModel load_candidate(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError("checkpoint " + path + ": empty");

  const auto expect = [&](const char* tag) {
    if (!std::getline(in, line)) throw DataError("checkpoint " + path + ": truncated");
    const auto fields = split_tsv(line);
    if (fields.empty() || fields[0] != tag) {
      throw DataError("checkpoint " + path + ": expected '" + tag + "' line");
    }
    return fields;
  };

  CandidateModel model;
  if (line == kSemanticCkptVersion) {
    SemanticCandidate s;
    model.name = unescape_field(expect("name").at(1));
    const auto n_vocab = parse_int(expect("vocab").at(1));
    for (long long i = 0; i < n_vocab; ++i) {
      if (!std::getline(in, line)) throw DataError("checkpoint " + path + ": truncated vocab");
      const auto fields = split_tsv(line);
      if (fields.size() != 2) throw DataError("checkpoint " + path + ": bad vocab line");
      s.vocab.emplace(unescape_field(fields[0]), static_cast<int>(parse_int(fields[1])));
    }
    const auto n_locales = parse_int(expect("locales").at(1));
    for (long long i = 0; i < n_locales; ++i) {
      if (!std::getline(in, line)) throw DataError("checkpoint " + path + ": truncated locales");
      s.locales.push_back(unescape_field(line));
    }
    expect("weights");
    s.weights = detail::read_matrix(in, path);
    {
      if (!std::getline(in, line)) throw DataError("checkpoint " + path + ": missing bias");
      const auto fields = split_tsv(line);
      if (fields.size() != 1 + kNumLabels || fields[0] != "bias") {
        throw DataError("checkpoint " + path + ": bad bias line");
      }
      for (int c = 0; c < kNumLabels; ++c) s.bias[static_cast<std::size_t>(c)] = parse_double(fields[static_cast<std::size_t>(c) + 1]);
    }
    model.impl = std::move(s);
  } else if (line == kGnnCkptVersion) {
    GnnCandidate g;
    model.name = unescape_field(expect("name").at(1));
    g.signal = signal_from_string(expect("signal").at(1));
    {
      const auto fields = expect("arch");
      if (fields.size() != 5) throw DataError("checkpoint " + path + ": bad arch line");
      g.layers = static_cast<int>(parse_int(fields[1]));
      g.dim = static_cast<int>(parse_int(fields[2]));
      g.zeta = parse_double(fields[3]);
      g.activation = activation_from_string(fields[4]);
    }
    for (int k = 0; k < g.layers; ++k) {
      expect("w");
      g.w.push_back(detail::read_matrix(in, path));
    }
    expect("head");
    g.head = detail::read_matrix(in, path);
    model.impl = std::move(g);
  } else {
    throw DataError("checkpoint " + path + ": unknown version '" + line + "'");
  }
  return model;
}

}  // namespace relens
