#pragma once
// Deployed-model selection under an additive inference budget.
//
// Initial setup ranks candidates by importance (descending, names break
// ties) and adds them in order. The default rank-prefix mode stops at the
// first candidate that would exceed the budget; the optional greedy-skip
// mode skips unaffordable candidates and keeps scanning. Continuous
// deployment follows the last-in-first-out rule: a new candidate replaces
// the most recently inserted model only when it has strictly higher
// importance and the swapped set still fits the budget.

#include <algorithm>
#include <fstream>
#include <string>
#include <vector>

#include "relens/core.hpp"

namespace relens {

struct CandidateScore {
  std::string name;
  double cost = 0.0;        // inference metric units (Lambda)
  double importance = 0.0;  // global SHAP share (Omega)
};

enum class SelectionMode { RankPrefix, GreedySkip };

struct SelectionState {
  std::string metric = "cost";
  double budget = 0.0;
  std::vector<CandidateScore> selected;  // insertion order (LIFO tail at back)
  std::vector<CandidateScore> pool;      // every candidate ever considered

  double selected_cost() const {
    double s = 0.0;
    for (const auto& c : selected) s += c.cost;
    return s;
  }
  bool contains(const std::string& name) const {
    return std::any_of(selected.begin(), selected.end(),
                       [&](const CandidateScore& c) { return c.name == name; });
  }
};

namespace selection_detail {

inline std::vector<CandidateScore> ranked(std::vector<CandidateScore> candidates) {
  std::sort(candidates.begin(), candidates.end(),
            [](const CandidateScore& a, const CandidateScore& b) {
              if (a.importance != b.importance) return a.importance > b.importance;
              return a.name < b.name;
            });
  return candidates;
}

}  // namespace selection_detail

inline SelectionState select_initial(const std::vector<CandidateScore>& candidates,
                                     double budget, const std::string& metric = "cost",
                                     SelectionMode mode = SelectionMode::RankPrefix) {
  for (const auto& c : candidates) {
    if (c.cost < 0.0 || c.importance < 0.0) {
      throw ConfigError("select_initial: negative cost or importance for '" + c.name + "'");
    }
  }
  if (budget < 0.0) throw ConfigError("select_initial: negative budget");

  SelectionState state;
  state.metric = metric;
  state.budget = budget;
  state.pool = candidates;

  double used = 0.0;
  for (const auto& c : selection_detail::ranked(candidates)) {
    if (used + c.cost > budget) {
      if (mode == SelectionMode::RankPrefix) break;  // stop at first violation
      continue;                                      // greedy-skip keeps scanning
    }
    used += c.cost;
    state.selected.push_back(c);
  }
  return state;
}

// LIFO swap. An empty state falls back to initial-selection semantics for
// the single candidate. The candidate joins the pool either way.
inline SelectionState select_continuous(const SelectionState& state,
                                        const CandidateScore& candidate) {
  if (candidate.cost < 0.0 || candidate.importance < 0.0) {
    throw ConfigError("select_continuous: negative cost or importance");
  }
  SelectionState next = state;
  if (!std::any_of(next.pool.begin(), next.pool.end(),
                   [&](const CandidateScore& c) { return c.name == candidate.name; })) {
    next.pool.push_back(candidate);
  }
  if (next.selected.empty()) {
    if (candidate.cost <= next.budget) next.selected.push_back(candidate);
    return next;
  }
  const CandidateScore& last = next.selected.back();
  const double swapped_cost = next.selected_cost() - last.cost + candidate.cost;
  if (candidate.importance > last.importance && swapped_cost <= next.budget) {
    next.selected.back() = candidate;
  }
  return next;
}

// ── audit ────────────────────────────────────────────────────────────────

struct AuditReport {
  double budget = 0.0;
  double used = 0.0;
  double utilization = 0.0;       // used / budget (0 when budget is 0)
  double importance_selected = 0.0;
  double importance_total = 0.0;
  double coverage = 0.0;          // selected importance / total importance
  bool dominance = false;         // sum(selected) >= sum(pool - selected)
  std::size_t selected_count = 0;
  std::size_t pool_count = 0;
};

inline AuditReport audit(const SelectionState& state) {
  AuditReport rep;
  rep.budget = state.budget;
  rep.used = state.selected_cost();
  rep.utilization = state.budget > 0.0 ? rep.used / state.budget : 0.0;
  rep.selected_count = state.selected.size();
  rep.pool_count = state.pool.size();
  for (const auto& c : state.selected) rep.importance_selected += c.importance;
  for (const auto& c : state.pool) rep.importance_total += c.importance;
  rep.coverage =
      rep.importance_total > 0.0 ? rep.importance_selected / rep.importance_total : 0.0;
  const double rest = rep.importance_total - rep.importance_selected;
  rep.dominance = rep.importance_selected >= rest;
  return rep;
}

inline std::string audit_table(const AuditReport& rep) {
  std::string out;
  out += "budget\t" + fmt_double(rep.budget) + '\n';
  out += "used\t" + fmt_double(rep.used) + '\n';
  out += "utilization\t" + fmt_double(rep.utilization) + '\n';
  out += "coverage\t" + fmt_double(rep.coverage) + '\n';
  out += "dominance\t" + std::string(rep.dominance ? "true" : "false") + '\n';
  out += "selected\t" + std::to_string(rep.selected_count) + '\n';
  out += "pool\t" + std::to_string(rep.pool_count) + '\n';
  return out;
}

// ── persistence ──────────────────────────────────────────────────────────

inline constexpr const char* kSelectionVersion = "relens.selection.v1";

inline void save_selection(const SelectionState& state, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write selection state: " + path);
  out << kSelectionVersion << '\n';
  out << "metric\t" << escape_field(state.metric) << '\n';
  out << "budget\t" << fmt_double(state.budget) << '\n';
  out << "selected\t" << state.selected.size() << '\n';
  for (const auto& c : state.selected) {
    out << escape_field(c.name) << '\t' << fmt_double(c.cost) << '\t'
        << fmt_double(c.importance) << '\n';
  }
  out << "pool\t" << state.pool.size() << '\n';
  for (const auto& c : state.pool) {
    out << escape_field(c.name) << '\t' << fmt_double(c.cost) << '\t'
        << fmt_double(c.importance) << '\n';
  }
  if (!out) throw DataError("I/O failure writing " + path);
}

inline SelectionState load_selection(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open selection state: " + path);
  std::string line;
  if (!std::getline(in, line) || line != kSelectionVersion) {
    throw DataError("selection state " + path + ": bad version header");
  }
  const auto next = [&](const char* tag) {
    if (!std::getline(in, line)) throw DataError("selection state " + path + ": truncated");
    const auto fields = split_tsv(line);
    if (fields.size() < 2 || fields[0] != tag) {
      throw DataError("selection state " + path + ": expected '" + tag + "'");
    }
    return fields;
  };
  SelectionState state;
  state.metric = unescape_field(next("metric")[1]);
  state.budget = parse_double(next("budget")[1]);
  const auto read_list = [&](const char* tag, std::vector<CandidateScore>& into) {
    const auto count = parse_int(next(tag)[1]);
    for (long long i = 0; i < count; ++i) {
      if (!std::getline(in, line)) throw DataError("selection state " + path + ": truncated");
      const auto f = split_tsv(line);
      if (f.size() != 3) throw DataError("selection state " + path + ": bad candidate line");
      into.push_back({unescape_field(f[0]), parse_double(f[1]), parse_double(f[2])});
    }
  };
  read_list("selected", state.selected);
  read_list("pool", state.pool);
  return state;
}

}  // namespace relens
