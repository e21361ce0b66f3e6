#pragma once
// JSON configuration for the CLI: one structured file drives every stage,
// with flags overriding file values. Unknown keys are rejected so typos
// fail loudly.

#include <fstream>
#include <string>

#include "json.hpp"
#include "relens/pipeline.hpp"
#include "relens/selection.hpp"
#include "relens/synth.hpp"

namespace relens {

using Json = nlohmann::json;

namespace config_detail {

inline void check_keys(const Json& obj, const std::vector<std::string>& allowed,
                       const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError("config: unknown key '" + key + "' in " + where);
    }
  }
}

template <typename T>
void maybe(const Json& obj, const char* key, T& into) {
  if (obj.contains(key)) into = obj.at(key).get<T>();
}

}  // namespace config_detail

inline Json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  Json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ConfigError("config file " + path + ": " + e.what());
  }
  return j;
}

// ── synth section ────────────────────────────────────────────────────────

inline SynthConfig parse_synth_config(const Json& j) {
  SynthConfig cfg;
  config_detail::check_keys(
      j,
      {"seed", "queries", "products", "pairs", "behavioral_rows", "signal_proportions",
       "label_proportions", "correlation", "pair_coverage", "categories",
       "vocab_per_category", "marker_pool", "marker_own", "marker_cross", "product_reuse",
       "locale_mix"},
      "synth");
  config_detail::maybe(j, "seed", cfg.seed);
  config_detail::maybe(j, "queries", cfg.n_queries);
  config_detail::maybe(j, "products", cfg.n_products);
  config_detail::maybe(j, "pairs", cfg.n_pairs);
  config_detail::maybe(j, "behavioral_rows", cfg.behavioral_rows);
  config_detail::maybe(j, "categories", cfg.n_categories);
  config_detail::maybe(j, "vocab_per_category", cfg.vocab_per_category);
  config_detail::maybe(j, "marker_pool", cfg.marker_pool);
  config_detail::maybe(j, "marker_own", cfg.marker_own);
  config_detail::maybe(j, "marker_cross", cfg.marker_cross);
  config_detail::maybe(j, "product_reuse", cfg.product_reuse);
  const auto signal_array = [&](const char* key, std::array<double, kNumBaseSignals>& into) {
    if (!j.contains(key)) return;
    const auto& obj = j.at(key);
    for (int s = 0; s < kNumBaseSignals; ++s) {
      const char* name = to_string(static_cast<SignalKind>(s));
      if (obj.contains(name)) into[static_cast<std::size_t>(s)] = obj.at(name).get<double>();
    }
  };
  signal_array("signal_proportions", cfg.signal_proportions);
  signal_array("correlation", cfg.correlation);
  signal_array("pair_coverage", cfg.pair_coverage);
  if (j.contains("label_proportions")) {
    const auto& obj = j.at("label_proportions");
    for (int c = 0; c < kNumLabels; ++c) {
      const char* name = to_string(static_cast<EsciLabel>(c));
      if (obj.contains(name)) cfg.label_proportions[static_cast<std::size_t>(c)] = obj.at(name).get<double>();
    }
  }
  if (j.contains("locale_mix")) {
    cfg.locale_mix.clear();
    for (const auto& [loc, w] : j.at("locale_mix").items()) {
      cfg.locale_mix.emplace_back(loc, w.get<double>());
    }
  }
  return cfg;
}

// ── pipeline section ─────────────────────────────────────────────────────

inline CandidateSpec parse_candidate_spec(const Json& j) {
  config_detail::check_keys(j,
                            {"name", "type", "signal", "dim", "layers", "zeta", "lr",
                             "epochs", "batch", "activation"},
                            "candidate");
  CandidateSpec spec;
  spec.name = j.at("name").get<std::string>();
  const std::string type = j.at("type").get<std::string>();
  if (type == "semantic") {
    SemanticTrainParams p;
    config_detail::maybe(j, "lr", p.lr);
    config_detail::maybe(j, "epochs", p.epochs);
    config_detail::maybe(j, "batch", p.batch_size);
    spec.params = p;
  } else if (type == "gnn") {
    GnnTrainParams p;
    if (j.contains("signal")) p.signal = signal_from_string(j.at("signal").get<std::string>());
    config_detail::maybe(j, "dim", p.dim);
    config_detail::maybe(j, "layers", p.layers);
    config_detail::maybe(j, "zeta", p.zeta);
    config_detail::maybe(j, "lr", p.lr);
    config_detail::maybe(j, "epochs", p.epochs);
    config_detail::maybe(j, "batch", p.batch_size);
    if (j.contains("activation")) {
      p.activation = activation_from_string(j.at("activation").get<std::string>());
    }
    spec.params = p;
  } else {
    throw ConfigError("config: unknown candidate type '" + type + "'");
  }
  return spec;
}

inline PipelineConfig parse_pipeline_config(const Json& j) {
  PipelineConfig cfg;
  cfg.gbdt = desk_gbdt_params();
  config_detail::check_keys(j,
                            {"seed", "workers", "policy", "stacking_folds", "denoise",
                             "graph", "class_weights", "background_rows", "candidates",
                             "gbdt", "selection", "synth"},
                            "pipeline config");
  config_detail::maybe(j, "seed", cfg.seed);
  config_detail::maybe(j, "workers", cfg.workers);
  if (j.contains("policy")) cfg.policy = policy_from_string(j.at("policy").get<std::string>());
  config_detail::maybe(j, "stacking_folds", cfg.stacking_folds);
  config_detail::maybe(j, "background_rows", cfg.background_rows);
  if (j.contains("denoise")) {
    const auto& d = j.at("denoise");
    config_detail::check_keys(d, {"gamma", "max_len"}, "denoise");
    config_detail::maybe(d, "gamma", cfg.gamma);
    config_detail::maybe(d, "max_len", cfg.max_len);
  }
  if (j.contains("graph")) {
    const auto& g = j.at("graph");
    config_detail::check_keys(g, {"k", "cap"}, "graph");
    config_detail::maybe(g, "k", cfg.k_hops);
    config_detail::maybe(g, "cap", cfg.cap);
  }
  if (j.contains("class_weights")) {
    const std::string mode = j.at("class_weights").get<std::string>();
    if (mode == "balanced") cfg.balanced_class_weights = true;
    else if (mode == "uniform") cfg.balanced_class_weights = false;
    else throw ConfigError("config: class_weights must be 'balanced' or 'uniform'");
  }
  if (j.contains("candidates")) {
    for (const auto& c : j.at("candidates")) cfg.candidates.push_back(parse_candidate_spec(c));
  }
  if (j.contains("gbdt")) {
    const auto& g = j.at("gbdt");
    config_detail::check_keys(g,
                              {"iterations", "lr", "leaves", "depth", "bagging_freq",
                               "bagging_fraction", "lambda_l2", "mode"},
                              "gbdt");
    config_detail::maybe(g, "iterations", cfg.gbdt.iterations);
    config_detail::maybe(g, "lr", cfg.gbdt.lr);
    config_detail::maybe(g, "leaves", cfg.gbdt.max_leaves);
    config_detail::maybe(g, "depth", cfg.gbdt.max_depth);
    config_detail::maybe(g, "bagging_freq", cfg.gbdt.bagging_freq);
    config_detail::maybe(g, "bagging_fraction", cfg.gbdt.bagging_fraction);
    config_detail::maybe(g, "lambda_l2", cfg.gbdt.lambda_l2);
    if (g.contains("mode")) {
      const std::string mode = g.at("mode").get<std::string>();
      if (mode == "average") cfg.gbdt.mode = ScoreMode::Average;
      else if (mode == "shrinkage") cfg.gbdt.mode = ScoreMode::Shrinkage;
      else throw ConfigError("config: gbdt mode must be 'shrinkage' or 'average'");
    }
  }
  return cfg;
}

// Selection block: metric name, budget, per-candidate cost overrides.
struct SelectionConfig {
  std::string metric = "cost";
  double budget = 0.0;
  std::map<std::string, double> costs;
  SelectionMode mode = SelectionMode::RankPrefix;
};

inline SelectionConfig parse_selection_config(const Json& j) {
  SelectionConfig cfg;
  config_detail::check_keys(j, {"metric", "budget", "costs", "mode"}, "selection");
  config_detail::maybe(j, "metric", cfg.metric);
  config_detail::maybe(j, "budget", cfg.budget);
  if (j.contains("costs")) {
    for (const auto& [name, cost] : j.at("costs").items()) {
      cfg.costs[name] = cost.get<double>();
    }
  }
  if (j.contains("mode")) {
    const std::string mode = j.at("mode").get<std::string>();
    if (mode == "rank-prefix") cfg.mode = SelectionMode::RankPrefix;
    else if (mode == "greedy-skip") cfg.mode = SelectionMode::GreedySkip;
    else throw ConfigError("config: selection mode must be 'rank-prefix' or 'greedy-skip'");
  }
  return cfg;
}

// ── manifest serialization ───────────────────────────────────────────────

inline Json manifest_to_json(const RunManifest& manifest) {
  Json j;
  j["seed"] = manifest.seed;
  j["stages"] = Json::array();
  for (const auto& s : manifest.stages) {
    Json stage;
    stage["name"] = s.name;
    stage["seconds"] = s.seconds;
    stage["rows_in"] = s.rows_in;
    stage["rows_out"] = s.rows_out;
    stage["skipped"] = Json::object();
    for (const auto& [reason, count] : s.skipped) stage["skipped"][reason] = count;
    j["stages"].push_back(stage);
  }
  j["digests"] = Json::object();
  for (const auto& [name, digest] : manifest.digests) j["digests"][name] = digest;
  return j;
}

inline void save_manifest(const RunManifest& manifest, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write manifest: " + path);
  out << manifest_to_json(manifest).dump(2) << '\n';
}

}  // namespace relens
