#pragma once
// End-to-end orchestration: candidate training with out-of-fold stacking,
// ensemble fitting, batched inference with the reliability/availability
// policies, and the cross-validation harness.
//
// Meta-features for the ensemble come from out-of-fold candidate
// predictions (each row is predicted by candidates trained without its
// fold), so ensemble metrics stay honest; the shipped candidate
// checkpoints are retrained on the full training set afterwards.
//
// Policies at inference: Reliability errors a pair when any selected
// candidate lacks its input; Availability scores with whatever candidates
// can run and lets the ensemble's missing-value routing absorb the rest.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "relens/candidates.hpp"
#include "relens/core.hpp"
#include "relens/denoiser.hpp"
#include "relens/eval.hpp"
#include "relens/gbdt.hpp"
#include "relens/graphstore.hpp"
#include "relens/parallel.hpp"
#include "relens/rng.hpp"

namespace relens {

enum class Policy { Reliability, Availability };

inline const char* to_string(Policy p) {
  return p == Policy::Reliability ? "reliability" : "availability";
}
inline Policy policy_from_string(std::string_view s) {
  if (s == "reliability") return Policy::Reliability;
  if (s == "availability") return Policy::Availability;
  throw ConfigError("unknown policy: '" + std::string(s) + "'");
}

struct CandidateSpec {
  std::string name;
  std::variant<SemanticTrainParams, GnnTrainParams> params;

  bool is_graph() const { return std::holds_alternative<GnnTrainParams>(params); }
  SignalKind signal() const { return std::get<GnnTrainParams>(params).signal; }
};

struct PipelineConfig {
  std::uint64_t seed = 7;
  int workers = 1;
  Policy policy = Policy::Availability;
  int stacking_folds = 3;
  std::size_t gamma = 48;    // denoise budget
  std::size_t max_len = 96;  // assembled sequence cap
  int k_hops = 2;
  int cap = 100;
  bool balanced_class_weights = true;
  int background_rows = 100;
  std::vector<CandidateSpec> candidates;
  GbdtParams gbdt;
};

inline std::vector<CandidateSpec> default_candidates() {
  std::vector<CandidateSpec> specs;
  {
    SemanticTrainParams p;
    p.lr = 0.4;
    p.epochs = 30;
    p.batch_size = 256;
    specs.push_back({"semantic", p});
  }
  const auto gnn_spec = [](const char* name, SignalKind signal) {
    GnnTrainParams p;
    p.signal = signal;
    p.dim = 8;
    p.layers = 2;
    p.zeta = 0.0;
    p.lr = 0.15;
    p.epochs = 4;
    p.batch_size = 32;
    return CandidateSpec{name, p};
  };
  specs.push_back(gnn_spec("gnn-purchases", SignalKind::Purchases));
  specs.push_back(gnn_spec("gnn-adds", SignalKind::Adds));
  specs.push_back(gnn_spec("gnn-clicks", SignalKind::Clicks));
  specs.push_back(gnn_spec("gnn-any", SignalKind::Any));
  specs.push_back(gnn_spec("gnn-het-all", SignalKind::HetAll));
  return specs;
}

// Desk-scale ensemble defaults; the library-level GbdtParams defaults keep
// the full-scale production settings.
inline GbdtParams desk_gbdt_params() {
  GbdtParams p;
  p.iterations = 160;
  p.lr = 0.1;
  p.max_leaves = 15;
  p.max_depth = 6;
  p.bagging_freq = 0;
  p.bagging_fraction = 1.0;
  return p;
}

// ── manifest ─────────────────────────────────────────────────────────────

struct RunManifest {
  struct Stage {
    std::string name;
    double seconds = 0.0;
    long long rows_in = 0;
    long long rows_out = 0;
    std::map<std::string, long long> skipped;  // reason -> count
  };
  std::vector<Stage> stages;
  std::map<std::string, std::string> digests;  // artifact -> fnv64 hex
  std::uint64_t seed = 0;

  Stage& stage(const std::string& name) {
    for (auto& s : stages) {
      if (s.name == name) return s;
    }
    stages.push_back({name, 0.0, 0, 0, {}});
    return stages.back();
  }

  bool reconciles() const {
    for (const auto& s : stages) {
      long long skipped = 0;
      for (const auto& [reason, count] : s.skipped) skipped += count;
      if (s.rows_in != s.rows_out + skipped) return false;
    }
    return true;
  }
};

namespace pipeline_detail {

class StageTimer {
 public:
  explicit StageTimer(RunManifest* manifest, const std::string& name)
      : manifest_(manifest), name_(name), start_(std::chrono::steady_clock::now()) {}
  ~StageTimer() {
    if (manifest_) {
      manifest_->stage(name_).seconds +=
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }
  }

 private:
  RunManifest* manifest_;
  std::string name_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace pipeline_detail

// ── shared row preparation ───────────────────────────────────────────────

struct PreparedRow {
  bool ok = false;
  std::string error;
  TokenSeq tokens;
  const Subgraph* subgraph = nullptr;  // null when not cached
};

inline std::array<double, kNumLabels> compute_class_weights(
    const std::vector<EsciLabel>& labels, bool balanced) {
  std::array<double, kNumLabels> weights{1.0, 1.0, 1.0, 1.0};
  if (!balanced || labels.empty()) return weights;
  std::array<long long, kNumLabels> counts{};
  for (const auto& l : labels) ++counts[static_cast<std::size_t>(label_code(l))];
  for (int c = 0; c < kNumLabels; ++c) {
    if (counts[static_cast<std::size_t>(c)] > 0) {
      weights[static_cast<std::size_t>(c)] =
          static_cast<double>(labels.size()) /
          (static_cast<double>(kNumLabels) * static_cast<double>(counts[static_cast<std::size_t>(c)]));
    }
  }
  return weights;
}

// Corpus statistics over distinct products (first occurrence wins).
inline CorpusStats fit_pairs_corpus(const std::vector<QueryProductPair>& pairs) {
  std::vector<std::vector<std::string>> docs;
  std::map<std::string, bool> seen;
  for (const auto& p : pairs) {
    if (seen.emplace(p.product_id, true).second) docs.push_back(tokenize(p.product_text));
  }
  return fit_corpus(docs);
}

inline std::vector<PreparedRow> prepare_rows(const std::vector<QueryProductPair>& pairs,
                                             const SubgraphCache& cache,
                                             const CorpusStats& corpus,
                                             const PipelineConfig& cfg) {
  std::vector<PreparedRow> rows(pairs.size());
  parallel_for(pairs.size(), cfg.workers, [&](std::size_t i) {
    PreparedRow& row = rows[i];
    try {
      const auto query_tokens = tokenize(pairs[i].query_text);
      const auto product_tokens =
          denoise(tokenize(pairs[i].product_text), corpus, cfg.gamma);
      row.tokens = assemble(query_tokens, product_tokens, cfg.max_len);
      row.ok = true;
    } catch (const std::exception& e) {
      row.ok = false;
      row.error = e.what();
    }
    row.subgraph = cache.find(pairs[i].query_id, pairs[i].product_id);
  });
  return rows;
}

// Stratified fold assignment over labeled rows, deterministic in the seed
// and independent of input order: members are canonicalized by their
// (query_id, product_id) key before the seeded shuffle.
inline std::vector<int> stratified_folds(const std::vector<EsciLabel>& labels,
                                         const std::vector<std::string>& keys, int folds,
                                         std::uint64_t seed) {
  if (folds < 2) throw ConfigError("stratified_folds: need at least 2 folds");
  if (labels.size() != keys.size()) throw DataError("stratified_folds: keys mismatch");
  std::vector<int> assignment(labels.size(), -1);
  // The fold cursor persists across classes so fold sizes differ by at
  // most one while each class stays evenly spread.
  std::size_t cursor = 0;
  for (int c = 0; c < kNumLabels; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (label_code(labels[i]) == c) members.push_back(i);
    }
    std::stable_sort(members.begin(), members.end(),
                     [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
    Rng rng(splitmix64(seed ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(c + 1))));
    rng.shuffle(members);
    for (const std::size_t m : members) {
      assignment[m] = static_cast<int>(cursor++ % static_cast<std::size_t>(folds));
    }
  }
  return assignment;
}

inline std::string pair_key(const QueryProductPair& pair) {
  return escape_field(pair.query_id) + '\t' + escape_field(pair.product_id);
}

// ── candidate training ───────────────────────────────────────────────────

namespace pipeline_detail {

inline CandidateModel train_candidate(const CandidateSpec& spec,
                                      const std::vector<QueryProductPair>& pairs,
                                      const std::vector<PreparedRow>& prepared,
                                      const std::vector<std::size_t>& train_idx,
                                      const std::array<double, kNumLabels>& class_weights,
                                      std::uint64_t seed, long long* skipped_rows) {
  CandidateModel model;
  model.name = spec.name;
  long long skipped = 0;
  try {
    if (const auto* sem = std::get_if<SemanticTrainParams>(&spec.params)) {
      SemanticTrainParams params = *sem;
      params.class_weights = class_weights;
      params.seed = seed;
      std::vector<SemanticExample> examples;
      examples.reserve(train_idx.size());
      for (const std::size_t i : train_idx) {
        if (!prepared[i].ok) {
          ++skipped;
          continue;
        }
        examples.push_back({prepared[i].tokens, pairs[i].locale, *pairs[i].label});
      }
      model.impl = semantic_train(examples, params);
    } else {
      GnnTrainParams params = std::get<GnnTrainParams>(spec.params);
      params.class_weights = class_weights;
      params.seed = seed;
      std::vector<GnnExample> examples;
      examples.reserve(train_idx.size());
      for (const std::size_t i : train_idx) {
        if (!prepared[i].subgraph) {
          ++skipped;
          continue;
        }
        examples.push_back({prepared[i].subgraph, *pairs[i].label});
      }
      model.impl = gnn_train(examples, params);
    }
  } catch (const std::exception& e) {
    throw StageError("candidate '" + spec.name + "' training failed: " + e.what());
  }
  if (skipped_rows) *skipped_rows += skipped;
  return model;
}

inline std::optional<LabelDistribution> predict_or_missing(const CandidateModel& cand,
                                                           const PreparedRow& row,
                                                           const std::string& locale) {
  if (cand.requires_graph()) {
    if (!row.subgraph) return std::nullopt;
    return cand.predict(row.tokens, locale, row.subgraph);
  }
  if (!row.ok) return std::nullopt;
  return cand.predict(row.tokens, locale, nullptr);
}

// One pass of the stacking discipline: per fold, train every candidate on
// the other folds and predict the fold; then train the shipped candidates
// on everything. Candidates run in parallel with derived seeds.
struct StackingOutput {
  std::vector<CandidateModel> finals;
  std::vector<std::size_t> labeled;  // indices into the input pairs
  std::vector<EsciLabel> labels;
  std::vector<int> fold_of;
  FeatureSchema schema;
  std::vector<FeatureRow> oof_features;
  std::array<double, kNumLabels> class_weights{1.0, 1.0, 1.0, 1.0};
  std::vector<long long> skipped_per_candidate;
};

inline StackingOutput run_stacking(const std::vector<QueryProductPair>& pairs,
                                   const std::vector<PreparedRow>& prepared,
                                   const PipelineConfig& cfg, int folds) {
  StackingOutput out;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (pairs[i].label) out.labeled.push_back(i);
  }
  if (out.labeled.empty()) throw DataError("no labeled rows to train on");
  out.labels.reserve(out.labeled.size());
  for (const std::size_t i : out.labeled) out.labels.push_back(*pairs[i].label);
  out.class_weights = compute_class_weights(out.labels, cfg.balanced_class_weights);

  std::vector<std::string> fold_keys;
  fold_keys.reserve(out.labeled.size());
  for (const std::size_t i : out.labeled) fold_keys.push_back(pair_key(pairs[i]));
  out.fold_of = stratified_folds(out.labels, fold_keys, folds, splitmix64(cfg.seed));

  const std::size_t n_cands = cfg.candidates.size();
  std::vector<std::vector<std::optional<LabelDistribution>>> oof(
      n_cands, std::vector<std::optional<LabelDistribution>>(out.labeled.size()));
  out.finals.resize(n_cands);
  out.skipped_per_candidate.assign(n_cands, 0);
  std::vector<std::string> failures(n_cands);
  parallel_for(n_cands, cfg.workers, [&](std::size_t ci) {
    try {
      const auto& spec = cfg.candidates[ci];
      for (int f = 0; f < folds; ++f) {
        std::vector<std::size_t> train_rows;
        for (std::size_t j = 0; j < out.labeled.size(); ++j) {
          if (out.fold_of[j] != f) train_rows.push_back(out.labeled[j]);
        }
        const CandidateModel fold_model = train_candidate(
            spec, pairs, prepared, train_rows, out.class_weights,
            splitmix64(cfg.seed ^ (0xa0761d6478bd642fULL * (ci + 1)) ^
                       static_cast<std::uint64_t>(f + 1)),
            nullptr);
        for (std::size_t j = 0; j < out.labeled.size(); ++j) {
          if (out.fold_of[j] != f) continue;
          oof[ci][j] = predict_or_missing(fold_model, prepared[out.labeled[j]],
                                          pairs[out.labeled[j]].locale);
        }
      }
      out.finals[ci] =
          train_candidate(spec, pairs, prepared, out.labeled, out.class_weights,
                          splitmix64(cfg.seed ^ (0xa0761d6478bd642fULL * (ci + 1))),
                          &out.skipped_per_candidate[ci]);
    } catch (const std::exception& e) {
      failures[ci] = e.what();
    }
  });
  for (const auto& f : failures) {
    if (!f.empty()) throw StageError(f);
  }

  std::vector<std::string> cand_names;
  for (const auto& spec : cfg.candidates) cand_names.push_back(spec.name);
  std::vector<std::string> locales;
  for (const std::size_t i : out.labeled) locales.push_back(pairs[i].locale);
  std::sort(locales.begin(), locales.end());
  locales.erase(std::unique(locales.begin(), locales.end()), locales.end());
  out.schema = FeatureSchema::make(cand_names, locales);

  std::vector<CandidatePredictions> oof_rows(out.labeled.size());
  std::vector<std::string> row_locales(out.labeled.size());
  for (std::size_t j = 0; j < out.labeled.size(); ++j) {
    for (std::size_t ci = 0; ci < n_cands; ++ci) {
      oof_rows[j][cand_names[ci]] = oof[ci][j];
    }
    row_locales[j] = pairs[out.labeled[j]].locale;
  }
  out.oof_features = build_features(oof_rows, row_locales, out.schema);
  return out;
}

}  // namespace pipeline_detail

// ── trained model bundle ─────────────────────────────────────────────────

struct TrainedModel {
  std::vector<CandidateModel> candidates;  // trained on the full training set
  TreeEnsemble ensemble;                   // trained on out-of-fold features
  CorpusStats corpus;
  std::vector<FeatureRow> background;  // seeded sample of training features
  PipelineConfig config;

  // Out-of-fold training features and labels, kept in memory (not
  // serialized) so reduced ensembles can be refit without retraining
  // candidates.
  std::vector<FeatureRow> oof_features;
  std::vector<EsciLabel> oof_labels;

  const CandidateModel& candidate(const std::string& name) const {
    for (const auto& c : candidates) {
      if (c.name == name) return c;
    }
    throw DataError("unknown candidate: '" + name + "'");
  }
};

inline TrainedModel train_all(const std::vector<QueryProductPair>& pairs,
                              const SubgraphCache& cache, const PipelineConfig& config,
                              RunManifest* manifest = nullptr) {
  PipelineConfig cfg = config;
  if (cfg.candidates.empty()) cfg.candidates = default_candidates();
  {
    std::vector<CandidateModel> probe;
    for (const auto& spec : cfg.candidates) probe.push_back({spec.name, SemanticCandidate{}});
    validate_registry(probe);
  }
  if (cfg.stacking_folds < 2) throw ConfigError("train_all: stacking_folds must be >= 2");
  if (manifest) manifest->seed = cfg.seed;

  std::size_t labeled_count = 0;
  for (const auto& p : pairs) labeled_count += p.label ? 1 : 0;
  if (labeled_count == 0) throw DataError("train_all: no labeled rows");
  if (manifest) {
    auto& st = manifest->stage("ingest");
    st.rows_in = static_cast<long long>(pairs.size());
    st.rows_out = static_cast<long long>(labeled_count);
    if (labeled_count < pairs.size()) {
      st.skipped["unlabeled"] = static_cast<long long>(pairs.size() - labeled_count);
    }
  }

  TrainedModel model;
  model.config = cfg;
  {
    pipeline_detail::StageTimer timer(manifest, "corpus");
    model.corpus = fit_pairs_corpus(pairs);
  }

  std::vector<PreparedRow> prepared;
  {
    pipeline_detail::StageTimer timer(manifest, "prepare");
    prepared = prepare_rows(pairs, cache, model.corpus, cfg);
  }

  pipeline_detail::StackingOutput stacking;
  {
    pipeline_detail::StageTimer timer(manifest, "candidates");
    stacking = pipeline_detail::run_stacking(pairs, prepared, cfg, cfg.stacking_folds);
    if (manifest) {
      auto& st = manifest->stage("candidates");
      st.rows_in = static_cast<long long>(stacking.labeled.size()) *
                   static_cast<long long>(cfg.candidates.size());
      for (std::size_t ci = 0; ci < cfg.candidates.size(); ++ci) {
        if (stacking.skipped_per_candidate[ci] > 0) {
          st.skipped["no_subgraph:" + cfg.candidates[ci].name] =
              stacking.skipped_per_candidate[ci];
        }
      }
      st.rows_out = st.rows_in;
      for (const auto& [k, v] : st.skipped) st.rows_out -= v;
    }
  }
  model.candidates = std::move(stacking.finals);
  model.oof_features = std::move(stacking.oof_features);
  model.oof_labels = stacking.labels;

  {
    pipeline_detail::StageTimer timer(manifest, "ensemble");
    GbdtParams params = cfg.gbdt;
    params.class_weights = stacking.class_weights;
    params.seed = splitmix64(cfg.seed ^ 0xe7037ed1a0b428dbULL);
    model.ensemble = gbdt_train(model.oof_features, model.oof_labels, params, stacking.schema);
    if (manifest) {
      auto& st = manifest->stage("ensemble");
      st.rows_in = static_cast<long long>(model.oof_features.size());
      st.rows_out = st.rows_in;
    }
  }

  {
    Rng rng(splitmix64(cfg.seed ^ 0x589965cc75374cc3ULL));
    std::vector<std::size_t> idx(model.oof_features.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    rng.shuffle(idx);
    const std::size_t keep =
        std::min<std::size_t>(static_cast<std::size_t>(std::max(1, cfg.background_rows)),
                              idx.size());
    for (std::size_t i = 0; i < keep; ++i) {
      model.background.push_back(model.oof_features[idx[i]]);
    }
  }
  return model;
}

// Refit the ensemble on a candidate subset: columns outside the kept
// candidates are dropped from the stored out-of-fold features, the GBDT is
// retrained with the same parameters, and the kept candidate checkpoints
// are reused unchanged.
inline TrainedModel refit_reduced(const TrainedModel& model,
                                  const std::vector<std::string>& keep_candidates) {
  if (model.oof_features.empty()) {
    throw StageError("refit_reduced: model carries no training features");
  }
  TrainedModel reduced;
  reduced.corpus = model.corpus;
  reduced.config = model.config;
  reduced.config.candidates.clear();
  std::vector<std::string> kept_names;
  std::vector<int> kept_columns;
  for (const auto& spec : model.config.candidates) {
    if (std::find(keep_candidates.begin(), keep_candidates.end(), spec.name) ==
        keep_candidates.end()) {
      continue;
    }
    reduced.config.candidates.push_back(spec);
    kept_names.push_back(spec.name);
    reduced.candidates.push_back(model.candidate(spec.name));
  }
  if (kept_names.empty()) throw ConfigError("refit_reduced: empty candidate subset");
  const auto& schema = model.ensemble.schema;
  for (const auto& name : kept_names) {
    for (const int col : schema.group_columns(name)) kept_columns.push_back(col);
  }
  for (const int col : schema.group_columns("locale")) kept_columns.push_back(col);

  const FeatureSchema reduced_schema = FeatureSchema::make(kept_names, schema.locales);
  const auto strip = [&](const FeatureRow& row) {
    FeatureRow out;
    out.reserve(kept_columns.size());
    for (const int col : kept_columns) out.push_back(row[static_cast<std::size_t>(col)]);
    return out;
  };
  reduced.oof_features.reserve(model.oof_features.size());
  for (const auto& row : model.oof_features) reduced.oof_features.push_back(strip(row));
  reduced.oof_labels = model.oof_labels;

  GbdtParams params = model.ensemble.params;
  reduced.ensemble = gbdt_train(reduced.oof_features, reduced.oof_labels, params,
                                reduced_schema);
  for (const auto& row : model.background) reduced.background.push_back(strip(row));
  return reduced;
}

// ── inference ────────────────────────────────────────────────────────────

struct InferResult {
  std::vector<PredictionRow> predictions;
  struct ErrorRow {
    std::size_t pair_index = 0;
    std::string reason;
  };
  std::vector<ErrorRow> errors;
  RunManifest manifest;
};

// active_candidates empty = use every trained candidate. Candidates left
// out of the active set contribute missing markers, which the ensemble
// routes through its default directions.
inline InferResult infer_batch(const std::vector<QueryProductPair>& pairs,
                               const SubgraphCache& cache, const TrainedModel& model,
                               const std::vector<std::string>& active_candidates,
                               Policy policy, int workers) {
  InferResult result;
  result.manifest.seed = model.config.seed;
  const auto& schema = model.ensemble.schema;

  std::vector<const CandidateModel*> active;
  if (active_candidates.empty()) {
    for (const auto& c : model.candidates) active.push_back(&c);
  } else {
    for (const auto& name : active_candidates) active.push_back(&model.candidate(name));
  }

  std::vector<PreparedRow> prepared;
  {
    pipeline_detail::StageTimer timer(&result.manifest, "prepare");
    prepared = prepare_rows(pairs, cache, model.corpus, model.config);
  }

  struct Slot {
    bool ok = false;
    PredictionRow prediction;
    std::string error;
  };
  std::vector<Slot> slots(pairs.size());
  {
    pipeline_detail::StageTimer timer(&result.manifest, "infer");
    parallel_for(pairs.size(), workers, [&](std::size_t i) {
      Slot& slot = slots[i];
      CandidatePredictions preds;
      for (const auto& c : model.candidates) preds[c.name] = std::nullopt;
      int available = 0;
      std::string missing_reason;
      for (const CandidateModel* cand : active) {
        const auto p =
            pipeline_detail::predict_or_missing(*cand, prepared[i], pairs[i].locale);
        if (p) {
          preds[cand->name] = p;
          ++available;
        } else if (missing_reason.empty()) {
          missing_reason = cand->requires_graph() ? "missing subgraph for '" + cand->name + "'"
                                                  : "unusable text for '" + cand->name + "'";
        }
      }
      if (policy == Policy::Reliability && available < static_cast<int>(active.size())) {
        slot.ok = false;
        slot.error = missing_reason.empty() ? "candidate input missing" : missing_reason;
        return;
      }
      if (available == 0) {
        slot.ok = false;
        slot.error = "no candidate available";
        return;
      }
      const auto features =
          build_features({preds}, {pairs[i].locale}, schema).front();
      slot.prediction.pair_index = i;
      slot.prediction.dist = model.ensemble.predict(features);
      slot.prediction.predicted = slot.prediction.dist.argmax();
      slot.ok = true;
    });
  }

  auto& st = result.manifest.stage("infer");
  st.rows_in = static_cast<long long>(pairs.size());
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i].ok) {
      result.predictions.push_back(slots[i].prediction);
    } else {
      result.errors.push_back({i, slots[i].error});
      ++st.skipped["error:" + slots[i].error.substr(0, slots[i].error.find('\''))];
    }
  }
  st.rows_out = static_cast<long long>(result.predictions.size());
  return result;
}

// ── cross-validation ─────────────────────────────────────────────────────

struct CrossValResult {
  std::vector<MetricsReport> fold_metrics;  // ensemble on each validation fold
  MetricsReport test_metrics;               // final model on the holdout
  std::vector<std::pair<std::string, MetricsReport>> candidate_test_metrics;
  TrainedModel model;  // trained on all non-holdout rows
  std::vector<std::size_t> holdout_indices;
};

// Holdout selection is a label-independent seeded sample keyed on pair
// content, so neither a holdout row's label nor the input order can change
// which rows are held out. Folds over the remaining rows are
// label-stratified.
inline std::vector<std::size_t> holdout_split(const std::vector<std::string>& keys,
                                              double fraction, std::uint64_t seed) {
  std::vector<std::size_t> idx(keys.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
  Rng rng(splitmix64(seed ^ 0x1d8e4e27c47d124fULL));
  rng.shuffle(idx);
  const std::size_t take = static_cast<std::size_t>(fraction * static_cast<double>(keys.size()));
  idx.resize(take);
  std::sort(idx.begin(), idx.end());
  return idx;
}

inline CrossValResult cross_validate(const std::vector<QueryProductPair>& pairs,
                                     const SubgraphCache& cache,
                                     const PipelineConfig& config, int folds = 5,
                                     double holdout = 0.1,
                                     RunManifest* manifest = nullptr) {
  PipelineConfig cfg = config;
  if (cfg.candidates.empty()) cfg.candidates = default_candidates();
  if (folds < 2) throw ConfigError("cross_validate: need at least 2 folds");
  std::vector<std::size_t> labeled;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (pairs[i].label) labeled.push_back(i);
  }
  if (labeled.size() < static_cast<std::size_t>(folds) * 2) {
    throw DataError("cross_validate: dataset too small for " + std::to_string(folds) +
                    " folds");
  }

  CrossValResult result;
  std::vector<std::string> labeled_keys;
  labeled_keys.reserve(labeled.size());
  for (const std::size_t i : labeled) labeled_keys.push_back(pair_key(pairs[i]));
  const auto holdout_pos = holdout_split(labeled_keys, holdout, cfg.seed);
  std::vector<char> is_holdout(labeled.size(), 0);
  for (const std::size_t j : holdout_pos) is_holdout[j] = 1;
  for (const std::size_t j : holdout_pos) result.holdout_indices.push_back(labeled[j]);

  std::vector<QueryProductPair> train_pairs;
  for (std::size_t j = 0; j < labeled.size(); ++j) {
    if (!is_holdout[j]) train_pairs.push_back(pairs[labeled[j]]);
  }

  // The stacking pass inside train_all provides both the final model and
  // the out-of-fold features for the per-fold ensemble metrics.
  PipelineConfig train_cfg = cfg;
  train_cfg.stacking_folds = folds;
  result.model = train_all(train_pairs, cache, train_cfg, manifest);
  const auto& schema = result.model.ensemble.schema;

  {
    std::vector<EsciLabel> labels = result.model.oof_labels;
    const auto class_weights = compute_class_weights(labels, cfg.balanced_class_weights);
    std::vector<std::string> fold_keys;
    for (const auto& p : train_pairs) fold_keys.push_back(pair_key(p));
    const auto fold_of = stratified_folds(labels, fold_keys, folds, splitmix64(cfg.seed));
    const auto& feature_rows = result.model.oof_features;

    for (int f = 0; f < folds; ++f) {
      std::vector<FeatureRow> fit_rows;
      std::vector<EsciLabel> fit_labels;
      std::vector<FeatureRow> val_rows;
      std::vector<EsciLabel> val_labels;
      for (std::size_t j = 0; j < train_pairs.size(); ++j) {
        if (fold_of[j] == f) {
          val_rows.push_back(feature_rows[j]);
          val_labels.push_back(labels[j]);
        } else {
          fit_rows.push_back(feature_rows[j]);
          fit_labels.push_back(labels[j]);
        }
      }
      GbdtParams params = cfg.gbdt;
      params.class_weights = class_weights;
      params.seed = splitmix64(cfg.seed ^ 0xe7037ed1a0b428dbULL ^
                               static_cast<std::uint64_t>(f + 1));
      const TreeEnsemble fold_ens = gbdt_train(fit_rows, fit_labels, params, schema);
      std::vector<EsciLabel> predicted;
      for (const auto& row : val_rows) predicted.push_back(fold_ens.predict(row).argmax());
      result.fold_metrics.push_back(score(val_labels, predicted));
    }
  }

  // Holdout evaluation: ensemble and every candidate alone. Rows a
  // candidate cannot score fall back to the uniform distribution.
  {
    std::vector<QueryProductPair> holdout_pairs;
    for (const std::size_t i : result.holdout_indices) holdout_pairs.push_back(pairs[i]);
    std::vector<EsciLabel> truth;
    for (const auto& p : holdout_pairs) truth.push_back(*p.label);

    const auto infer =
        infer_batch(holdout_pairs, cache, result.model, {}, Policy::Availability,
                    cfg.workers);
    std::vector<EsciLabel> predicted(holdout_pairs.size(), EsciLabel::Exact);
    for (const auto& row : infer.predictions) {
      predicted[row.pair_index] = row.predicted;
    }
    result.test_metrics = score(truth, predicted);

    const auto prepared = prepare_rows(holdout_pairs, cache, result.model.corpus, cfg);
    for (const auto& cand : result.model.candidates) {
      std::vector<EsciLabel> cand_pred(holdout_pairs.size(), EsciLabel::Exact);
      for (std::size_t i = 0; i < holdout_pairs.size(); ++i) {
        const auto p =
            pipeline_detail::predict_or_missing(cand, prepared[i], holdout_pairs[i].locale);
        cand_pred[i] = p ? p->argmax() : LabelDistribution::uniform().argmax();
      }
      result.candidate_test_metrics.emplace_back(cand.name, score(truth, cand_pred));
    }
  }
  return result;
}

// ── model persistence ────────────────────────────────────────────────────

inline constexpr const char* kModelMetaVersion = "relens.model.v1";

inline void save_model(const TrainedModel& model, const std::string& dir,
                       RunManifest* manifest = nullptr) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "candidates");
  save_corpus_stats(model.corpus, (fs::path(dir) / "corpus.txt").string());
  save_ensemble(model.ensemble, (fs::path(dir) / "ensemble.txt").string());
  for (const auto& cand : model.candidates) {
    save_candidate(cand, (fs::path(dir) / "candidates" / (cand.name + ".ckpt")).string());
  }
  {
    std::ofstream out(fs::path(dir) / "background.tsv", std::ios::binary);
    if (!out) throw DataError("cannot write background rows");
    for (const auto& row : model.background) {
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out << '\t';
        out << fmt_double(row[i]);
      }
      out << '\n';
    }
  }
  {
    std::ofstream out(fs::path(dir) / "model.txt", std::ios::binary);
    if (!out) throw DataError("cannot write model metadata");
    out << kModelMetaVersion << '\n';
    out << "seed\t" << model.config.seed << '\n';
    out << "policy\t" << to_string(model.config.policy) << '\n';
    out << "gamma\t" << model.config.gamma << '\n';
    out << "max_len\t" << model.config.max_len << '\n';
    out << "k\t" << model.config.k_hops << '\n';
    out << "cap\t" << model.config.cap << '\n';
    out << "candidates\t" << model.candidates.size() << '\n';
    for (const auto& c : model.candidates) out << escape_field(c.name) << '\n';
  }
  if (manifest) {
    for (const auto& name :
         {std::string("corpus.txt"), std::string("ensemble.txt"), std::string("model.txt")}) {
      manifest->digests[name] = digest_hex(file_digest((fs::path(dir) / name).string()));
    }
    for (const auto& cand : model.candidates) {
      const std::string rel = "candidates/" + cand.name + ".ckpt";
      manifest->digests[rel] = digest_hex(file_digest((fs::path(dir) / rel).string()));
    }
  }
}

inline TrainedModel load_model(const std::string& dir) {
  namespace fs = std::filesystem;
  TrainedModel model;
  model.corpus = load_corpus_stats((fs::path(dir) / "corpus.txt").string());
  model.ensemble = load_ensemble((fs::path(dir) / "ensemble.txt").string());

  std::ifstream meta(fs::path(dir) / "model.txt", std::ios::binary);
  if (!meta) throw DataError("cannot open model metadata in " + dir);
  std::string line;
  if (!std::getline(meta, line) || line != kModelMetaVersion) {
    throw DataError("model metadata: bad version header");
  }
  const auto next = [&](const char* tag) {
    if (!std::getline(meta, line)) throw DataError("model metadata: truncated");
    const auto fields = split_tsv(line);
    if (fields.size() < 2 || fields[0] != tag) {
      throw DataError("model metadata: expected '" + std::string(tag) + "'");
    }
    return std::string(fields[1]);
  };
  model.config.seed = parse_uint(next("seed"));
  model.config.policy = policy_from_string(next("policy"));
  model.config.gamma = static_cast<std::size_t>(parse_int(next("gamma")));
  model.config.max_len = static_cast<std::size_t>(parse_int(next("max_len")));
  model.config.k_hops = static_cast<int>(parse_int(next("k")));
  model.config.cap = static_cast<int>(parse_int(next("cap")));
  const auto n_cands = parse_int(next("candidates"));
  for (long long i = 0; i < n_cands; ++i) {
    if (!std::getline(meta, line)) throw DataError("model metadata: truncated candidates");
    const std::string name = unescape_field(line);
    model.candidates.push_back(
        load_candidate((fs::path(dir) / "candidates" / (name + ".ckpt")).string()));
  }

  {
    std::ifstream in(fs::path(dir) / "background.tsv", std::ios::binary);
    if (in) {
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        FeatureRow row;
        for (const auto& field : split_tsv(line)) row.push_back(parse_double(field));
        model.background.push_back(std::move(row));
      }
    }
  }
  return model;
}

}  // namespace relens
