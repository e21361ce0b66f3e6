#pragma once
// Shared report-building helpers used by the CLI: feature rows for
// arbitrary pairs, model/relation contribution tables, and the per-model
// cost summary.

#include <chrono>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "relens/pipeline.hpp"
#include "relens/shap.hpp"

namespace relens {

// Availability-style feature rows for arbitrary pairs: candidates that
// cannot run contribute missing markers.
inline std::vector<FeatureRow> candidate_feature_rows(
    const std::vector<QueryProductPair>& pairs, const SubgraphCache& cache,
    const TrainedModel& model, int workers) {
  const auto prepared = prepare_rows(pairs, cache, model.corpus, model.config);
  std::vector<FeatureRow> rows(pairs.size());
  parallel_for(pairs.size(), workers, [&](std::size_t i) {
    CandidatePredictions preds;
    for (const auto& cand : model.candidates) {
      preds[cand.name] =
          pipeline_detail::predict_or_missing(cand, prepared[i], pairs[i].locale);
    }
    rows[i] = build_features({preds}, {pairs[i].locale}, model.ensemble.schema).front();
  });
  return rows;
}

inline std::map<std::string, std::string> candidate_relations(const TrainedModel& model) {
  std::map<std::string, std::string> out;
  for (const auto& cand : model.candidates) {
    if (cand.requires_graph()) out[cand.name] = to_string(cand.signal());
  }
  return out;
}

inline std::string importance_table(const GlobalImportance& gi, std::size_t top_groups = 0) {
  auto groups = gi.groups;
  std::stable_sort(groups.begin(), groups.end(),
                   [](const auto& a, const auto& b) { return a.share > b.share; });
  if (top_groups > 0 && groups.size() > top_groups) groups.resize(top_groups);
  std::ostringstream out;
  out << "group\tmean_abs_attribution\tshare\n";
  for (const auto& g : groups) {
    out << g.name << '\t' << fmt_double(g.mean_abs) << '\t' << fmt_double(g.share) << '\n';
  }
  return out.str();
}

inline std::string relation_table(const std::vector<std::pair<std::string, double>>& shares) {
  auto sorted = shares;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::ostringstream out;
  out << "relation\tshare\n";
  for (const auto& [name, share] : sorted) {
    out << name << '\t' << fmt_double(share) << '\n';
  }
  return out.str();
}

// Per-candidate resource summary: parameter count, fit seconds (taken from
// a manifest when available), measured inference seconds per sample, and
// checkpoint size on disk.
struct CostRow {
  std::string name;
  std::size_t parameters = 0;
  double fit_seconds = -1.0;
  double infer_seconds_per_sample = 0.0;
  std::uintmax_t checkpoint_bytes = 0;
};

inline std::vector<CostRow> cost_summary(const TrainedModel& model,
                                         const std::vector<QueryProductPair>& probe_pairs,
                                         const SubgraphCache& cache,
                                         const std::string& model_dir,
                                         double candidates_fit_seconds = -1.0) {
  namespace fs = std::filesystem;
  const auto prepared = prepare_rows(probe_pairs, cache, model.corpus, model.config);
  std::vector<CostRow> rows;
  for (const auto& cand : model.candidates) {
    CostRow row;
    row.name = cand.name;
    row.parameters = cand.parameter_count();
    row.fit_seconds = candidates_fit_seconds;
    const auto ckpt = fs::path(model_dir) / "candidates" / (cand.name + ".ckpt");
    if (fs::exists(ckpt)) row.checkpoint_bytes = fs::file_size(ckpt);
    const auto start = std::chrono::steady_clock::now();
    std::size_t scored = 0;
    for (std::size_t i = 0; i < prepared.size(); ++i) {
      const auto p =
          pipeline_detail::predict_or_missing(cand, prepared[i], probe_pairs[i].locale);
      if (p) ++scored;
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    row.infer_seconds_per_sample = scored > 0 ? seconds / static_cast<double>(scored) : 0.0;
    rows.push_back(row);
  }
  {
    CostRow row;
    row.name = "ensemble";
    std::size_t params = 0;
    for (const auto& iteration : model.ensemble.trees) {
      for (const auto& tree : iteration) params += tree.nodes.size();
    }
    row.parameters = params;
    const auto ckpt = fs::path(model_dir) / "ensemble.txt";
    if (fs::exists(ckpt)) row.checkpoint_bytes = fs::file_size(ckpt);
    const auto features = candidate_feature_rows(probe_pairs, cache, model, 1);
    const auto start = std::chrono::steady_clock::now();
    for (const auto& f : features) model.ensemble.predict(f);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    row.infer_seconds_per_sample =
        features.empty() ? 0.0 : seconds / static_cast<double>(features.size());
    rows.push_back(row);
  }
  return rows;
}

inline std::string cost_table(const std::vector<CostRow>& rows) {
  std::ostringstream out;
  out << "model\tparameters\tfit_seconds\tinfer_seconds_per_sample\tcheckpoint_bytes\n";
  for (const auto& r : rows) {
    out << r.name << '\t' << r.parameters << '\t'
        << (r.fit_seconds < 0 ? std::string("-") : fmt_double(r.fit_seconds)) << '\t'
        << fmt_double(r.infer_seconds_per_sample) << '\t' << r.checkpoint_bytes << '\n';
  }
  return out.str();
}

}  // namespace relens
