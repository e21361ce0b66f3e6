// Command-line entry point. One subcommand per pipeline stage; every
// output goes to a caller-named path. Exit codes: 0 success, 2 config
// error, 3 data error, 4 stage failure.

#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "relens/config.hpp"
#include "relens/relens.hpp"
#include "relens/reporting.hpp"

namespace fs = std::filesystem;
using namespace relens;

namespace {

void write_file(const std::string& path, const std::string& content) {
  if (const auto parent = fs::path(path).parent_path(); !parent.empty()) {
    fs::create_directories(parent);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << content;
  if (!out) throw DataError("I/O failure writing " + path);
}

Json maybe_config(const std::string& path) {
  return path.empty() ? Json::object() : load_json(path);
}

TrainedModel load_model_checked(const std::string& dir) {
  if (!fs::exists(fs::path(dir) / "model.txt")) {
    throw DataError("model directory missing or incomplete: " + dir +
                    " (expected model.txt)");
  }
  return load_model(dir);
}

SubgraphCache load_cache_checked(const std::string& path) {
  if (!fs::exists(path)) throw DataError("cache file not found: " + path);
  return load_cache(path);
}

std::vector<QueryProductPair> read_pairs_checked(const std::string& path) {
  if (!fs::exists(path)) throw DataError("pairs file not found: " + path);
  return read_pairs(path);
}

int run(int argc, char** argv) {
  CLI::App app{"Relevance-ensemble pipeline: synthetic data, graph caches, "
               "candidate models, boosted-tree ensembling, attribution-based "
               "selection, and batch inference"};
  app.require_subcommand(1);

  // ── synth ──────────────────────────────────────────────────────────────
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset");
  std::string synth_config, synth_out;
  std::int64_t synth_seed = -1;
  int synth_pairs = -1;
  synth_cmd->add_option("--config", synth_config, "JSON config with a 'synth' section");
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();
  synth_cmd->add_option("--seed", synth_seed, "Override the config seed");
  synth_cmd->add_option("--pairs", synth_pairs, "Override the pair count");
  synth_cmd->callback([&] {
    const Json root = maybe_config(synth_config);
    SynthConfig cfg = parse_synth_config(root.contains("synth") ? root.at("synth") : root);
    if (synth_seed >= 0) cfg.seed = static_cast<std::uint64_t>(synth_seed);
    if (synth_pairs > 0) cfg.n_pairs = synth_pairs;
    const auto data = generate(cfg);
    fs::create_directories(synth_out);
    write_pairs(data.pairs, (fs::path(synth_out) / "pairs.tsv").string());
    write_edges(data.edges, (fs::path(synth_out) / "edges.tsv").string());
    Json meta;
    meta["seed"] = cfg.seed;
    meta["pairs"] = cfg.n_pairs;
    meta["behavioral_rows"] = cfg.behavioral_rows;
    meta["universe_rows"] = data.stats.universe_rows;
    for (int s = 0; s < kNumBaseSignals; ++s) {
      const char* name = to_string(static_cast<SignalKind>(s));
      meta["edge_rows"][name] = data.stats.edge_rows[static_cast<std::size_t>(s)];
      meta["edge_share"][name] = data.stats.edge_share[static_cast<std::size_t>(s)];
      meta["label_correlation"][name] =
          data.stats.label_correlation[static_cast<std::size_t>(s)];
    }
    for (int c = 0; c < kNumLabels; ++c) {
      meta["label_rows"][to_string(static_cast<EsciLabel>(c))] =
          data.stats.label_rows[static_cast<std::size_t>(c)];
    }
    write_file((fs::path(synth_out) / "meta.json").string(), meta.dump(2) + "\n");
    std::cout << stats_table(data.stats);
  });

  // ── build-cache ────────────────────────────────────────────────────────
  auto* cache_cmd = app.add_subcommand("build-cache", "Extract and cache k-hop subgraphs");
  std::string bc_pairs, bc_edges, bc_out;
  int bc_k = 2, bc_cap = 100, bc_workers = 1;
  cache_cmd->add_option("--pairs", bc_pairs)->required();
  cache_cmd->add_option("--edges", bc_edges)->required();
  cache_cmd->add_option("--out", bc_out)->required();
  cache_cmd->add_option("--k", bc_k, "Hop count (default 2)");
  cache_cmd->add_option("--cap", bc_cap, "Neighborhood size cap (default 100)");
  cache_cmd->add_option("--workers", bc_workers);
  cache_cmd->callback([&] {
    const auto pairs = read_pairs_checked(bc_pairs);
    if (!fs::exists(bc_edges)) throw DataError("edge file not found: " + bc_edges);
    const auto graphs = load_edges(bc_edges);
    const auto cache = build_cache(pairs, graphs, bc_k, bc_cap, bc_workers);
    if (const auto parent = fs::path(bc_out).parent_path(); !parent.empty()) {
      fs::create_directories(parent);
    }
    save_cache(cache, bc_out);
    std::cout << "cached " << cache.size() << " subgraphs\n";
  });

  // ── denoise ────────────────────────────────────────────────────────────
  auto* denoise_cmd =
      app.add_subcommand("denoise", "Build the denoised-product cache file");
  std::string dn_pairs, dn_out, dn_corpus_out;
  std::size_t dn_gamma = 48;
  denoise_cmd->add_option("--pairs", dn_pairs)->required();
  denoise_cmd->add_option("--out", dn_out)->required();
  denoise_cmd->add_option("--gamma", dn_gamma, "Token budget (default 48)");
  denoise_cmd->add_option("--corpus-out", dn_corpus_out, "Also save corpus statistics");
  denoise_cmd->callback([&] {
    const auto pairs = read_pairs_checked(dn_pairs);
    const auto stats = fit_pairs_corpus(pairs);
    ProductCache cache;
    for (const auto& p : pairs) {
      if (cache.entries.count(p.product_id)) continue;
      cache.entries[p.product_id] = denoise(tokenize(p.product_text), stats, dn_gamma);
    }
    if (const auto parent = fs::path(dn_out).parent_path(); !parent.empty()) {
      fs::create_directories(parent);
    }
    save_product_cache(cache, dn_out);
    if (!dn_corpus_out.empty()) save_corpus_stats(stats, dn_corpus_out);
    std::cout << "denoised " << cache.entries.size() << " products\n";
  });

  // ── train ──────────────────────────────────────────────────────────────
  auto* train_cmd = app.add_subcommand("train", "Train candidates and the ensemble");
  std::string tr_config, tr_pairs, tr_cache, tr_out;
  std::int64_t tr_seed = -1;
  int tr_workers = -1;
  train_cmd->add_option("--config", tr_config, "Pipeline JSON config");
  train_cmd->add_option("--pairs", tr_pairs)->required();
  train_cmd->add_option("--cache", tr_cache)->required();
  train_cmd->add_option("--out", tr_out, "Model directory")->required();
  train_cmd->add_option("--seed", tr_seed, "Override the config seed");
  train_cmd->add_option("--workers", tr_workers, "Override the config worker count");
  train_cmd->callback([&] {
    PipelineConfig cfg = parse_pipeline_config(maybe_config(tr_config));
    if (tr_seed >= 0) cfg.seed = static_cast<std::uint64_t>(tr_seed);
    if (tr_workers > 0) cfg.workers = tr_workers;
    const auto pairs = read_pairs_checked(tr_pairs);
    const auto cache = load_cache_checked(tr_cache);
    RunManifest manifest;
    const auto model = train_all(pairs, cache, cfg, &manifest);
    save_model(model, tr_out, &manifest);
    save_manifest(manifest, (fs::path(tr_out) / "manifest.json").string());
    std::cout << "trained " << model.candidates.size() << " candidates + ensemble ("
              << model.ensemble.iterations() << " iterations)\n";
  });

  // ── explain ────────────────────────────────────────────────────────────
  auto* explain_cmd =
      app.add_subcommand("explain", "Model/relation contribution tables");
  std::string ex_model, ex_pairs, ex_cache, ex_out, ex_rows_out;
  std::size_t ex_top_groups = 0;
  int ex_max_rows = 500;
  explain_cmd->add_option("--model", ex_model)->required();
  explain_cmd->add_option("--pairs", ex_pairs)->required();
  explain_cmd->add_option("--cache", ex_cache)->required();
  explain_cmd->add_option("--out", ex_out, "Output directory")->required();
  explain_cmd->add_option("--top-groups", ex_top_groups, "Limit table rows");
  explain_cmd->add_option("--max-rows", ex_max_rows, "Evaluation rows to explain");
  explain_cmd->add_option("--per-row", ex_rows_out, "Optional per-row attribution dump");
  explain_cmd->callback([&] {
    const auto model = load_model_checked(ex_model);
    auto pairs = read_pairs_checked(ex_pairs);
    const auto cache = load_cache_checked(ex_cache);
    if (ex_max_rows > 0 && static_cast<int>(pairs.size()) > ex_max_rows) {
      pairs.resize(static_cast<std::size_t>(ex_max_rows));
    }
    const auto rows = candidate_feature_rows(pairs, cache, model, model.config.workers);
    const auto& background = model.background.empty() ? rows : model.background;
    const auto gi = global_importance(model.ensemble, rows, background);
    fs::create_directories(ex_out);
    write_file((fs::path(ex_out) / "model_importance.tsv").string(),
               importance_table(gi, ex_top_groups));
    const auto relations = relation_importance(gi, candidate_relations(model));
    write_file((fs::path(ex_out) / "relation_importance.tsv").string(),
               relation_table(relations));
    if (!ex_rows_out.empty()) {
      std::ostringstream dump;
      dump << "row\tclass\tbase\toutput";
      for (const auto& col : model.ensemble.schema.columns) dump << '\t' << col.name;
      dump << '\n';
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto attr = explain(model.ensemble, rows[i], background);
        dump << i << '\t' << to_string(static_cast<EsciLabel>(attr.explained_class)) << '\t'
             << fmt_double(attr.base_value) << '\t' << fmt_double(attr.model_output);
        for (const double phi : attr.per_feature) dump << '\t' << fmt_double(phi);
        dump << '\n';
      }
      write_file(ex_rows_out, dump.str());
    }
    std::cout << importance_table(gi, ex_top_groups);
  });

  // ── select ─────────────────────────────────────────────────────────────
  auto* select_cmd =
      app.add_subcommand("select", "Budgeted model selection from importance shares");
  std::string se_config, se_importance, se_state, se_out, se_add;
  double se_budget = -1.0;
  std::string se_mode;
  select_cmd->add_option("--config", se_config, "JSON config with a 'selection' section");
  select_cmd->add_option("--importance", se_importance,
                         "model_importance.tsv from the explain stage");
  select_cmd->add_option("--state", se_state, "Existing state for continuous updates");
  select_cmd->add_option("--add", se_add, "Continuous candidate as name,cost,importance");
  select_cmd->add_option("--budget", se_budget, "Override the config budget");
  select_cmd->add_option("--mode", se_mode, "rank-prefix | greedy-skip");
  select_cmd->add_option("--out", se_out, "Output state path")->required();
  select_cmd->callback([&] {
    const Json root = maybe_config(se_config);
    SelectionConfig cfg = parse_selection_config(
        root.contains("selection") ? root.at("selection") : Json::object());
    if (se_budget >= 0.0) cfg.budget = se_budget;
    if (!se_mode.empty()) {
      if (se_mode == "rank-prefix") cfg.mode = SelectionMode::RankPrefix;
      else if (se_mode == "greedy-skip") cfg.mode = SelectionMode::GreedySkip;
      else throw ConfigError("unknown selection mode: " + se_mode);
    }

    SelectionState state;
    if (!se_state.empty()) {
      state = load_selection(se_state);
      if (se_add.empty()) throw ConfigError("--state requires --add for a continuous update");
      std::vector<std::string> fields;
      {
        std::stringstream ss(se_add);
        std::string item;
        while (std::getline(ss, item, ',')) fields.push_back(item);
      }
      if (fields.size() != 3) throw ConfigError("--add expects name,cost,importance");
      state = select_continuous(state,
                                {fields[0], parse_double(fields[1]), parse_double(fields[2])});
    } else {
      if (se_importance.empty()) {
        throw ConfigError("initial selection requires --importance");
      }
      std::ifstream in(se_importance);
      if (!in) throw DataError("cannot open importance table: " + se_importance);
      std::string line;
      if (!std::getline(in, line)) throw DataError("empty importance table");
      std::vector<CandidateScore> candidates;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto fields = split_tsv(line);
        if (fields.size() != 3) throw DataError("bad importance line: " + line);
        const std::string name(fields[0]);
        if (name == "locale") continue;  // manual features are always free
        const double importance = parse_double(fields[2]);
        const auto it = cfg.costs.find(name);
        candidates.push_back({name, it == cfg.costs.end() ? 1.0 : it->second, importance});
      }
      state = select_initial(candidates, cfg.budget, cfg.metric, cfg.mode);
    }
    if (const auto parent = fs::path(se_out).parent_path(); !parent.empty()) {
      fs::create_directories(parent);
    }
    save_selection(state, se_out);
    std::cout << audit_table(audit(state));
  });

  // ── infer ──────────────────────────────────────────────────────────────
  auto* infer_cmd = app.add_subcommand("infer", "Batch inference");
  std::string in_model, in_pairs, in_cache, in_out, in_selection, in_policy = "availability";
  std::string in_errors_out, in_manifest_out;
  int in_workers = 1;
  infer_cmd->add_option("--model", in_model)->required();
  infer_cmd->add_option("--pairs", in_pairs)->required();
  infer_cmd->add_option("--cache", in_cache)->required();
  infer_cmd->add_option("--out", in_out, "Predictions file")->required();
  infer_cmd->add_option("--selection", in_selection, "Selection state restricting candidates");
  infer_cmd->add_option("--policy", in_policy, "reliability | availability");
  infer_cmd->add_option("--workers", in_workers);
  infer_cmd->add_option("--errors-out", in_errors_out, "Error-row sidecar");
  infer_cmd->add_option("--manifest-out", in_manifest_out);
  infer_cmd->callback([&] {
    const auto model = load_model_checked(in_model);
    const auto pairs = read_pairs_checked(in_pairs);
    const auto cache = load_cache_checked(in_cache);
    std::vector<std::string> active;
    if (!in_selection.empty()) {
      const auto state = load_selection(in_selection);
      for (const auto& c : state.selected) active.push_back(c.name);
      if (active.empty()) throw ConfigError("selection state selects no candidates");
    }
    const auto result = infer_batch(pairs, cache, model, active,
                                    policy_from_string(in_policy), in_workers);
    if (const auto parent = fs::path(in_out).parent_path(); !parent.empty()) {
      fs::create_directories(parent);
    }
    write_predictions(result.predictions, in_out);
    if (!in_errors_out.empty()) {
      std::ostringstream errs;
      errs << "pair_index\treason\n";
      for (const auto& e : result.errors) {
        errs << e.pair_index << '\t' << escape_field(e.reason) << '\n';
      }
      write_file(in_errors_out, errs.str());
    }
    if (!in_manifest_out.empty()) save_manifest(result.manifest, in_manifest_out);
    std::cout << "scored " << result.predictions.size() << "/" << pairs.size()
              << " pairs (" << result.errors.size() << " error rows)\n";
    if (result.predictions.empty() && !pairs.empty()) {
      throw StageError("no pairs could be scored");
    }
  });

  // ── eval ───────────────────────────────────────────────────────────────
  auto* eval_cmd = app.add_subcommand("eval", "Score predictions against labels");
  std::string ev_pred, ev_pairs, ev_out;
  eval_cmd->add_option("--pred", ev_pred)->required();
  eval_cmd->add_option("--pairs", ev_pairs, "Pairs file with ground-truth labels")->required();
  eval_cmd->add_option("--out", ev_out, "Optional metrics file");
  eval_cmd->callback([&] {
    const auto predictions = read_predictions(ev_pred);
    const auto pairs = read_pairs_checked(ev_pairs);
    std::vector<EsciLabel> truth, predicted;
    for (const auto& row : predictions) {
      if (row.pair_index >= pairs.size()) {
        throw DataError("prediction row " + std::to_string(row.pair_index) +
                        " is out of range");
      }
      const auto& pair = pairs[row.pair_index];
      if (!pair.label) continue;  // unlabeled rows cannot be scored
      truth.push_back(*pair.label);
      predicted.push_back(row.predicted);
    }
    if (truth.empty()) throw DataError("no labeled rows to score");
    const auto rep = score(truth, predicted);
    const auto detail = metrics_detail(rep);
    if (!ev_out.empty()) write_file(ev_out, detail);
    std::cout << detail;
  });

  // ── report ─────────────────────────────────────────────────────────────
  auto* report_cmd = app.add_subcommand(
      "report", "Contribution tables plus the per-model cost summary");
  std::string rp_model, rp_pairs, rp_cache, rp_out;
  int rp_max_rows = 300;
  report_cmd->add_option("--model", rp_model)->required();
  report_cmd->add_option("--pairs", rp_pairs)->required();
  report_cmd->add_option("--cache", rp_cache)->required();
  report_cmd->add_option("--out", rp_out, "Output directory")->required();
  report_cmd->add_option("--max-rows", rp_max_rows, "Evaluation rows to explain");
  report_cmd->callback([&] {
    const auto model = load_model_checked(rp_model);
    auto pairs = read_pairs_checked(rp_pairs);
    const auto cache = load_cache_checked(rp_cache);
    if (rp_max_rows > 0 && static_cast<int>(pairs.size()) > rp_max_rows) {
      pairs.resize(static_cast<std::size_t>(rp_max_rows));
    }
    const auto rows = candidate_feature_rows(pairs, cache, model, model.config.workers);
    const auto& background = model.background.empty() ? rows : model.background;
    const auto gi = global_importance(model.ensemble, rows, background);
    fs::create_directories(rp_out);
    write_file((fs::path(rp_out) / "model_importance.tsv").string(), importance_table(gi));
    write_file((fs::path(rp_out) / "relation_importance.tsv").string(),
               relation_table(relation_importance(gi, candidate_relations(model))));

    double fit_seconds = -1.0;
    const auto manifest_path = fs::path(rp_model) / "manifest.json";
    if (fs::exists(manifest_path)) {
      const auto manifest = load_json(manifest_path.string());
      for (const auto& stage : manifest.at("stages")) {
        if (stage.at("name") == "candidates") fit_seconds = stage.at("seconds").get<double>();
      }
    }
    const auto costs = cost_summary(model, pairs, cache, rp_model, fit_seconds);
    write_file((fs::path(rp_out) / "cost_summary.tsv").string(), cost_table(costs));
    std::cout << importance_table(gi) << '\n' << cost_table(costs);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e);  // --help
      return 0;
    }
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const StageError& e) {
    std::cerr << "stage error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "stage error: " << e.what() << '\n';
    return 4;
  }
}
