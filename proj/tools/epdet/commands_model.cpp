// Subcommands around a trained detector: train, eval, drift,
// export-embeddings.

#include <cstdio>
#include <map>
#include <stdexcept>
#include <unordered_set>

#include "commands.hpp"
#include "epdet/drift.hpp"
#include "epdet/evaluator.hpp"
#include "epdet/metrics.hpp"
#include "epdet/random.hpp"
#include "epdet/trace_io.hpp"
#include "pipeline.hpp"

namespace epdet::cli {

namespace {

std::string default_checkpoint(const ExperimentConfig& cfg) {
  return cfg.paths.checkpoint_dir + "/best.ckpt";
}

DetectorModel load_model(const ExperimentConfig& cfg,
                         const std::string& checkpoint) {
  return load_checkpoint(checkpoint.empty() ? default_checkpoint(cfg)
                                            : checkpoint);
}

void require_dim(const DetectorModel& m, const ExperimentConfig& cfg) {
  if (m.cfg.input_dim != cfg.features.dim)
    throw std::runtime_error(
        "checkpoint input dim " + std::to_string(m.cfg.input_dim) +
        " does not match features.dim " + std::to_string(cfg.features.dim));
}

}  // namespace

int cmd_train(const GlobalOpts& g) {
  ExperimentConfig cfg = g.load_config();
  Workspace ws = open_workspace(cfg);
  TrainInputs inputs = training_inputs(ws);
  std::vector<SparseVec> sel_feats;
  std::vector<int> sel_labels;
  selection_rows(ws, sel_feats, sel_labels);

  std::vector<TrainConfig> grid = cfg.train_grid();
  GridOptions go;
  go.metric = SelectionMetric::tpr_at_fpr;
  go.fpr_target = cfg.grid.sel_fpr;
  go.top_n = grid.size();
  go.jobs = cfg.jobs;
  GridResult gr = grid_search(grid, inputs, sel_feats, sel_labels, go);
  for (const std::string& w : gr.warnings)
    std::fprintf(stderr, "train: warning: %s\n", w.c_str());

  ensure_dir(cfg.paths.checkpoint_dir);
  ensure_dir(cfg.paths.report_dir);
  std::string csv = "rank,lr,dropout,alpha,sel_metric,checkpoint\n";
  for (size_t i = 0; i < gr.ranked.size(); ++i) {
    const GridEntry& e = gr.ranked[i];
    const std::string name = checkpoint_name(e.config);
    save_checkpoint(cfg.paths.checkpoint_dir + "/" + name, e.model);
    char line[256];
    std::snprintf(line, sizeof line, "%zu,%g,%g,%g,%.6f,%s\n", i + 1,
                  e.config.lr, e.config.dropout, e.config.alpha, e.metric,
                  name.c_str());
    csv += line;
  }
  save_checkpoint(default_checkpoint(cfg), gr.ranked.front().model);
  write_text_file(cfg.paths.report_dir + "/grid.csv", csv);

  const TrainConfig& best = gr.ranked.front().config;
  std::fprintf(stderr,
               "train: %zu configs, best lr=%g dropout=%g alpha=%g "
               "sel_metric=%.4f top_mean=%.4f\n",
               grid.size(), best.lr, best.dropout, best.alpha,
               gr.ranked.front().metric, gr.top_mean);
  return 0;
}

int cmd_eval(const GlobalOpts& g, const std::string& checkpoint,
             const std::string& resampling) {
  ExperimentConfig cfg = g.load_config();
  if (!resampling.empty()) cfg.eval.resampling = resampling;
  auto criterion = test_resampling_from_name(cfg.eval.resampling);
  if (!criterion)
    throw std::runtime_error("unknown resampling \"" + cfg.eval.resampling +
                             "\"");

  Workspace ws = open_workspace(cfg);
  DetectorModel m = load_model(cfg, checkpoint);
  require_dim(m, cfg);
  std::vector<double> trace_scores = score_traces(ws, m);

  std::vector<SampleRecord> test_records;
  for (const SampleRecord* s : ws.test_samples) test_records.push_back(*s);
  std::vector<std::string> warnings;
  Rng rng(cfg.seed);
  std::vector<SampleRecord> kept = resample_test(
      test_records, *criterion,
      cfg.eval.family_target.empty() ? nullptr : &cfg.eval.family_target, &rng,
      &warnings);
  for (const std::string& w : warnings)
    std::fprintf(stderr, "eval: warning: %s\n", w.c_str());

  // Rebuilt corpus holding exactly the evaluated test set. Redrawn
  // duplicates get a unique id suffix; their traces are duplicated with it.
  Corpus eval_corpus;
  std::vector<double> eval_scores;
  std::map<std::string, int> uses;
  for (SampleRecord rec : kept) {
    const std::string original = rec.sample_id;
    int n = uses[original]++;
    if (n > 0) rec.sample_id += "#" + std::to_string(n);
    eval_corpus.add_sample(rec);
    for (size_t idx : ws.corpus.traces_of(original)) {
      TraceRecord t = ws.corpus.traces()[idx];
      t.sample_id = rec.sample_id;
      eval_corpus.add_trace(std::move(t));
      eval_scores.push_back(trace_scores[idx]);
    }
  }

  ProtocolOptions po;
  po.env = cfg.scenario.test_env;
  po.window_hours = cfg.eval.window_hours;
  po.reps = cfg.eval.reps;
  po.seed = cfg.seed;
  po.fpr_targets = cfg.eval.fpr_targets;
  po.jobs = cfg.jobs;
  TraceScorer scorer = [&](size_t i) { return eval_scores[i]; };
  ProtocolResult pr = endpoint_protocol(eval_corpus, Split::test, scorer, po);

  EvalReport report;
  report.fpr_targets = po.fpr_targets;
  report.tpr_at_fpr = pr.tpr_mean;
  report.auc = pr.auc_mean;
  report.reps = po.reps;
  report.window_hours = po.window_hours;
  report.env = po.env;
  report.seed = po.seed;
  report.resampling = std::string(test_resampling_name(*criterion));
  report.evaluated_samples = pr.evaluated_samples;
  report.excluded_samples = pr.excluded_samples;
  report.sigma = score_variability(eval_corpus, Split::test, scorer, po.env,
                                   po.window_hours);

  ensure_dir(cfg.paths.report_dir);
  const std::string out = cfg.paths.report_dir + "/eval_env" +
                          std::to_string(po.env) + "_" + report.resampling +
                          ".json";
  write_text_file(out, report.to_json());
  std::fprintf(stderr,
               "eval: env=%u resampling=%s samples=%zu tpr@%.3g=%.4f "
               "auc=%.4f -> %s\n",
               po.env, report.resampling.c_str(), pr.evaluated_samples,
               po.fpr_targets[0], pr.tpr_mean[0], pr.auc_mean, out.c_str());
  return 0;
}

int cmd_drift(const GlobalOpts& g, const std::string& checkpoint,
              const std::vector<double>& k_list) {
  ExperimentConfig cfg = g.load_config();
  Workspace ws = open_workspace(cfg);
  DetectorModel m = load_model(cfg, checkpoint);
  require_dim(m, cfg);

  std::unordered_set<uint32_t> train_envs(cfg.scenario.train_envs.begin(),
                                          cfg.scenario.train_envs.end());
  std::unordered_set<std::string> train_ids;
  for (const SampleRecord& s : ws.corpus.samples())
    if (s.split == Split::train) train_ids.insert(s.sample_id);

  std::vector<std::vector<double>> id_embs;
  for (size_t i = 0; i < ws.corpus.trace_count(); ++i) {
    const TraceRecord& t = ws.corpus.traces()[i];
    if (train_envs.count(t.env_id) && train_ids.count(t.sample_id))
      id_embs.push_back(encode(m, ws.feats[i]));
  }
  if (id_embs.empty())
    throw std::runtime_error("no in-distribution traces to calibrate on");
  double cutoff = fit_rectifier(id_embs, cfg.drift.percentile);
  std::vector<double> id_out;
  id_out.reserve(id_embs.size());
  for (const auto& z : id_embs)
    id_out.push_back(rectified_outlierness(m, z, cutoff));

  struct Row {
    double out, score;
    int label;
  };
  std::vector<Row> rows;
  ScoreTable full_tab;
  for (const SampleRecord* s : ws.test_samples) {
    auto it = ws.test_env_traces.find(s->sample_id);
    if (it == ws.test_env_traces.end()) continue;
    for (size_t idx : it->second) {
      Prediction p = forward_eval(m, ws.feats[idx]);
      rows.push_back(
          {rectified_outlierness(m, p.embedding, cutoff), p.score, s->label});
      full_tab.push_back({"t" + std::to_string(idx), p.score, s->label});
    }
  }
  if (rows.empty())
    throw std::runtime_error("no test traces in the scenario test env");
  const double fpr = cfg.eval.fpr_targets[0];
  const double full_tpr = tpr_at_fpr(full_tab, fpr);

  const std::vector<double>& ks = k_list.empty() ? cfg.drift.k : k_list;
  std::string csv =
      "k,percentile,cutoff,threshold,id_points,reject_rate,reject_benign,"
      "reject_malware,accepted_tpr,full_tpr,accepted,rejected\n";
  for (double k : ks) {
    DriftReport r;
    r.percentile = cfg.drift.percentile;
    r.cutoff = cutoff;
    r.target_k = k;
    r.threshold = rejection_threshold(id_out, k);
    r.id_points = id_out.size();
    size_t rej = 0, rej_b = 0, rej_m = 0, n_b = 0, n_m = 0;
    ScoreTable acc_tab;
    for (const Row& row : rows) {
      (row.label ? n_m : n_b)++;
      if (reject(row.out, r.threshold)) {
        ++rej;
        (row.label ? rej_m : rej_b)++;
        continue;
      }
      acc_tab.push_back(
          {"a" + std::to_string(acc_tab.size()), row.score, row.label});
    }
    r.eval_reject_rate = double(rej) / double(rows.size());
    r.eval_reject_rate_benign = n_b ? double(rej_b) / double(n_b) : 0.0;
    r.eval_reject_rate_malware = n_m ? double(rej_m) / double(n_m) : 0.0;
    r.accepted_tpr_at_fpr = acc_tab.empty() ? 0.0 : tpr_at_fpr(acc_tab, fpr);
    r.full_tpr_at_fpr = full_tpr;
    r.accepted = rows.size() - rej;
    r.rejected = rej;
    char line[320];
    std::snprintf(line, sizeof line,
                  "%.4f,%.2f,%.8f,%.8f,%zu,%.6f,%.6f,%.6f,%.6f,%.6f,%zu,%zu\n",
                  k, r.percentile, r.cutoff, r.threshold, r.id_points,
                  r.eval_reject_rate, r.eval_reject_rate_benign,
                  r.eval_reject_rate_malware, r.accepted_tpr_at_fpr,
                  r.full_tpr_at_fpr, r.accepted, r.rejected);
    csv += line;
  }

  ensure_dir(cfg.paths.report_dir);
  const std::string out = cfg.paths.report_dir + "/drift.csv";
  write_text_file(out, csv);
  std::fprintf(stderr, "drift: %zu id traces, %zu eval traces, %zu rows -> %s\n",
               id_out.size(), rows.size(), ks.size(), out.c_str());
  return 0;
}

int cmd_export_embeddings(const GlobalOpts& g, const std::string& checkpoint,
                          const std::string& out_path) {
  ExperimentConfig cfg = g.load_config();
  Workspace ws = open_workspace(cfg);
  DetectorModel m = load_model(cfg, checkpoint);
  require_dim(m, cfg);

  std::string csv = "trace,sample_id,env_id,label";
  for (uint32_t j = 0; j < m.cfg.width; ++j)
    csv += ",z" + std::to_string(j);
  csv += "\n";
  for (size_t i = 0; i < ws.corpus.trace_count(); ++i) {
    const TraceRecord& t = ws.corpus.traces()[i];
    const SampleRecord* s = ws.corpus.find_sample(t.sample_id);
    std::vector<double> z = encode(m, ws.feats[i]);
    csv += std::to_string(i) + "," + t.sample_id + "," +
           std::to_string(t.env_id) + "," +
           std::to_string(s ? s->label : 0);
    char num[32];
    for (double v : z) {
      std::snprintf(num, sizeof num, ",%.9g", v);
      csv += num;
    }
    csv += "\n";
  }

  std::string out = out_path;
  if (out.empty()) {
    ensure_dir(cfg.paths.report_dir);
    out = cfg.paths.report_dir + "/embeddings.csv";
  }
  write_text_file(out, csv);
  std::fprintf(stderr, "export-embeddings: %zu traces, width %u -> %s\n",
               ws.corpus.trace_count(), m.cfg.width, out.c_str());
  return 0;
}

}  // namespace epdet::cli
