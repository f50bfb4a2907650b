#include "config.hpp"

#include <stdexcept>

#include "epdet/trace_io.hpp"
#include "json.hpp"

namespace epdet::cli {
namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& what) {
  throw std::runtime_error("config: " + what);
}

void reject_unknown(const json& j, std::initializer_list<const char*> keys,
                    const char* where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : keys)
      if (it.key() == k) known = true;
    if (!known) bad(std::string("unknown key \"") + it.key() + "\" in " + where);
  }
}

template <typename T>
void get(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
  json j = json::parse(text);
  if (!j.is_object()) bad("top level must be an object");
  reject_unknown(j, {"paths", "scenario", "features", "grid", "eval", "drift",
                     "distance", "seed", "jobs"},
                 "top level");

  ExperimentConfig c;
  if (j.contains("paths")) {
    const json& p = j["paths"];
    reject_unknown(p, {"samples", "traces", "vocab", "cache_dir",
                       "checkpoint_dir", "report_dir"},
                   "paths");
    get(p, "samples", c.paths.samples);
    get(p, "traces", c.paths.traces);
    get(p, "vocab", c.paths.vocab);
    get(p, "cache_dir", c.paths.cache_dir);
    get(p, "checkpoint_dir", c.paths.checkpoint_dir);
    get(p, "report_dir", c.paths.report_dir);
  }
  if (j.contains("scenario")) {
    const json& s = j["scenario"];
    reject_unknown(s, {"train_envs", "test_env"}, "scenario");
    get(s, "train_envs", c.scenario.train_envs);
    get(s, "test_env", c.scenario.test_env);
    if (c.scenario.train_envs.empty()) bad("scenario.train_envs is empty");
  }
  if (j.contains("features")) {
    const json& f = j["features"];
    reject_unknown(f, {"dim", "vocab_capacity"}, "features");
    get(f, "dim", c.features.dim);
    get(f, "vocab_capacity", c.features.vocab_capacity);
    if (c.features.dim == 0 || (c.features.dim & (c.features.dim - 1)))
      bad("features.dim must be a power of two");
  }
  if (j.contains("grid")) {
    const json& g = j["grid"];
    reject_unknown(g,
                   {"width", "blocks", "lr", "dropout", "alpha", "batch_size",
                    "max_epochs", "patience", "holdout_fraction",
                    "fit_fraction", "sel_fpr"},
                   "grid");
    get(g, "width", c.grid.width);
    get(g, "blocks", c.grid.blocks);
    get(g, "lr", c.grid.lr);
    get(g, "dropout", c.grid.dropout);
    get(g, "alpha", c.grid.alpha);
    get(g, "batch_size", c.grid.batch_size);
    get(g, "max_epochs", c.grid.max_epochs);
    get(g, "patience", c.grid.patience);
    get(g, "holdout_fraction", c.grid.holdout_fraction);
    get(g, "fit_fraction", c.grid.fit_fraction);
    get(g, "sel_fpr", c.grid.sel_fpr);
    if (c.grid.lr.empty() || c.grid.dropout.empty() || c.grid.alpha.empty())
      bad("grid.lr, grid.dropout and grid.alpha must be non-empty");
    if (!(c.grid.fit_fraction > 0.0) || !(c.grid.fit_fraction < 1.0))
      bad("grid.fit_fraction must be in (0, 1)");
  }
  if (j.contains("eval")) {
    const json& e = j["eval"];
    reject_unknown(e,
                   {"fpr_targets", "window_hours", "reps", "resampling",
                    "family_target"},
                   "eval");
    get(e, "fpr_targets", c.eval.fpr_targets);
    get(e, "window_hours", c.eval.window_hours);
    get(e, "reps", c.eval.reps);
    get(e, "resampling", c.eval.resampling);
    if (e.contains("family_target"))
      c.eval.family_target =
          e["family_target"].get<std::map<std::string, double>>();
    if (c.eval.fpr_targets.empty()) bad("eval.fpr_targets is empty");
    if (c.eval.reps == 0) bad("eval.reps must be positive");
  }
  if (j.contains("drift")) {
    const json& d = j["drift"];
    reject_unknown(d, {"percentile", "k"}, "drift");
    get(d, "percentile", c.drift.percentile);
    get(d, "k", c.drift.k);
    if (c.drift.k.empty()) bad("drift.k is empty");
    for (double k : c.drift.k)
      if (k < 0.0 || k >= 1.0) bad("drift.k entries must be in [0, 1)");
  }
  if (j.contains("distance")) {
    const json& d = j["distance"];
    reject_unknown(d, {"groups", "reference_env", "pair_budget"}, "distance");
    get(d, "groups", c.distance.groups);
    get(d, "reference_env", c.distance.reference_env);
    get(d, "pair_budget", c.distance.pair_budget);
  }
  get(j, "seed", c.seed);
  get(j, "jobs", c.jobs);
  if (c.jobs < 1) bad("jobs must be >= 1");
  return c;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  try {
    return from_json(read_text_file(path));
  } catch (const json::exception& e) {
    bad(path + ": " + e.what());
  }
}

std::vector<TrainConfig> ExperimentConfig::train_grid() const {
  ModelConfig mc;
  mc.input_dim = features.dim;
  mc.width = grid.width;
  mc.blocks = grid.blocks;
  std::vector<TrainConfig> out;
  for (double lr : grid.lr) {
    for (double drop : grid.dropout) {
      for (double alpha : grid.alpha) {
        TrainConfig tc;
        tc.model = mc;
        tc.lr = lr;
        tc.dropout = drop;
        tc.alpha = alpha;
        tc.batch_size = grid.batch_size;
        tc.max_epochs = grid.max_epochs;
        tc.patience = grid.patience;
        tc.holdout_fraction = grid.holdout_fraction;
        tc.seed = seed;
        out.push_back(tc);
      }
    }
  }
  return out;
}

}  // namespace epdet::cli
