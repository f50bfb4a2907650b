// epdet: batch experiment driver. One subcommand per invocation, all
// diagnostics on stderr, all data written to files, exit 0 iff no errors.

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "commands.hpp"

using namespace epdet::cli;

int main(int argc, char** argv) {
  CLI::App app{"behavioral malware detection experiments"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags are accepted after the subcommand too

  GlobalOpts g;
  uint64_t seed_value = 0;
  int jobs_value = 1;
  app.add_option("--config", g.config_path, "experiment config (json)");
  auto* seed_opt =
      app.add_option("--seed", seed_value, "override the config seed");
  auto* jobs_opt =
      app.add_option("--jobs", jobs_value, "override the config worker count");

  std::string raw_dir, dialect, out_path, spec_path, out_dir, checkpoint;
  std::string resampling;
  std::vector<uint32_t> counts = {700, 700, 600, 600};
  std::vector<double> k_list;
  std::vector<std::string> groups;

  auto* standardize =
      app.add_subcommand("standardize", "raw reports -> canonical traces");
  standardize->add_option("--raw-dir", raw_dir, "directory of raw reports")
      ->required();
  standardize->add_option("--dialect", dialect, "raw report dialect")
      ->required();
  standardize->add_option("--out", out_path, "output jsonl path")->required();

  auto* synth =
      app.add_subcommand("synth", "generate a synthetic corpus with known "
                                  "ground truth");
  synth->add_option("--spec", spec_path, "world spec json (default world if "
                                         "omitted)");
  synth->add_option("--out-dir", out_dir, "output directory")->required();
  synth
      ->add_option("--counts", counts,
                   "train-malware train-benign test-malware test-benign")
      ->expected(4);

  auto* train = app.add_subcommand(
      "train", "hyper-parameter grid training with checkpoints");

  auto* eval =
      app.add_subcommand("eval", "endpoint evaluation protocol report");
  eval->add_option("--checkpoint", checkpoint, "model checkpoint (default: "
                                               "<checkpoint_dir>/best.ckpt)");
  eval->add_option("--resampling", resampling,
                   "test resampling criterion (overrides config)");

  auto* drift = app.add_subcommand(
      "drift", "activation-rectified drift rejection sweep");
  drift->add_option("--checkpoint", checkpoint, "model checkpoint");
  drift->add_option("--k", k_list, "target rejection fractions in [0,1)");

  auto* distance =
      app.add_subcommand("distance", "compression distance between "
                                     "environments per sample group");
  distance->add_option("--group", groups, "group tag (repeatable; default: "
                                          "config or all)");

  auto* exporte = app.add_subcommand("export-embeddings",
                                     "embedding vectors of every trace");
  exporte->add_option("--checkpoint", checkpoint, "model checkpoint");
  exporte->add_option("--out", out_path, "output csv path");

  CLI11_PARSE(app, argc, argv);
  if (seed_opt->count()) g.seed = seed_value;
  if (jobs_opt->count()) g.jobs = jobs_value;

  try {
    if (standardize->parsed())
      return cmd_standardize(g, raw_dir, dialect, out_path);
    if (synth->parsed()) return cmd_synth(g, spec_path, out_dir, counts);
    if (train->parsed()) return cmd_train(g);
    if (eval->parsed()) return cmd_eval(g, checkpoint, resampling);
    if (drift->parsed()) return cmd_drift(g, checkpoint, k_list);
    if (distance->parsed()) return cmd_distance(g, groups);
    if (exporte->parsed())
      return cmd_export_embeddings(g, checkpoint, out_path);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "epdet: error: %s\n", e.what());
    return 1;
  }
  return 1;
}
