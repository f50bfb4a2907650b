#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "epdet/trainer.hpp"

namespace epdet::cli {

// Batch experiment description, loaded from a JSON file. Every command that
// takes --config reads the sections it needs; unknown keys are rejected so
// typos fail loudly.
struct ExperimentConfig {
  struct Paths {
    std::string samples;      // corpus sample metadata (jsonl)
    std::string traces;       // corpus traces (jsonl)
    std::string vocab;        // vocabulary file; built and written if absent
    std::string cache_dir;    // digest-keyed caches; empty disables caching
    std::string checkpoint_dir = "checkpoints";
    std::string report_dir = "reports";
  } paths;

  struct Scenario {
    std::vector<uint32_t> train_envs = {1, 2};
    uint32_t test_env = 0;
  } scenario;

  struct Features {
    uint32_t dim = 4096;
    size_t vocab_capacity = 512;
  } features;

  struct Grid {
    uint32_t width = 32;
    uint32_t blocks = 2;
    std::vector<double> lr = {1e-3};
    std::vector<double> dropout = {0.0};
    std::vector<double> alpha = {0.0};
    uint32_t batch_size = 64;
    uint32_t max_epochs = 60;
    uint32_t patience = 8;
    double holdout_fraction = 0.10;
    double fit_fraction = 0.8;  // train samples used to fit; rest select
    double sel_fpr = 0.01;
  } grid;

  struct Eval {
    std::vector<double> fpr_targets = {0.01};
    double window_hours = 24.0;
    uint32_t reps = 100;
    std::string resampling = "none";
    std::map<std::string, double> family_target;  // for match_family
  } eval;

  struct Drift {
    double percentile = 90.0;
    std::vector<double> k = {0.05, 0.10, 0.15};
  } drift;

  struct Distance {
    std::vector<std::string> groups;  // empty means every group in the corpus
    uint32_t reference_env = 1;
    size_t pair_budget = 200;
  } distance;

  uint64_t seed = 0;
  int jobs = 1;

  static ExperimentConfig from_file(const std::string& path);
  static ExperimentConfig from_json(const std::string& text);

  // Expanded training grid (cartesian product), every entry seeded `seed`.
  std::vector<TrainConfig> train_grid() const;
};

}  // namespace epdet::cli
