#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "config.hpp"
#include "epdet/actions.hpp"
#include "epdet/featurizer.hpp"
#include "epdet/model.hpp"
#include "epdet/trainer.hpp"
#include "epdet/vocabulary.hpp"

namespace epdet::cli {

// Corpus plus everything derived from it that more than one command needs.
// Vocabulary and feature rows are cached under paths.cache_dir keyed by
// content digests, so repeated runs over the same inputs skip the work.
struct Workspace {
  ExperimentConfig cfg;
  Corpus corpus;
  uint64_t corpus_digest = 0;
  Vocabulary vocab;
  uint64_t vocab_digest = 0;
  std::vector<SparseVec> feats;  // one row per corpus trace

  std::vector<const SampleRecord*> fit_samples, sel_samples, test_samples;
  std::unordered_map<std::string, std::vector<size_t>> train_env_traces;
  std::unordered_map<std::string, std::vector<size_t>> test_env_traces;
};

// Loads the corpus, resolves the vocabulary (explicit path, cache, or fresh
// build over training-split traces of the scenario train envs) and
// featurizes every trace (cache-aware). Needs paths.samples/traces.
Workspace open_workspace(const ExperimentConfig& cfg);

// Featurized training data of the fit samples: their traces in the scenario
// train envs, soft-label targets, and per-sample invariance pair groups.
TrainInputs training_inputs(const Workspace& ws);

// Selection rows: traces of the selection samples in the train envs plus
// hard labels.
void selection_rows(const Workspace& ws, std::vector<SparseVec>& feats,
                    std::vector<int>& labels);

// Scores every corpus trace with the model.
std::vector<double> score_traces(const Workspace& ws, const DetectorModel& m);

std::string checkpoint_name(const TrainConfig& tc);

void ensure_dir(const std::string& path);

uint64_t file_digest(const std::string& path);

std::string hex64(uint64_t v);

}  // namespace epdet::cli
