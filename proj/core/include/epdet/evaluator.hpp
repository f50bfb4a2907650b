#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "epdet/actions.hpp"
#include "epdet/metrics.hpp"
#include "epdet/random.hpp"

namespace epdet {

// Score provider: trace index in the corpus -> detector score.
using TraceScorer = std::function<double(size_t)>;

struct ProtocolOptions {
  uint32_t env = kEndpointEnv;
  double window_hours = 24.0;  // non-finite keeps every trace of the env
  uint32_t reps = 100;
  uint64_t seed = 0;
  std::vector<double> fpr_targets = {0.01};
  int jobs = 1;
};

struct ProtocolResult {
  std::vector<double> tpr_mean;               // one per fpr target
  std::vector<std::vector<double>> tpr_reps;  // [target][rep]
  double auc_mean = 0.0;
  std::vector<double> auc_reps;
  size_t evaluated_samples = 0;
  size_t excluded_samples = 0;  // split samples with no trace in the env
};

// Repeated one-trace-per-sample evaluation. For every sample of `split`
// with traces in opts.env, repetition k (seeded opts.seed + k) draws one
// trace uniformly from the window anchored at the sample's earliest trace
// in that env, scores it and computes the metrics; results are averaged
// over repetitions.
ProtocolResult endpoint_protocol(const Corpus& corpus, Split split,
                                 const TraceScorer& score_of,
                                 const ProtocolOptions& opts);

// Per-sample score standard deviation (population form) over the sample's
// in-window traces; single-trace samples get exactly 0. Returned in corpus
// sample order, skipping samples with no trace in the env.
std::vector<std::pair<std::string, double>> score_variability(
    const Corpus& corpus, Split split, const TraceScorer& score_of,
    uint32_t env = kEndpointEnv, double window_hours = 24.0);

enum class TestResampling {
  none,
  drop_generic,     // remove untagged (generic) malware
  only_generic,     // keep only untagged malware (benign unchanged)
  drop_borderline,  // remove samples with 0 < detections < 20, both classes
  match_family,     // redraw malware to a family distribution, benign kept
};

std::optional<TestResampling> test_resampling_from_name(std::string_view name);
std::string_view test_resampling_name(TestResampling r);

// Applies one resampling criterion to a test set. match_family needs
// `target` and `rng`. Errors if either class ends up empty.
std::vector<SampleRecord> resample_test(
    const std::vector<SampleRecord>& records, TestResampling criterion,
    const std::map<std::string, double>* target = nullptr, Rng* rng = nullptr,
    std::vector<std::string>* warnings = nullptr);

struct ProbeOptions {
  double train_fraction = 0.7;
  uint32_t epochs = 100;
  double lr = 0.05;
  uint64_t seed = 0;
};

// Linear logistic probe measuring how separable two environments are in
// embedding space. Exactly two distinct env labels, at least 10 points
// each; split is stratified per env. Returns held-out accuracy.
double separability_probe(const std::vector<std::vector<double>>& embeddings,
                          const std::vector<uint32_t>& env_labels,
                          const ProbeOptions& opts = {});

struct LengthBiasRow {
  uint32_t registry_actions = 0;  // exact reg_create + reg_delete count
  size_t traces = 0;
  double mean_score = 0.0;
  double malware_fraction = 0.0;
};

// Scores bucketed by per-trace registry action count, ascending.
std::vector<LengthBiasRow> length_bias_report(const Corpus& corpus,
                                              Split split, uint32_t env,
                                              const TraceScorer& score_of);

struct EvasiveSplit {
  std::vector<std::string> evasive;      // mean registry length strictly
                                         // smaller in env_a than in env_b
  std::vector<std::string> non_evasive;  // includes exact ties
  std::vector<std::string> excluded;     // families missing from one env
};

// Heuristic evasion call per malware family, comparing mean registry-action
// counts between two environments (env_a is the sandbox side).
EvasiveSplit evasive_family_split(const Corpus& corpus, uint32_t env_a,
                                  uint32_t env_b);

struct EvalReport {
  std::vector<double> fpr_targets;
  std::vector<double> tpr_at_fpr;
  double auc = 0.0;
  uint32_t reps = 0;
  double window_hours = 0.0;
  uint32_t env = 0;
  uint64_t seed = 0;
  std::string resampling = "none";
  size_t evaluated_samples = 0;
  size_t excluded_samples = 0;
  std::vector<std::pair<std::string, double>> sigma;  // per-sample score std

  // Deterministic JSON bytes: fixed key order, LF-free single line.
  std::string to_json() const;
};

}  // namespace epdet
