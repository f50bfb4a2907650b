#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "epdet/actions.hpp"
#include "epdet/model.hpp"

namespace epdet {

// Detection-count soft target: min((d / beta)^theta, 1), 0 for d <= 0.
double soft_label(int detections, double beta = 20.0, double theta = 0.75);

// Duplicates minority-class records round-robin (appended after the
// originals, cycling in original order) until the minority count reaches
// round(factor * original minority count). factor <= 1 is the identity.
// A single-class input is an error.
std::vector<SampleRecord> oversample(const std::vector<SampleRecord>& records,
                                     double factor);

enum class FamilyResampling { uniform, match };

// Redraws the malware records with replacement so families follow the
// requested distribution; benign records pass through untouched (and come
// first in the output). The malware total is preserved. `target` is
// required for match; target families absent from the data are dropped
// from the distribution with a warning and the rest renormalized.
std::vector<SampleRecord> resample_families(
    const std::vector<SampleRecord>& records, FamilyResampling strategy,
    const std::map<std::string, double>* target, Rng& rng,
    std::vector<std::string>* warnings = nullptr);

// Mean of -cos(z0, z1) over the pairs. A pair with a zero-norm member
// contributes 0 and is counted in zero_norm_pairs. Empty input gives 0.
double invariance_loss(
    const std::vector<std::pair<std::vector<double>, std::vector<double>>>&
        pairs,
    size_t* zero_norm_pairs = nullptr);

struct TrainConfig {
  ModelConfig model;
  double lr = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double dropout = 0.0;
  uint32_t batch_size = 64;
  uint32_t max_epochs = 60;
  uint32_t patience = 8;
  double holdout_fraction = 0.10;
  double alpha = 0.0;  // invariance weight
  uint64_t seed = 0;

  // Canonical digest over every field; stored into trained checkpoints.
  uint64_t digest() const;
};

// Featurized training data. `pair_pool` holds, per sample, the traces
// eligible for invariance pairs; each epoch draws one random pair per
// entry with at least two traces from different environments (two endpoint
// traces count as different hosts).
struct TrainInputs {
  std::vector<SparseVec> features;
  std::vector<double> targets;  // in [0, 1]

  struct PairGroup {
    std::vector<SparseVec> feats;
    std::vector<uint32_t> envs;
  };
  std::vector<PairGroup> pair_pool;
};

struct EpochLog {
  double erm = 0.0;      // mean BCE over the epoch's batches
  double inv = 0.0;      // mean invariance term (0 when alpha == 0)
  double total = 0.0;
  double holdout = 0.0;  // held-out BCE after the epoch
};

struct TrainResult {
  DetectorModel model;  // parameters from the best held-out epoch
  std::vector<EpochLog> log;
  uint32_t stopped_epoch = 0;  // 1-based epoch whose weights were kept
  size_t zero_norm_pairs = 0;
};

// Deterministic given config.seed: init, shuffles, dropout masks and pair
// draws all derive from it. Throws TrainError if the loss goes non-finite.
class TrainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BatchTerms {
  double erm_sum = 0.0;  // summed BCE over the rows
  double inv_sum = 0.0;  // summed -cos over the pairs (zero-norm pairs add 0)
  size_t rows = 0;
  size_t pairs = 0;
  size_t zero_norm_pairs = 0;

  double loss(double alpha) const {
    double l = rows ? erm_sum / double(rows) : 0.0;
    if (pairs) l += alpha * inv_sum / double(pairs);
    return l;
  }
};

// One batch of the training objective: mean stable BCE over the rows plus
// alpha times the mean negative cosine over the pairs. Gradients accumulate
// into `grad`, which the caller zeroes. The training loop runs on this
// function, so finite-difference checks against it exercise the production
// gradient path.
BatchTerms batch_loss_grad(
    BackpropContext& ctx, const std::vector<const SparseVec*>& xs,
    const std::vector<double>& ys,
    const std::vector<std::pair<const SparseVec*, const SparseVec*>>& pairs,
    double alpha, std::vector<double>& grad);

TrainResult train(const TrainConfig& cfg, const TrainInputs& inputs);

enum class SelectionMetric { tpr_at_fpr, auc };

struct GridOptions {
  SelectionMetric metric = SelectionMetric::tpr_at_fpr;
  double fpr_target = 0.01;
  size_t top_n = 20;  // clamped to the grid size with a warning
  int jobs = 1;
};

struct GridEntry {
  TrainConfig config;
  DetectorModel model;
  double metric = 0.0;
};

struct GridResult {
  // Sorted by metric desc; ties broken by config digest so the ranking does
  // not depend on enumeration order.
  std::vector<GridEntry> ranked;
  double top_mean = 0.0;
  std::vector<std::string> warnings;
};

// Trains every config and ranks by the metric on the selection set
// (one score per row of sel_features, labels in sel_labels).
GridResult grid_search(const std::vector<TrainConfig>& grid,
                       const TrainInputs& inputs,
                       const std::vector<SparseVec>& sel_features,
                       const std::vector<int>& sel_labels,
                       const GridOptions& opts);

enum class FineTuneScope { head_only, all_layers };

// Continues training `base` on new data. head_only leaves every encoder
// parameter bit-identical. Zero epochs returns the model unchanged.
TrainResult fine_tune(const DetectorModel& base, const TrainConfig& cfg,
                      const TrainInputs& inputs, FineTuneScope scope);

}  // namespace epdet
