#pragma once

#include <string>
#include <vector>

#include "epdet/model.hpp"

namespace epdet {

// Percentile with linear interpolation between order statistics
// (rank = p/100 * (n-1)). p in [0, 100].
double linear_percentile(std::vector<double> values, double p);

// Rectification cutoff: the p-th percentile of the pooled in-distribution
// embedding activations (all dimensions of all embeddings in one pool).
// Empty input is an error.
double fit_rectifier(const std::vector<std::vector<double>>& id_embeddings,
                     double percentile = 90.0);

// Outlierness of one embedding under cutoff c: clamp each activation to
// min(z_j, c), push the clamped embedding through the scoring head and
// negate the absolute logit. Low-confidence points score high.
double rectified_outlierness(const DetectorModel& m,
                             const std::vector<double>& embedding, double c);

// Convenience: encode + rectify + score in one call.
double rectified_outlierness(const DetectorModel& m, const SparseVec& x,
                             double c);

// Rejection threshold for a target in-distribution rejection fraction K in
// [0, 1): the (1-K) linear-interpolation quantile of the ID outlierness
// values. K = 0 keeps everything. Empty input is an error.
double rejection_threshold(const std::vector<double>& id_outlierness,
                           double k);

inline bool reject(double outlierness, double threshold) {
  return outlierness > threshold;
}

struct DriftReport {
  double percentile = 90.0;
  double cutoff = 0.0;  // c
  double target_k = 0.0;
  double threshold = 0.0;  // r
  size_t id_points = 0;
  double eval_reject_rate = 0.0;
  double eval_reject_rate_benign = 0.0;
  double eval_reject_rate_malware = 0.0;
  double accepted_tpr_at_fpr = 0.0;  // on the accepted subset
  double full_tpr_at_fpr = 0.0;
  size_t accepted = 0;
  size_t rejected = 0;

  std::string to_json() const;
};

}  // namespace epdet
