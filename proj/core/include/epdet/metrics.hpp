#pragma once

#include <string>
#include <vector>

namespace epdet {

struct ScoreRow {
  std::string sample_id;
  double score = 0.0;
  int label = 0;
};
using ScoreTable = std::vector<ScoreRow>;

// True-positive rate at a benign false-positive budget. The threshold is
// the smallest observed score t with FPR(t) <= fpr_target under the
// inclusive decision rule score >= t; among feasible thresholds this
// maximizes TPR. If no observed score is feasible the result is 0.
// Both classes must be present.
double tpr_at_fpr(const ScoreTable& table, double fpr_target);

// Probability a random malware outscores a random benign, ties at half
// weight. Computed with midranks; equals the pairwise definition exactly.
// Both classes must be present.
double auc(const ScoreTable& table);

// Spearman rank correlation with average ranks on ties. Errors on fewer
// than 2 points or a constant vector.
double rank_correlation(const std::vector<double>& a,
                        const std::vector<double>& b);

// Midranks (1-based, ties averaged), ascending order.
std::vector<double> midranks(const std::vector<double>& values);

}  // namespace epdet
