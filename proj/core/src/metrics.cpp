#include "epdet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace epdet {

namespace {

void check_classes(const ScoreTable& table) {
  bool pos = false, neg = false;
  for (const ScoreRow& r : table) {
    if (r.label == 1)
      pos = true;
    else if (r.label == 0)
      neg = true;
    else
      throw std::invalid_argument("labels must be 0 or 1");
  }
  if (!pos || !neg)
    throw std::invalid_argument("score table needs both classes");
}

}  // namespace

double tpr_at_fpr(const ScoreTable& table, double fpr_target) {
  if (!(fpr_target >= 0.0 && fpr_target <= 1.0))
    throw std::invalid_argument("fpr target must lie in [0, 1]");
  check_classes(table);
  std::vector<std::pair<double, int>> rows;
  rows.reserve(table.size());
  size_t nb = 0, nm = 0;
  for (const ScoreRow& r : table) {
    rows.emplace_back(r.score, r.label);
    (r.label ? nm : nb) += 1;
  }
  std::sort(rows.begin(), rows.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });

  // Walk distinct thresholds from high to low. FPR grows monotonically, so
  // the last feasible threshold is the smallest one, which admits the most
  // malware.
  double best_tpr = 0.0;
  size_t nb_ge = 0, nm_ge = 0;
  size_t i = 0;
  while (i < rows.size()) {
    double t = rows[i].first;
    while (i < rows.size() && rows[i].first == t) {
      (rows[i].second ? nm_ge : nb_ge) += 1;
      ++i;
    }
    double fpr = static_cast<double>(nb_ge) / static_cast<double>(nb);
    if (fpr <= fpr_target)
      best_tpr = static_cast<double>(nm_ge) / static_cast<double>(nm);
    else
      break;
  }
  return best_tpr;
}

std::vector<double> midranks(const std::vector<double>& values) {
  size_t n = values.size();
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](size_t a, size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n, 0.0);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && values[idx[j + 1]] == values[idx[i]]) ++j;
    // Average of 1-based ranks i+1 .. j+1.
    double r = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double auc(const ScoreTable& table) {
  check_classes(table);
  std::vector<double> scores;
  scores.reserve(table.size());
  for (const ScoreRow& r : table) scores.push_back(r.score);
  std::vector<double> ranks = midranks(scores);
  double rank_sum = 0.0;
  size_t nm = 0, nb = 0;
  for (size_t i = 0; i < table.size(); ++i) {
    if (table[i].label == 1) {
      rank_sum += ranks[i];
      ++nm;
    } else {
      ++nb;
    }
  }
  double m = static_cast<double>(nm);
  return (rank_sum - m * (m + 1.0) / 2.0) /
         (m * static_cast<double>(nb));
}

double rank_correlation(const std::vector<double>& a,
                        const std::vector<double>& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("rank correlation needs equal-length inputs");
  if (a.size() < 2)
    throw std::invalid_argument("rank correlation needs at least 2 points");
  std::vector<double> ra = midranks(a);
  std::vector<double> rb = midranks(b);
  double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (size_t i = 0; i < ra.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= n;
  mb /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (size_t i = 0; i < ra.size(); ++i) {
    double dx = ra[i] - ma;
    double dy = rb[i] - mb;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0)
    throw std::invalid_argument("rank correlation undefined for constant input");
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace epdet
