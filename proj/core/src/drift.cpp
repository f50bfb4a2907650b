#include "epdet/drift.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace epdet {

double linear_percentile(std::vector<double> values, double p) {
  if (values.empty())
    throw std::invalid_argument("percentile of an empty set");
  if (!(p >= 0.0 && p <= 100.0))
    throw std::invalid_argument("percentile must lie in [0, 100]");
  std::sort(values.begin(), values.end());
  if (values.size() == 1) return values[0];
  double rank = p / 100.0 * static_cast<double>(values.size() - 1);
  size_t lo = static_cast<size_t>(rank);
  if (lo >= values.size() - 1) return values.back();
  double frac = rank - static_cast<double>(lo);
  return values[lo] + (values[lo + 1] - values[lo]) * frac;
}

double fit_rectifier(const std::vector<std::vector<double>>& id_embeddings,
                     double percentile) {
  if (id_embeddings.empty())
    throw std::invalid_argument("rectifier needs a non-empty calibration set");
  std::vector<double> pooled;
  pooled.reserve(id_embeddings.size() * id_embeddings.front().size());
  for (const auto& z : id_embeddings)
    pooled.insert(pooled.end(), z.begin(), z.end());
  return linear_percentile(std::move(pooled), percentile);
}

double rectified_outlierness(const DetectorModel& m,
                             const std::vector<double>& embedding, double c) {
  std::vector<double> clamped(embedding.size());
  for (size_t j = 0; j < embedding.size(); ++j)
    clamped[j] = embedding[j] < c ? embedding[j] : c;
  return -std::fabs(head_logit(m, clamped));
}

double rectified_outlierness(const DetectorModel& m, const SparseVec& x,
                             double c) {
  return rectified_outlierness(m, encode(m, x), c);
}

double rejection_threshold(const std::vector<double>& id_outlierness,
                           double k) {
  if (id_outlierness.empty())
    throw std::invalid_argument("rejection threshold needs ID outlierness values");
  if (!(k >= 0.0 && k < 1.0))
    throw std::invalid_argument("K must lie in [0, 1)");
  return linear_percentile(id_outlierness, (1.0 - k) * 100.0);
}

std::string DriftReport::to_json() const {
  nlohmann::json j{{"accepted", accepted},
                   {"accepted_tpr_at_fpr", accepted_tpr_at_fpr},
                   {"cutoff", cutoff},
                   {"eval_reject_rate", eval_reject_rate},
                   {"eval_reject_rate_benign", eval_reject_rate_benign},
                   {"eval_reject_rate_malware", eval_reject_rate_malware},
                   {"full_tpr_at_fpr", full_tpr_at_fpr},
                   {"id_points", id_points},
                   {"percentile", percentile},
                   {"rejected", rejected},
                   {"target_k", target_k},
                   {"threshold", threshold}};
  return j.dump();
}

}  // namespace epdet
