#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "epdet/actions.hpp"

namespace epdet {

// Compressed size of the byte string under raw DEFLATE at level 6.
size_t deflate_size(std::string_view bytes);

// Canonical bytes for compression distance: per action, the kind name and
// its tokens joined by single spaces; actions joined by '\n'.
std::string canonical_trace_bytes(const TraceRecord& t);

// Normalized compression distance:
//   NCD(x, y) = (C(xy) - min(C(x), C(y))) / max(C(x), C(y))
// with C(xy) = min over both concatenation orders, which makes the result
// exactly symmetric. Empty inputs are an error.
double ncd(std::string_view x, std::string_view y);

struct DistanceCell {
  uint32_t env_a = 0;
  uint32_t env_b = 0;
  size_t pairs = 0;     // pairs actually averaged (after the budget cap)
  size_t available = 0; // pairs available before the cap
  double mean_ncd = 0.0;
};

// Mean pairwise NCD between traces of one sample group (family tag for
// malware, publisher tag for benign), for every environment pair present.
// Within-env cells use unordered distinct pairs; cross-env cells use all
// cross pairs. Cells with no pair are omitted. When a cell exceeds
// pair_budget, a seeded uniform subsample of pairs is averaged instead.
std::vector<DistanceCell> distance_table(const Corpus& corpus,
                                         std::string_view group,
                                         size_t pair_budget = 200,
                                         uint64_t seed = 0);

struct DistanceScoreRow {
  size_t trace_idx = 0;
  double mean_ncd_to_ref = 0.0;
  double score = 0.0;
};

// For every trace of the group outside the reference environment: its mean
// NCD to the group's reference-env traces (capped at ref_budget seeded
// subsample) paired with the detector score of that trace.
std::vector<DistanceScoreRow> distance_vs_score(
    const Corpus& corpus, std::string_view group, uint32_t reference_env,
    const std::function<double(size_t)>& score_of, size_t ref_budget = 64,
    uint64_t seed = 0);

}  // namespace epdet
