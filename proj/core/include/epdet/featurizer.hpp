#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "epdet/actions.hpp"
#include "epdet/vocabulary.hpp"

namespace epdet {

inline constexpr uint32_t kDefaultFeatureDim = 1u << 14;

// One nonzero feature: (bucket index, count).
using SparseVec = std::vector<std::pair<uint32_t, float>>;

// Within-action 2-grams. For an action with tokens [a, b, c] under kind k
// the grams are "k:<a/b>" and "k:<b/c>"; a single-token action falls back
// to the unary gram "k:<a>"; an empty action contributes nothing. Grams
// never cross action boundaries. If a vocabulary is given, tokens are
// mapped through it first.
std::vector<std::string> extract_2grams(const TraceRecord& t,
                                        const Vocabulary* vocab = nullptr);

// FNV-1a 64-bit over the gram bytes, masked to dim-1. dim must be a power
// of two.
uint32_t hash_gram(std::string_view gram, uint32_t dim);

// Dense bucket-count vector of length dim. The sum of entries equals the
// number of grams.
std::vector<float> featurize(const TraceRecord& t, const Vocabulary* vocab,
                             uint32_t dim = kDefaultFeatureDim);

SparseVec sparsify(const std::vector<float>& dense);
std::vector<float> densify(const SparseVec& sparse, uint32_t dim);

// Sparse featurization without materializing the dense vector.
SparseVec featurize_sparse(const TraceRecord& t, const Vocabulary* vocab,
                           uint32_t dim = kDefaultFeatureDim);

// Feature cache file: magic "EPDFEAT1", then little-endian u32 dim,
// u64 row count, then rows of dim float32 values.
void write_feature_cache(const std::string& path,
                         const std::vector<std::vector<float>>& rows,
                         uint32_t dim);
std::vector<std::vector<float>> read_feature_cache(const std::string& path,
                                                   uint32_t* dim_out = nullptr);

}  // namespace epdet
