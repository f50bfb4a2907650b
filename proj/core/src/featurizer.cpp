#include "epdet/featurizer.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

#include "epdet/digest.hpp"

namespace epdet {

namespace {

void append_gram(std::vector<std::string>& out, std::string_view kind,
                 std::string_view a, std::string_view b) {
  std::string g;
  g.reserve(kind.size() + a.size() + b.size() + 4);
  g += kind;
  g += ":<";
  g += a;
  if (!b.empty()) {
    g += '/';
    g += b;
  }
  g += '>';
  out.push_back(std::move(g));
}

template <typename Sink>
void emit_grams(const TraceRecord& t, const Vocabulary* vocab, Sink&& sink) {
  std::vector<std::string_view> toks;
  for (const Action& a : t.actions) {
    std::string_view kind = action_type_name(a.kind);
    toks.clear();
    toks.reserve(a.tokens.size());
    for (const std::string& tok : a.tokens)
      toks.push_back(vocab ? vocab->map(a.kind, tok) : std::string_view(tok));
    if (toks.empty()) continue;
    if (toks.size() == 1) {
      sink(kind, toks[0], std::string_view{});
      continue;
    }
    for (size_t i = 0; i + 1 < toks.size(); ++i)
      sink(kind, toks[i], toks[i + 1]);
  }
}

}  // namespace

std::vector<std::string> extract_2grams(const TraceRecord& t,
                                        const Vocabulary* vocab) {
  std::vector<std::string> out;
  emit_grams(t, vocab,
             [&](std::string_view kind, std::string_view a, std::string_view b) {
               append_gram(out, kind, a, b);
             });
  return out;
}

uint32_t hash_gram(std::string_view gram, uint32_t dim) {
  return static_cast<uint32_t>(fnv1a64(gram) & (static_cast<uint64_t>(dim) - 1));
}

std::vector<float> featurize(const TraceRecord& t, const Vocabulary* vocab,
                             uint32_t dim) {
  if (dim == 0 || (dim & (dim - 1)) != 0)
    throw std::invalid_argument("feature dim must be a power of two");
  std::vector<float> v(dim, 0.0f);
  std::string g;
  emit_grams(t, vocab,
             [&](std::string_view kind, std::string_view a, std::string_view b) {
               g.clear();
               g += kind;
               g += ":<";
               g += a;
               if (!b.empty()) {
                 g += '/';
                 g += b;
               }
               g += '>';
               v[hash_gram(g, dim)] += 1.0f;
             });
  return v;
}

SparseVec sparsify(const std::vector<float>& dense) {
  SparseVec out;
  for (uint32_t i = 0; i < dense.size(); ++i) {
    if (dense[i] != 0.0f) out.emplace_back(i, dense[i]);
  }
  return out;
}

std::vector<float> densify(const SparseVec& sparse, uint32_t dim) {
  std::vector<float> out(dim, 0.0f);
  for (auto [i, v] : sparse) out.at(i) += v;
  return out;
}

SparseVec featurize_sparse(const TraceRecord& t, const Vocabulary* vocab,
                           uint32_t dim) {
  if (dim == 0 || (dim & (dim - 1)) != 0)
    throw std::invalid_argument("feature dim must be a power of two");
  // std::map keeps buckets sorted, which downstream code relies on.
  std::map<uint32_t, float> acc;
  std::string g;
  emit_grams(t, vocab,
             [&](std::string_view kind, std::string_view a, std::string_view b) {
               g.clear();
               g += kind;
               g += ":<";
               g += a;
               if (!b.empty()) {
                 g += '/';
                 g += b;
               }
               g += '>';
               acc[hash_gram(g, dim)] += 1.0f;
             });
  return SparseVec(acc.begin(), acc.end());
}

void write_feature_cache(const std::string& path,
                         const std::vector<std::vector<float>>& rows,
                         uint32_t dim) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f.write("EPDFEAT1", 8);
  uint32_t d = dim;
  uint64_t n = rows.size();
  f.write(reinterpret_cast<const char*>(&d), 4);
  f.write(reinterpret_cast<const char*>(&n), 8);
  for (const auto& row : rows) {
    if (row.size() != dim)
      throw std::invalid_argument("feature row size does not match dim");
    f.write(reinterpret_cast<const char*>(row.data()),
            static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  if (!f) throw std::runtime_error("write failed: " + path);
}

std::vector<std::vector<float>> read_feature_cache(const std::string& path,
                                                   uint32_t* dim_out) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, "EPDFEAT1", 8) != 0)
    throw std::runtime_error("bad feature cache magic: " + path);
  uint32_t dim = 0;
  uint64_t n = 0;
  f.read(reinterpret_cast<char*>(&dim), 4);
  f.read(reinterpret_cast<char*>(&n), 8);
  if (!f) throw std::runtime_error("truncated feature cache header: " + path);
  std::vector<std::vector<float>> rows;
  rows.reserve(n);
  for (uint64_t i = 0; i < n; ++i) {
    std::vector<float> row(dim);
    f.read(reinterpret_cast<char*>(row.data()),
           static_cast<std::streamsize>(dim * sizeof(float)));
    if (!f)
      throw std::runtime_error("truncated feature cache row " +
                               std::to_string(i) + ": " + path);
    rows.push_back(std::move(row));
  }
  f.peek();
  if (!f.eof())
    throw std::runtime_error("trailing bytes after feature cache rows: " + path);
  if (dim_out) *dim_out = dim;
  return rows;
}

}  // namespace epdet
