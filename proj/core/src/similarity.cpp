#include "epdet/similarity.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <stdexcept>

#include <zlib.h>

#include "epdet/random.hpp"

namespace epdet {

size_t deflate_size(std::string_view bytes) {
  z_stream strm{};
  // windowBits -15: raw DEFLATE, no zlib or gzip framing.
  if (deflateInit2(&strm, 6, Z_DEFLATED, -15, 8, Z_DEFAULT_STRATEGY) != Z_OK)
    throw std::runtime_error("deflateInit2 failed");
  uLong cap = deflateBound(&strm, static_cast<uLong>(bytes.size()));
  std::vector<unsigned char> out(cap);
  strm.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(bytes.data()));
  strm.avail_in = static_cast<uInt>(bytes.size());
  strm.next_out = out.data();
  strm.avail_out = static_cast<uInt>(out.size());
  int rc = deflate(&strm, Z_FINISH);
  size_t produced = out.size() - strm.avail_out;
  deflateEnd(&strm);
  if (rc != Z_STREAM_END) throw std::runtime_error("deflate failed");
  return produced;
}

std::string canonical_trace_bytes(const TraceRecord& t) {
  std::string out;
  for (size_t i = 0; i < t.actions.size(); ++i) {
    if (i > 0) out += '\n';
    const Action& a = t.actions[i];
    out += action_type_name(a.kind);
    for (const std::string& tok : a.tokens) {
      out += ' ';
      out += tok;
    }
  }
  return out;
}

double ncd(std::string_view x, std::string_view y) {
  if (x.empty() || y.empty())
    throw std::invalid_argument("ncd of an empty byte string");
  size_t cx = deflate_size(x);
  size_t cy = deflate_size(y);
  std::string xy;
  xy.reserve(x.size() + y.size());
  xy.append(x).append(y);
  std::string yx;
  yx.reserve(x.size() + y.size());
  yx.append(y).append(x);
  size_t cxy = std::min(deflate_size(xy), deflate_size(yx));
  size_t cmin = std::min(cx, cy);
  size_t cmax = std::max(cx, cy);
  return static_cast<double>(cxy - std::min(cxy, cmin)) /
         static_cast<double>(cmax);
}

namespace {

struct GroupTraces {
  std::map<uint32_t, std::vector<size_t>> by_env;
};

GroupTraces collect_group(const Corpus& corpus, std::string_view group) {
  GroupTraces out;
  for (size_t i = 0; i < corpus.traces().size(); ++i) {
    const TraceRecord& t = corpus.traces()[i];
    const SampleRecord* s = corpus.find_sample(t.sample_id);
    if (s == nullptr || s->family != group) continue;
    out.by_env[t.env_id].push_back(i);
  }
  return out;
}

}  // namespace

std::vector<DistanceCell> distance_table(const Corpus& corpus,
                                         std::string_view group,
                                         size_t pair_budget, uint64_t seed) {
  if (pair_budget == 0) throw std::invalid_argument("pair budget must be > 0");
  GroupTraces gt = collect_group(corpus, group);

  // Canonical bytes cached per trace.
  std::map<size_t, std::string> bytes;
  auto bytes_of = [&](size_t idx) -> const std::string& {
    auto it = bytes.find(idx);
    if (it == bytes.end())
      it = bytes.emplace(idx, canonical_trace_bytes(corpus.traces()[idx])).first;
    return it->second;
  };

  std::vector<DistanceCell> cells;
  std::vector<uint32_t> envs;
  for (auto& [env, _] : gt.by_env) envs.push_back(env);
  for (size_t a = 0; a < envs.size(); ++a) {
    for (size_t b = a; b < envs.size(); ++b) {
      const auto& ta = gt.by_env[envs[a]];
      const auto& tb = gt.by_env[envs[b]];
      size_t available = a == b ? ta.size() * (ta.size() - 1) / 2
                                : ta.size() * tb.size();
      if (available == 0) continue;
      // Pairs enumerated lexicographically; a flat index addresses one.
      auto pair_at = [&](size_t flat) -> std::pair<size_t, size_t> {
        if (a != b) return {ta[flat / tb.size()], tb[flat % tb.size()]};
        // Unordered pairs (i, j), i < j, in row order.
        size_t i = 0;
        size_t row = ta.size() - 1;
        while (flat >= row) {
          flat -= row;
          ++i;
          --row;
        }
        return {ta[i], ta[i + 1 + flat]};
      };
      std::vector<size_t> chosen;
      if (available <= pair_budget) {
        chosen.resize(available);
        for (size_t i = 0; i < available; ++i) chosen[i] = i;
      } else {
        Rng rng(derive_seed(seed, "distance-cell",
                            (static_cast<uint64_t>(envs[a]) << 32) | envs[b]));
        chosen = rng.sample_without_replacement(available, pair_budget);
        std::sort(chosen.begin(), chosen.end());
      }
      double sum = 0.0;
      for (size_t flat : chosen) {
        auto [i, j] = pair_at(flat);
        sum += ncd(bytes_of(i), bytes_of(j));
      }
      cells.push_back({envs[a], envs[b], chosen.size(), available,
                       sum / static_cast<double>(chosen.size())});
    }
  }
  return cells;
}

std::vector<DistanceScoreRow> distance_vs_score(
    const Corpus& corpus, std::string_view group, uint32_t reference_env,
    const std::function<double(size_t)>& score_of, size_t ref_budget,
    uint64_t seed) {
  if (ref_budget == 0) throw std::invalid_argument("ref budget must be > 0");
  GroupTraces gt = collect_group(corpus, group);
  auto ref_it = gt.by_env.find(reference_env);
  if (ref_it == gt.by_env.end() || ref_it->second.empty())
    throw std::invalid_argument("group has no traces in the reference env");
  std::vector<size_t> refs = ref_it->second;
  if (refs.size() > ref_budget) {
    Rng rng(derive_seed(seed, "distance-ref"));
    std::vector<size_t> pick = rng.sample_without_replacement(refs.size(), ref_budget);
    std::sort(pick.begin(), pick.end());
    std::vector<size_t> subset;
    subset.reserve(pick.size());
    for (size_t p : pick) subset.push_back(refs[p]);
    refs = std::move(subset);
  }
  std::vector<std::string> ref_bytes;
  ref_bytes.reserve(refs.size());
  for (size_t idx : refs)
    ref_bytes.push_back(canonical_trace_bytes(corpus.traces()[idx]));

  std::vector<DistanceScoreRow> rows;
  for (auto& [env, traces] : gt.by_env) {
    if (env == reference_env) continue;
    for (size_t idx : traces) {
      std::string b = canonical_trace_bytes(corpus.traces()[idx]);
      double sum = 0.0;
      for (const std::string& rb : ref_bytes) sum += ncd(b, rb);
      rows.push_back({idx, sum / static_cast<double>(ref_bytes.size()),
                      score_of(idx)});
    }
  }
  return rows;
}

}  // namespace epdet
