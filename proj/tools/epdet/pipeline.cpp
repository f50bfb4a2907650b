#include "pipeline.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <unordered_set>

#include "epdet/digest.hpp"
#include "epdet/trace_io.hpp"

namespace epdet::cli {

namespace fs = std::filesystem;

void ensure_dir(const std::string& path) {
  if (!path.empty()) fs::create_directories(path);
}

uint64_t file_digest(const std::string& path) {
  return fnv1a64(read_text_file(path));
}

std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

std::string checkpoint_name(const TrainConfig& tc) {
  return "model_" + hex64(tc.digest()) + ".ckpt";
}

namespace {

std::vector<TraceRecord> train_env_split_traces(const Workspace& ws) {
  std::unordered_set<std::string> train_ids;
  for (const SampleRecord& s : ws.corpus.samples())
    if (s.split == Split::train) train_ids.insert(s.sample_id);
  std::unordered_set<uint32_t> envs(ws.cfg.scenario.train_envs.begin(),
                                    ws.cfg.scenario.train_envs.end());
  std::vector<TraceRecord> out;
  for (const TraceRecord& t : ws.corpus.traces())
    if (envs.count(t.env_id) && train_ids.count(t.sample_id))
      out.push_back(t);
  return out;
}

Vocabulary resolve_vocab(Workspace& ws) {
  const auto& paths = ws.cfg.paths;
  if (!paths.vocab.empty() && fs::exists(paths.vocab)) {
    std::fprintf(stderr, "vocab: using %s\n", paths.vocab.c_str());
    return Vocabulary::load(paths.vocab);
  }

  uint64_t key = fnv1a64_mix(ws.corpus_digest, ws.cfg.features.vocab_capacity);
  for (uint32_t e : ws.cfg.scenario.train_envs) key = fnv1a64_mix(key, e);
  std::string cached;
  if (!paths.cache_dir.empty())
    cached = paths.cache_dir + "/vocab_" + hex64(key) + ".txt";

  if (!cached.empty() && fs::exists(cached)) {
    std::fprintf(stderr, "vocab: cache hit %s\n", cached.c_str());
    return Vocabulary::load(cached);
  }
  Vocabulary v =
      Vocabulary::build(train_env_split_traces(ws), ws.cfg.features.vocab_capacity);
  if (!cached.empty()) {
    ensure_dir(paths.cache_dir);
    v.save(cached);
    std::fprintf(stderr, "vocab: built and cached %s\n", cached.c_str());
  }
  if (!paths.vocab.empty()) {
    v.save(paths.vocab);
    std::fprintf(stderr, "vocab: wrote %s\n", paths.vocab.c_str());
  }
  return v;
}

std::vector<SparseVec> resolve_features(Workspace& ws) {
  const uint32_t dim = ws.cfg.features.dim;
  uint64_t key = fnv1a64_mix(ws.corpus_digest, ws.vocab_digest);
  key = fnv1a64_mix(key, dim);
  std::string cached;
  if (!ws.cfg.paths.cache_dir.empty())
    cached = ws.cfg.paths.cache_dir + "/feat_" + hex64(key) + ".bin";

  if (!cached.empty() && fs::exists(cached)) {
    uint32_t file_dim = 0;
    std::vector<std::vector<float>> rows = read_feature_cache(cached, &file_dim);
    if (file_dim == dim && rows.size() == ws.corpus.trace_count()) {
      std::fprintf(stderr, "features: cache hit %s\n", cached.c_str());
      std::vector<SparseVec> out;
      out.reserve(rows.size());
      for (const auto& r : rows) out.push_back(sparsify(r));
      return out;
    }
    std::fprintf(stderr, "features: cache %s is stale, rebuilding\n",
                 cached.c_str());
  }

  std::vector<SparseVec> out;
  out.reserve(ws.corpus.trace_count());
  for (const TraceRecord& t : ws.corpus.traces())
    out.push_back(featurize_sparse(t, &ws.vocab, dim));
  if (!cached.empty()) {
    ensure_dir(ws.cfg.paths.cache_dir);
    std::vector<std::vector<float>> rows;
    rows.reserve(out.size());
    for (const SparseVec& v : out) rows.push_back(densify(v, dim));
    write_feature_cache(cached, rows, dim);
    std::fprintf(stderr, "features: built and cached %s\n", cached.c_str());
  }
  return out;
}

}  // namespace

Workspace open_workspace(const ExperimentConfig& cfg) {
  if (cfg.paths.samples.empty() || cfg.paths.traces.empty())
    throw std::runtime_error("config: paths.samples and paths.traces required");

  Workspace ws;
  ws.cfg = cfg;
  ws.corpus = load_corpus(cfg.paths.samples, cfg.paths.traces);
  ws.corpus_digest = fnv1a64_mix(file_digest(cfg.paths.samples),
                                 file_digest(cfg.paths.traces));
  ws.vocab = resolve_vocab(ws);
  ws.vocab_digest = fnv1a64(ws.vocab.serialize());
  ws.feats = resolve_features(ws);

  std::unordered_set<uint32_t> train_envs(cfg.scenario.train_envs.begin(),
                                          cfg.scenario.train_envs.end());
  const auto& traces = ws.corpus.traces();
  for (size_t i = 0; i < traces.size(); ++i) {
    if (train_envs.count(traces[i].env_id))
      ws.train_env_traces[traces[i].sample_id].push_back(i);
    if (traces[i].env_id == cfg.scenario.test_env)
      ws.test_env_traces[traces[i].sample_id].push_back(i);
  }

  std::vector<const SampleRecord*> mal, ben;
  for (const SampleRecord& s : ws.corpus.samples()) {
    if (s.split == Split::test) {
      ws.test_samples.push_back(&s);
      continue;
    }
    (s.label ? mal : ben).push_back(&s);
  }
  for (auto* cls : {&mal, &ben}) {
    size_t cut = static_cast<size_t>(double(cls->size()) * cfg.grid.fit_fraction);
    for (size_t i = 0; i < cls->size(); ++i)
      (i < cut ? ws.fit_samples : ws.sel_samples).push_back((*cls)[i]);
  }
  return ws;
}

TrainInputs training_inputs(const Workspace& ws) {
  TrainInputs inputs;
  for (const SampleRecord* s : ws.fit_samples) {
    auto it = ws.train_env_traces.find(s->sample_id);
    if (it == ws.train_env_traces.end()) continue;
    TrainInputs::PairGroup g;
    for (size_t idx : it->second) {
      inputs.features.push_back(ws.feats[idx]);
      inputs.targets.push_back(soft_label(s->detections));
      g.feats.push_back(ws.feats[idx]);
      g.envs.push_back(ws.corpus.traces()[idx].env_id);
    }
    if (g.feats.size() >= 2) inputs.pair_pool.push_back(std::move(g));
  }
  if (inputs.features.empty())
    throw std::runtime_error("no training traces in the scenario train envs");
  return inputs;
}

void selection_rows(const Workspace& ws, std::vector<SparseVec>& feats,
                    std::vector<int>& labels) {
  for (const SampleRecord* s : ws.sel_samples) {
    auto it = ws.train_env_traces.find(s->sample_id);
    if (it == ws.train_env_traces.end()) continue;
    for (size_t idx : it->second) {
      feats.push_back(ws.feats[idx]);
      labels.push_back(s->label);
    }
  }
  if (feats.empty())
    throw std::runtime_error("no selection traces in the scenario train envs");
}

std::vector<double> score_traces(const Workspace& ws, const DetectorModel& m) {
  std::vector<double> s(ws.feats.size(), 0.0);
  for (size_t i = 0; i < ws.feats.size(); ++i)
    s[i] = forward_eval(m, ws.feats[i]).score;
  return s;
}

}  // namespace epdet::cli
