#include "epdet/evaluator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <set>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "epdet/trainer.hpp"

namespace epdet {

using json = nlohmann::json;

namespace {

struct ProtocolSample {
  const SampleRecord* rec;
  std::vector<size_t> window;  // candidate trace indexes
};

std::vector<ProtocolSample> collect_protocol_samples(const Corpus& corpus,
                                                     Split split,
                                                     uint32_t env,
                                                     double window_hours,
                                                     size_t* excluded) {
  std::vector<ProtocolSample> out;
  size_t missing = 0;
  for (const SampleRecord& s : corpus.samples()) {
    if (s.split != split) continue;
    std::vector<size_t> win =
        corpus.traces_within_window(s.sample_id, env, window_hours);
    if (win.empty()) {
      ++missing;
      continue;
    }
    out.push_back({&s, std::move(win)});
  }
  if (excluded) *excluded = missing;
  return out;
}

}  // namespace

ProtocolResult endpoint_protocol(const Corpus& corpus, Split split,
                                 const TraceScorer& score_of,
                                 const ProtocolOptions& opts) {
  if (opts.reps == 0) throw std::invalid_argument("reps must be positive");
  size_t excluded = 0;
  std::vector<ProtocolSample> samples = collect_protocol_samples(
      corpus, split, opts.env, opts.window_hours, &excluded);
  if (samples.empty())
    throw std::invalid_argument("no samples with traces in env " +
                                std::to_string(opts.env));

  // Pre-score every candidate trace once; repetitions only redraw.
  std::set<size_t> needed;
  for (const ProtocolSample& ps : samples)
    needed.insert(ps.window.begin(), ps.window.end());
  std::map<size_t, double> score;
  for (size_t idx : needed) score[idx] = score_of(idx);

  ProtocolResult res;
  res.evaluated_samples = samples.size();
  res.excluded_samples = excluded;
  res.tpr_reps.assign(opts.fpr_targets.size(), {});
  for (auto& v : res.tpr_reps) v.resize(opts.reps, 0.0);
  res.auc_reps.resize(opts.reps, 0.0);

  auto run_rep = [&](uint32_t k) {
    Rng rng(opts.seed + k);
    ScoreTable table;
    table.reserve(samples.size());
    for (const ProtocolSample& ps : samples) {
      size_t pick = ps.window[rng.next_below(ps.window.size())];
      table.push_back({ps.rec->sample_id, score.at(pick), ps.rec->label});
    }
    for (size_t t = 0; t < opts.fpr_targets.size(); ++t)
      res.tpr_reps[t][k] = tpr_at_fpr(table, opts.fpr_targets[t]);
    res.auc_reps[k] = auc(table);
  };

  int jobs = std::max(1, opts.jobs);
  if (jobs == 1 || opts.reps == 1) {
    for (uint32_t k = 0; k < opts.reps; ++k) run_rep(k);
  } else {
    std::atomic<uint32_t> next{0};
    auto worker = [&]() {
      while (true) {
        uint32_t k = next.fetch_add(1);
        if (k >= opts.reps) break;
        run_rep(k);
      }
    };
    std::vector<std::thread> threads;
    int n = std::min<int>(jobs, static_cast<int>(opts.reps));
    for (int t = 0; t < n; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }

  res.tpr_mean.resize(opts.fpr_targets.size(), 0.0);
  for (size_t t = 0; t < opts.fpr_targets.size(); ++t) {
    double s = 0.0;
    for (double v : res.tpr_reps[t]) s += v;
    res.tpr_mean[t] = s / static_cast<double>(opts.reps);
  }
  double s = 0.0;
  for (double v : res.auc_reps) s += v;
  res.auc_mean = s / static_cast<double>(opts.reps);
  return res;
}

std::vector<std::pair<std::string, double>> score_variability(
    const Corpus& corpus, Split split, const TraceScorer& score_of,
    uint32_t env, double window_hours) {
  std::vector<std::pair<std::string, double>> out;
  for (const SampleRecord& s : corpus.samples()) {
    if (s.split != split) continue;
    std::vector<size_t> win =
        corpus.traces_within_window(s.sample_id, env, window_hours);
    if (win.empty()) continue;
    double mean = 0.0;
    std::vector<double> scores;
    scores.reserve(win.size());
    for (size_t idx : win) {
      scores.push_back(score_of(idx));
      mean += scores.back();
    }
    mean /= static_cast<double>(scores.size());
    double var = 0.0;
    for (double v : scores) var += (v - mean) * (v - mean);
    var /= static_cast<double>(scores.size());
    out.emplace_back(s.sample_id, std::sqrt(var));
  }
  return out;
}

std::optional<TestResampling> test_resampling_from_name(std::string_view name) {
  if (name == "none") return TestResampling::none;
  if (name == "drop-generic") return TestResampling::drop_generic;
  if (name == "only-generic") return TestResampling::only_generic;
  if (name == "drop-borderline") return TestResampling::drop_borderline;
  if (name == "match-family") return TestResampling::match_family;
  return std::nullopt;
}

std::string_view test_resampling_name(TestResampling r) {
  switch (r) {
    case TestResampling::none: return "none";
    case TestResampling::drop_generic: return "drop-generic";
    case TestResampling::only_generic: return "only-generic";
    case TestResampling::drop_borderline: return "drop-borderline";
    case TestResampling::match_family: return "match-family";
  }
  return "none";
}

std::vector<SampleRecord> resample_test(
    const std::vector<SampleRecord>& records, TestResampling criterion,
    const std::map<std::string, double>* target, Rng* rng,
    std::vector<std::string>* warnings) {
  std::vector<SampleRecord> out;
  switch (criterion) {
    case TestResampling::none:
      out = records;
      break;
    case TestResampling::drop_generic:
      for (const SampleRecord& r : records)
        if (!(r.label == 1 && r.family.empty())) out.push_back(r);
      break;
    case TestResampling::only_generic:
      for (const SampleRecord& r : records)
        if (r.label == 0 || r.family.empty()) out.push_back(r);
      break;
    case TestResampling::drop_borderline:
      for (const SampleRecord& r : records)
        if (!r.is_borderline()) out.push_back(r);
      break;
    case TestResampling::match_family: {
      if (rng == nullptr)
        throw std::invalid_argument("match-family needs an rng");
      out = resample_families(records, FamilyResampling::match, target, *rng,
                              warnings);
      break;
    }
  }
  size_t pos = 0, neg = 0;
  for (const SampleRecord& r : out) (r.label ? pos : neg) += 1;
  if (pos == 0 || neg == 0)
    throw std::runtime_error(
        std::string("test resampling \"") +
        std::string(test_resampling_name(criterion)) +
        "\" left an unusable set (" + std::to_string(pos) + " malware, " +
        std::to_string(neg) + " benign)");
  return out;
}

double separability_probe(const std::vector<std::vector<double>>& embeddings,
                          const std::vector<uint32_t>& env_labels,
                          const ProbeOptions& opts) {
  if (embeddings.size() != env_labels.size())
    throw std::invalid_argument("embeddings/labels size mismatch");
  std::set<uint32_t> envs(env_labels.begin(), env_labels.end());
  if (envs.size() != 2)
    throw std::invalid_argument("probe needs exactly two environments, got " +
                                std::to_string(envs.size()));
  uint32_t lo = *envs.begin();
  std::vector<size_t> idx_a, idx_b;
  for (size_t i = 0; i < env_labels.size(); ++i)
    (env_labels[i] == lo ? idx_a : idx_b).push_back(i);
  if (idx_a.size() < 10 || idx_b.size() < 10)
    throw std::invalid_argument("probe needs at least 10 points per env");
  size_t dim = embeddings.front().size();
  for (const auto& e : embeddings)
    if (e.size() != dim)
      throw std::invalid_argument("inconsistent embedding dims");

  // Stratified split, seeded.
  Rng rng(derive_seed(opts.seed, "probe-split"));
  std::vector<size_t> train, test;
  for (std::vector<size_t>* group : {&idx_a, &idx_b}) {
    rng.shuffle(*group);
    size_t ntr = static_cast<size_t>(static_cast<double>(group->size()) *
                                     opts.train_fraction);
    if (ntr == 0) ntr = 1;
    if (ntr >= group->size()) ntr = group->size() - 1;
    train.insert(train.end(), group->begin(), group->begin() + ntr);
    test.insert(test.end(), group->begin() + ntr, group->end());
  }

  // z-score with train statistics.
  std::vector<double> mean(dim, 0.0), sd(dim, 0.0);
  for (size_t i : train)
    for (size_t j = 0; j < dim; ++j) mean[j] += embeddings[i][j];
  for (size_t j = 0; j < dim; ++j) mean[j] /= static_cast<double>(train.size());
  for (size_t i : train)
    for (size_t j = 0; j < dim; ++j) {
      double d = embeddings[i][j] - mean[j];
      sd[j] += d * d;
    }
  for (size_t j = 0; j < dim; ++j) {
    sd[j] = std::sqrt(sd[j] / static_cast<double>(train.size()));
    if (sd[j] < 1e-12) sd[j] = 1.0;
  }
  auto feat = [&](size_t i, size_t j) {
    return (embeddings[i][j] - mean[j]) / sd[j];
  };
  auto cls = [&](size_t i) { return env_labels[i] == lo ? 0.0 : 1.0; };

  // Full-batch Adam logistic regression from zero init.
  std::vector<double> w(dim + 1, 0.0), m(dim + 1, 0.0), v(dim + 1, 0.0);
  std::vector<double> g(dim + 1, 0.0);
  double inv_n = 1.0 / static_cast<double>(train.size());
  for (uint32_t epoch = 1; epoch <= opts.epochs; ++epoch) {
    std::fill(g.begin(), g.end(), 0.0);
    for (size_t i : train) {
      double logit = w[dim];
      for (size_t j = 0; j < dim; ++j) logit += w[j] * feat(i, j);
      double p = 1.0 / (1.0 + std::exp(-logit));
      double d = (p - cls(i)) * inv_n;
      for (size_t j = 0; j < dim; ++j) g[j] += d * feat(i, j);
      g[dim] += d;
    }
    double c1 = 1.0 - std::pow(0.9, static_cast<double>(epoch));
    double c2 = 1.0 - std::pow(0.999, static_cast<double>(epoch));
    for (size_t j = 0; j <= dim; ++j) {
      m[j] = 0.9 * m[j] + 0.1 * g[j];
      v[j] = 0.999 * v[j] + 0.001 * g[j] * g[j];
      w[j] -= opts.lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + 1e-8);
    }
  }

  size_t correct = 0;
  for (size_t i : test) {
    double logit = w[dim];
    for (size_t j = 0; j < dim; ++j) logit += w[j] * feat(i, j);
    int pred = logit >= 0.0 ? 1 : 0;
    if (pred == static_cast<int>(cls(i))) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

std::vector<LengthBiasRow> length_bias_report(const Corpus& corpus,
                                              Split split, uint32_t env,
                                              const TraceScorer& score_of) {
  struct Acc {
    size_t n = 0;
    double score_sum = 0.0;
    size_t malware = 0;
  };
  std::map<uint32_t, Acc> buckets;
  for (size_t i = 0; i < corpus.traces().size(); ++i) {
    const TraceRecord& t = corpus.traces()[i];
    if (t.env_id != env) continue;
    const SampleRecord* s = corpus.find_sample(t.sample_id);
    if (s == nullptr || s->split != split) continue;
    uint32_t reg = 0;
    for (const Action& a : t.actions)
      if (is_registry_action(a.kind)) ++reg;
    Acc& acc = buckets[reg];
    ++acc.n;
    acc.score_sum += score_of(i);
    acc.malware += static_cast<size_t>(s->label == 1);
  }
  std::vector<LengthBiasRow> rows;
  rows.reserve(buckets.size());
  for (auto& [reg, acc] : buckets) {
    rows.push_back({reg, acc.n, acc.score_sum / static_cast<double>(acc.n),
                    static_cast<double>(acc.malware) /
                        static_cast<double>(acc.n)});
  }
  return rows;
}

EvasiveSplit evasive_family_split(const Corpus& corpus, uint32_t env_a,
                                  uint32_t env_b) {
  struct FamAcc {
    uint64_t reg_a = 0, n_a = 0;
    uint64_t reg_b = 0, n_b = 0;
  };
  std::map<std::string, FamAcc> fams;
  for (const TraceRecord& t : corpus.traces()) {
    if (t.env_id != env_a && t.env_id != env_b) continue;
    const SampleRecord* s = corpus.find_sample(t.sample_id);
    if (s == nullptr || s->label != 1 || s->family.empty()) continue;
    uint32_t reg = 0;
    for (const Action& a : t.actions)
      if (is_registry_action(a.kind)) ++reg;
    FamAcc& acc = fams[s->family];
    if (t.env_id == env_a) {
      acc.reg_a += reg;
      ++acc.n_a;
    } else {
      acc.reg_b += reg;
      ++acc.n_b;
    }
  }
  EvasiveSplit out;
  for (auto& [fam, acc] : fams) {
    if (acc.n_a == 0 || acc.n_b == 0) {
      out.excluded.push_back(fam);
      continue;
    }
    double mean_a = static_cast<double>(acc.reg_a) / static_cast<double>(acc.n_a);
    double mean_b = static_cast<double>(acc.reg_b) / static_cast<double>(acc.n_b);
    if (mean_a < mean_b)
      out.evasive.push_back(fam);
    else
      out.non_evasive.push_back(fam);
  }
  return out;
}

std::string EvalReport::to_json() const {
  json sig = json::array();
  for (const auto& [id, sd] : sigma) sig.push_back({{"sample_id", id}, {"std", sd}});
  json j{{"auc", auc},
         {"env", env},
         {"evaluated_samples", evaluated_samples},
         {"excluded_samples", excluded_samples},
         {"fpr_targets", fpr_targets},
         {"reps", reps},
         {"resampling", resampling},
         {"seed", seed},
         {"sigma", std::move(sig)},
         {"tpr_at_fpr", tpr_at_fpr},
         // JSON has no infinity; an unbounded window serializes as -1.
         {"window_hours", std::isfinite(window_hours) ? window_hours : -1.0}};
  return j.dump();
}

}  // namespace epdet
