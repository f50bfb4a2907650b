#include "epdet/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "epdet/random.hpp"
#include "epdet/similarity.hpp"

namespace epdet {
namespace {

using nlohmann::json;

json action_to_json(const Action& a) {
  json toks = json::array();
  for (const auto& t : a.tokens) toks.push_back(t);
  return json{{"kind", std::string(action_type_name(a.kind))},
              {"tokens", std::move(toks)}};
}

Action action_from_json(const json& j) {
  std::string kind = j.at("kind").get<std::string>();
  auto at = action_type_from_name(kind);
  if (!at) throw std::invalid_argument("world spec: unknown action kind '" + kind + "'");
  Action a;
  a.kind = *at;
  for (const auto& t : j.at("tokens")) a.tokens.push_back(t.get<std::string>());
  return a;
}

json actions_to_json(const std::vector<Action>& v) {
  json arr = json::array();
  for (const auto& a : v) arr.push_back(action_to_json(a));
  return arr;
}

std::vector<Action> actions_from_json(const json& j) {
  std::vector<Action> v;
  for (const auto& e : j) v.push_back(action_from_json(e));
  return v;
}

// Every template follows this kind pattern so registry counts per realized
// trace are predictable: 8 registry actions per 16, spread evenly so a
// truncated prefix keeps a proportional share.
constexpr ActionType kTemplatePattern[16] = {
    ActionType::reg_create,  ActionType::file_create, ActionType::reg_create,
    ActionType::proc_create, ActionType::reg_create,  ActionType::file_create,
    ActionType::reg_create,  ActionType::mutex_create, ActionType::reg_create,
    ActionType::file_create, ActionType::reg_create,  ActionType::proc_inject,
    ActionType::reg_create,  ActionType::file_create, ActionType::reg_delete,
    ActionType::file_create};

std::string make_token(Rng& rng, std::set<std::string>& used) {
  static const char* kSyl[] = {"ba",  "cor", "dun", "fel", "gri", "hol",
                               "jin", "kas", "lum", "mer", "nor", "ost",
                               "pel", "qui", "rav", "sol", "tal", "umb",
                               "vex", "wil", "yar", "zen"};
  for (;;) {
    int n = static_cast<int>(rng.next_int(2, 3));
    std::string t;
    for (int i = 0; i < n; ++i) t += kSyl[rng.next_below(22)];
    if (used.insert(t).second) return t;
  }
}

std::vector<Action> make_template(Rng& rng, const std::vector<std::string>& pool,
                                  size_t len, bool allow_inject) {
  std::vector<Action> out;
  out.reserve(len);
  for (size_t i = 0; i < len; ++i) {
    ActionType k = kTemplatePattern[i % 16];
    if (k == ActionType::proc_inject && !allow_inject) k = ActionType::proc_create;
    Action a;
    a.kind = k;
    size_t ntok = 2 + rng.next_below(2);
    for (size_t t = 0; t < ntok; ++t)
      a.tokens.push_back(pool[rng.next_below(pool.size())]);
    out.push_back(std::move(a));
  }
  return out;
}

std::string junk_token(Rng& rng) {
  size_t len = static_cast<size_t>(rng.next_int(4, 8));
  std::string t(len, 'a');
  for (auto& c : t) c = static_cast<char>('a' + rng.next_below(26));
  return t;
}

std::string random_hex_id(Rng& rng) {
  char buf[17];
  std::string id;
  for (int i = 0; i < 4; ++i) {
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(rng.next_u64()));
    id += buf;
  }
  return id;
}

size_t pick_weighted(const std::vector<double>& cumulative, double u) {
  for (size_t i = 0; i < cumulative.size(); ++i)
    if (u < cumulative[i]) return i;
  return cumulative.size() - 1;
}

std::vector<double> cumulative_weights(const std::vector<double>& w) {
  double total = 0.0;
  for (double x : w) total += x;
  std::vector<double> cum(w.size());
  double run = 0.0;
  for (size_t i = 0; i < w.size(); ++i) {
    run += w[i] / total;
    cum[i] = run;
  }
  if (!cum.empty()) cum.back() = 1.0;
  return cum;
}

std::vector<Action> fixture_block(const EnvironmentSpec& env) {
  static const ActionType kCycle[3] = {ActionType::file_create,
                                       ActionType::reg_create,
                                       ActionType::proc_create};
  std::vector<Action> out;
  out.reserve(env.fixture_tokens.size());
  for (size_t i = 0; i < env.fixture_tokens.size(); ++i)
    out.push_back({kCycle[i % 3], {env.fixture_tokens[i], "host"}});
  return out;
}

}  // namespace

std::string WorldSpec::to_json() const {
  json j;
  j["seed"] = seed;
  j["label_threshold"] = label_threshold;
  j["evasive_keep_actions"] = evasive_keep_actions;
  j["max_malicious_actions"] = max_malicious_actions;
  j["weak_template_fraction"] = weak_template_fraction;
  j["epoch_base"] = epoch_base;
  j["label_noise"] = json{{"malware_geometric_p", label_noise.malware_geometric_p},
                          {"malware_d_max", label_noise.malware_d_max},
                          {"benign_positive_rate", label_noise.benign_positive_rate},
                          {"benign_d_max", label_noise.benign_d_max}};
  json envs = json::array();
  for (const auto& e : environments) {
    json art = json::array();
    for (const auto& a : e.artifacts)
      art.push_back(json{{"token", a.token},
                         {"prevalence", a.prevalence},
                         {"malware_ratio", a.malware_ratio}});
    envs.push_back(json{{"env_id", e.env_id},
                        {"sandbox", e.sandbox},
                        {"substitution_rate", e.substitution_rate},
                        {"insertion_rate", e.insertion_rate},
                        {"fixture_tokens", e.fixture_tokens},
                        {"artifacts", std::move(art)},
                        {"traces_min", e.traces_min},
                        {"traces_max", e.traces_max},
                        {"late_trace_probability", e.late_trace_probability},
                        {"keep_min", e.keep_min},
                        {"keep_max", e.keep_max}});
  }
  j["environments"] = std::move(envs);
  json fams = json::array();
  for (const auto& f : families)
    fams.push_back(json{{"name", f.name},
                        {"prevalence", f.prevalence},
                        {"evasive", f.evasive},
                        {"generic_probability", f.generic_probability},
                        {"template_actions", actions_to_json(f.template_actions)},
                        {"malicious_tokens", f.malicious_tokens}});
  j["families"] = std::move(fams);
  json pubs = json::array();
  for (const auto& p : publishers)
    pubs.push_back(json{{"name", p.name},
                        {"prevalence", p.prevalence},
                        {"template_actions", actions_to_json(p.template_actions)}});
  j["publishers"] = std::move(pubs);
  j["base_actions"] = actions_to_json(base_actions);
  return j.dump(2) + "\n";
}

WorldSpec WorldSpec::from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("world spec: ") + e.what());
  }
  WorldSpec s;
  try {
    s.seed = j.value("seed", s.seed);
    s.label_threshold = j.value("label_threshold", s.label_threshold);
    s.evasive_keep_actions = j.value("evasive_keep_actions", s.evasive_keep_actions);
    s.max_malicious_actions = j.value("max_malicious_actions", s.max_malicious_actions);
    s.weak_template_fraction = j.value("weak_template_fraction", s.weak_template_fraction);
    s.epoch_base = j.value("epoch_base", s.epoch_base);
    if (j.contains("label_noise")) {
      const auto& n = j.at("label_noise");
      s.label_noise.malware_geometric_p =
          n.value("malware_geometric_p", s.label_noise.malware_geometric_p);
      s.label_noise.malware_d_max = n.value("malware_d_max", s.label_noise.malware_d_max);
      s.label_noise.benign_positive_rate =
          n.value("benign_positive_rate", s.label_noise.benign_positive_rate);
      s.label_noise.benign_d_max = n.value("benign_d_max", s.label_noise.benign_d_max);
    }
    for (const auto& ej : j.at("environments")) {
      EnvironmentSpec e;
      e.env_id = ej.at("env_id").get<uint32_t>();
      e.sandbox = ej.at("sandbox").get<bool>();
      e.substitution_rate = ej.value("substitution_rate", 0.0);
      e.insertion_rate = ej.value("insertion_rate", 0.0);
      if (ej.contains("fixture_tokens"))
        for (const auto& t : ej.at("fixture_tokens"))
          e.fixture_tokens.push_back(t.get<std::string>());
      if (ej.contains("artifacts"))
        for (const auto& aj : ej.at("artifacts")) {
          ArtifactSpec a;
          a.token = aj.at("token").get<std::string>();
          a.prevalence = aj.at("prevalence").get<double>();
          a.malware_ratio = aj.at("malware_ratio").get<double>();
          e.artifacts.push_back(std::move(a));
        }
      e.traces_min = ej.value("traces_min", 1u);
      e.traces_max = ej.value("traces_max", 1u);
      e.late_trace_probability = ej.value("late_trace_probability", 0.0);
      e.keep_min = ej.value("keep_min", 1.0);
      e.keep_max = ej.value("keep_max", 1.0);
      s.environments.push_back(std::move(e));
    }
    for (const auto& fj : j.at("families")) {
      FamilySpec f;
      f.name = fj.at("name").get<std::string>();
      f.prevalence = fj.at("prevalence").get<double>();
      f.evasive = fj.value("evasive", false);
      f.generic_probability = fj.value("generic_probability", 0.0);
      f.template_actions = actions_from_json(fj.at("template_actions"));
      for (const auto& t : fj.at("malicious_tokens"))
        f.malicious_tokens.push_back(t.get<std::string>());
      s.families.push_back(std::move(f));
    }
    for (const auto& pj : j.at("publishers")) {
      PublisherSpec p;
      p.name = pj.at("name").get<std::string>();
      p.prevalence = pj.at("prevalence").get<double>();
      p.template_actions = actions_from_json(pj.at("template_actions"));
      s.publishers.push_back(std::move(p));
    }
    if (j.contains("base_actions"))
      s.base_actions = actions_from_json(j.at("base_actions"));
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("world spec: ") + e.what());
  }
  s.validate();
  return s;
}

void WorldSpec::validate() const {
  auto fail = [](const std::string& msg) {
    throw std::invalid_argument("world spec: " + msg);
  };
  if (environments.empty()) fail("no environments");
  std::set<uint32_t> ids;
  bool any_sandbox = false;
  for (const auto& e : environments) {
    if (!ids.insert(e.env_id).second) fail("duplicate env_id");
    if (e.sandbox != (e.env_id != kEndpointEnv))
      fail("env_id 0 is the endpoint, positive ids are sandboxes");
    any_sandbox |= e.sandbox;
    if (e.substitution_rate < 0 || e.substitution_rate > 1 ||
        e.insertion_rate < 0 || e.insertion_rate > 1 ||
        e.late_trace_probability < 0 || e.late_trace_probability > 1)
      fail("env rates must lie in [0, 1]");
    if (e.traces_min > e.traces_max) fail("traces_min > traces_max");
    if (!(e.keep_min > 0.0) || e.keep_min > e.keep_max || e.keep_max > 1.0)
      fail("keep fractions must satisfy 0 < keep_min <= keep_max <= 1");
    for (const auto& a : e.artifacts) {
      if (a.token.empty()) fail("artifact with empty token");
      if (a.prevalence < 0 || a.prevalence > 1 || a.malware_ratio < 0 ||
          a.malware_ratio > 1)
        fail("artifact rates must lie in [0, 1]");
    }
  }
  if (!any_sandbox) fail("needs at least one sandbox environment");
  if (families.empty()) fail("no families");
  double fam_total = 0.0;
  for (const auto& f : families) {
    if (f.name.empty()) fail("family with empty name");
    if (f.prevalence < 0) fail("negative family prevalence");
    fam_total += f.prevalence;
    if (f.template_actions.empty()) fail("family '" + f.name + "' has no template");
    if (f.malicious_tokens.empty())
      fail("family '" + f.name + "' has no malicious tokens");
    if (f.generic_probability < 0 || f.generic_probability > 1)
      fail("generic_probability must lie in [0, 1]");
  }
  if (fam_total <= 0) fail("family prevalences sum to zero");
  if (publishers.empty()) fail("no publishers");
  double pub_total = 0.0;
  for (const auto& p : publishers) {
    if (p.name.empty()) fail("publisher with empty name");
    if (p.prevalence < 0) fail("negative publisher prevalence");
    pub_total += p.prevalence;
    if (p.template_actions.empty()) fail("publisher '" + p.name + "' has no template");
  }
  if (pub_total <= 0) fail("publisher prevalences sum to zero");
  const auto& n = label_noise;
  if (!(n.malware_geometric_p > 0.0) || n.malware_geometric_p >= 1.0)
    fail("malware_geometric_p must lie in (0, 1)");
  if (n.malware_d_max < 1) fail("malware_d_max must be >= 1");
  if (n.benign_positive_rate < 0 || n.benign_positive_rate >= 1.0)
    fail("benign_positive_rate must lie in [0, 1)");
  if (n.benign_d_max < 1) fail("benign_d_max must be >= 1");
  if (label_threshold < 0) fail("negative label_threshold");
  if (weak_template_fraction < 0 || weak_template_fraction > 1)
    fail("weak_template_fraction must lie in [0, 1]");
}

namespace {

struct SampleJob {
  SampleRecord rec;
  std::vector<Action> behavior;
  bool evasive = false;
};

}  // namespace

Corpus generate(const WorldSpec& spec, const GenCounts& counts) {
  spec.validate();

  std::vector<double> fam_w, pub_w;
  for (const auto& f : spec.families) fam_w.push_back(f.prevalence);
  for (const auto& p : spec.publishers) pub_w.push_back(p.prevalence);
  const auto fam_cum = cumulative_weights(fam_w);
  const auto pub_cum = cumulative_weights(pub_w);

  struct Block {
    Split split;
    bool malware;
    uint32_t count;
  };
  const Block blocks[4] = {{Split::train, true, counts.train_malware},
                           {Split::train, false, counts.train_benign},
                           {Split::test, true, counts.test_malware},
                           {Split::test, false, counts.test_benign}};

  std::vector<SampleJob> jobs;
  uint64_t ordinal = 0;
  for (const auto& blk : blocks) {
    for (uint32_t i = 0; i < blk.count; ++i, ++ordinal) {
      Rng rng(derive_seed(spec.seed, "sample", ordinal));
      SampleJob job;
      job.rec.sample_id = random_hex_id(rng);
      job.rec.split = blk.split;

      const std::vector<Action>* tpl = nullptr;
      const FamilySpec* fam = nullptr;
      if (blk.malware) {
        fam = &spec.families[pick_weighted(fam_cum, rng.next_double())];
        tpl = &fam->template_actions;
        job.evasive = fam->evasive;
        double u = rng.next_double();
        const double p = spec.label_noise.malware_geometric_p;
        int d = 1 + static_cast<int>(std::floor(std::log1p(-u) / std::log1p(-p)));
        job.rec.detections = std::min(d, spec.label_noise.malware_d_max);
        job.rec.family = rng.next_bernoulli(fam->generic_probability) ? "" : fam->name;
      } else {
        const auto& pub = spec.publishers[pick_weighted(pub_cum, rng.next_double())];
        tpl = &pub.template_actions;
        job.rec.family = pub.name;
        job.rec.detections =
            rng.next_bernoulli(spec.label_noise.benign_positive_rate)
                ? static_cast<int>(rng.next_int(1, spec.label_noise.benign_d_max))
                : 0;
      }
      job.rec.label = derive_label(job.rec.detections, spec.label_threshold);

      const int64_t day = 86400;
      job.rec.first_seen =
          blk.split == Split::train
              ? spec.epoch_base + rng.next_int(0, 60 * day - 1)
              : spec.epoch_base + 90 * day + rng.next_int(0, 60 * day - 1);

      job.behavior = spec.base_actions;
      std::string identity(8, 'a');
      for (auto& c : identity) c = static_cast<char>('a' + rng.next_below(26));
      job.behavior.push_back(
          {ActionType::file_create, {"<userdir>", identity, "exe"}});
      const bool weak = blk.malware && job.rec.detections <= spec.label_threshold;
      size_t take = tpl->size();
      if (weak) {
        take = static_cast<size_t>(
            std::llround(spec.weak_template_fraction * double(tpl->size())));
        if (take < 1) take = 1;
      }
      job.behavior.insert(job.behavior.end(), tpl->begin(), tpl->begin() + take);
      if (blk.malware && !weak) {
        static const ActionType kMalCycle[4] = {
            ActionType::reg_create, ActionType::file_create,
            ActionType::mutex_create, ActionType::proc_inject};
        static const char* kMalSuffix[4] = {"run", "bin", "mtx", "inj"};
        for (uint32_t m = 0; m < spec.max_malicious_actions; ++m) {
          const auto& tok =
              fam->malicious_tokens[rng.next_below(fam->malicious_tokens.size())];
          job.behavior.push_back({kMalCycle[m % 4], {tok, kMalSuffix[m % 4]}});
        }
      }
      jobs.push_back(std::move(job));
    }
  }

  // Plant artifacts by exact label counts so measured prevalence and
  // malware ratio match the spec up to rounding.
  const size_t n_samples = jobs.size();
  std::vector<std::vector<std::vector<std::string>>> planted(
      n_samples, std::vector<std::vector<std::string>>(spec.environments.size()));
  std::vector<size_t> mal_idx, ben_idx;
  for (size_t s = 0; s < n_samples; ++s)
    (jobs[s].rec.label == 1 ? mal_idx : ben_idx).push_back(s);
  for (size_t ei = 0; ei < spec.environments.size(); ++ei) {
    const auto& env = spec.environments[ei];
    for (size_t ai = 0; ai < env.artifacts.size(); ++ai) {
      const auto& art = env.artifacts[ai];
      const auto n_present =
          static_cast<size_t>(std::llround(art.prevalence * double(n_samples)));
      const auto n_mal = static_cast<size_t>(
          std::llround(art.malware_ratio * double(n_present)));
      const size_t n_ben = n_present - n_mal;
      if (n_mal > mal_idx.size() || n_ben > ben_idx.size())
        throw std::runtime_error(
            "artifact '" + art.token + "' in env " + std::to_string(env.env_id) +
            " is infeasible for the requested sample counts");
      Rng rng(derive_seed(spec.seed, "artifact",
                          (uint64_t(env.env_id) << 16) | uint64_t(ai)));
      for (size_t k : rng.sample_without_replacement(mal_idx.size(), n_mal))
        planted[mal_idx[k]][ei].push_back(art.token);
      for (size_t k : rng.sample_without_replacement(ben_idx.size(), n_ben))
        planted[ben_idx[k]][ei].push_back(art.token);
    }
  }

  Corpus corpus;
  for (const auto& job : jobs) corpus.add_sample(job.rec);

  const int64_t hour = 3600;
  for (size_t s = 0; s < n_samples; ++s) {
    const auto& job = jobs[s];
    for (size_t ei = 0; ei < spec.environments.size(); ++ei) {
      const auto& env = spec.environments[ei];
      const auto fixtures = fixture_block(env);
      Rng count_rng(derive_seed(spec.seed, "traces", (uint64_t(s) << 8) | ei));
      const auto n_traces =
          static_cast<uint32_t>(count_rng.next_int(env.traces_min, env.traces_max));
      for (uint32_t t = 0; t < n_traces; ++t) {
        Rng rng(derive_seed(spec.seed, "trace",
                            (uint64_t(s) << 16) | (uint64_t(ei) << 8) | t));
        TraceRecord tr;
        tr.sample_id = job.rec.sample_id;
        tr.env_id = env.env_id;
        if (env.sandbox) {
          tr.timestamp = job.rec.first_seen + rng.next_int(0, 6 * hour);
        } else if (t == 0) {
          tr.timestamp = job.rec.first_seen;
        } else if (rng.next_bernoulli(env.late_trace_probability)) {
          tr.timestamp = job.rec.first_seen + 24 * hour + rng.next_int(hour, 72 * hour);
        } else {
          tr.timestamp = job.rec.first_seen + rng.next_int(600, 20 * hour);
        }

        std::vector<Action> beh = job.behavior;
        if (env.sandbox && job.evasive && beh.size() > spec.evasive_keep_actions)
          beh.resize(spec.evasive_keep_actions);
        const double keep = rng.next_uniform(env.keep_min, env.keep_max);
        auto keep_n = static_cast<size_t>(std::llround(keep * double(beh.size())));
        if (keep_n < 1) keep_n = 1;
        if (keep_n < beh.size()) beh.resize(keep_n);

        tr.actions = fixtures;
        tr.actions.reserve(fixtures.size() + beh.size() + planted[s][ei].size() + 4);
        for (auto& a : beh) {
          for (auto& tok : a.tokens)
            if (rng.next_bernoulli(env.substitution_rate)) tok = junk_token(rng);
          tr.actions.push_back(std::move(a));
          if (rng.next_bernoulli(env.insertion_rate))
            tr.actions.push_back(
                {ActionType::file_create, {junk_token(rng), junk_token(rng)}});
        }
        for (const auto& tok : planted[s][ei])
          tr.actions.push_back({ActionType::file_create, {tok}});
        corpus.add_trace(std::move(tr));
      }
    }
  }
  return corpus;
}

ConformanceReport verify(const WorldSpec& spec, const Corpus& corpus) {
  ConformanceReport rep;
  auto violate = [&rep](std::string msg) { rep.violations.push_back(std::move(msg)); };

  std::unordered_map<uint32_t, const EnvironmentSpec*> env_of;
  for (const auto& e : spec.environments) env_of[e.env_id] = &e;
  std::set<uint32_t> unknown_envs;
  for (const auto& t : corpus.traces())
    if (!env_of.count(t.env_id)) unknown_envs.insert(t.env_id);
  for (uint32_t e : unknown_envs)
    violate("trace env " + std::to_string(e) + " is not in the spec");

  const auto& samples = corpus.samples();
  const double n_samples = double(samples.size());

  for (const auto& env : spec.environments) {
    for (const auto& art : env.artifacts) {
      size_t carriers = 0, mal_carriers = 0;
      for (const auto& s : samples) {
        bool carries = false;
        for (size_t ti : corpus.traces_of_env(s.sample_id, env.env_id)) {
          for (const auto& a : corpus.traces()[ti].actions)
            for (const auto& tok : a.tokens)
              if (tok == art.token) { carries = true; break; }
          if (carries) break;
        }
        if (!carries) continue;
        ++carriers;
        if (s.label == 1) ++mal_carriers;
      }
      ConformanceReport::ArtifactCheck chk;
      chk.env = env.env_id;
      chk.token = art.token;
      chk.want_prevalence = art.prevalence;
      chk.got_prevalence = n_samples > 0 ? double(carriers) / n_samples : 0.0;
      chk.want_malware_ratio = art.malware_ratio;
      chk.got_malware_ratio =
          carriers > 0 ? double(mal_carriers) / double(carriers) : 0.0;
      if (std::fabs(chk.got_prevalence - chk.want_prevalence) > 0.02)
        violate("artifact '" + art.token + "' env " + std::to_string(env.env_id) +
                ": prevalence off spec by more than 2 points");
      if (carriers > 0 &&
          std::fabs(chk.got_malware_ratio - chk.want_malware_ratio) > 0.02)
        violate("artifact '" + art.token + "' env " + std::to_string(env.env_id) +
                ": malware ratio off spec by more than 2 points");
      rep.artifacts.push_back(std::move(chk));
    }
  }

  for (const auto& fam : spec.families) {
    double reg_sb = 0, reg_ep = 0;
    size_t n_sb = 0, n_ep = 0;
    for (const auto& s : samples) {
      if (s.family != fam.name) continue;
      for (size_t ti : corpus.traces_of(s.sample_id)) {
        const auto& tr = corpus.traces()[ti];
        auto it = env_of.find(tr.env_id);
        if (it == env_of.end()) continue;
        size_t regs = 0;
        for (const auto& a : tr.actions) regs += is_registry_action(a.kind);
        if (it->second->sandbox) { reg_sb += double(regs); ++n_sb; }
        else { reg_ep += double(regs); ++n_ep; }
      }
    }
    ConformanceReport::FamilyCheck chk;
    chk.family = fam.name;
    chk.evasive_spec = fam.evasive;
    chk.mean_registry_sandbox = n_sb ? reg_sb / double(n_sb) : 0.0;
    chk.mean_registry_endpoint = n_ep ? reg_ep / double(n_ep) : 0.0;
    if (n_sb && n_ep) {
      chk.evasive_measured = chk.mean_registry_sandbox < chk.mean_registry_endpoint;
      if (chk.evasive_measured != chk.evasive_spec)
        violate("family '" + fam.name + "': measured evasion disagrees with spec");
    } else {
      chk.evasive_measured = chk.evasive_spec;
    }
    rep.families.push_back(std::move(chk));
  }

  if (!samples.empty()) {
    size_t zero = 0, borderline = 0;
    for (const auto& s : samples) {
      if (s.detections == 0) ++zero;
      if (s.is_borderline()) ++borderline;
    }
    const auto& n = spec.label_noise;
    double ben_hat = std::min(n_samples, double(zero) / (1.0 - n.benign_positive_rate));
    double mal_hat = n_samples - ben_hat;
    double p_mal = n.malware_d_max < kBorderlineUpper
                       ? 1.0
                       : 1.0 - std::pow(1.0 - n.malware_geometric_p,
                                        double(kBorderlineUpper - 1));
    double p_ben = n.benign_positive_rate *
                   (double(std::min(n.benign_d_max, kBorderlineUpper - 1)) /
                    double(n.benign_d_max));
    rep.borderline_rate = double(borderline) / n_samples;
    rep.expected_borderline_rate = (mal_hat * p_mal + ben_hat * p_ben) / n_samples;
    if (std::fabs(rep.borderline_rate - rep.expected_borderline_rate) > 0.03)
      violate("borderline rate off the label-noise spec by more than 3 points");
  }

  // NCD ordering over the three largest tagged families.
  std::vector<std::pair<size_t, std::string>> by_count;
  for (const auto& fam : spec.families) {
    size_t c = 0;
    for (const auto& s : samples) c += (s.family == fam.name);
    if (c >= 2) by_count.push_back({c, fam.name});
  }
  std::stable_sort(by_count.begin(), by_count.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  if (by_count.size() > 3) by_count.resize(3);
  double ncd_within = 0, ncd_between = 0, ncd_ep = 0;
  size_t w_within = 0, w_between = 0, w_ep = 0;
  for (const auto& [c, name] : by_count) {
    for (const auto& cell : distance_table(corpus, name, 120, spec.seed)) {
      auto ita = env_of.find(cell.env_a);
      auto itb = env_of.find(cell.env_b);
      if (ita == env_of.end() || itb == env_of.end()) continue;
      const bool sba = ita->second->sandbox, sbb = itb->second->sandbox;
      double* acc = nullptr;
      size_t* wt = nullptr;
      if (sba && sbb && cell.env_a == cell.env_b) { acc = &ncd_within; wt = &w_within; }
      else if (sba && sbb) { acc = &ncd_between; wt = &w_between; }
      else if (sba != sbb) { acc = &ncd_ep; wt = &w_ep; }
      else continue;
      *acc += cell.mean_ncd * double(cell.pairs);
      *wt += cell.pairs;
    }
  }
  rep.ncd_within_sandbox = w_within ? ncd_within / double(w_within) : 0.0;
  rep.ncd_between_sandbox = w_between ? ncd_between / double(w_between) : 0.0;
  rep.ncd_sandbox_endpoint = w_ep ? ncd_ep / double(w_ep) : 0.0;
  if (w_within && w_between && rep.ncd_within_sandbox >= rep.ncd_between_sandbox)
    violate("NCD within-sandbox is not below between-sandbox");
  if (w_between && w_ep && rep.ncd_between_sandbox >= rep.ncd_sandbox_endpoint)
    violate("NCD between-sandbox is not below sandbox-endpoint");

  return rep;
}

std::string ConformanceReport::to_json() const {
  json j;
  json arts = json::array();
  for (const auto& a : artifacts)
    arts.push_back(json{{"env", a.env},
                        {"token", a.token},
                        {"want_prevalence", a.want_prevalence},
                        {"got_prevalence", a.got_prevalence},
                        {"want_malware_ratio", a.want_malware_ratio},
                        {"got_malware_ratio", a.got_malware_ratio}});
  j["artifacts"] = std::move(arts);
  json fams = json::array();
  for (const auto& f : families)
    fams.push_back(json{{"family", f.family},
                        {"evasive_spec", f.evasive_spec},
                        {"evasive_measured", f.evasive_measured},
                        {"mean_registry_sandbox", f.mean_registry_sandbox},
                        {"mean_registry_endpoint", f.mean_registry_endpoint}});
  j["families"] = std::move(fams);
  j["borderline_rate"] = borderline_rate;
  j["expected_borderline_rate"] = expected_borderline_rate;
  j["ncd_within_sandbox"] = ncd_within_sandbox;
  j["ncd_between_sandbox"] = ncd_between_sandbox;
  j["ncd_sandbox_endpoint"] = ncd_sandbox_endpoint;
  j["ok"] = ok();
  j["violations"] = violations;
  return j.dump(2) + "\n";
}

WorldSpec WorldSpec::default_world(uint64_t seed) {
  WorldSpec s;
  s.seed = seed;
  Rng rng(derive_seed(seed, "world-build"));
  std::set<std::string> used;

  s.base_actions = {
      {ActionType::reg_create, {"hklm", "software", "microsoft", "windows"}},
      {ActionType::file_create, {"<userdir>", "appdata", "local", "temp"}},
      {ActionType::proc_create, {"<system32>", "svchost"}},
      {ActionType::reg_create, {"hkcu", "software", "classes"}},
      {ActionType::mutex_create, {"local", "session"}},
  };

  struct FamSeed {
    const char* name;
    double prev;
    bool evasive;
  };
  const FamSeed fam_seeds[8] = {
      {"redloader", 0.20, false}, {"quartzrat", 0.17, false},
      {"nightjar", 0.15, true},   {"brassfang", 0.12, false},
      {"coilworm", 0.11, true},   {"griftkit", 0.10, false},
      {"maruvine", 0.08, false},  {"sablecrypt", 0.07, true}};
  for (const auto& fs : fam_seeds) {
    FamilySpec f;
    f.name = fs.name;
    f.prevalence = fs.prev;
    f.evasive = fs.evasive;
    f.generic_probability = 0.08;
    std::vector<std::string> pool;
    for (int i = 0; i < 12; ++i) pool.push_back(make_token(rng, used));
    f.template_actions =
        make_template(rng, pool, static_cast<size_t>(rng.next_int(14, 18)), true);
    for (int i = 0; i < 6; ++i) f.malicious_tokens.push_back(make_token(rng, used));
    s.families.push_back(std::move(f));
  }

  struct PubSeed {
    const char* name;
    double prev;
  };
  const PubSeed pub_seeds[6] = {{"operasoft", 0.22}, {"nimbuspress", 0.20},
                                {"quillware", 0.17}, {"vertexcad", 0.15},
                                {"lumaplay", 0.14},  {"pinebox", 0.12}};
  for (const auto& ps : pub_seeds) {
    PublisherSpec p;
    p.name = ps.name;
    p.prevalence = ps.prev;
    std::vector<std::string> pool;
    for (int i = 0; i < 12; ++i) pool.push_back(make_token(rng, used));
    p.template_actions =
        make_template(rng, pool, static_cast<size_t>(rng.next_int(14, 18)), false);
    s.publishers.push_back(std::move(p));
  }

  EnvironmentSpec endpoint;
  endpoint.env_id = kEndpointEnv;
  endpoint.sandbox = false;
  endpoint.substitution_rate = 0.22;
  endpoint.insertion_rate = 0.12;
  endpoint.traces_min = 2;
  endpoint.traces_max = 4;
  endpoint.late_trace_probability = 0.25;
  endpoint.keep_min = 0.55;
  endpoint.keep_max = 0.95;
  s.environments.push_back(std::move(endpoint));

  // the second sandbox runs a noisier instrumentation stack, so cross-sandbox
  // pairs of the same sample differ in junk dilution the way endpoint traces do
  for (uint32_t env_id = 1; env_id <= 2; ++env_id) {
    EnvironmentSpec sb;
    sb.env_id = env_id;
    sb.sandbox = true;
    sb.substitution_rate = env_id == 1 ? 0.02 : 0.10;
    sb.insertion_rate = env_id == 1 ? 0.02 : 0.06;
    for (int i = 0; i < 5; ++i) sb.fixture_tokens.push_back(make_token(rng, used));
    if (env_id == 1) {
      sb.artifacts = {{make_token(rng, used), 0.34, 0.97},
                      {make_token(rng, used), 0.22, 1.00},
                      {make_token(rng, used), 0.12, 0.90},
                      {make_token(rng, used), 0.40, 0.04},
                      {make_token(rng, used), 0.08, 1.00}};
    } else {
      sb.artifacts = {{make_token(rng, used), 0.30, 0.96},
                      {make_token(rng, used), 0.18, 1.00},
                      {make_token(rng, used), 0.45, 0.05},
                      {make_token(rng, used), 0.10, 0.95}};
    }
    s.environments.push_back(std::move(sb));
  }
  return s;
}

}  // namespace epdet
