#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "epdet/actions.hpp"

namespace epdet {

// One environment-specific token planted into sandbox traces at a target
// sample prevalence and malware share among the carriers.
struct ArtifactSpec {
  std::string token;
  double prevalence = 0.0;     // fraction of the env's samples carrying it
  double malware_ratio = 0.0;  // malware fraction among carriers
};

struct EnvironmentSpec {
  uint32_t env_id = 0;
  bool sandbox = true;
  // Per-token chance that trace realization swaps a behavior token for a
  // host-specific junk token, and per-action chance of inserting a junk
  // file action. Endpoints get much higher rates than sandboxes.
  double substitution_rate = 0.0;
  double insertion_rate = 0.0;
  // Constant tokens emitted at the head of every trace in this env
  // (installed software, host names). Empty for endpoints.
  std::vector<std::string> fixture_tokens;
  std::vector<ArtifactSpec> artifacts;
  // Traces per sample in this env.
  uint32_t traces_min = 1;
  uint32_t traces_max = 1;
  // Chance a non-first endpoint trace lands beyond the 24h window.
  double late_trace_probability = 0.0;
  // Executed fraction of the behavior per trace: real hosts interrupt
  // executions, sandboxes run to completion (keep 1).
  double keep_min = 1.0;
  double keep_max = 1.0;
};

struct FamilySpec {
  std::string name;
  double prevalence = 0.0;  // weight within the malware population
  bool evasive = false;
  double generic_probability = 0.0;  // chance the sample loses its tag
  std::vector<Action> template_actions;
  std::vector<std::string> malicious_tokens;
};

struct PublisherSpec {
  std::string name;
  double prevalence = 0.0;
  std::vector<Action> template_actions;
};

// Detection-count noise: malware d is 1 + Geometric(p) clamped to
// malware_d_max; benign d is 0 with probability 1-q, else uniform in
// [1, benign_d_max].
struct LabelNoiseSpec {
  double malware_geometric_p = 0.03;
  int malware_d_max = 60;
  double benign_positive_rate = 0.04;  // q
  int benign_d_max = 4;
};

struct WorldSpec {
  uint64_t seed = 7;
  std::vector<EnvironmentSpec> environments;
  std::vector<FamilySpec> families;
  std::vector<PublisherSpec> publishers;
  // Boilerplate actions every sample performs before its own behavior.
  std::vector<Action> base_actions;
  LabelNoiseSpec label_noise;
  int label_threshold = kDefaultLabelThreshold;
  // Sandbox traces of evasive families stop after this many behavior
  // actions.
  uint32_t evasive_keep_actions = 4;
  // Malicious actions emitted by a sample detected above the label
  // threshold; below it the sample emits none and only this fraction of
  // its family template.
  uint32_t max_malicious_actions = 8;
  double weak_template_fraction = 0.6;
  int64_t epoch_base = 1514764800;  // 2018-01-01

  std::string to_json() const;
  static WorldSpec from_json(std::string_view text);

  // The tuned default: two sandboxes with distinct artifact sets and one
  // high-variability endpoint, eight malware families (three evasive),
  // six benign publishers.
  static WorldSpec default_world(uint64_t seed);

  // Structural validation; throws std::invalid_argument on bad specs.
  void validate() const;
};

struct GenCounts {
  uint32_t train_malware = 700;
  uint32_t train_benign = 700;
  uint32_t test_malware = 600;
  uint32_t test_benign = 600;
};

// Deterministic corpus synthesis: same spec and counts give byte-identical
// sample and trace files. Throws on infeasible artifact targets.
Corpus generate(const WorldSpec& spec, const GenCounts& counts);

struct ConformanceReport {
  struct ArtifactCheck {
    uint32_t env = 0;
    std::string token;
    double want_prevalence = 0.0, got_prevalence = 0.0;
    double want_malware_ratio = 0.0, got_malware_ratio = 0.0;
  };
  std::vector<ArtifactCheck> artifacts;

  struct FamilyCheck {
    std::string family;
    bool evasive_spec = false;
    bool evasive_measured = false;
    double mean_registry_sandbox = 0.0;
    double mean_registry_endpoint = 0.0;
  };
  std::vector<FamilyCheck> families;

  double borderline_rate = 0.0;
  double expected_borderline_rate = 0.0;

  double ncd_within_sandbox = 0.0;
  double ncd_between_sandbox = 0.0;
  double ncd_sandbox_endpoint = 0.0;

  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
  std::string to_json() const;
};

// Re-measures the generated corpus against the spec: artifact prevalence
// and malware ratio (tolerance 2 points), per-family evasion sign, the
// overall borderline rate (tolerance 3 points; the class mix is recovered
// from the d == 0 count, which only benign samples can produce) and the
// NCD ordering within-sandbox < between-sandbox < sandbox-endpoint.
ConformanceReport verify(const WorldSpec& spec, const Corpus& corpus);

}  // namespace epdet
