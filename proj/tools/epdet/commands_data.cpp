// Subcommands that work on raw reports and corpora: standardize, synth,
// distance.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <set>

#include "commands.hpp"
#include "epdet/dialects.hpp"
#include "epdet/similarity.hpp"
#include "epdet/synthgen.hpp"
#include "epdet/trace_io.hpp"
#include "pipeline.hpp"

namespace epdet::cli {

namespace fs = std::filesystem;

ExperimentConfig GlobalOpts::load_config() const {
  if (config_path.empty())
    throw std::runtime_error("this command needs --config <file>");
  ExperimentConfig c = ExperimentConfig::from_file(config_path);
  if (seed) c.seed = *seed;
  if (jobs) c.jobs = *jobs;
  return c;
}

int cmd_standardize(const GlobalOpts&, const std::string& raw_dir,
                    const std::string& dialect, const std::string& out_path) {
  const auto& names = dialect_names();
  if (std::find(names.begin(), names.end(), dialect) == names.end()) {
    std::string known;
    for (const auto& n : names) known += (known.empty() ? "" : ", ") + n;
    throw std::runtime_error("unknown dialect \"" + dialect + "\" (known: " +
                             known + ")");
  }

  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(raw_dir))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());

  std::vector<TraceRecord> traces;
  size_t dropped = 0;
  for (const fs::path& f : files) {
    RawParseStats stats;
    try {
      traces.push_back(
          parse_raw_report(read_text_file(f.string()), dialect, &stats));
    } catch (const std::exception& e) {
      throw std::runtime_error(f.string() + ": " + e.what());
    }
    dropped += stats.dropped_actions;
  }

  write_text_file(out_path, traces_to_jsonl(traces));
  if (files.empty())
    std::fprintf(stderr, "standardize: warning: no input files in %s\n",
                 raw_dir.c_str());
  std::fprintf(stderr,
               "standardize: %zu traces from %zu files, %zu actions dropped\n",
               traces.size(), files.size(), dropped);
  return 0;
}

int cmd_synth(const GlobalOpts& g, const std::string& spec_path,
              const std::string& out_dir, const std::vector<uint32_t>& counts) {
  WorldSpec spec;
  if (!spec_path.empty()) {
    spec = WorldSpec::from_json(read_text_file(spec_path));
    if (g.seed) spec.seed = *g.seed;
  } else {
    uint64_t seed = 7;
    if (!g.config_path.empty()) seed = g.load_config().seed;
    if (g.seed) seed = *g.seed;
    spec = WorldSpec::default_world(seed);
  }

  GenCounts gc;
  gc.train_malware = counts[0];
  gc.train_benign = counts[1];
  gc.test_malware = counts[2];
  gc.test_benign = counts[3];

  Corpus corpus = generate(spec, gc);
  ConformanceReport conf = verify(spec, corpus);

  ensure_dir(out_dir);
  const std::string samples_path = out_dir + "/samples.jsonl";
  const std::string traces_path = out_dir + "/traces.jsonl";
  save_corpus(corpus, samples_path, traces_path);
  write_text_file(out_dir + "/world.json", spec.to_json());
  write_text_file(out_dir + "/conformance.json", conf.to_json());

  for (const std::string& v : conf.violations)
    std::fprintf(stderr, "synth: warning: conformance: %s\n", v.c_str());
  std::fprintf(stderr,
               "synth: %zu samples, %zu traces, samples=%s traces=%s, "
               "conformance %s\n",
               corpus.sample_count(), corpus.trace_count(),
               hex64(file_digest(samples_path)).c_str(),
               hex64(file_digest(traces_path)).c_str(),
               conf.ok() ? "ok" : "violated");
  return 0;
}

int cmd_distance(const GlobalOpts& g, const std::vector<std::string>& groups) {
  ExperimentConfig cfg = g.load_config();
  Corpus corpus = load_corpus(cfg.paths.samples, cfg.paths.traces);

  std::vector<std::string> wanted =
      groups.empty() ? cfg.distance.groups : groups;
  if (wanted.empty()) {
    std::set<std::string> seen;
    for (const SampleRecord& s : corpus.samples())
      if (!s.family.empty()) seen.insert(s.family);
    wanted.assign(seen.begin(), seen.end());
  }
  if (wanted.empty()) throw std::runtime_error("no sample groups to measure");

  std::string csv = "group,env_a,env_b,pairs,available,mean_ncd\n";
  size_t cells = 0;
  for (const std::string& group : wanted) {
    std::vector<DistanceCell> table =
        distance_table(corpus, group, cfg.distance.pair_budget, cfg.seed);
    for (const DistanceCell& c : table) {
      char line[160];
      std::snprintf(line, sizeof line, "%s,%u,%u,%zu,%zu,%.6f\n",
                    group.c_str(), c.env_a, c.env_b, c.pairs, c.available,
                    c.mean_ncd);
      csv += line;
      ++cells;
    }
  }

  ensure_dir(cfg.paths.report_dir);
  const std::string out = cfg.paths.report_dir + "/distance.csv";
  write_text_file(out, csv);
  std::fprintf(stderr, "distance: %zu groups, %zu cells -> %s\n",
               wanted.size(), cells, out.c_str());
  return 0;
}

}  // namespace epdet::cli
