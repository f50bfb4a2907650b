#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"

namespace epdet::cli {

// Options shared by every subcommand. `config` is loaded lazily: commands
// that need corpus paths fail with a clear message when it is missing.
struct GlobalOpts {
  std::string config_path;
  std::optional<uint64_t> seed;  // --seed override
  std::optional<int> jobs;       // --jobs override

  ExperimentConfig load_config() const;
};

int cmd_standardize(const GlobalOpts& g, const std::string& raw_dir,
                    const std::string& dialect, const std::string& out_path);

int cmd_synth(const GlobalOpts& g, const std::string& spec_path,
              const std::string& out_dir, const std::vector<uint32_t>& counts);

int cmd_train(const GlobalOpts& g);

int cmd_eval(const GlobalOpts& g, const std::string& checkpoint,
             const std::string& resampling);

int cmd_drift(const GlobalOpts& g, const std::string& checkpoint,
              const std::vector<double>& k_list);

int cmd_distance(const GlobalOpts& g, const std::vector<std::string>& groups);

int cmd_export_embeddings(const GlobalOpts& g, const std::string& checkpoint,
                          const std::string& out_path);

}  // namespace epdet::cli
