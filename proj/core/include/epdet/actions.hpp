#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace epdet {

// The closed set of behavior events a trace may contain. Everything else in
// a raw report is dropped during standardization.
enum class ActionType : uint8_t {
  file_create = 0,
  reg_create = 1,
  reg_delete = 2,
  proc_create = 3,
  proc_inject = 4,
  mutex_create = 5,
};

inline constexpr int kActionTypeCount = 6;

std::string_view action_type_name(ActionType t);
std::optional<ActionType> action_type_from_name(std::string_view name);

inline bool is_registry_action(ActionType t) {
  return t == ActionType::reg_create || t == ActionType::reg_delete;
}

// Replacement token used when a token falls outside the vocabulary.
// One per action type so rare file names and rare registry keys stay
// distinguishable after replacement.
std::string_view rare_token(ActionType t);

// True for angle-bracketed tokens like <macaddress> or <rare_file_create>.
bool is_special_token(std::string_view tok);

struct Action {
  ActionType kind;
  std::vector<std::string> tokens;

  bool operator==(const Action&) const = default;
};

// One execution of one sample in one environment. env_id 0 is reserved for
// the endpoint population; sandboxes get small positive ids.
struct TraceRecord {
  std::string sample_id;
  uint32_t env_id = 0;
  int64_t timestamp = 0;  // seconds since epoch
  std::vector<Action> actions;

  bool operator==(const TraceRecord&) const = default;
};

inline constexpr uint32_t kEndpointEnv = 0;

enum class Split : uint8_t { train = 0, test = 1 };

std::string_view split_name(Split s);
std::optional<Split> split_from_name(std::string_view name);

// Detection counts in (0, kBorderlineUpper) mark a sample as borderline:
// flagged by some engines but below consensus.
inline constexpr int kBorderlineUpper = 20;
inline constexpr int kDefaultLabelThreshold = 5;

struct SampleRecord {
  std::string sample_id;
  int detections = 0;          // engines flagging the sample, d >= 0
  std::string family;          // family tag for malware, publisher for benign;
                               // empty means generic / untagged
  int64_t first_seen = 0;
  Split split = Split::train;
  int label = 0;               // 1 iff detections > threshold at build time

  bool is_borderline() const {
    return detections > 0 && detections < kBorderlineUpper;
  }
  bool operator==(const SampleRecord&) const = default;
};

inline int derive_label(int detections, int threshold = kDefaultLabelThreshold) {
  return detections > threshold ? 1 : 0;
}

// A set of samples plus their traces, with lookup indexes. Traces are owned
// in insertion order; per-sample trace lists are kept sorted by timestamp.
class Corpus {
 public:
  void add_sample(SampleRecord s);
  // The sample must already be present.
  void add_trace(TraceRecord t);

  const std::vector<SampleRecord>& samples() const { return samples_; }
  const std::vector<TraceRecord>& traces() const { return traces_; }

  const SampleRecord* find_sample(std::string_view sample_id) const;
  SampleRecord* find_sample(std::string_view sample_id);

  // Trace indexes for one sample, sorted by (timestamp, insertion order).
  const std::vector<size_t>& traces_of(std::string_view sample_id) const;

  // Same, restricted to one environment.
  std::vector<size_t> traces_of_env(std::string_view sample_id,
                                    uint32_t env_id) const;

  // Traces of `sample_id` in `env_id` whose timestamp lies within
  // `window_hours` of the sample's earliest trace in that environment.
  // A non-finite window keeps every trace of the environment.
  std::vector<size_t> traces_within_window(std::string_view sample_id,
                                           uint32_t env_id,
                                           double window_hours) const;

  size_t sample_count() const { return samples_.size(); }
  size_t trace_count() const { return traces_.size(); }

 private:
  std::vector<SampleRecord> samples_;
  std::vector<TraceRecord> traces_;
  std::unordered_map<std::string, size_t> sample_index_;
  std::unordered_map<std::string, std::vector<size_t>> trace_index_;
};

}  // namespace epdet
