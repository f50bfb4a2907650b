#include "epdet/actions.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace epdet {

namespace {

constexpr std::array<std::string_view, kActionTypeCount> kTypeNames = {
    "file_create", "reg_create",  "reg_delete",
    "proc_create", "proc_inject", "mutex_create",
};

constexpr std::array<std::string_view, kActionTypeCount> kRareTokens = {
    "<rare_file_create>", "<rare_reg_create>",  "<rare_reg_delete>",
    "<rare_proc_create>", "<rare_proc_inject>", "<rare_mutex_create>",
};

}  // namespace

std::string_view action_type_name(ActionType t) {
  return kTypeNames[static_cast<size_t>(t)];
}

std::optional<ActionType> action_type_from_name(std::string_view name) {
  for (size_t i = 0; i < kTypeNames.size(); ++i) {
    if (kTypeNames[i] == name) return static_cast<ActionType>(i);
  }
  return std::nullopt;
}

std::string_view rare_token(ActionType t) {
  return kRareTokens[static_cast<size_t>(t)];
}

bool is_special_token(std::string_view tok) {
  if (tok.size() < 3 || tok.front() != '<' || tok.back() != '>') return false;
  for (size_t i = 1; i + 1 < tok.size(); ++i) {
    char c = tok[i];
    if (!((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_'))
      return false;
  }
  return true;
}

std::string_view split_name(Split s) {
  return s == Split::train ? "train" : "test";
}

std::optional<Split> split_from_name(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "test") return Split::test;
  return std::nullopt;
}

void Corpus::add_sample(SampleRecord s) {
  auto [it, inserted] = sample_index_.emplace(s.sample_id, samples_.size());
  if (!inserted)
    throw std::runtime_error("duplicate sample_id: " + s.sample_id);
  samples_.push_back(std::move(s));
}

void Corpus::add_trace(TraceRecord t) {
  if (sample_index_.find(t.sample_id) == sample_index_.end())
    throw std::runtime_error("trace references unknown sample_id: " +
                             t.sample_id);
  size_t idx = traces_.size();
  auto& list = trace_index_[t.sample_id];
  traces_.push_back(std::move(t));
  // Keep the per-sample list sorted by timestamp, stable on ties.
  auto pos = std::upper_bound(list.begin(), list.end(), idx,
                              [this](size_t a, size_t b) {
                                return traces_[a].timestamp < traces_[b].timestamp;
                              });
  list.insert(pos, idx);
}

const SampleRecord* Corpus::find_sample(std::string_view sample_id) const {
  auto it = sample_index_.find(std::string(sample_id));
  return it == sample_index_.end() ? nullptr : &samples_[it->second];
}

SampleRecord* Corpus::find_sample(std::string_view sample_id) {
  auto it = sample_index_.find(std::string(sample_id));
  return it == sample_index_.end() ? nullptr : &samples_[it->second];
}

const std::vector<size_t>& Corpus::traces_of(std::string_view sample_id) const {
  static const std::vector<size_t> kEmpty;
  auto it = trace_index_.find(std::string(sample_id));
  return it == trace_index_.end() ? kEmpty : it->second;
}

std::vector<size_t> Corpus::traces_of_env(std::string_view sample_id,
                                          uint32_t env_id) const {
  std::vector<size_t> out;
  for (size_t idx : traces_of(sample_id)) {
    if (traces_[idx].env_id == env_id) out.push_back(idx);
  }
  return out;
}

std::vector<size_t> Corpus::traces_within_window(std::string_view sample_id,
                                                 uint32_t env_id,
                                                 double window_hours) const {
  std::vector<size_t> in_env = traces_of_env(sample_id, env_id);
  if (in_env.empty() || !std::isfinite(window_hours)) return in_env;
  int64_t anchor = traces_[in_env.front()].timestamp;  // earliest: list sorted
  int64_t horizon = anchor + static_cast<int64_t>(window_hours * 3600.0);
  std::vector<size_t> out;
  for (size_t idx : in_env) {
    if (traces_[idx].timestamp <= horizon) out.push_back(idx);
  }
  return out;
}

}  // namespace epdet
