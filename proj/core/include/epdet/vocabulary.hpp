#pragma once

#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "epdet/actions.hpp"

namespace epdet {

// Frequency-ranked token vocabulary. Tokens outside it are replaced by the
// per-action-type rare token, so feature space size stays bounded.
class Vocabulary {
 public:
  Vocabulary() = default;

  // Counts tokens over all actions of `traces` and keeps the `capacity`
  // most frequent. Ties at the cutoff keep the lexicographically smaller
  // token. capacity == 0 is an error.
  static Vocabulary build(const std::vector<TraceRecord>& traces,
                          size_t capacity);

  // Kept tokens in rank order (count desc, token asc).
  const std::vector<std::string>& kept() const { return kept_; }
  size_t size() const { return kept_.size(); }

  bool contains(std::string_view token) const;

  // Maps one token under an action type. Kept tokens and rare tokens map to
  // themselves; everything else maps to rare_token(kind). Applying this
  // twice therefore equals applying it once.
  std::string_view map(ActionType kind, std::string_view token) const;

  Action apply(const Action& a) const;
  TraceRecord apply(const TraceRecord& t) const;

  // Text format: header line "V=<n>", then n tokens in rank order, one per
  // line, LF endings.
  std::string serialize() const;
  static Vocabulary deserialize(std::string_view text);

  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

 private:
  std::vector<std::string> kept_;
  std::unordered_set<std::string> index_;

  void rebuild_index();
};

}  // namespace epdet
