#include "epdet/vocabulary.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace epdet {

namespace {

bool is_rare_replacement(std::string_view tok) {
  for (int i = 0; i < kActionTypeCount; ++i) {
    if (tok == rare_token(static_cast<ActionType>(i))) return true;
  }
  return false;
}

}  // namespace

Vocabulary Vocabulary::build(const std::vector<TraceRecord>& traces,
                             size_t capacity) {
  if (capacity == 0)
    throw std::invalid_argument("vocabulary capacity must be positive");

  std::unordered_map<std::string, uint64_t> counts;
  for (const TraceRecord& t : traces) {
    for (const Action& a : t.actions) {
      for (const std::string& tok : a.tokens) ++counts[tok];
    }
  }

  std::vector<std::pair<std::string, uint64_t>> ranked(counts.begin(),
                                                       counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (ranked.size() > capacity) ranked.resize(capacity);

  Vocabulary v;
  v.kept_.reserve(ranked.size());
  for (auto& [tok, _] : ranked) v.kept_.push_back(std::move(tok));
  v.rebuild_index();
  return v;
}

void Vocabulary::rebuild_index() {
  index_.clear();
  index_.reserve(kept_.size());
  for (const std::string& t : kept_) index_.insert(t);
}

bool Vocabulary::contains(std::string_view token) const {
  return index_.find(std::string(token)) != index_.end();
}

std::string_view Vocabulary::map(ActionType kind, std::string_view token) const {
  if (is_rare_replacement(token)) return token;
  if (contains(token)) return token;
  return rare_token(kind);
}

Action Vocabulary::apply(const Action& a) const {
  Action out;
  out.kind = a.kind;
  out.tokens.reserve(a.tokens.size());
  for (const std::string& tok : a.tokens)
    out.tokens.emplace_back(map(a.kind, tok));
  return out;
}

TraceRecord Vocabulary::apply(const TraceRecord& t) const {
  TraceRecord out = t;
  for (Action& a : out.actions) a = apply(a);
  return out;
}

std::string Vocabulary::serialize() const {
  std::string out = "V=" + std::to_string(kept_.size()) + "\n";
  for (const std::string& t : kept_) {
    out += t;
    out += '\n';
  }
  return out;
}

Vocabulary Vocabulary::deserialize(std::string_view text) {
  size_t eol = text.find('\n');
  if (eol == std::string_view::npos || text.substr(0, 2) != "V=")
    throw std::runtime_error("vocabulary header missing (expected V=<n>)");
  size_t n = 0;
  std::string_view num = text.substr(2, eol - 2);
  auto [p, ec] = std::from_chars(num.data(), num.data() + num.size(), n);
  if (ec != std::errc() || p != num.data() + num.size())
    throw std::runtime_error("vocabulary header malformed: " +
                             std::string(text.substr(0, eol)));
  Vocabulary v;
  v.kept_.reserve(n);
  size_t pos = eol + 1;
  for (size_t i = 0; i < n; ++i) {
    size_t next = text.find('\n', pos);
    if (next == std::string_view::npos)
      throw std::runtime_error("vocabulary truncated: expected " +
                               std::to_string(n) + " tokens, got " +
                               std::to_string(i));
    v.kept_.emplace_back(text.substr(pos, next - pos));
    if (v.kept_.back().empty())
      throw std::runtime_error("vocabulary contains an empty token at rank " +
                               std::to_string(i));
    pos = next + 1;
  }
  if (pos != text.size())
    throw std::runtime_error("vocabulary has trailing data after " +
                             std::to_string(n) + " tokens");
  v.rebuild_index();
  return v;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  std::string data = serialize();
  f.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!f) throw std::runtime_error("write failed: " + path);
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return deserialize(ss.str());
}

}  // namespace epdet
