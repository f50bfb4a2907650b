#include "epdet/trace_io.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace epdet {

using json = nlohmann::json;

namespace {

json parse_line(std::string_view line, size_t base_offset) {
  try {
    return json::parse(line);
  } catch (const json::parse_error& e) {
    size_t in_line = e.byte > 0 ? e.byte - 1 : 0;
    throw ParseError(std::string("invalid JSON: ") + e.what(),
                     base_offset + in_line);
  }
}

template <typename T>
T require_field(const json& j, const char* key, size_t base_offset) {
  auto it = j.find(key);
  if (it == j.end())
    throw ParseError(std::string("missing field \"") + key + "\"", base_offset);
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad field \"") + key + "\": " + e.what(),
                     base_offset);
  }
}

// Applies fn(line, offset_of_line_start) to each non-empty line.
template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  size_t pos = 0;
  while (pos < text.size()) {
    size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    if (eol > pos) fn(text.substr(pos, eol - pos), pos);
    pos = eol + 1;
  }
}

}  // namespace

std::string trace_to_json_line(const TraceRecord& t) {
  json actions = json::array();
  for (const Action& a : t.actions) {
    actions.push_back({{"kind", std::string(action_type_name(a.kind))},
                       {"tokens", a.tokens}});
  }
  json j{{"actions", std::move(actions)},
         {"env_id", t.env_id},
         {"sample_id", t.sample_id},
         {"timestamp", t.timestamp}};
  return j.dump();
}

TraceRecord trace_from_json_line(std::string_view line, size_t base_offset) {
  json j = parse_line(line, base_offset);
  TraceRecord t;
  t.sample_id = require_field<std::string>(j, "sample_id", base_offset);
  if (t.sample_id.empty())
    throw ParseError("sample_id must be non-empty", base_offset);
  t.env_id = require_field<uint32_t>(j, "env_id", base_offset);
  t.timestamp = require_field<int64_t>(j, "timestamp", base_offset);
  if (!j.contains("actions") || !j["actions"].is_array())
    throw ParseError("missing or non-array \"actions\"", base_offset);
  const json& actions = j["actions"];
  for (const json& ja : actions) {
    Action a;
    std::string kind = require_field<std::string>(ja, "kind", base_offset);
    auto at = action_type_from_name(kind);
    if (!at)
      throw ParseError("unknown action kind \"" + kind + "\"", base_offset);
    a.kind = *at;
    a.tokens = require_field<std::vector<std::string>>(ja, "tokens", base_offset);
    t.actions.push_back(std::move(a));
  }
  return t;
}

std::string traces_to_jsonl(const std::vector<TraceRecord>& traces) {
  std::string out;
  for (const TraceRecord& t : traces) {
    out += trace_to_json_line(t);
    out += '\n';
  }
  return out;
}

std::vector<TraceRecord> traces_from_jsonl(std::string_view text) {
  std::vector<TraceRecord> out;
  for_each_line(text, [&](std::string_view line, size_t off) {
    out.push_back(trace_from_json_line(line, off));
  });
  return out;
}

std::string sample_to_json_line(const SampleRecord& s) {
  json j{{"detections", s.detections},
         {"family", s.family},
         {"first_seen", s.first_seen},
         {"label", s.label},
         {"sample_id", s.sample_id},
         {"split", std::string(split_name(s.split))}};
  return j.dump();
}

SampleRecord sample_from_json_line(std::string_view line, size_t base_offset) {
  json j = parse_line(line, base_offset);
  SampleRecord s;
  s.sample_id = require_field<std::string>(j, "sample_id", base_offset);
  if (s.sample_id.empty())
    throw ParseError("sample_id must be non-empty", base_offset);
  s.detections = require_field<int>(j, "detections", base_offset);
  if (s.detections < 0)
    throw ParseError("detections must be >= 0", base_offset);
  s.family = require_field<std::string>(j, "family", base_offset);
  s.first_seen = require_field<int64_t>(j, "first_seen", base_offset);
  s.label = require_field<int>(j, "label", base_offset);
  if (s.label != 0 && s.label != 1)
    throw ParseError("label must be 0 or 1", base_offset);
  std::string split = require_field<std::string>(j, "split", base_offset);
  auto sp = split_from_name(split);
  if (!sp) throw ParseError("unknown split \"" + split + "\"", base_offset);
  s.split = *sp;
  return s;
}

std::string samples_to_jsonl(const std::vector<SampleRecord>& samples) {
  std::string out;
  for (const SampleRecord& s : samples) {
    out += sample_to_json_line(s);
    out += '\n';
  }
  return out;
}

std::vector<SampleRecord> samples_from_jsonl(std::string_view text) {
  std::vector<SampleRecord> out;
  for_each_line(text, [&](std::string_view line, size_t off) {
    out.push_back(sample_from_json_line(line, off));
  });
  return out;
}

void write_text_file(const std::string& path, std::string_view data) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!f) throw std::runtime_error("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void save_corpus(const Corpus& c, const std::string& samples_path,
                 const std::string& traces_path) {
  write_text_file(samples_path, samples_to_jsonl(c.samples()));
  write_text_file(traces_path, traces_to_jsonl(c.traces()));
}

Corpus load_corpus(const std::string& samples_path,
                   const std::string& traces_path) {
  Corpus c;
  for (SampleRecord& s : samples_from_jsonl(read_text_file(samples_path)))
    c.add_sample(std::move(s));
  for (TraceRecord& t : traces_from_jsonl(read_text_file(traces_path)))
    c.add_trace(std::move(t));
  return c;
}

}  // namespace epdet
