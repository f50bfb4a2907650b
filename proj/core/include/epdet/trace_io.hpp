#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "epdet/actions.hpp"

namespace epdet {

// Parse failure in any of the text formats. byte_offset points into the
// input the parser was given.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::string message, size_t byte_offset)
      : std::runtime_error(std::move(message) + " (byte " +
                           std::to_string(byte_offset) + ")"),
        byte_offset_(byte_offset) {}
  size_t byte_offset() const { return byte_offset_; }

 private:
  size_t byte_offset_;
};

// Canonical trace format: one JSON object per line, LF endings, keys in
// alphabetical order:
//   {"actions":[{"kind":"file_create","tokens":["a","b"]}],
//    "env_id":1,"sample_id":"...","timestamp":1522540800}
std::string trace_to_json_line(const TraceRecord& t);
TraceRecord trace_from_json_line(std::string_view line, size_t base_offset = 0);

std::string traces_to_jsonl(const std::vector<TraceRecord>& traces);
std::vector<TraceRecord> traces_from_jsonl(std::string_view text);

// Sample metadata format: one JSON object per line, LF endings:
//   {"detections":24,"family":"zbot","first_seen":1514764800,
//    "label":1,"sample_id":"...","split":"train"}
std::string sample_to_json_line(const SampleRecord& s);
SampleRecord sample_from_json_line(std::string_view line, size_t base_offset = 0);

std::string samples_to_jsonl(const std::vector<SampleRecord>& samples);
std::vector<SampleRecord> samples_from_jsonl(std::string_view text);

void write_text_file(const std::string& path, std::string_view data);
std::string read_text_file(const std::string& path);

void save_corpus(const Corpus& c, const std::string& samples_path,
                 const std::string& traces_path);
Corpus load_corpus(const std::string& samples_path,
                   const std::string& traces_path);

}  // namespace epdet
