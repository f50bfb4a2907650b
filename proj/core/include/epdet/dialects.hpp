#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "epdet/actions.hpp"

namespace epdet {

// Raw sandbox/endpoint report formats the standardizer accepts.
//
// "report_json": one JSON object,
//   {"sha256":"<hex>","env":1,"collected":1522540800,
//    "events":[{"type":"file_create","value":"C:\\Users\\a\\x.exe"}, ...]}
// Event types outside the six canonical kinds are dropped and counted.
//
// "action_log": line-oriented text. '#' lines are comments. Header lines
// (in any order, all required, before the first action line):
//   sample=<id>
//   env=<uint>
//   ts=<epoch seconds>
// Action lines:
//   <KIND>|<raw value>
// with KIND one of FILE_CREATE, REG_CREATE, REG_DELETE, PROC_CREATE,
// PROC_INJECT, MUTEX_CREATE. Unknown kinds are dropped and counted;
// structurally bad lines are parse errors naming the byte offset.
std::vector<std::string> dialect_names();

struct RawParseStats {
  size_t dropped_actions = 0;  // events with a kind outside the closed set
};

// Parses one raw report and standardizes every action value. Throws
// ParseError on malformed input.
TraceRecord parse_raw_report(std::string_view bytes, std::string_view dialect,
                             RawParseStats* stats = nullptr);

}  // namespace epdet
