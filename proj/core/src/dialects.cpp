#include "epdet/dialects.hpp"

#include <array>
#include <charconv>
#include <optional>

#include <nlohmann/json.hpp>

#include "epdet/standardize.hpp"
#include "epdet/trace_io.hpp"

namespace epdet {

using json = nlohmann::json;

namespace {

std::optional<ActionType> log_kind(std::string_view k) {
  static constexpr std::array<std::pair<std::string_view, ActionType>, 6>
      kKinds = {{{"FILE_CREATE", ActionType::file_create},
                 {"REG_CREATE", ActionType::reg_create},
                 {"REG_DELETE", ActionType::reg_delete},
                 {"PROC_CREATE", ActionType::proc_create},
                 {"PROC_INJECT", ActionType::proc_inject},
                 {"MUTEX_CREATE", ActionType::mutex_create}}};
  for (auto& [name, t] : kKinds) {
    if (name == k) return t;
  }
  return std::nullopt;
}

TraceRecord parse_report_json(std::string_view bytes, RawParseStats* stats) {
  json j;
  try {
    j = json::parse(bytes);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what(),
                     e.byte > 0 ? e.byte - 1 : 0);
  }
  TraceRecord t;
  if (!j.contains("sha256") || !j["sha256"].is_string())
    throw ParseError("missing \"sha256\"", 0);
  t.sample_id = j["sha256"].get<std::string>();
  if (t.sample_id.empty()) throw ParseError("empty \"sha256\"", 0);
  if (!j.contains("env") || !j["env"].is_number_unsigned())
    throw ParseError("missing or negative \"env\"", 0);
  t.env_id = j["env"].get<uint32_t>();
  if (!j.contains("collected") || !j["collected"].is_number_integer())
    throw ParseError("missing \"collected\"", 0);
  t.timestamp = j["collected"].get<int64_t>();
  if (!j.contains("events") || !j["events"].is_array())
    throw ParseError("missing \"events\" array", 0);
  for (const json& ev : j["events"]) {
    if (!ev.is_object() || !ev.contains("type") || !ev["type"].is_string() ||
        !ev.contains("value") || !ev["value"].is_string())
      throw ParseError("event needs string \"type\" and \"value\"", 0);
    auto kind = action_type_from_name(ev["type"].get<std::string>());
    if (!kind) {
      if (stats) ++stats->dropped_actions;
      continue;
    }
    t.actions.push_back(
        standardize_action(*kind, ev["value"].get<std::string>()));
  }
  return t;
}

TraceRecord parse_action_log(std::string_view bytes, RawParseStats* stats) {
  TraceRecord t;
  bool have_sample = false, have_env = false, have_ts = false;
  size_t pos = 0;
  while (pos < bytes.size()) {
    size_t eol = bytes.find('\n', pos);
    if (eol == std::string_view::npos) eol = bytes.size();
    std::string_view line = bytes.substr(pos, eol - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    size_t line_start = pos;
    pos = eol + 1;
    if (line.empty() || line.front() == '#') continue;

    size_t bar = line.find('|');
    if (bar != std::string_view::npos) {
      if (!have_sample || !have_env || !have_ts)
        throw ParseError("action line before complete header", line_start);
      std::string_view kind = line.substr(0, bar);
      std::string_view value = line.substr(bar + 1);
      auto at = log_kind(kind);
      if (!at) {
        if (stats) ++stats->dropped_actions;
        continue;
      }
      t.actions.push_back(standardize_action(*at, value));
      continue;
    }

    size_t eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ParseError("expected key=value or KIND|value line", line_start);
    std::string_view key = line.substr(0, eq);
    std::string_view val = line.substr(eq + 1);
    if (key == "sample") {
      if (val.empty()) throw ParseError("empty sample id", line_start);
      t.sample_id = std::string(val);
      have_sample = true;
    } else if (key == "env") {
      uint32_t env = 0;
      auto [p, ec] = std::from_chars(val.data(), val.data() + val.size(), env);
      if (ec != std::errc() || p != val.data() + val.size())
        throw ParseError("bad env value", line_start);
      t.env_id = env;
      have_env = true;
    } else if (key == "ts") {
      int64_t ts = 0;
      auto [p, ec] = std::from_chars(val.data(), val.data() + val.size(), ts);
      if (ec != std::errc() || p != val.data() + val.size())
        throw ParseError("bad ts value", line_start);
      t.timestamp = ts;
      have_ts = true;
    } else {
      throw ParseError("unknown header key \"" + std::string(key) + "\"",
                       line_start);
    }
  }
  if (!have_sample || !have_env || !have_ts)
    throw ParseError("incomplete header: need sample, env and ts",
                     bytes.size());
  return t;
}

}  // namespace

std::vector<std::string> dialect_names() {
  return {"report_json", "action_log"};
}

TraceRecord parse_raw_report(std::string_view bytes, std::string_view dialect,
                             RawParseStats* stats) {
  if (dialect == "report_json") return parse_report_json(bytes, stats);
  if (dialect == "action_log") return parse_action_log(bytes, stats);
  throw std::invalid_argument("unknown dialect \"" + std::string(dialect) +
                              "\" (have: report_json, action_log)");
}

}  // namespace epdet
