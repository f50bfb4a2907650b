#include <doctest.h>

#include <cstdio>
#include <limits>

#include "epdet/trace_io.hpp"

using namespace epdet;

namespace {

TraceRecord sample_trace() {
  TraceRecord t;
  t.sample_id = "s1";
  t.env_id = 1;
  t.timestamp = 1522540800;
  t.actions = {{ActionType::file_create, {"a", "b"}},
               {ActionType::reg_delete, {"hkcu"}}};
  return t;
}

}  // namespace

TEST_CASE("trace json line is canonical") {
  CHECK(trace_to_json_line(sample_trace()) ==
        "{\"actions\":[{\"kind\":\"file_create\",\"tokens\":[\"a\",\"b\"]},"
        "{\"kind\":\"reg_delete\",\"tokens\":[\"hkcu\"]}],"
        "\"env_id\":1,\"sample_id\":\"s1\",\"timestamp\":1522540800}");
  CHECK(trace_from_json_line(trace_to_json_line(sample_trace())) == sample_trace());
}

TEST_CASE("sample json line is canonical") {
  SampleRecord s;
  s.sample_id = "abc";
  s.detections = 24;
  s.family = "zbot";
  s.first_seen = 1514764800;
  s.split = Split::train;
  s.label = 1;
  CHECK(sample_to_json_line(s) ==
        "{\"detections\":24,\"family\":\"zbot\",\"first_seen\":1514764800,"
        "\"label\":1,\"sample_id\":\"abc\",\"split\":\"train\"}");
  CHECK(sample_from_json_line(sample_to_json_line(s)) == s);
}

TEST_CASE("jsonl round trip and byte identity") {
  std::vector<TraceRecord> traces = {sample_trace(), sample_trace()};
  traces[1].sample_id = "s2";
  traces[1].env_id = 0;
  std::string text = traces_to_jsonl(traces);
  CHECK(traces_from_jsonl(text) == traces);
  CHECK(traces_to_jsonl(traces_from_jsonl(text)) == text);
}

TEST_CASE("parse errors carry byte offsets") {
  std::string good = trace_to_json_line(sample_trace());
  std::string text = good + "\n" + "{bad json}\n";
  try {
    traces_from_jsonl(text);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    // the offending byte: 'b' one past the opening brace of the second line
    CHECK(e.byte_offset() == good.size() + 2);
  }

  try {
    trace_from_json_line("{\"env_id\":1}", 100);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.byte_offset() == 100);
  }
}

TEST_CASE("record validation") {
  CHECK_THROWS_AS(
      trace_from_json_line("{\"actions\":[{\"kind\":\"nope\",\"tokens\":[]}],"
                           "\"env_id\":0,\"sample_id\":\"x\",\"timestamp\":0}"),
      ParseError);
  CHECK_THROWS_AS(
      trace_from_json_line("{\"actions\":[],\"env_id\":0,\"sample_id\":\"\","
                           "\"timestamp\":0}"),
      ParseError);
  CHECK_THROWS_AS(
      sample_from_json_line("{\"detections\":-1,\"family\":\"\",\"first_seen\":0,"
                            "\"label\":0,\"sample_id\":\"x\",\"split\":\"train\"}"),
      ParseError);
  CHECK_THROWS_AS(
      sample_from_json_line("{\"detections\":0,\"family\":\"\",\"first_seen\":0,"
                            "\"label\":2,\"sample_id\":\"x\",\"split\":\"train\"}"),
      ParseError);
  CHECK_THROWS_AS(
      sample_from_json_line("{\"detections\":0,\"family\":\"\",\"first_seen\":0,"
                            "\"label\":0,\"sample_id\":\"x\",\"split\":\"dev\"}"),
      ParseError);
}

TEST_CASE("corpus indexes and window") {
  Corpus c;
  SampleRecord s;
  s.sample_id = "s1";
  c.add_sample(s);
  CHECK_THROWS(c.add_sample(s));

  TraceRecord t = sample_trace();
  t.env_id = 0;
  t.timestamp = 1000000;  // inserted out of time order on purpose
  TraceRecord earlier = t;
  earlier.timestamp = 980000;
  TraceRecord late = t;
  late.timestamp = 980000 + 25 * 3600;
  c.add_trace(t);
  c.add_trace(earlier);
  c.add_trace(late);

  TraceRecord orphan = sample_trace();
  orphan.sample_id = "nope";
  CHECK_THROWS(c.add_trace(orphan));

  auto order = c.traces_of("s1");
  REQUIRE(order.size() == 3);
  CHECK(c.traces()[order[0]].timestamp == 980000);

  auto inside = c.traces_within_window("s1", 0, 24.0);
  REQUIRE(inside.size() == 2);
  CHECK(c.traces()[inside[0]].timestamp == 980000);
  CHECK(c.traces()[inside[1]].timestamp == 1000000);

  auto all = c.traces_within_window(
      "s1", 0, std::numeric_limits<double>::infinity());
  CHECK(all.size() == 3);
  CHECK(c.traces_of_env("s1", 7).empty());
}

TEST_CASE("corpus file round trip") {
  Corpus c;
  SampleRecord s;
  s.sample_id = "s1";
  s.detections = 7;
  s.label = 1;
  s.split = Split::test;
  c.add_sample(s);
  TraceRecord t = sample_trace();
  c.add_trace(t);

  const char* sp = "corpus_samples_test.jsonl";
  const char* tp = "corpus_traces_test.jsonl";
  save_corpus(c, sp, tp);
  Corpus back = load_corpus(sp, tp);
  CHECK(back.samples() == c.samples());
  CHECK(back.traces() == c.traces());
  std::remove(sp);
  std::remove(tp);
}
