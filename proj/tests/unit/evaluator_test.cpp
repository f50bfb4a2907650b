#include <doctest.h>

#include <cmath>
#include <limits>

#include "epdet/evaluator.hpp"
#include "epdet/random.hpp"

using namespace epdet;

namespace {

SampleRecord rec(std::string id, int label, Split split = Split::test,
                 std::string family = "", int detections = -1) {
  SampleRecord r;
  r.sample_id = std::move(id);
  r.label = label;
  r.split = split;
  r.family = std::move(family);
  r.detections = detections >= 0 ? detections : (label ? 40 : 0);
  return r;
}

TraceRecord trace(std::string sample, uint32_t env, int64_t ts,
                  std::vector<Action> actions = {}) {
  TraceRecord t;
  t.sample_id = std::move(sample);
  t.env_id = env;
  t.timestamp = ts;
  t.actions = std::move(actions);
  return t;
}

// Scores fixed per trace index.
TraceScorer scorer(const Corpus& corpus, std::vector<double> by_index) {
  (void)corpus;
  return [v = std::move(by_index)](size_t i) { return v.at(i); };
}

}  // namespace

TEST_CASE("protocol repeats are deterministic and threading-independent") {
  Corpus c;
  c.add_sample(rec("m1", 1));
  c.add_sample(rec("m2", 1));
  c.add_sample(rec("b1", 0));
  c.add_sample(rec("b2", 0));
  c.add_trace(trace("m1", 0, 100));  // idx 0
  c.add_trace(trace("m1", 0, 200));  // idx 1
  c.add_trace(trace("m2", 0, 100));  // idx 2
  c.add_trace(trace("b1", 0, 100));  // idx 3
  c.add_trace(trace("b1", 0, 150));  // idx 4
  c.add_trace(trace("b2", 0, 100));  // idx 5
  auto s = scorer(c, {0.9, 0.6, 0.8, 0.3, 0.7, 0.2});

  ProtocolOptions opts;
  opts.reps = 40;
  opts.seed = 11;
  opts.fpr_targets = {0.0, 0.5};
  ProtocolResult a = endpoint_protocol(c, Split::test, s, opts);
  ProtocolResult b = endpoint_protocol(c, Split::test, s, opts);
  CHECK(a.tpr_reps == b.tpr_reps);
  CHECK(a.auc_reps == b.auc_reps);
  CHECK(a.evaluated_samples == 4);
  CHECK(a.excluded_samples == 0);

  opts.jobs = 4;
  ProtocolResult par = endpoint_protocol(c, Split::test, s, opts);
  CHECK(par.tpr_reps == a.tpr_reps);
  CHECK(par.auc_reps == a.auc_reps);

  opts.jobs = 1;
  opts.seed = 12;
  ProtocolResult other = endpoint_protocol(c, Split::test, s, opts);
  CHECK(other.tpr_reps != a.tpr_reps);
}

TEST_CASE("one rep on single-trace samples equals the plain metric") {
  Corpus c;
  ScoreTable table;
  std::vector<double> by_index;
  Rng rng(7);
  for (int i = 0; i < 50; ++i) {
    int label = i % 3 == 0 ? 1 : 0;
    std::string id = "s" + std::to_string(i);
    c.add_sample(rec(id, label));
    c.add_trace(trace(id, 0, 1000 + i));
    double score = rng.next_double();
    by_index.push_back(score);
    table.push_back({id, score, label});
  }
  auto s = scorer(c, by_index);
  ProtocolOptions opts;
  opts.reps = 1;
  opts.fpr_targets = {0.01, 0.1};
  ProtocolResult r = endpoint_protocol(c, Split::test, s, opts);
  CHECK(r.tpr_mean[0] == tpr_at_fpr(table, 0.01));
  CHECK(r.tpr_mean[1] == tpr_at_fpr(table, 0.1));
  CHECK(r.auc_mean == auc(table));
}

TEST_CASE("the window drops late traces and counts absent samples") {
  Corpus c;
  c.add_sample(rec("m1", 1));
  c.add_sample(rec("b1", 0));
  c.add_sample(rec("late", 0));
  c.add_sample(rec("off-env", 0));
  c.add_sample(rec("train-only", 1, Split::train));
  c.add_trace(trace("m1", 0, 0));                    // idx 0
  c.add_trace(trace("b1", 0, 0));                    // idx 1
  c.add_trace(trace("late", 0, 0));                  // idx 2
  c.add_trace(trace("late", 0, 25 * 3600));          // idx 3, outside 24h
  c.add_trace(trace("off-env", 3, 0));               // idx 4
  c.add_trace(trace("train-only", 0, 0));            // idx 5
  auto s = scorer(c, {0.9, 0.1, 0.2, 0.95, 0.5, 0.5});

  ProtocolOptions opts;
  opts.reps = 64;
  opts.fpr_targets = {0.0};
  ProtocolResult r = endpoint_protocol(c, Split::test, s, opts);
  CHECK(r.evaluated_samples == 3);  // m1, b1, late
  CHECK(r.excluded_samples == 1);   // off-env; the train sample is skipped
  // The late trace would outscore m1 and kill tpr@0; inside the window the
  // draw is forced to the early trace on every repetition.
  for (double v : r.tpr_reps[0]) CHECK(v == 1.0);

  ProtocolOptions open = opts;
  open.window_hours = std::numeric_limits<double>::infinity();
  ProtocolResult r2 = endpoint_protocol(c, Split::test, s, open);
  double mean = r2.tpr_mean[0];
  CHECK(mean < 1.0);  // some repetitions draw the late trace

  CHECK_THROWS_AS(endpoint_protocol(c, Split::test, s,
                                    ProtocolOptions{.env = 9}),
                  std::invalid_argument);
  ProtocolOptions zero;
  zero.reps = 0;
  CHECK_THROWS_AS(endpoint_protocol(c, Split::test, s, zero),
                  std::invalid_argument);
}

TEST_CASE("score variability is the per-sample population sigma") {
  Corpus c;
  c.add_sample(rec("a", 1));
  c.add_sample(rec("b", 0));
  c.add_sample(rec("c", 0));
  c.add_trace(trace("a", 0, 0));    // idx 0
  c.add_trace(trace("a", 0, 100));  // idx 1
  c.add_trace(trace("b", 0, 0));    // idx 2
  c.add_trace(trace("c", 2, 0));    // idx 3, off env
  auto s = scorer(c, {0.2, 0.4, 0.7, 0.9});

  auto sig = score_variability(c, Split::test, s, 0, 24.0);
  REQUIRE(sig.size() == 2);
  CHECK(sig[0].first == "a");
  CHECK(sig[0].second == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(sig[1].first == "b");
  CHECK(sig[1].second == 0.0);
}

TEST_CASE("test resampling criteria") {
  std::vector<SampleRecord> recs = {
      rec("gm", 1, Split::test, "", 45),       // generic malware
      rec("fm", 1, Split::test, "fam", 45),    // tagged malware
      rec("bm", 1, Split::test, "fam", 12),    // borderline malware
      rec("bb", 0, Split::test, "pub", 3),     // borderline benign
      rec("cb", 0, Split::test, "pub", 0),     // clean benign
  };

  auto none = resample_test(recs, TestResampling::none);
  CHECK(none == recs);

  auto dropg = resample_test(recs, TestResampling::drop_generic);
  REQUIRE(dropg.size() == 4);
  for (const auto& r : dropg) CHECK(!(r.label == 1 && r.family.empty()));

  auto onlyg = resample_test(recs, TestResampling::only_generic);
  REQUIRE(onlyg.size() == 3);  // gm + both benign
  for (const auto& r : onlyg) CHECK((r.label == 0 || r.family.empty()));

  auto dropb = resample_test(recs, TestResampling::drop_borderline);
  REQUIRE(dropb.size() == 3);
  for (const auto& r : dropb) CHECK(!r.is_borderline());

  Rng rng(5);
  std::map<std::string, double> target = {{"fam", 1.0}};
  auto matched =
      resample_test(recs, TestResampling::match_family, &target, &rng);
  size_t mal = 0;
  for (const auto& r : matched)
    if (r.label == 1) {
      ++mal;
      CHECK(r.family == "fam");
    }
  CHECK(mal == 3);

  CHECK_THROWS_AS(resample_test(recs, TestResampling::match_family, &target),
                  std::invalid_argument);
  // Dropping everything malware leaves an unusable set.
  std::vector<SampleRecord> only_generic_mal = {rec("gm", 1, Split::test, ""),
                                                rec("cb", 0)};
  CHECK_THROWS_AS(
      resample_test(only_generic_mal, TestResampling::drop_generic),
      std::runtime_error);
}

TEST_CASE("resampling names round trip") {
  for (TestResampling r :
       {TestResampling::none, TestResampling::drop_generic,
        TestResampling::only_generic, TestResampling::drop_borderline,
        TestResampling::match_family}) {
    auto name = test_resampling_name(r);
    REQUIRE(test_resampling_from_name(name).has_value());
    CHECK(*test_resampling_from_name(name) == r);
  }
  CHECK(!test_resampling_from_name("bogus").has_value());
}

TEST_CASE("separability probe tells environments apart only when they differ") {
  Rng rng(13);
  std::vector<std::vector<double>> emb;
  std::vector<uint32_t> envs;
  for (int i = 0; i < 60; ++i) {
    double shift = i % 2 == 0 ? 2.0 : -2.0;
    emb.push_back({shift + 0.3 * rng.next_normal(), 0.3 * rng.next_normal()});
    envs.push_back(i % 2 == 0 ? 1 : 2);
  }
  CHECK(separability_probe(emb, envs) > 0.9);

  std::vector<std::vector<double>> same;
  std::vector<uint32_t> envs2;
  for (int i = 0; i < 120; ++i) {
    same.push_back({rng.next_normal(), rng.next_normal()});
    envs2.push_back(i % 2 == 0 ? 1 : 2);
  }
  double acc = separability_probe(same, envs2);
  CHECK(acc > 0.2);
  CHECK(acc < 0.8);
}

TEST_CASE("separability probe input validation") {
  std::vector<std::vector<double>> emb(30, std::vector<double>{0.0});
  std::vector<uint32_t> one_env(30, 1);
  CHECK_THROWS_AS(separability_probe(emb, one_env), std::invalid_argument);

  std::vector<uint32_t> three;
  for (int i = 0; i < 30; ++i) three.push_back(i % 3);
  CHECK_THROWS_AS(separability_probe(emb, three), std::invalid_argument);

  std::vector<uint32_t> lopsided(30, 1);
  for (int i = 0; i < 5; ++i) lopsided[i] = 2;
  CHECK_THROWS_AS(separability_probe(emb, lopsided), std::invalid_argument);

  std::vector<uint32_t> ok;
  for (int i = 0; i < 30; ++i) ok.push_back(i % 2 + 1);
  auto ragged = emb;
  ragged[4] = {0.0, 1.0};
  CHECK_THROWS_AS(separability_probe(ragged, ok), std::invalid_argument);
  CHECK_THROWS_AS(separability_probe(emb, std::vector<uint32_t>(29, 1)),
                  std::invalid_argument);
}

TEST_CASE("length bias report buckets by registry actions") {
  Action reg{ActionType::reg_create, {"hkcu"}};
  Action regd{ActionType::reg_delete, {"hkcu"}};
  Action file{ActionType::file_create, {"a"}};
  Corpus c;
  c.add_sample(rec("m1", 1));
  c.add_sample(rec("b1", 0));
  c.add_sample(rec("tr", 1, Split::train));
  c.add_trace(trace("m1", 0, 0, {reg, regd, file}));  // idx 0: 2 registry
  c.add_trace(trace("b1", 0, 0, {file}));             // idx 1: 0 registry
  c.add_trace(trace("m1", 0, 5, {file, reg}));        // idx 2: 1 registry
  c.add_trace(trace("b1", 0, 5, {reg, file}));        // idx 3: 1 registry
  c.add_trace(trace("m1", 1, 0, {reg}));              // idx 4: off env
  c.add_trace(trace("tr", 0, 0, {reg}));              // idx 5: train split
  auto s = scorer(c, {0.8, 0.1, 0.6, 0.2, 0.9, 0.9});

  auto rows = length_bias_report(c, Split::test, 0, s);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].registry_actions == 0);
  CHECK(rows[0].traces == 1);
  CHECK(rows[0].mean_score == 0.1);
  CHECK(rows[0].malware_fraction == 0.0);
  CHECK(rows[1].registry_actions == 1);
  CHECK(rows[1].traces == 2);
  CHECK(rows[1].mean_score == doctest::Approx(0.4));
  CHECK(rows[1].malware_fraction == 0.5);
  CHECK(rows[2].registry_actions == 2);
  CHECK(rows[2].traces == 1);
  CHECK(rows[2].mean_score == 0.8);
  CHECK(rows[2].malware_fraction == 1.0);
}

TEST_CASE("evasive family split compares registry means across envs") {
  Action reg{ActionType::reg_create, {"k"}};
  Action file{ActionType::file_create, {"f"}};
  Corpus c;
  c.add_sample(rec("e1", 1, Split::test, "shy"));
  c.add_sample(rec("n1", 1, Split::test, "loud"));
  c.add_sample(rec("x1", 1, Split::test, "phantom"));
  c.add_sample(rec("g1", 1, Split::test, ""));      // generic, ignored
  c.add_sample(rec("b1", 0, Split::test, "pub"));   // benign, ignored
  // shy: 1 registry action in sandbox, 3 at the endpoint
  c.add_trace(trace("e1", 1, 0, {reg, file}));
  c.add_trace(trace("e1", 0, 0, {reg, reg, reg}));
  // loud: equal means, a tie is not evasive
  c.add_trace(trace("n1", 1, 0, {reg, reg}));
  c.add_trace(trace("n1", 0, 0, {reg, reg}));
  // phantom: endpoint only
  c.add_trace(trace("x1", 0, 0, {reg}));
  c.add_trace(trace("g1", 1, 0, {reg}));
  c.add_trace(trace("g1", 0, 0, {reg, reg}));
  c.add_trace(trace("b1", 1, 0, {file}));
  c.add_trace(trace("b1", 0, 0, {reg, reg, reg}));

  EvasiveSplit split = evasive_family_split(c, 1, 0);
  CHECK(split.evasive == std::vector<std::string>{"shy"});
  CHECK(split.non_evasive == std::vector<std::string>{"loud"});
  CHECK(split.excluded == std::vector<std::string>{"phantom"});
}

TEST_CASE("eval report serializes to stable bytes") {
  EvalReport r;
  r.fpr_targets = {0.01};
  r.tpr_at_fpr = {0.5};
  r.auc = 0.75;
  r.reps = 2;
  r.window_hours = 24.0;
  r.env = 0;
  r.seed = 7;
  r.resampling = "none";
  r.evaluated_samples = 10;
  r.excluded_samples = 1;
  r.sigma = {{"s1", 0.125}};
  CHECK(r.to_json() ==
        "{\"auc\":0.75,\"env\":0,\"evaluated_samples\":10,"
        "\"excluded_samples\":1,\"fpr_targets\":[0.01],\"reps\":2,"
        "\"resampling\":\"none\",\"seed\":7,"
        "\"sigma\":[{\"sample_id\":\"s1\",\"std\":0.125}],"
        "\"tpr_at_fpr\":[0.5],\"window_hours\":24.0}");

  EvalReport open = r;
  open.window_hours = std::numeric_limits<double>::infinity();
  CHECK(open.to_json().find("\"window_hours\":-1.0") != std::string::npos);
}
