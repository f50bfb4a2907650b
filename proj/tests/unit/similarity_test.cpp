#include <doctest.h>

#include <algorithm>
#include <string>

#include "epdet/random.hpp"
#include "epdet/similarity.hpp"

using namespace epdet;

namespace {

std::string random_letters(Rng& rng, size_t n) {
  std::string s;
  s.reserve(n);
  for (size_t i = 0; i < n; ++i)
    s.push_back(static_cast<char>('a' + rng.next_below(26)));
  return s;
}

const std::string kS1 =
    "file_create <userdir> update exe\nreg_create hkcu software";
const std::string kS2 = kS1 + " run";

TraceRecord trace_with(std::string sample, uint32_t env, Rng& rng,
                       size_t tokens) {
  TraceRecord t;
  t.sample_id = std::move(sample);
  t.env_id = env;
  Action a{ActionType::file_create, {}};
  for (size_t i = 0; i < tokens; ++i)
    a.tokens.push_back(random_letters(rng, 6));
  t.actions.push_back(a);
  return t;
}

Corpus group_corpus() {
  Corpus c;
  SampleRecord f1{"fam1", 40, "fam", 0, Split::test, 1};
  SampleRecord f2{"fam2", 40, "fam", 0, Split::test, 1};
  SampleRecord p1{"pub1", 0, "pub", 0, Split::test, 0};
  c.add_sample(f1);
  c.add_sample(f2);
  c.add_sample(p1);
  Rng rng(99);
  c.add_trace(trace_with("fam1", 1, rng, 30));  // idx 0
  c.add_trace(trace_with("fam1", 1, rng, 30));  // idx 1
  c.add_trace(trace_with("fam1", 2, rng, 30));  // idx 2
  c.add_trace(trace_with("fam2", 1, rng, 30));  // idx 3
  c.add_trace(trace_with("fam2", 2, rng, 30));  // idx 4
  c.add_trace(trace_with("pub1", 1, rng, 30));  // idx 5
  return c;
}

std::vector<DistanceCell> sorted_cells(std::vector<DistanceCell> cells) {
  std::sort(cells.begin(), cells.end(), [](const auto& a, const auto& b) {
    return std::tie(a.env_a, a.env_b) < std::tie(b.env_a, b.env_b);
  });
  return cells;
}

}  // namespace

TEST_CASE("compressed sizes are frozen") {
  CHECK(deflate_size(kS1) == 50);
  CHECK(deflate_size(kS2) == 54);
  CHECK(deflate_size(kS1 + kS1) == 54);
  CHECK(deflate_size(kS1 + kS2) == 58);
  CHECK(deflate_size(kS2 + kS1) == 58);
  std::string big;
  while (big.size() < 1800)
    big += "the quick brown fox jumps over the lazy dog. ";
  big.resize(1800);
  CHECK(deflate_size(big) == 62);
  CHECK(deflate_size(big + big) == 70);
  CHECK(ncd(big, big) == doctest::Approx(0.12903225806451613).epsilon(1e-15));
}

TEST_CASE("canonical bytes join kinds and tokens") {
  TraceRecord t;
  t.actions.push_back({ActionType::file_create, {"<userdir>", "update", "exe"}});
  t.actions.push_back({ActionType::reg_create, {"hkcu", "software"}});
  CHECK(canonical_trace_bytes(t) == kS1);
  CHECK(canonical_trace_bytes(TraceRecord{}) == "");
}

TEST_CASE("ncd hand values and symmetry") {
  CHECK(ncd(kS1, kS2) == (58.0 - 50.0) / 54.0);
  CHECK(ncd(kS2, kS1) == ncd(kS1, kS2));
  CHECK(ncd(kS1, kS1) == (54.0 - 50.0) / 50.0);
  CHECK_THROWS_AS(ncd("", kS1), std::invalid_argument);
  CHECK_THROWS_AS(ncd(kS1, ""), std::invalid_argument);

  Rng rng(1);
  for (int i = 0; i < 20; ++i) {
    std::string x = random_letters(rng, 100 + 40 * i);
    std::string y = random_letters(rng, 140);
    CHECK(ncd(x, y) == ncd(y, x));
  }
}

TEST_CASE("self distance is small, random pairs are far") {
  Rng rng(2);
  for (int i = 0; i < 5; ++i) {
    std::string x = random_letters(rng, 2048);
    std::string y = random_letters(rng, 2048);
    CHECK(ncd(x, x) <= 0.1);
    CHECK(ncd(x, y) >= 0.9);
    CHECK(ncd(x, y) <= 1.25);
  }
}

TEST_CASE("distance table covers every env pair of the group") {
  Corpus c = group_corpus();
  auto cells = sorted_cells(distance_table(c, "fam"));
  REQUIRE(cells.size() == 3);
  CHECK(cells[0].env_a == 1);
  CHECK(cells[0].env_b == 1);
  CHECK(cells[0].available == 3);  // pub1's env-1 trace is not in the group
  CHECK(cells[0].pairs == 3);
  CHECK(cells[1].env_a == 1);
  CHECK(cells[1].env_b == 2);
  CHECK(cells[1].available == 6);
  CHECK(cells[1].pairs == 6);
  CHECK(cells[2].env_a == 2);
  CHECK(cells[2].env_b == 2);
  CHECK(cells[2].available == 1);
  CHECK(cells[2].pairs == 1);
  for (const auto& cell : cells) {
    CHECK(cell.mean_ncd > 0.0);
    CHECK(cell.mean_ncd <= 1.25);
  }

  auto one_env = sorted_cells(distance_table(c, "pub"));
  REQUIRE(one_env.size() == 0);  // a single trace has no pair

  CHECK(distance_table(c, "nosuch").empty());
  CHECK_THROWS_AS(distance_table(c, "fam", 0), std::invalid_argument);
}

TEST_CASE("pair budget caps the averaged pairs deterministically") {
  Corpus c = group_corpus();
  auto a = sorted_cells(distance_table(c, "fam", 2, 5));
  auto b = sorted_cells(distance_table(c, "fam", 2, 5));
  REQUIRE(a.size() == 3);
  CHECK(a[0].pairs == 2);
  CHECK(a[0].available == 3);
  CHECK(a[1].pairs == 2);
  CHECK(a[1].available == 6);
  CHECK(a[2].pairs == 1);
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].env_a == b[i].env_a);
    CHECK(a[i].env_b == b[i].env_b);
    CHECK(a[i].pairs == b[i].pairs);
    CHECK(a[i].available == b[i].available);
    CHECK(a[i].mean_ncd == b[i].mean_ncd);
  }
}

TEST_CASE("distance versus score rows cover the non-reference traces") {
  Corpus c = group_corpus();
  auto score_of = [](size_t idx) { return 0.1 * static_cast<double>(idx); };
  auto rows = distance_vs_score(c, "fam", 1, score_of);
  REQUIRE(rows.size() == 2);
  std::vector<size_t> idxs = {rows[0].trace_idx, rows[1].trace_idx};
  std::sort(idxs.begin(), idxs.end());
  CHECK(idxs == std::vector<size_t>{2, 4});
  for (const auto& r : rows) {
    CHECK(r.score == 0.1 * static_cast<double>(r.trace_idx));
    CHECK(r.mean_ncd_to_ref > 0.0);
    CHECK(r.mean_ncd_to_ref <= 1.25);
  }

  CHECK_THROWS_AS(distance_vs_score(c, "fam", 1, score_of, 0),
                  std::invalid_argument);
  CHECK_THROWS_AS(distance_vs_score(c, "fam", 7, score_of),
                  std::invalid_argument);
}
