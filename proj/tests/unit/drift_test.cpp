#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "epdet/drift.hpp"
#include "epdet/random.hpp"

using namespace epdet;

namespace {

// D=2, w=2, no residual blocks; identity input layer so the embedding of a
// positive dense vector is the vector itself, head = z0 - z1 + 0.5.
DetectorModel passthrough_model() {
  DetectorModel m;
  m.cfg = ModelConfig{2, 2, 0};
  m.params = {1.0, 0.0, 0.0, 1.0,  // W_in
              0.0, 0.0,            // b_in
              1.0, -1.0,           // w_head
              0.5};                // b_head
  return m;
}

}  // namespace

TEST_CASE("linear percentile interpolates between order statistics") {
  CHECK(linear_percentile({1, 2, 3, 4}, 50) == 2.5);
  CHECK(linear_percentile({1, 2, 3, 4}, 25) == 1.75);
  CHECK(linear_percentile({3, 1, 4, 2}, 90) == doctest::Approx(3.7).epsilon(1e-12));
  CHECK(linear_percentile({1, 2, 3, 4}, 0) == 1.0);
  CHECK(linear_percentile({1, 2, 3, 4}, 100) == 4.0);
  CHECK(linear_percentile({5}, 73) == 5.0);
  CHECK_THROWS_AS(linear_percentile({}, 50), std::invalid_argument);
  CHECK_THROWS_AS(linear_percentile({1.0}, -1), std::invalid_argument);
  CHECK_THROWS_AS(linear_percentile({1.0}, 100.5), std::invalid_argument);
}

TEST_CASE("rectifier cutoff pools every dimension") {
  std::vector<std::vector<double>> emb = {{1, 5}, {3, 7}};
  CHECK(fit_rectifier(emb, 50) == 4.0);
  CHECK(fit_rectifier(emb, 100) == 7.0);
  CHECK(fit_rectifier(emb, 0) == 1.0);
  CHECK_THROWS_AS(fit_rectifier({}, 90), std::invalid_argument);
}

TEST_CASE("outlierness clamps activations before the head") {
  DetectorModel m = passthrough_model();
  std::vector<double> z = {3.0, 0.4};
  // cutoff 1: head sees (1, 0.4), logit 1.1
  CHECK(rectified_outlierness(m, z, 1.0) ==
        doctest::Approx(-1.1).epsilon(1e-12));
  // cutoff above every activation: plain |logit|
  CHECK(rectified_outlierness(m, z, 10.0) ==
        doctest::Approx(-3.1).epsilon(1e-12));
  // a clamp that kills the logit sign still reports |.|: head sees (0.2, 0.2)
  CHECK(rectified_outlierness(m, z, 0.2) ==
        doctest::Approx(-0.5).epsilon(1e-12));
}

TEST_CASE("sparse overload matches encode plus rectify") {
  ModelConfig cfg{16, 8, 2};
  DetectorModel m = DetectorModel::init(cfg, 3);
  Rng rng(9);
  for (int i = 0; i < 10; ++i) {
    SparseVec x;
    for (uint32_t f = 0; f < 16; f += 2)
      x.push_back({f, static_cast<float>(rng.next_int(0, 4))});
    double c = 0.5 + rng.next_double();
    CHECK(rectified_outlierness(m, x, c) ==
          rectified_outlierness(m, encode(m, x), c));
  }
}

TEST_CASE("huge cutoff reduces to the plain head logit") {
  ModelConfig cfg{8, 4, 1};
  DetectorModel m = DetectorModel::init(cfg, 17);
  Rng rng(4);
  for (int i = 0; i < 20; ++i) {
    std::vector<double> z;
    for (int j = 0; j < 4; ++j) z.push_back(2.0 * rng.next_double());
    CHECK(rectified_outlierness(m, z, 1e18) == -std::fabs(head_logit(m, z)));
  }
}

TEST_CASE("rejection threshold hits the target fraction") {
  std::vector<double> o = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  double t0 = rejection_threshold(o, 0.0);
  CHECK(t0 == 10.0);
  for (double v : o) CHECK(!reject(v, t0));  // strict comparison keeps the max

  double t10 = rejection_threshold(o, 0.1);
  CHECK(t10 == doctest::Approx(9.1).epsilon(1e-12));
  size_t rejected = 0;
  for (double v : o) rejected += reject(v, t10);
  CHECK(rejected == 1);

  CHECK_THROWS_AS(rejection_threshold({}, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(rejection_threshold(o, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(rejection_threshold(o, -0.01), std::invalid_argument);
}

TEST_CASE("continuous scores reject exactly the asked fraction") {
  Rng rng(31);
  std::vector<double> o;
  for (int i = 0; i < 1000; ++i) o.push_back(rng.next_normal());
  double thr = rejection_threshold(o, 0.15);
  size_t rejected = std::count_if(o.begin(), o.end(),
                                  [&](double v) { return reject(v, thr); });
  CHECK(rejected == 150);
}

TEST_CASE("drift report serializes with stable keys") {
  DriftReport r;
  r.percentile = 90.0;
  r.cutoff = 1.5;
  r.target_k = 0.125;
  r.threshold = 2.25;
  r.id_points = 100;
  r.eval_reject_rate = 0.5;
  r.eval_reject_rate_benign = 0.25;
  r.eval_reject_rate_malware = 0.75;
  r.accepted_tpr_at_fpr = 1.0;
  r.full_tpr_at_fpr = 0.5;
  r.accepted = 88;
  r.rejected = 12;
  CHECK(r.to_json() ==
        "{\"accepted\":88,\"accepted_tpr_at_fpr\":1.0,\"cutoff\":1.5,"
        "\"eval_reject_rate\":0.5,\"eval_reject_rate_benign\":0.25,"
        "\"eval_reject_rate_malware\":0.75,\"full_tpr_at_fpr\":0.5,"
        "\"id_points\":100,\"percentile\":90.0,\"rejected\":12,"
        "\"target_k\":0.125,\"threshold\":2.25}");
}
