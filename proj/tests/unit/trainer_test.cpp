#include <doctest.h>

#include <cmath>

#include "epdet/trainer.hpp"

using namespace epdet;

namespace {

SampleRecord rec(std::string id, int label, std::string family = "",
                 int detections = -1) {
  SampleRecord r;
  r.sample_id = std::move(id);
  r.label = label;
  r.family = std::move(family);
  r.detections = detections >= 0 ? detections : (label ? 40 : 0);
  return r;
}

// Two separable clusters in a 8-bucket space.
TrainInputs toy_inputs(size_t per_class) {
  TrainInputs in;
  for (size_t i = 0; i < per_class; ++i) {
    in.features.push_back({{0, 2.0f}, {1, 1.0f}});
    in.targets.push_back(1.0);
    in.features.push_back({{4, 2.0f}, {5, 1.0f}});
    in.targets.push_back(0.0);
  }
  return in;
}

TrainConfig toy_config(uint64_t seed = 1) {
  TrainConfig cfg;
  cfg.model = {8, 4, 1};
  cfg.lr = 0.05;
  cfg.batch_size = 8;
  cfg.max_epochs = 30;
  cfg.patience = 30;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("soft labels follow the saturating power curve") {
  CHECK(soft_label(0) == 0.0);
  CHECK(soft_label(-3) == 0.0);
  CHECK(soft_label(1) == doctest::Approx(0.10573712634405642).epsilon(1e-12));
  CHECK(soft_label(2) == doctest::Approx(0.1778279410038923).epsilon(1e-12));
  CHECK(soft_label(3) == doctest::Approx(0.2410285256833955).epsilon(1e-12));
  CHECK(soft_label(5) == doctest::Approx(0.3535533905932738).epsilon(1e-12));
  CHECK(soft_label(7) == doctest::Approx(0.4550415282240584).epsilon(1e-12));
  CHECK(soft_label(12) == doctest::Approx(0.6817316198804996).epsilon(1e-12));
  CHECK(soft_label(19) == doctest::Approx(0.9622606002309622).epsilon(1e-12));
  CHECK(soft_label(20) == 1.0);
  CHECK(soft_label(25) == 1.0);
  CHECK(soft_label(60) == 1.0);
  for (int d = 1; d <= 100; ++d)
    CHECK(soft_label(d) >= soft_label(d - 1));
  // Other curve parameters.
  CHECK(soft_label(5, 10.0, 1.0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("oversampling appends minority copies round robin") {
  std::vector<SampleRecord> recs = {rec("b1", 0), rec("b2", 0), rec("b3", 0),
                                    rec("m1", 1)};
  auto out = oversample(recs, 3.0);
  REQUIRE(out.size() == 6);
  CHECK(out[4].sample_id == "m1");
  CHECK(out[5].sample_id == "m1");
  for (size_t i = 0; i < 4; ++i) CHECK(out[i] == recs[i]);

  // Minority is benign here; copies cycle in original order.
  std::vector<SampleRecord> recs2 = {rec("m1", 1), rec("b1", 0), rec("m2", 1),
                                     rec("b2", 0), rec("m3", 1)};
  auto out2 = oversample(recs2, 2.0);
  REQUIRE(out2.size() == 7);
  CHECK(out2[5].sample_id == "b1");
  CHECK(out2[6].sample_id == "b2");

  CHECK(oversample(recs, 1.0) == recs);
  CHECK(oversample(recs, 0.5) == recs);

  CHECK_THROWS_AS(oversample({rec("m1", 1), rec("m2", 1)}, 2.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(oversample({}, 2.0), std::invalid_argument);
}

TEST_CASE("family resampling hits the requested distribution") {
  std::vector<SampleRecord> recs;
  for (int i = 0; i < 1900; ++i)
    recs.push_back(rec("a" + std::to_string(i), 1, "alpha"));
  for (int i = 0; i < 100; ++i)
    recs.push_back(rec("z" + std::to_string(i), 1, "zeta"));
  for (int i = 0; i < 50; ++i) recs.push_back(rec("b" + std::to_string(i), 0));

  Rng rng(3);
  auto uni = resample_families(recs, FamilyResampling::uniform, nullptr, rng);
  REQUIRE(uni.size() == recs.size());
  size_t benign = 0, alpha = 0, zeta = 0;
  for (const auto& r : uni) {
    if (r.label == 0) ++benign;
    if (r.family == "alpha") ++alpha;
    if (r.family == "zeta") ++zeta;
  }
  CHECK(benign == 50);
  CHECK(alpha + zeta == 2000);
  CHECK(std::fabs(double(alpha) / 2000.0 - 0.5) < 0.05);
  // Benign records come first, untouched.
  for (size_t i = 0; i < benign; ++i) CHECK(uni[i].label == 0);

  std::map<std::string, double> target = {{"alpha", 0.8}, {"zeta", 0.2}};
  Rng rng2(3);
  auto matched =
      resample_families(recs, FamilyResampling::match, &target, rng2);
  size_t ma = 0;
  for (const auto& r : matched)
    if (r.family == "alpha") ++ma;
  CHECK(std::fabs(double(ma) / 2000.0 - 0.8) < 0.05);
}

TEST_CASE("family resampling warnings and errors") {
  std::vector<SampleRecord> recs = {rec("m1", 1, "alpha"), rec("m2", 1, "alpha"),
                                    rec("b1", 0)};
  Rng rng(1);
  std::map<std::string, double> target = {{"alpha", 0.5}, {"ghost", 0.5}};
  std::vector<std::string> warnings;
  auto out = resample_families(recs, FamilyResampling::match, &target, rng,
                               &warnings);
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("ghost") != std::string::npos);
  CHECK(out.size() == recs.size());

  CHECK_THROWS_AS(resample_families({rec("b1", 0)}, FamilyResampling::uniform,
                                    nullptr, rng),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      resample_families(recs, FamilyResampling::match, nullptr, rng),
      std::invalid_argument);
  std::map<std::string, double> bad = {{"alpha", -1.0}};
  CHECK_THROWS_AS(resample_families(recs, FamilyResampling::match, &bad, rng),
                  std::invalid_argument);
  std::map<std::string, double> ghost_only = {{"ghost", 1.0}};
  CHECK_THROWS_AS(
      resample_families(recs, FamilyResampling::match, &ghost_only, rng),
      std::invalid_argument);
}

TEST_CASE("invariance loss on hand pairs") {
  std::vector<std::pair<std::vector<double>, std::vector<double>>> pairs = {
      {{1.0, 2.0}, {2.0, 3.0}},
      {{0.0, 0.0}, {1.0, 1.0}},
      {{1.0, 2.0}, {-1.0, -2.0}},
      {{3.0, -4.0}, {4.0, 3.0}},
  };
  size_t zero = 0;
  double v = invariance_loss(pairs, &zero);
  CHECK(zero == 1);
  CHECK(v == doctest::Approx(0.0019305308215830097).epsilon(1e-14));
  CHECK(invariance_loss({}) == 0.0);
}

TEST_CASE("batch gradients match finite differences") {
  ModelConfig mc{8, 4, 1};
  DetectorModel m = DetectorModel::init(mc, 21);
  std::vector<SparseVec> feats = {
      {{0, 1.0f}, {3, 2.0f}}, {{1, 1.0f}}, {{2, 2.0f}, {7, 1.0f}},
      {{4, 1.0f}, {5, 1.0f}}, {{6, 3.0f}},
  };
  std::vector<const SparseVec*> xs = {&feats[0], &feats[1], &feats[2]};
  std::vector<double> ys = {1.0, 0.3, 0.0};
  std::vector<std::pair<const SparseVec*, const SparseVec*>> pairs = {
      {&feats[3], &feats[4]}, {&feats[0], &feats[2]}};
  double alpha = 0.32;

  std::vector<double> grad(m.params.size(), 0.0);
  BackpropContext ctx(m, 0.0, nullptr);
  BatchTerms terms = batch_loss_grad(ctx, xs, ys, pairs, alpha, grad);
  CHECK(terms.rows == 3);
  CHECK(terms.pairs == 2);
  CHECK(terms.zero_norm_pairs == 0);

  auto loss_at = [&](const DetectorModel& mm) {
    BackpropContext c(mm, 0.0, nullptr);
    std::vector<double> g(mm.params.size(), 0.0);
    return batch_loss_grad(c, xs, ys, pairs, alpha, g).loss(alpha);
  };
  const double eps = 1e-6;
  for (size_t i = 0; i < m.params.size(); i += 3) {
    DetectorModel mp = m;
    mp.params[i] += eps;
    DetectorModel mn = m;
    mn.params[i] -= eps;
    double fd = (loss_at(mp) - loss_at(mn)) / (2 * eps);
    if (std::fabs(fd) < 1e-10) {
      CHECK(std::fabs(grad[i]) < 1e-8);
    } else {
      CHECK(grad[i] == doctest::Approx(fd).epsilon(1e-4));
    }
  }

  std::vector<double> g2(m.params.size(), 0.0);
  BackpropContext c2(m, 0.0, nullptr);
  CHECK_THROWS_AS(batch_loss_grad(c2, xs, {1.0}, {}, 0.0, g2),
                  std::invalid_argument);
}

TEST_CASE("training is deterministic in the seed") {
  TrainInputs in = toy_inputs(20);
  TrainConfig cfg = toy_config(5);
  cfg.dropout = 0.1;
  TrainResult a = train(cfg, in);
  TrainResult b = train(cfg, in);
  CHECK(a.model.params == b.model.params);
  CHECK(a.stopped_epoch == b.stopped_epoch);
  REQUIRE(a.log.size() == b.log.size());
  for (size_t i = 0; i < a.log.size(); ++i)
    CHECK(a.log[i].holdout == b.log[i].holdout);

  cfg.seed = 6;
  TrainResult c = train(cfg, in);
  CHECK(a.model.params != c.model.params);
}

TEST_CASE("training separates a separable toy problem") {
  TrainInputs in = toy_inputs(20);
  TrainResult r = train(toy_config(), in);
  CHECK(r.log.back().holdout < r.log.front().holdout);
  double pos = forward_eval(r.model, {{0, 2.0f}, {1, 1.0f}}).score;
  double neg = forward_eval(r.model, {{4, 2.0f}, {5, 1.0f}}).score;
  CHECK(pos > 0.9);
  CHECK(neg < 0.1);
}

TEST_CASE("alpha zero never touches the pair pool") {
  TrainInputs plain = toy_inputs(12);
  TrainInputs pooled = plain;
  TrainInputs::PairGroup g;
  g.feats = {{{0, 1.0f}}, {{4, 1.0f}}};
  g.envs = {1, 2};
  pooled.pair_pool.push_back(g);

  TrainConfig cfg = toy_config(9);
  cfg.dropout = 0.2;
  CHECK(train(cfg, plain).model.params == train(cfg, pooled).model.params);
}

TEST_CASE("a large invariance weight drives pair embeddings together") {
  TrainInputs in = toy_inputs(12);
  TrainInputs::PairGroup g;
  g.feats = {{{0, 2.0f}, {1, 1.0f}}, {{2, 2.0f}, {3, 1.0f}}};
  g.envs = {1, 2};
  in.pair_pool.push_back(g);

  TrainConfig cfg = toy_config(4);
  cfg.alpha = 8.0;
  TrainResult r = train(cfg, in);
  CHECK(r.log.back().inv < r.log.front().inv);
  auto za = encode(r.model, g.feats[0]);
  auto zb = encode(r.model, g.feats[1]);
  size_t zn = 0;
  double inv = invariance_loss({{za, zb}}, &zn);
  if (zn == 0) CHECK(inv < -0.9);  // cosine close to 1
}

TEST_CASE("training validates its inputs") {
  TrainConfig cfg = toy_config();
  CHECK_THROWS_AS(train(cfg, TrainInputs{}), std::invalid_argument);
  TrainInputs bad;
  bad.features = {{{0, 1.0f}}};
  bad.targets = {0.5, 0.5};
  CHECK_THROWS_AS(train(cfg, bad), std::invalid_argument);
  bad.targets = {1.5};
  CHECK_THROWS_AS(train(cfg, bad), std::invalid_argument);
}

TEST_CASE("a diverging run raises a train error naming the epoch") {
  TrainInputs in = toy_inputs(8);
  TrainConfig cfg = toy_config();
  cfg.lr = 1e300;
  try {
    train(cfg, in);
    FAIL("expected TrainError");
  } catch (const TrainError& e) {
    CHECK(std::string(e.what()).find("epoch") != std::string::npos);
  }
}

TEST_CASE("no holdout keeps the last epoch") {
  TrainInputs in = toy_inputs(6);
  TrainConfig cfg = toy_config();
  cfg.holdout_fraction = 0.0;
  cfg.max_epochs = 7;
  TrainResult r = train(cfg, in);
  CHECK(r.stopped_epoch == 7);
}

TEST_CASE("fine tuning scopes the update") {
  TrainInputs in = toy_inputs(10);
  TrainConfig cfg = toy_config(2);
  DetectorModel base = train(cfg, in).model;

  TrainConfig ft = cfg;
  ft.seed = 13;
  ft.max_epochs = 5;
  TrainResult head = fine_tune(base, ft, in, FineTuneScope::head_only);
  for (size_t i = 0; i < base.head_w_off(); ++i)
    CHECK(head.model.params[i] == base.params[i]);
  bool head_changed = false;
  for (size_t i = base.head_w_off(); i < base.params.size(); ++i)
    if (head.model.params[i] != base.params[i]) head_changed = true;
  CHECK(head_changed);

  TrainResult all = fine_tune(base, ft, in, FineTuneScope::all_layers);
  bool encoder_changed = false;
  for (size_t i = 0; i < base.head_w_off(); ++i)
    if (all.model.params[i] != base.params[i]) encoder_changed = true;
  CHECK(encoder_changed);

  ft.max_epochs = 0;
  TrainResult none = fine_tune(base, ft, in, FineTuneScope::all_layers);
  CHECK(none.model.params == base.params);
  CHECK(none.stopped_epoch == 0);
}

TEST_CASE("grid search ranks by the selection metric") {
  TrainInputs in = toy_inputs(12);
  std::vector<SparseVec> sel = {{{0, 2.0f}, {1, 1.0f}},
                                {{0, 2.0f}, {1, 2.0f}},
                                {{4, 2.0f}, {5, 1.0f}},
                                {{4, 1.0f}, {5, 2.0f}}};
  std::vector<int> labels = {1, 1, 0, 0};

  TrainConfig good = toy_config(1);
  TrainConfig bad = good;
  bad.max_epochs = 1;
  bad.lr = 1e-9;  // stays near init, weak metric possible
  GridOptions opts;
  opts.metric = SelectionMetric::auc;
  opts.top_n = 5;
  GridResult r = grid_search({bad, good}, in, sel, labels, opts);
  REQUIRE(r.ranked.size() == 2);
  CHECK(r.ranked[0].metric >= r.ranked[1].metric);
  REQUIRE(r.warnings.size() == 1);
  CHECK(r.warnings[0].find("clamped") != std::string::npos);
  CHECK(r.top_mean ==
        doctest::Approx((r.ranked[0].metric + r.ranked[1].metric) / 2.0));

  // Equal metrics fall back to the config digest for a stable order.
  TrainConfig g2 = good;
  g2.seed = 42;
  GridOptions o2;
  o2.metric = SelectionMetric::auc;
  o2.top_n = 2;
  GridResult tie = grid_search({good, g2}, in, sel, labels, o2);
  if (tie.ranked[0].metric == tie.ranked[1].metric)
    CHECK(tie.ranked[0].config.digest() < tie.ranked[1].config.digest());

  CHECK_THROWS_AS(grid_search({}, in, sel, labels, opts),
                  std::invalid_argument);
  CHECK_THROWS_AS(grid_search({good}, in, sel, {1}, opts),
                  std::invalid_argument);
}

TEST_CASE("config digest tracks every field") {
  TrainConfig a;
  TrainConfig b;
  CHECK(a.digest() == b.digest());
  b.lr = 2e-3;
  CHECK(a.digest() != b.digest());
  b = a;
  b.alpha = 0.02;
  CHECK(a.digest() != b.digest());
  b = a;
  b.seed = 1;
  CHECK(a.digest() != b.digest());
  b = a;
  b.model.width = 64;
  CHECK(a.digest() != b.digest());
}
