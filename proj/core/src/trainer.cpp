#include "epdet/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <set>
#include <thread>

#include "epdet/digest.hpp"
#include "epdet/metrics.hpp"

namespace epdet {

double soft_label(int detections, double beta, double theta) {
  if (detections <= 0) return 0.0;
  double r = std::pow(static_cast<double>(detections) / beta, theta);
  return r < 1.0 ? r : 1.0;
}

std::vector<SampleRecord> oversample(const std::vector<SampleRecord>& records,
                                     double factor) {
  size_t pos = 0, neg = 0;
  for (const SampleRecord& r : records) (r.label ? pos : neg) += 1;
  if (pos == 0 || neg == 0)
    throw std::invalid_argument("oversample needs both classes present");
  int minority = pos < neg ? 1 : (neg < pos ? 0 : 1);
  size_t have = minority ? pos : neg;
  size_t want = static_cast<size_t>(std::llround(factor * static_cast<double>(have)));
  std::vector<SampleRecord> out = records;
  if (want <= have) return out;
  std::vector<size_t> minority_idx;
  for (size_t i = 0; i < records.size(); ++i)
    if (records[i].label == minority) minority_idx.push_back(i);
  size_t cursor = 0;
  for (size_t n = have; n < want; ++n) {
    out.push_back(records[minority_idx[cursor]]);
    cursor = (cursor + 1) % minority_idx.size();
  }
  return out;
}

std::vector<SampleRecord> resample_families(
    const std::vector<SampleRecord>& records, FamilyResampling strategy,
    const std::map<std::string, double>* target, Rng& rng,
    std::vector<std::string>* warnings) {
  std::vector<SampleRecord> out;
  std::map<std::string, std::vector<const SampleRecord*>> by_family;
  size_t malware_total = 0;
  for (const SampleRecord& r : records) {
    if (r.label == 0) {
      out.push_back(r);
    } else {
      by_family[r.family].push_back(&r);
      ++malware_total;
    }
  }
  if (by_family.empty())
    throw std::invalid_argument("family resampling needs malware records");

  std::vector<std::string> families;
  std::vector<double> weights;
  if (strategy == FamilyResampling::uniform) {
    for (auto& [fam, _] : by_family) {
      families.push_back(fam);
      weights.push_back(1.0);
    }
  } else {
    if (target == nullptr)
      throw std::invalid_argument("match strategy needs a target distribution");
    for (auto& [fam, w] : *target) {
      if (w < 0.0)
        throw std::invalid_argument("negative weight for family " + fam);
      if (w == 0.0) continue;
      if (by_family.find(fam) == by_family.end()) {
        if (warnings)
          warnings->push_back("target family \"" + fam +
                              "\" absent from data, renormalizing");
        continue;
      }
      families.push_back(fam);
      weights.push_back(w);
    }
    if (families.empty())
      throw std::invalid_argument(
          "no overlap between target families and the data");
  }
  double wsum = 0.0;
  for (double w : weights) wsum += w;
  std::vector<double> cum(weights.size());
  double acc = 0.0;
  for (size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i] / wsum;
    cum[i] = acc;
  }
  cum.back() = 1.0;

  for (size_t n = 0; n < malware_total; ++n) {
    double u = rng.next_double();
    size_t fi = static_cast<size_t>(
        std::lower_bound(cum.begin(), cum.end(), u) - cum.begin());
    if (fi >= families.size()) fi = families.size() - 1;
    const auto& group = by_family[families[fi]];
    out.push_back(*group[rng.next_below(group.size())]);
  }
  return out;
}

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

// Stable BCE on the logit; targets may be soft.
double bce_logit(double logit, double y) {
  double mx = logit > 0.0 ? logit : 0.0;
  return mx - logit * y + std::log1p(std::exp(-std::fabs(logit)));
}

}  // namespace

double invariance_loss(
    const std::vector<std::pair<std::vector<double>, std::vector<double>>>&
        pairs,
    size_t* zero_norm_pairs) {
  if (pairs.empty()) return 0.0;
  double total = 0.0;
  size_t zero = 0;
  for (const auto& [a, b] : pairs) {
    double na = norm(a), nb = norm(b);
    if (na == 0.0 || nb == 0.0) {
      ++zero;
      continue;
    }
    total += -dot(a, b) / (na * nb);
  }
  if (zero_norm_pairs) *zero_norm_pairs = zero;
  return total / static_cast<double>(pairs.size());
}

BatchTerms batch_loss_grad(
    BackpropContext& ctx, const std::vector<const SparseVec*>& xs,
    const std::vector<double>& ys,
    const std::vector<std::pair<const SparseVec*, const SparseVec*>>& pairs,
    double alpha, std::vector<double>& grad) {
  if (xs.size() != ys.size())
    throw std::invalid_argument("batch features/targets size mismatch");
  BatchTerms terms;
  terms.rows = xs.size();
  terms.pairs = pairs.size();
  for (size_t i = 0; i < xs.size(); ++i) {
    size_t slot = ctx.push_forward(*xs[i]);
    double l = ctx.logit(slot);
    double loss = bce_logit(l, ys[i]);
    if (!std::isfinite(loss)) throw TrainError("non-finite ERM loss");
    terms.erm_sum += loss;
    ctx.add_logit_grad(slot, (sigmoid(l) - ys[i]) / double(xs.size()));
  }
  for (const auto& [pa, pb] : pairs) {
    size_t sa = ctx.push_forward(*pa);
    size_t sb = ctx.push_forward(*pb);
    const std::vector<double>& za = ctx.embedding(sa);
    const std::vector<double>& zb = ctx.embedding(sb);
    double na = norm(za), nb = norm(zb);
    if (na == 0.0 || nb == 0.0) {
      ++terms.zero_norm_pairs;
      continue;
    }
    double c = dot(za, zb) / (na * nb);
    if (!std::isfinite(c)) throw TrainError("non-finite invariance loss");
    terms.inv_sum += -c;
    double wgt = alpha / static_cast<double>(pairs.size());
    std::vector<double> ga(za.size()), gb(zb.size());
    for (size_t j = 0; j < za.size(); ++j) {
      ga[j] = -wgt * (zb[j] / (na * nb) - c * za[j] / (na * na));
      gb[j] = -wgt * (za[j] / (na * nb) - c * zb[j] / (nb * nb));
    }
    ctx.add_embedding_grad(sa, ga);
    ctx.add_embedding_grad(sb, gb);
  }
  ctx.backward(grad);
  return terms;
}

uint64_t TrainConfig::digest() const {
  char buf[640];
  int n = std::snprintf(
      buf, sizeof(buf),
      "input_dim=%u;width=%u;blocks=%u;lr=%.17g;b1=%.17g;b2=%.17g;eps=%.17g;"
      "dropout=%.17g;batch=%u;epochs=%u;patience=%u;holdout=%.17g;"
      "alpha=%.17g;seed=%llu",
      model.input_dim, model.width, model.blocks, lr, adam_beta1, adam_beta2,
      adam_eps, dropout, batch_size, max_epochs, patience, holdout_fraction,
      alpha, static_cast<unsigned long long>(seed));
  return fnv1a64(std::string_view(buf, static_cast<size_t>(n)));
}

namespace {

struct Adam {
  std::vector<double> m, v;
  uint64_t t = 0;

  explicit Adam(size_t n) : m(n, 0.0), v(n, 0.0) {}

  // Updates params[lo, hi) from grad; other entries are never touched.
  void step(const TrainConfig& cfg, std::vector<double>& params,
            const std::vector<double>& grad, size_t lo, size_t hi) {
    ++t;
    double c1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(t));
    double c2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(t));
    for (size_t i = lo; i < hi; ++i) {
      double g = grad[i];
      m[i] = cfg.adam_beta1 * m[i] + (1.0 - cfg.adam_beta1) * g;
      v[i] = cfg.adam_beta2 * v[i] + (1.0 - cfg.adam_beta2) * g * g;
      double mh = m[i] / c1;
      double vh = v[i] / c2;
      params[i] -= cfg.lr * mh / (std::sqrt(vh) + cfg.adam_eps);
    }
  }
};

struct EpochPair {
  size_t group, a, b;
};

// One uniformly drawn eligible pair per group: members must come from
// different environments, except that two endpoint traces count as two
// hosts and are eligible too.
std::vector<EpochPair> draw_pairs(const std::vector<TrainInputs::PairGroup>& pool,
                                  Rng& rng) {
  std::vector<EpochPair> out;
  std::vector<std::pair<size_t, size_t>> eligible;
  for (size_t gi = 0; gi < pool.size(); ++gi) {
    const auto& g = pool[gi];
    eligible.clear();
    for (size_t i = 0; i < g.feats.size(); ++i) {
      for (size_t j = i + 1; j < g.feats.size(); ++j) {
        bool ok = g.envs[i] != g.envs[j] ||
                  (g.envs[i] == kEndpointEnv && g.envs[j] == kEndpointEnv);
        if (ok) eligible.emplace_back(i, j);
      }
    }
    if (eligible.empty()) continue;
    auto [a, b] = eligible[rng.next_below(eligible.size())];
    out.push_back({gi, a, b});
  }
  return out;
}

TrainResult train_impl(const TrainConfig& cfg, const TrainInputs& inputs,
                       const DetectorModel* base, FineTuneScope scope) {
  if (inputs.features.size() != inputs.targets.size())
    throw std::invalid_argument("features/targets size mismatch");
  if (inputs.features.empty())
    throw std::invalid_argument("empty training set");
  for (double y : inputs.targets)
    if (!(y >= 0.0 && y <= 1.0))
      throw std::invalid_argument("targets must lie in [0, 1]");

  size_t rows = inputs.features.size();
  size_t holdout_n = static_cast<size_t>(static_cast<double>(rows) *
                                         cfg.holdout_fraction);
  if (holdout_n >= rows) holdout_n = rows - 1;

  std::vector<size_t> order(rows);
  for (size_t i = 0; i < rows; ++i) order[i] = i;
  Rng holdout_rng(derive_seed(cfg.seed, "holdout"));
  holdout_rng.shuffle(order);
  std::vector<size_t> train_rows(order.begin(), order.end() - holdout_n);
  std::vector<size_t> holdout_rows(order.end() - holdout_n, order.end());

  TrainResult res;
  res.model = base ? *base : DetectorModel::init(cfg.model,
                                                 derive_seed(cfg.seed, "init"));
  if (base && base->cfg.input_dim != cfg.model.input_dim)
    throw std::invalid_argument("base model input_dim mismatch");
  DetectorModel& model = res.model;
  model.seed = cfg.seed;

  size_t lo = scope == FineTuneScope::head_only ? model.head_w_off() : 0;
  size_t hi = model.params.size();
  Adam adam(hi);
  std::vector<double> grad(hi, 0.0);

  std::vector<double> best_params = model.params;
  double best_holdout = std::numeric_limits<double>::infinity();
  uint32_t best_epoch = 0;
  uint32_t no_improve = 0;

  for (uint32_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(cfg.seed, "shuffle", epoch));
    shuffle_rng.shuffle(train_rows);
    Rng dropout_rng(derive_seed(cfg.seed, "dropout", epoch));

    std::vector<EpochPair> pairs;
    if (cfg.alpha != 0.0 && !inputs.pair_pool.empty()) {
      Rng pair_rng(derive_seed(cfg.seed, "pairs", epoch));
      pairs = draw_pairs(inputs.pair_pool, pair_rng);
    }

    size_t batches = (train_rows.size() + cfg.batch_size - 1) / cfg.batch_size;
    double erm_sum = 0.0, inv_sum = 0.0;
    size_t erm_count = 0, inv_count = 0;

    BackpropContext ctx(model, cfg.dropout,
                        cfg.dropout > 0.0 ? &dropout_rng : nullptr);
    std::vector<const SparseVec*> bx;
    std::vector<double> by;
    std::vector<std::pair<const SparseVec*, const SparseVec*>> bp;
    for (size_t b = 0; b < batches; ++b) {
      size_t begin = b * cfg.batch_size;
      size_t end = std::min(begin + cfg.batch_size, train_rows.size());
      bx.clear();
      by.clear();
      bp.clear();
      for (size_t r = begin; r < end; ++r) {
        bx.push_back(&inputs.features[train_rows[r]]);
        by.push_back(inputs.targets[train_rows[r]]);
      }
      // This batch's share of the epoch's pair list.
      size_t p0 = pairs.size() * b / batches;
      size_t p1 = pairs.size() * (b + 1) / batches;
      for (size_t pi = p0; pi < p1; ++pi) {
        const EpochPair& ep = pairs[pi];
        const auto& g = inputs.pair_pool[ep.group];
        bp.emplace_back(&g.feats[ep.a], &g.feats[ep.b]);
      }

      std::fill(grad.begin(), grad.end(), 0.0);
      BatchTerms terms;
      try {
        terms = batch_loss_grad(ctx, bx, by, bp, cfg.alpha, grad);
      } catch (const TrainError& e) {
        throw TrainError(std::string(e.what()) + " at epoch " +
                         std::to_string(epoch + 1));
      }
      erm_sum += terms.erm_sum;
      erm_count += terms.rows;
      inv_sum += terms.inv_sum;
      inv_count += terms.pairs;
      res.zero_norm_pairs += terms.zero_norm_pairs;
      adam.step(cfg, model.params, grad, lo, hi);
    }

    EpochLog log;
    log.erm = erm_count ? erm_sum / static_cast<double>(erm_count) : 0.0;
    log.inv = inv_count ? inv_sum / static_cast<double>(inv_count) : 0.0;
    log.total = log.erm + cfg.alpha * log.inv;

    double hold = 0.0;
    for (size_t row : holdout_rows) {
      Prediction p = forward_eval(model, inputs.features[row]);
      hold += bce_logit(p.logit, inputs.targets[row]);
    }
    if (!holdout_rows.empty()) hold /= static_cast<double>(holdout_rows.size());
    if (!std::isfinite(hold))
      throw TrainError("non-finite held-out loss at epoch " +
                       std::to_string(epoch + 1));
    log.holdout = hold;
    res.log.push_back(log);

    if (holdout_rows.empty()) {
      best_params = model.params;
      best_epoch = epoch + 1;
      continue;
    }
    if (hold < best_holdout - 1e-12) {
      best_holdout = hold;
      best_params = model.params;
      best_epoch = epoch + 1;
      no_improve = 0;
    } else {
      ++no_improve;
      if (no_improve >= cfg.patience) break;
    }
  }

  model.params = std::move(best_params);
  model.config_digest = cfg.digest();
  res.stopped_epoch = best_epoch;
  return res;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const TrainInputs& inputs) {
  return train_impl(cfg, inputs, nullptr, FineTuneScope::all_layers);
}

TrainResult fine_tune(const DetectorModel& base, const TrainConfig& cfg,
                      const TrainInputs& inputs, FineTuneScope scope) {
  if (cfg.max_epochs == 0) {
    TrainResult res;
    res.model = base;
    res.stopped_epoch = 0;
    return res;
  }
  return train_impl(cfg, inputs, &base, scope);
}

GridResult grid_search(const std::vector<TrainConfig>& grid,
                       const TrainInputs& inputs,
                       const std::vector<SparseVec>& sel_features,
                       const std::vector<int>& sel_labels,
                       const GridOptions& opts) {
  if (grid.empty()) throw std::invalid_argument("empty grid");
  if (sel_features.size() != sel_labels.size())
    throw std::invalid_argument("selection features/labels size mismatch");

  GridResult res;
  res.ranked.resize(grid.size());
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    while (true) {
      size_t i = next.fetch_add(1);
      if (i >= grid.size()) break;
      TrainResult tr = train(grid[i], inputs);
      ScoreTable table;
      table.reserve(sel_features.size());
      for (size_t r = 0; r < sel_features.size(); ++r) {
        Prediction p = forward_eval(tr.model, sel_features[r]);
        table.push_back({std::to_string(r), p.score, sel_labels[r]});
      }
      double metric = opts.metric == SelectionMetric::auc
                          ? auc(table)
                          : tpr_at_fpr(table, opts.fpr_target);
      res.ranked[i] = GridEntry{grid[i], std::move(tr.model), metric};
    }
  };
  int jobs = std::max(1, opts.jobs);
  if (jobs == 1 || grid.size() == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    int n = std::min<int>(jobs, static_cast<int>(grid.size()));
    threads.reserve(static_cast<size_t>(n));
    for (int t = 0; t < n; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }

  std::stable_sort(res.ranked.begin(), res.ranked.end(),
                   [](const GridEntry& a, const GridEntry& b) {
                     if (a.metric != b.metric) return a.metric > b.metric;
                     return a.config.digest() < b.config.digest();
                   });
  size_t top_n = opts.top_n;
  if (top_n > res.ranked.size()) {
    res.warnings.push_back("top_n " + std::to_string(top_n) +
                           " clamped to grid size " +
                           std::to_string(res.ranked.size()));
    top_n = res.ranked.size();
  }
  if (top_n == 0) top_n = 1;
  double sum = 0.0;
  for (size_t i = 0; i < top_n; ++i) sum += res.ranked[i].metric;
  res.top_mean = sum / static_cast<double>(top_n);
  return res;
}

}  // namespace epdet
