#include "epdet/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "epdet/digest.hpp"

namespace epdet {

size_t DetectorModel::param_count(const ModelConfig& cfg) {
  size_t w = cfg.width;
  return static_cast<size_t>(cfg.input_dim) * w + w +
         static_cast<size_t>(cfg.blocks) * (2 * w * w + 2 * w) + w + 1;
}

DetectorModel DetectorModel::init(const ModelConfig& cfg, uint64_t seed) {
  DetectorModel m;
  m.cfg = cfg;
  m.seed = seed;
  m.params.assign(param_count(cfg), 0.0);
  Rng rng(seed);
  double* p = m.params.data();
  size_t w = cfg.width;

  double s_in = std::sqrt(2.0 / static_cast<double>(cfg.input_dim));
  for (size_t i = 0; i < static_cast<size_t>(cfg.input_dim) * w; ++i)
    p[m.w_in_off() + i] = s_in * rng.next_normal();
  // b_in stays zero.
  double s_blk = std::sqrt(2.0 / static_cast<double>(w));
  for (uint32_t k = 0; k < cfg.blocks; ++k) {
    size_t off = m.block_off(k);
    for (size_t i = 0; i < w * w; ++i) p[off + i] = s_blk * rng.next_normal();
    // b1 zero.
    for (size_t i = 0; i < w * w; ++i)
      p[off + w * w + w + i] = s_blk * rng.next_normal();
    // b2 zero.
  }
  double s_head = std::sqrt(1.0 / static_cast<double>(w));
  for (size_t i = 0; i < w; ++i)
    p[m.head_w_off() + i] = s_head * rng.next_normal();
  // b_head zero.
  return m;
}

uint64_t DetectorModel::param_digest() const {
  return fnv1a64(params.data(), params.size() * sizeof(double));
}

double sigmoid(double logit) {
  if (logit >= 0.0) {
    double e = std::exp(-logit);
    return 1.0 / (1.0 + e);
  }
  double e = std::exp(logit);
  return e / (1.0 + e);
}

namespace {

// h = b + W_in^T x with W_in stored row-per-input-feature.
void input_layer(const DetectorModel& m, const SparseVec& x,
                 std::vector<double>& h) {
  size_t w = m.cfg.width;
  const double* p = m.params.data();
  h.assign(p + m.b_in_off(), p + m.b_in_off() + w);
  for (auto [idx, val] : x) {
    if (idx >= m.cfg.input_dim)
      throw std::out_of_range("feature index exceeds model input_dim");
    const double* row = p + m.w_in_off() + static_cast<size_t>(idx) * w;
    double v = static_cast<double>(val);
    for (size_t j = 0; j < w; ++j) h[j] += v * row[j];
  }
}

// out = W z + b where W is width x width row-major.
void dense(const double* W, const double* b, const std::vector<double>& z,
           std::vector<double>& out, size_t w) {
  out.assign(b, b + w);
  for (size_t j = 0; j < w; ++j) {
    const double* row = W + j * w;
    double acc = 0.0;
    for (size_t l = 0; l < w; ++l) acc += row[l] * z[l];
    out[j] += acc;
  }
}

}  // namespace

std::vector<double> encode(const DetectorModel& m, const SparseVec& x) {
  size_t w = m.cfg.width;
  std::vector<double> h, pre, act;
  input_layer(m, x, h);
  const double* p = m.params.data();
  for (uint32_t k = 0; k < m.cfg.blocks; ++k) {
    size_t off = m.block_off(k);
    const double* W1 = p + off;
    const double* b1 = p + off + w * w;
    const double* W2 = p + off + w * w + w;
    const double* b2 = p + off + 2 * w * w + w;
    dense(W1, b1, h, pre, w);
    act.resize(w);
    for (size_t j = 0; j < w; ++j) act[j] = pre[j] > 0.0 ? pre[j] : 0.0;
    for (size_t j = 0; j < w; ++j) {
      const double* row = W2 + j * w;
      double acc = b2[j];
      for (size_t l = 0; l < w; ++l) acc += row[l] * act[l];
      h[j] += acc;
    }
  }
  return h;
}

double head_logit(const DetectorModel& m, const std::vector<double>& z) {
  size_t w = m.cfg.width;
  if (z.size() != w)
    throw std::invalid_argument("embedding size does not match model width");
  const double* p = m.params.data();
  const double* wh = p + m.head_w_off();
  double acc = p[m.head_b_off()];
  for (size_t j = 0; j < w; ++j) acc += wh[j] * z[j];
  return acc;
}

Prediction forward_eval(const DetectorModel& m, const SparseVec& x) {
  Prediction out;
  out.embedding = encode(m, x);
  out.logit = head_logit(m, out.embedding);
  out.score = sigmoid(out.logit);
  return out;
}

BackpropContext::BackpropContext(const DetectorModel& m, double dropout,
                                 Rng* dropout_rng)
    : m_(m), dropout_(dropout), rng_(dropout_rng) {
  if (dropout_ < 0.0 || dropout_ >= 1.0)
    throw std::invalid_argument("dropout must be in [0, 1)");
  if (dropout_ > 0.0 && rng_ == nullptr)
    throw std::invalid_argument("dropout > 0 needs an rng");
}

size_t BackpropContext::push_forward(const SparseVec& x) {
  size_t w = m_.cfg.width;
  Slot s;
  s.x = x;
  s.h.resize(m_.cfg.blocks + 1);
  s.pre.resize(m_.cfg.blocks);
  s.dropped.resize(m_.cfg.blocks);
  s.scale.resize(m_.cfg.blocks);
  input_layer(m_, x, s.h[0]);
  const double* p = m_.params.data();
  double keep = 1.0 - dropout_;
  for (uint32_t k = 0; k < m_.cfg.blocks; ++k) {
    size_t off = m_.block_off(k);
    const double* W1 = p + off;
    const double* b1 = p + off + w * w;
    const double* W2 = p + off + w * w + w;
    const double* b2 = p + off + 2 * w * w + w;
    dense(W1, b1, s.h[k], s.pre[k], w);
    s.scale[k].assign(w, 1.0);
    if (dropout_ > 0.0) {
      for (size_t j = 0; j < w; ++j)
        s.scale[k][j] = rng_->next_bernoulli(keep) ? 1.0 / keep : 0.0;
    }
    s.dropped[k].resize(w);
    for (size_t j = 0; j < w; ++j) {
      double a = s.pre[k][j] > 0.0 ? s.pre[k][j] : 0.0;
      s.dropped[k][j] = a * s.scale[k][j];
    }
    s.h[k + 1] = s.h[k];
    for (size_t j = 0; j < w; ++j) {
      const double* row = W2 + j * w;
      double acc = b2[j];
      for (size_t l = 0; l < w; ++l) acc += row[l] * s.dropped[k][l];
      s.h[k + 1][j] += acc;
    }
  }
  s.logit = head_logit(m_, s.h.back());
  s.dz.assign(w, 0.0);
  slots_.push_back(std::move(s));
  return slots_.size() - 1;
}

double BackpropContext::score(size_t slot) const {
  return sigmoid(slots_[slot].logit);
}

void BackpropContext::add_embedding_grad(size_t slot,
                                         const std::vector<double>& g) {
  Slot& s = slots_[slot];
  if (g.size() != s.dz.size())
    throw std::invalid_argument("embedding grad size mismatch");
  for (size_t j = 0; j < g.size(); ++j) s.dz[j] += g[j];
}

void BackpropContext::backward(std::vector<double>& grad) {
  if (grad.size() != m_.params.size())
    throw std::invalid_argument("gradient buffer size mismatch");
  size_t w = m_.cfg.width;
  const double* p = m_.params.data();
  std::vector<double> g(w), dpre(w), dud(w);
  for (Slot& s : slots_) {
    const std::vector<double>& z = s.h.back();
    // Head.
    for (size_t j = 0; j < w; ++j)
      grad[m_.head_w_off() + j] += s.dlogit * z[j];
    grad[m_.head_b_off()] += s.dlogit;
    const double* wh = p + m_.head_w_off();
    for (size_t j = 0; j < w; ++j) g[j] = s.dz[j] + s.dlogit * wh[j];
    // Blocks, last to first.
    for (uint32_t kk = m_.cfg.blocks; kk-- > 0;) {
      size_t off = m_.block_off(kk);
      const double* W1 = p + off;
      const double* W2 = p + off + w * w + w;
      double* gW1 = grad.data() + off;
      double* gb1 = grad.data() + off + w * w;
      double* gW2 = grad.data() + off + w * w + w;
      double* gb2 = grad.data() + off + 2 * w * w + w;
      // h_{k+1} = h_k + W2 ud + b2; g = dL/dh_{k+1}.
      for (size_t j = 0; j < w; ++j) {
        double gj = g[j];
        double* row = gW2 + j * w;
        const std::vector<double>& ud = s.dropped[kk];
        for (size_t l = 0; l < w; ++l) row[l] += gj * ud[l];
        gb2[j] += gj;
      }
      for (size_t l = 0; l < w; ++l) {
        double acc = 0.0;
        for (size_t j = 0; j < w; ++j) acc += W2[j * w + l] * g[j];
        dud[l] = acc;
      }
      for (size_t j = 0; j < w; ++j) {
        double d = dud[j] * s.scale[kk][j];
        dpre[j] = s.pre[kk][j] > 0.0 ? d : 0.0;
      }
      const std::vector<double>& hk = s.h[kk];
      for (size_t j = 0; j < w; ++j) {
        double dj = dpre[j];
        if (dj == 0.0) continue;
        double* row = gW1 + j * w;
        for (size_t l = 0; l < w; ++l) row[l] += dj * hk[l];
        gb1[j] += dj;
      }
      for (size_t l = 0; l < w; ++l) {
        double acc = 0.0;
        for (size_t j = 0; j < w; ++j) acc += W1[j * w + l] * dpre[j];
        g[l] += acc;
      }
    }
    // Input layer.
    for (auto [idx, val] : s.x) {
      double* row = grad.data() + m_.w_in_off() + static_cast<size_t>(idx) * w;
      double v = static_cast<double>(val);
      for (size_t j = 0; j < w; ++j) row[j] += v * g[j];
    }
    for (size_t j = 0; j < w; ++j) grad[m_.b_in_off() + j] += g[j];
  }
  slots_.clear();
}

void save_checkpoint(const std::string& path, const DetectorModel& m) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f.write("EPDMODL1", 8);
  uint32_t hdr[4] = {m.cfg.input_dim, m.cfg.width, m.cfg.blocks, m.cfg.width};
  f.write(reinterpret_cast<const char*>(hdr), sizeof(hdr));
  f.write(reinterpret_cast<const char*>(m.params.data()),
          static_cast<std::streamsize>(m.params.size() * sizeof(double)));
  f.write(reinterpret_cast<const char*>(&m.seed), 8);
  f.write(reinterpret_cast<const char*>(&m.config_digest), 8);
  if (!f) throw std::runtime_error("write failed: " + path);
}

DetectorModel load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, "EPDMODL1", 8) != 0)
    throw std::runtime_error("bad checkpoint magic: " + path);
  uint32_t hdr[4];
  f.read(reinterpret_cast<char*>(hdr), sizeof(hdr));
  if (!f) throw std::runtime_error("truncated checkpoint header: " + path);
  DetectorModel m;
  m.cfg.input_dim = hdr[0];
  m.cfg.width = hdr[1];
  m.cfg.blocks = hdr[2];
  if (hdr[3] != hdr[1])
    throw std::runtime_error("embedding dim does not match width: " + path);
  m.params.resize(DetectorModel::param_count(m.cfg));
  f.read(reinterpret_cast<char*>(m.params.data()),
         static_cast<std::streamsize>(m.params.size() * sizeof(double)));
  f.read(reinterpret_cast<char*>(&m.seed), 8);
  f.read(reinterpret_cast<char*>(&m.config_digest), 8);
  if (!f) throw std::runtime_error("truncated checkpoint: " + path);
  f.peek();
  if (!f.eof())
    throw std::runtime_error("trailing bytes after checkpoint: " + path);
  return m;
}

}  // namespace epdet
