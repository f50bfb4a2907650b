#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "epdet/featurizer.hpp"
#include "epdet/random.hpp"

namespace epdet {

struct ModelConfig {
  uint32_t input_dim = kDefaultFeatureDim;  // D
  uint32_t width = 32;                      // w, also the embedding size
  uint32_t blocks = 2;                      // B residual blocks

  bool operator==(const ModelConfig&) const = default;
};

// Residual MLP over hashed bucket counts, all arithmetic in 64-bit floats.
//
//   h0 = W_in x + b_in
//   h_{k+1} = h_k + W2_k drop(relu(W1_k h_k + b1_k)) + b2_k
//   z = h_B                      (the embedding)
//   logit = w_head . z + b_head
//   score = sigmoid(logit)
//
// Parameters live in one flat vector in this frozen order (the checkpoint
// blob order):
//   W_in (input_dim x width, row per input feature), b_in (width),
//   per block: W1 (width x width, row-major out x in), b1, W2, b2,
//   w_head (width), b_head (1).
struct DetectorModel {
  ModelConfig cfg;
  std::vector<double> params;
  uint64_t seed = 0;           // RNG seed the model was initialized with
  uint64_t config_digest = 0;  // digest of the training config, 0 if untrained

  static size_t param_count(const ModelConfig& cfg);
  // Seeded He-style init: weights N(0, sqrt(2/fan_in)), biases zero,
  // drawn in blob order from Rng(seed).
  static DetectorModel init(const ModelConfig& cfg, uint64_t seed);

  size_t w_in_off() const { return 0; }
  size_t b_in_off() const {
    return static_cast<size_t>(cfg.input_dim) * cfg.width;
  }
  size_t block_off(uint32_t k) const {
    return b_in_off() + cfg.width + static_cast<size_t>(k) * block_size();
  }
  size_t block_size() const {
    return 2ull * cfg.width * cfg.width + 2ull * cfg.width;
  }
  size_t head_w_off() const { return block_off(cfg.blocks); }
  size_t head_b_off() const { return head_w_off() + cfg.width; }

  uint64_t param_digest() const;
};

struct Prediction {
  double logit = 0.0;
  double score = 0.0;
  std::vector<double> embedding;
};

// Forward pass without dropout.
Prediction forward_eval(const DetectorModel& m, const SparseVec& x);
std::vector<double> encode(const DetectorModel& m, const SparseVec& x);
double head_logit(const DetectorModel& m, const std::vector<double>& z);

double sigmoid(double logit);
inline int predict_label(double score, double threshold) {
  return score >= threshold ? 1 : 0;
}

// Training-mode forward passes with cached activations for backprop.
// Gradients accumulate into a flat vector shaped like model.params.
// Dropout masks come from the supplied Rng, one Bernoulli draw per hidden
// unit per block per example, in push order; a fixed seed fixes the masks.
class BackpropContext {
 public:
  BackpropContext(const DetectorModel& m, double dropout, Rng* dropout_rng);

  // Runs a train-mode forward pass and caches activations. Returns a slot
  // id for the gradient hooks below.
  size_t push_forward(const SparseVec& x);

  double logit(size_t slot) const { return slots_[slot].logit; }
  double score(size_t slot) const;
  const std::vector<double>& embedding(size_t slot) const {
    return slots_[slot].h.back();
  }

  // Adds dL/dlogit for one example.
  void add_logit_grad(size_t slot, double g) { slots_[slot].dlogit += g; }
  // Adds dL/dembedding for one example.
  void add_embedding_grad(size_t slot, const std::vector<double>& g);

  // Backpropagates every slot into `grad` (accumulating) and clears slots.
  void backward(std::vector<double>& grad);

  size_t slot_count() const { return slots_.size(); }
  void clear() { slots_.clear(); }

 private:
  struct Slot {
    SparseVec x;
    std::vector<std::vector<double>> h;      // h_0 .. h_B
    std::vector<std::vector<double>> pre;    // per block: W1 h + b1
    std::vector<std::vector<double>> dropped;  // per block: drop(relu(pre))
    std::vector<std::vector<double>> scale;  // per block dropout scale per unit
    double logit = 0.0;
    double dlogit = 0.0;
    std::vector<double> dz;
  };

  const DetectorModel& m_;
  double dropout_;
  Rng* rng_;
  std::vector<Slot> slots_;
};

// Checkpoint file: magic "EPDMODL1", LE u32 {input_dim, width, blocks,
// embedding_dim}, the parameter blob as f64 in flat order, LE u64 seed,
// LE u64 config digest.
void save_checkpoint(const std::string& path, const DetectorModel& m);
DetectorModel load_checkpoint(const std::string& path);

}  // namespace epdet
