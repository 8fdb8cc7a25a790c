#ifndef DUALCYCLE_MODELS_H_
#define DUALCYCLE_MODELS_H_

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dualcycle/coupling.h"
#include "dualcycle/data.h"
#include "dualcycle/gru.h"
#include "dualcycle/params.h"
#include "dualcycle/rng.h"
#include "dualcycle/tensor.h"

namespace dualcycle {

struct ModelConfig {
  int hidden = 200;
  int embed = 50;
  double nlu_threshold = 0.5;
  int max_len = 60;
  bool share_embeddings = false;  // NLU reuses the NLG word embedding table
};

// How the decoder turns a step distribution into the next-step input (and
// into the value exposed to the downstream model).
enum class Feedback {
  kTeacher,       // gold token embedding
  kGreedy,        // argmax token embedding (evaluation path)
  kSample,        // sampled token embedding (REINFORCE rollouts)
  kStOnehot,      // straight-through one-hot times embedding table
  kDistribution,  // full distribution times embedding table
};

Feedback feedback_for(JointMode joint, bool sample = false);

struct DecodeOptions {
  int max_steps = 60;
  Feedback feedback = Feedback::kGreedy;
  // What the NLG->NLU joint exposes. Unset: a constant one-hot of the
  // emitted token (no gradient path; evaluation and RL rollouts).
  std::optional<JointMode> joint;
  // Per-row step counts (content + end marker); when set, decoding runs
  // exactly that many steps per row instead of stopping at the end marker.
  const std::vector<int>* fixed_steps = nullptr;
  const std::vector<std::vector<int>>* gold_tokens = nullptr;  // for kTeacher
  Rng* rng = nullptr;                                          // for kSample
};

struct DecodeResult {
  std::vector<NodeId> dists;       // per step, [B x V]
  std::vector<NodeId> surrogates;  // per step, [B x V]; what the joint exposes
  std::vector<std::vector<int>> emitted;  // [T][B] argmax/sampled token ids
  std::vector<Tensor> step_mask;     // [T] x [B], 1 while the row is live
  std::vector<Tensor> content_mask;  // [T] x [B], live and not the end marker
  std::vector<int> lengths;          // content tokens per row
  std::vector<int> content_ids(int row) const;
};

// Frame-conditioned GRU generator: input projection maps the label vector to
// the initial hidden state, output projection to vocabulary logits.
class NlgModel {
 public:
  NlgModel(int label_count, int vocab_size, const ModelConfig& cfg,
           std::uint64_t seed);

  ParamStore& store() { return store_; }
  const ParamStore& store() const { return store_; }
  int vocab_size() const { return vocab_size_; }
  int label_count() const { return label_count_; }
  const ModelConfig& config() const { return cfg_; }

  struct Leased {
    NodeId in_w, in_b, emb, out_w, out_b;
    GruCell::Leased gru;
  };
  Leased lease(Graph& g) const;

  NodeId init_hidden(Graph& g, const Leased& l, NodeId frame_input) const;
  // One decoder step: advances h in place, returns the vocabulary distribution.
  NodeId step(Graph& g, const Leased& l, NodeId input_embedding, NodeId* h) const;

  // Teacher-forced pass over a padded batch; step t consumes gold token t-1.
  std::vector<NodeId> teacher_forced(Graph& g, const Leased& l, NodeId frame_input,
                                     const std::vector<std::vector<int>>& tokens,
                                     int steps) const;

  DecodeResult decode(Graph& g, const Leased& l, NodeId frame_input,
                      const DecodeOptions& opts) const;

 private:
  int label_count_;
  int vocab_size_;
  ModelConfig cfg_;
  ParamStore store_;
  std::unique_ptr<GruCell> gru_;
};

// Sentence encoder with a sigmoid label head; probabilities, no thresholding.
class NluModel {
 public:
  // When cfg.share_embeddings is set, the word embedding table is leased
  // from `shared_embeddings` (owned by the NLG store) instead of store().
  NluModel(int label_count, int vocab_size, const ModelConfig& cfg,
           std::uint64_t seed, Param* shared_embeddings = nullptr);

  ParamStore& store() { return store_; }
  const ParamStore& store() const { return store_; }
  int label_count() const { return label_count_; }

  struct Leased {
    NodeId emb, out_w, out_b;
    GruCell::Leased gru;
  };
  Leased lease(Graph& g) const;

  // Content token ids, padded; rows of all-zero length are a contract error.
  NodeId forward_tokens(Graph& g, const Leased& l,
                        const std::vector<std::vector<int>>& content_tokens,
                        const std::vector<int>& lengths) const;

  // Per-step [B x V] surrogate vectors from the NLG joint; masked rows keep
  // their previous hidden state. Zero-content rows are tolerated here.
  NodeId forward_coupled(Graph& g, const Leased& l,
                         const std::vector<NodeId>& step_inputs,
                         const std::vector<Tensor>& content_mask) const;

 private:
  int label_count_;
  int vocab_size_;
  ModelConfig cfg_;
  ParamStore store_;
  Param* shared_emb_;
  std::unique_ptr<GruCell> gru_;
};

// Plain recurrent language model over utterances; frozen after pretraining
// and queried for naturalness rewards.
class RnnLm {
 public:
  RnnLm(int vocab_size, const ModelConfig& cfg, std::uint64_t seed);

  ParamStore& store() { return store_; }
  const ParamStore& store() const { return store_; }

  // Sum over content tokens of log p(token | prefix); `normalized` divides
  // by the content length.
  double logprob(const Utterance& utt, bool normalized = false) const;
  std::vector<double> logprob_batch(const std::vector<std::vector<int>>& content,
                                    bool normalized) const;

  // Teacher-forced mean cross-entropy over a padded batch (training loss).
  NodeId batch_loss(Graph& g, const std::vector<std::vector<int>>& tokens,
                    const std::vector<int>& lengths) const;

 private:
  int vocab_size_;
  ModelConfig cfg_;
  ParamStore store_;
  std::unique_ptr<GruCell> gru_;
};

struct MadeMaskSet {
  std::vector<int> input_degree;   // 1..D
  std::vector<int> hidden_degree;  // 1..max(1, D-1)
  Tensor hidden_mask;              // [H x D]
  Tensor output_mask;              // [D x H]
};

// Hidden-layer connectivity from explicit input degrees.
MadeMaskSet made_mask_set(const std::vector<int>& input_degree, int hidden,
                          Rng& rng);
// Ensemble of mask sets from sampled orderings; deterministic in the seed.
std::vector<MadeMaskSet> made_build_masks(int label_count, int hidden,
                                          int n_orderings, std::uint64_t seed);

// Masked autoencoder over binary frames: one network, several mask sets that
// each enforce an autoregressive factorization; log-likelihoods average over
// the mask sets.
class MadeEstimator {
 public:
  MadeEstimator(int label_count, int hidden, int n_orderings, std::uint64_t seed);

  ParamStore& store() { return store_; }
  const ParamStore& store() const { return store_; }
  int label_count() const { return label_count_; }
  int n_orderings() const { return static_cast<int>(masks_.size()); }
  const MadeMaskSet& mask_set(int i) const { return masks_[i]; }

  struct Leased {
    NodeId w1, b1, w2, b2;
  };
  Leased lease(Graph& g) const;

  // Conditional Bernoulli probabilities under one mask set; x is [B x D].
  NodeId forward(Graph& g, const Leased& l, NodeId x, int ordering) const;

  // Ensemble-average log-likelihood of one binary frame.
  double logprob(const Tensor& frame_bits) const;
  std::vector<double> logprob_batch(const Tensor& frames) const;

 private:
  int label_count_;
  int hidden_;
  ParamStore store_;
  std::vector<MadeMaskSet> masks_;
};

struct PretrainResult {
  std::vector<double> epoch_nll;  // training-set average NLL per epoch
};

PretrainResult pretrain_lm(RnnLm& lm, const std::vector<DataPair>& corpus,
                           int epochs, int batch_size, double learning_rate,
                           Rng& rng);
PretrainResult pretrain_made(MadeEstimator& made,
                             const std::vector<SemanticFrame>& frames,
                             int epochs, int batch_size, double learning_rate,
                             Rng& rng);

}  // namespace dualcycle

#endif  // DUALCYCLE_MODELS_H_
