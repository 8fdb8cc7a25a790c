#ifndef DUALCYCLE_OBJECTIVES_H_
#define DUALCYCLE_OBJECTIVES_H_

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dualcycle/metrics.h"
#include "dualcycle/models.h"
#include "dualcycle/tensor.h"

namespace dualcycle {

enum class RewardFamily { kReconstruction, kAutoMetric, kLm, kMade };
enum class RewardPlacement { kMid, kEnd };

RewardFamily reward_family_from_string(const std::string& s);
std::string to_string(RewardFamily f);
std::string to_string(RewardPlacement p);

struct RewardSpec {
  RewardFamily family = RewardFamily::kReconstruction;
  RewardPlacement placement = RewardPlacement::kMid;
};

enum class LossKind { kCrossEntropy, kBinaryCrossEntropy, kReinforce, kHybrid };

struct LossSpec {
  LossKind kind = LossKind::kCrossEntropy;
  std::optional<RewardSpec> reward;
  double weight = 1.0;     // supervised term weight
  double rl_weight = 0.1;  // reward term weight when hybrid
};

struct RewardSignal {
  double value = 0.0;
  double adjusted = 0.0;  // baseline-subtracted
  RewardFamily family = RewardFamily::kReconstruction;
};

// Exponential running-mean baseline keyed by (family, decision side).
// Disabled mode passes rewards through unadjusted.
class RewardBaseline {
 public:
  explicit RewardBaseline(double decay = 0.95, bool enabled = true)
      : decay_(decay), enabled_(enabled) {}

  std::vector<RewardSignal> apply(RewardFamily family, const std::string& side,
                                  const std::vector<double>& rewards);
  void force(RewardFamily family, const std::string& side, double value);
  double value(RewardFamily family, const std::string& side) const;
  bool enabled() const { return enabled_; }

 private:
  double decay_;
  bool enabled_;
  std::map<std::pair<int, std::string>, double> means_;
  std::map<std::pair<int, std::string>, bool> primed_;
};

// Mean over each sample's active steps of cross-entropy, then batch mean.
// tokens rows are [bos, w1..wk, eos, pad...]; step t targets tokens[t+1];
// the active steps are the content tokens plus the end marker.
NodeId supervised_loss_nlg(Graph& g, const std::vector<NodeId>& step_dists,
                           const std::vector<std::vector<int>>& tokens,
                           const std::vector<int>& lengths);

// Batch mean of the per-sample binary cross-entropy.
NodeId supervised_loss_nlu(Graph& g, NodeId probs, const Tensor& gold_frames);

// Sum of log-probabilities of the sampled tokens over active steps, [B x 1].
NodeId sampled_token_logprob(Graph& g, const std::vector<NodeId>& step_dists,
                             const std::vector<std::vector<int>>& sampled,
                             const std::vector<Tensor>& step_mask);

// Sum over labels of the sampled Bernoulli decision log-probabilities.
NodeId sampled_label_logprob(Graph& g, NodeId probs, const Tensor& samples);

// weight * mean_b( -(adjusted_b) * logprob_b ). Non-finite rewards raise
// RewardError.
NodeId reinforce_term(Graph& g, NodeId logprob_per_sample,
                      const std::vector<RewardSignal>& rewards, double weight);

// Reward values (plain numbers; always detached from the graph).

// Primal form: per-sample SUM over labels of the Bernoulli log-likelihood of
// the original frame under the end model's probabilities.
std::vector<double> reward_reconstruction_primal(const Tensor& nlu_probs,
                                                 const Tensor& gold_frames);
// Dual form: per-token MEAN log-likelihood of the original tokens under the
// end model's step distributions.
std::vector<double> reward_reconstruction_dual(
    const std::vector<Tensor>& step_dists,
    const std::vector<std::vector<int>>& tokens,
    const std::vector<int>& lengths);

// Mean of smoothed sentence BLEU and ROUGE-L F1 against the reference set.
double reward_auto_nlg(const TokenSeq& hypothesis,
                       const std::vector<TokenSeq>& references);
// Per-sample F1 of predicted vs gold label sets (1.0 when both empty).
double reward_auto_nlu(const std::set<int>& predicted, const std::set<int>& gold);

// Per-token LM log-probability of the sentence.
double reward_lm(const RnnLm& lm, const TokenSeq& content);
// Ensemble-average MADE log-likelihood of the (thresholded) frame.
double reward_made(const MadeEstimator& made, const Tensor& frame_bits);

}  // namespace dualcycle

#endif  // DUALCYCLE_OBJECTIVES_H_
