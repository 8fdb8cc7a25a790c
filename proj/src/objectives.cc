#include "dualcycle/objectives.h"

#include <cmath>

namespace dualcycle {

RewardFamily reward_family_from_string(const std::string& s) {
  if (s == "reconstruction") return RewardFamily::kReconstruction;
  if (s == "auto_metric" || s == "auto") return RewardFamily::kAutoMetric;
  if (s == "lm") return RewardFamily::kLm;
  if (s == "made") return RewardFamily::kMade;
  throw ConfigError("unknown reward family '" + s + "'");
}

std::string to_string(RewardFamily f) {
  switch (f) {
    case RewardFamily::kReconstruction: return "reconstruction";
    case RewardFamily::kAutoMetric: return "auto_metric";
    case RewardFamily::kLm: return "lm";
    case RewardFamily::kMade: return "made";
  }
  return "?";
}

std::string to_string(RewardPlacement p) {
  return p == RewardPlacement::kMid ? "mid" : "end";
}

std::vector<RewardSignal> RewardBaseline::apply(RewardFamily family,
                                                const std::string& side,
                                                const std::vector<double>& rewards) {
  for (double r : rewards)
    if (!std::isfinite(r)) throw RewardError("non-finite reward value");
  std::vector<RewardSignal> out(rewards.size());
  auto key = std::make_pair(static_cast<int>(family), side);
  double base = 0.0;
  if (enabled_ && primed_[key]) base = means_[key];
  for (std::size_t i = 0; i < rewards.size(); ++i)
    out[i] = RewardSignal{rewards[i], rewards[i] - base, family};
  if (enabled_ && !rewards.empty()) {
    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= static_cast<double>(rewards.size());
    if (!primed_[key]) {
      means_[key] = mean;  // prime with the first batch mean
      primed_[key] = true;
    } else {
      means_[key] = decay_ * means_[key] + (1.0 - decay_) * mean;
    }
  }
  return out;
}

void RewardBaseline::force(RewardFamily family, const std::string& side,
                           double value) {
  auto key = std::make_pair(static_cast<int>(family), side);
  means_[key] = value;
  primed_[key] = true;
}

double RewardBaseline::value(RewardFamily family, const std::string& side) const {
  auto key = std::make_pair(static_cast<int>(family), side);
  auto it = means_.find(key);
  return it == means_.end() ? 0.0 : it->second;
}

NodeId supervised_loss_nlg(Graph& g, const std::vector<NodeId>& step_dists,
                           const std::vector<std::vector<int>>& tokens,
                           const std::vector<int>& lengths) {
  int batch = static_cast<int>(tokens.size());
  if (batch == 0) throw ContractError("supervised_loss_nlg: empty batch");
  int needed = 0;
  for (int len : lengths) needed = std::max(needed, len + 1);
  if (static_cast<int>(step_dists.size()) < needed)
    throw ContractError("supervised_loss_nlg: " +
                        std::to_string(step_dists.size()) +
                        " step distributions for " + std::to_string(needed) +
                        " target steps");
  NodeId total = g.constant(Tensor({batch, 1}));
  for (int t = 0; t < needed; ++t) {
    std::vector<int> targets(batch, Vocabulary::kPad);
    Tensor mask({batch});
    for (int b = 0; b < batch; ++b) {
      if (t <= lengths[b]) {
        targets[b] = tokens[b][t + 1];
        mask.at(b) = 1.0;
      }
    }
    total = g.add(total, g.scale_rows(g.cross_entropy(step_dists[t], targets), mask));
  }
  Tensor inv({batch});
  for (int b = 0; b < batch; ++b) inv.at(b) = 1.0 / (lengths[b] + 1.0);
  return g.mean(g.scale_rows(total, inv));
}

NodeId supervised_loss_nlu(Graph& g, NodeId probs, const Tensor& gold_frames) {
  return g.mean(g.binary_cross_entropy(probs, gold_frames));
}

NodeId sampled_token_logprob(Graph& g, const std::vector<NodeId>& step_dists,
                             const std::vector<std::vector<int>>& sampled,
                             const std::vector<Tensor>& step_mask) {
  if (step_dists.empty()) throw ContractError("sampled_token_logprob: no steps");
  int batch = g.value(step_dists[0]).rows();
  NodeId total = g.constant(Tensor({batch, 1}));
  for (std::size_t t = 0; t < step_dists.size(); ++t) {
    std::vector<int> ids(batch, Vocabulary::kPad);
    for (int b = 0; b < batch; ++b)
      if (step_mask[t].at(b) > 0.5) ids[b] = sampled[t][b];
    NodeId nll = g.cross_entropy(step_dists[t], ids);
    total = g.sub(total, g.scale_rows(nll, step_mask[t]));
  }
  return total;
}

NodeId sampled_label_logprob(Graph& g, NodeId probs, const Tensor& samples) {
  return g.bernoulli_loglik(probs, samples);
}

NodeId reinforce_term(Graph& g, NodeId logprob_per_sample,
                      const std::vector<RewardSignal>& rewards, double weight) {
  const Tensor& lp = g.value(logprob_per_sample);
  if (static_cast<int>(rewards.size()) != lp.rows())
    throw ContractError("reinforce_term: reward/sample count mismatch");
  Tensor neg_adj({lp.rows()});
  for (int b = 0; b < lp.rows(); ++b) {
    if (!std::isfinite(rewards[b].adjusted))
      throw RewardError("non-finite adjusted reward");
    neg_adj.at(b) = -rewards[b].adjusted;
  }
  return g.scale(g.mean(g.scale_rows(logprob_per_sample, neg_adj)), weight);
}

std::vector<double> reward_reconstruction_primal(const Tensor& nlu_probs,
                                                 const Tensor& gold_frames) {
  if (!nlu_probs.same_extent(gold_frames))
    throw ShapeError("reward_reconstruction_primal: shape mismatch");
  int batch = nlu_probs.rows(), d = nlu_probs.cols();
  std::vector<double> out(batch, 0.0);
  for (int b = 0; b < batch; ++b) {
    double acc = 0.0;
    for (int c = 0; c < d; ++c) {
      double p = std::clamp(nlu_probs.at(b, c), Graph::kProbFloor,
                            1.0 - Graph::kProbFloor);
      acc += gold_frames.at(b, c) > 0.5 ? std::log(p) : std::log(1.0 - p);
    }
    out[b] = acc;
  }
  return out;
}

std::vector<double> reward_reconstruction_dual(
    const std::vector<Tensor>& step_dists,
    const std::vector<std::vector<int>>& tokens,
    const std::vector<int>& lengths) {
  int batch = static_cast<int>(tokens.size());
  std::vector<double> out(batch, 0.0);
  for (int b = 0; b < batch; ++b) {
    double acc = 0.0;
    for (int t = 0; t <= lengths[b]; ++t) {
      double p = std::max(step_dists[t].at(b, tokens[b][t + 1]), Graph::kProbFloor);
      acc += std::log(p);
    }
    out[b] = acc / (lengths[b] + 1.0);
  }
  return out;
}

double reward_auto_nlg(const TokenSeq& hypothesis,
                       const std::vector<TokenSeq>& references) {
  if (references.empty()) throw RewardError("reward_auto_nlg: empty reference set");
  double b = sentence_bleu_smoothed(hypothesis, references);
  double r = rouge_l(hypothesis, references);
  return 0.5 * (b + r);
}

double reward_auto_nlu(const std::set<int>& predicted, const std::set<int>& gold) {
  if (predicted.empty() && gold.empty()) return 1.0;
  long tp = 0;
  for (int p : predicted) tp += gold.count(p) ? 1 : 0;
  if (tp == 0) return 0.0;
  double prec = static_cast<double>(tp) / predicted.size();
  double rec = static_cast<double>(tp) / gold.size();
  return 2.0 * prec * rec / (prec + rec);
}

double reward_lm(const RnnLm& lm, const TokenSeq& content) {
  if (content.empty()) throw RewardError("reward_lm: empty utterance");
  return lm.logprob_batch({content}, /*normalized=*/true)[0];
}

double reward_made(const MadeEstimator& made, const Tensor& frame_bits) {
  return made.logprob(frame_bits);
}

}  // namespace dualcycle
