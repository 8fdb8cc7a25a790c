#include "dualcycle/trainer.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>

namespace dualcycle {

namespace {

std::vector<std::vector<int>> content_rows(const Batch& batch) {
  std::vector<std::vector<int>> rows(batch.tokens.size());
  for (std::size_t b = 0; b < batch.tokens.size(); ++b)
    rows[b] = std::vector<int>(batch.tokens[b].begin() + 1, batch.tokens[b].end());
  return rows;
}

Tensor sample_bits(const Tensor& probs, Rng& rng) {
  Tensor bits({probs.rows(), probs.cols()});
  for (int r = 0; r < probs.rows(); ++r)
    for (int c = 0; c < probs.cols(); ++c)
      bits.at(r, c) = rng.bernoulli(probs.at(r, c)) ? 1.0 : 0.0;
  return bits;
}

std::set<int> bits_to_set(const Tensor& bits, int row) {
  std::set<int> out;
  for (int c = 0; c < bits.cols(); ++c)
    if (bits.at(row, c) > 0.5) out.insert(c);
  return out;
}

std::set<int> threshold_row(const Tensor& probs, int row, double thr) {
  std::set<int> out;
  for (int c = 0; c < probs.cols(); ++c)
    if (probs.at(row, c) >= thr) out.insert(c);
  return out;
}

}  // namespace

SchemeId scheme_from_string(const std::string& s) {
  if (s.size() == 1) {
    switch (s[0]) {
      case 'a': return SchemeId::kA;
      case 'c': return SchemeId::kC;
      case 'd': return SchemeId::kD;
      case 'e': return SchemeId::kE;
      case 'f': return SchemeId::kF;
      case 'g': return SchemeId::kG;
      case 'h': return SchemeId::kH;
      case 'i': return SchemeId::kI;
      case 'j': return SchemeId::kJ;
      case 'k': return SchemeId::kK;
      case 'l': return SchemeId::kL;
      default: break;
    }
  }
  if (s == "custom") return SchemeId::kCustom;
  throw ConfigError("unknown scheme id '" + s + "'");
}

std::string to_string(SchemeId id) {
  switch (id) {
    case SchemeId::kA: return "a";
    case SchemeId::kC: return "c";
    case SchemeId::kD: return "d";
    case SchemeId::kE: return "e";
    case SchemeId::kF: return "f";
    case SchemeId::kG: return "g";
    case SchemeId::kH: return "h";
    case SchemeId::kI: return "i";
    case SchemeId::kJ: return "j";
    case SchemeId::kK: return "k";
    case SchemeId::kL: return "l";
    case SchemeId::kCustom: return "custom";
  }
  return "?";
}

bool SchemeSpec::needs_lm() const {
  return rl && (rl->sentence_family == RewardFamily::kLm ||
                rl->frame_family == RewardFamily::kLm);
}

bool SchemeSpec::needs_made() const {
  return rl && (rl->sentence_family == RewardFamily::kMade ||
                rl->frame_family == RewardFamily::kMade);
}

SchemeSpec SchemeSpec::preset(SchemeId id) {
  SchemeSpec s;
  s.id = id;
  const CouplingMode st_st{JointMode::kStraightThrough, JointMode::kStraightThrough};
  const CouplingMode dist_dist{JointMode::kDistribution, JointMode::kDistribution};
  switch (id) {
    case SchemeId::kA:
      s.joint = false;
      break;
    case SchemeId::kC:
      s.joint = true;
      s.coupling = st_st;
      break;
    case SchemeId::kD:
      s.joint = true;
      s.coupling = {JointMode::kDistribution, JointMode::kStraightThrough};
      break;
    case SchemeId::kE:
      s.joint = true;
      s.coupling = {JointMode::kStraightThrough, JointMode::kDistribution};
      break;
    case SchemeId::kF:
      s.joint = true;
      s.coupling = dist_dist;
      break;
    case SchemeId::kG:
    case SchemeId::kH:
      s.joint = true;
      s.coupling = dist_dist;
      s.rl = RlSpec{id == SchemeId::kG ? RewardPlacement::kMid : RewardPlacement::kEnd,
                    RewardFamily::kReconstruction, RewardFamily::kReconstruction};
      break;
    case SchemeId::kI:
    case SchemeId::kJ:
      s.joint = true;
      s.coupling = dist_dist;
      s.rl = RlSpec{id == SchemeId::kI ? RewardPlacement::kMid : RewardPlacement::kEnd,
                    RewardFamily::kAutoMetric, RewardFamily::kAutoMetric};
      break;
    case SchemeId::kK:
    case SchemeId::kL:
      s.joint = true;
      s.coupling = dist_dist;
      s.rl = RlSpec{id == SchemeId::kK ? RewardPlacement::kMid : RewardPlacement::kEnd,
                    RewardFamily::kLm, RewardFamily::kMade};
      break;
    case SchemeId::kCustom:
      throw ConfigError("custom scheme requires explicit fields");
  }
  if (s.rl) {
    if (s.rl->sentence_family == RewardFamily::kMade)
      throw ConfigError("made reward applies to frame decisions only");
    if (s.rl->frame_family == RewardFamily::kLm)
      throw ConfigError("lm reward applies to sentence decisions only");
  }
  return s;
}

// ---------------------------------------------------------------------------
// DualTrainer

struct DualTrainer::CycleOutcome {
  NodeId total = -1;
  StepStats stats;
};

DualTrainer::DualTrainer(NlgModel& nlg, NluModel& nlu, const Dataset& dataset,
                         const TrainConfig& config, const RnnLm* lm,
                         const MadeEstimator* made)
    : nlg_(nlg),
      nlu_(nlu),
      dataset_(dataset),
      cfg_(config),
      lm_(lm),
      made_(made),
      baseline_(config.baseline_decay, config.baseline_enabled),
      rng_(config.seed ^ 0xd1a1c7c1eULL) {
  if (cfg_.scheme.needs_lm() && !lm_)
    throw ConfigError("scheme " + to_string(cfg_.scheme.id) + " needs a pretrained lm");
  if (cfg_.scheme.needs_made() && !made_)
    throw ConfigError("scheme " + to_string(cfg_.scheme.id) + " needs a pretrained made");
  if (cfg_.scheme.joint == false && cfg_.scheme.rl)
    throw ConfigError("scheme (a) does not take reward terms");
}

DualTrainer::CycleOutcome DualTrainer::run_primal(Graph& g, const Batch& batch,
                                                  bool detach_coupling,
                                                  bool use_l1, bool use_l2,
                                                  bool rl_active) {
  CycleOutcome out;
  const int batch_n = static_cast<int>(batch.indices.size());
  auto nlg_l = nlg_.lease(g);
  NodeId frames = g.constant(batch.frames);

  if (!cfg_.scheme.joint || !joint_enabled_) {
    // iterative supervised: the primal step is plain teacher-forced MLE
    auto dists = nlg_.teacher_forced(g, nlg_l, frames, batch.tokens, batch.max_steps);
    NodeId l1 = supervised_loss_nlg(g, dists, batch.tokens, batch.lengths);
    out.stats.l1 = g.value(l1).item();
    out.stats.has_l1 = true;
    out.total = g.scale(l1, cfg_.supervised_weight);
    return out;
  }

  auto nlu_l = nlu_.lease(g);
  DecodeOptions opts;
  opts.joint = cfg_.scheme.coupling.nlg_output;
  opts.feedback = cfg_.nlg_feedback_teacher
                      ? Feedback::kTeacher
                      : feedback_for(cfg_.scheme.coupling.nlg_output);
  std::vector<int> fixed;
  if (use_l1 || !batch.lengths.empty()) {
    // paired data: length-matched decode keeps the mid loss aligned
    fixed.resize(batch_n);
    for (int b = 0; b < batch_n; ++b) fixed[b] = batch.lengths[b] + 1;
    opts.fixed_steps = &fixed;
    opts.max_steps = batch.max_steps;
    opts.gold_tokens = &batch.tokens;
  } else {
    opts.max_steps = cfg_.unsup_max_steps > 0 ? cfg_.unsup_max_steps
                                              : nlg_.config().max_len;
    if (opts.feedback == Feedback::kTeacher)
      opts.feedback = feedback_for(cfg_.scheme.coupling.nlg_output);
  }
  DecodeResult dec = nlg_.decode(g, nlg_l, frames, opts);

  NodeId total = g.constant(Tensor::scalar(0.0));
  if (use_l1) {
    NodeId l1 = supervised_loss_nlg(g, dec.dists, batch.tokens, batch.lengths);
    out.stats.l1 = g.value(l1).item();
    out.stats.has_l1 = true;
    total = g.add(total, g.scale(l1, cfg_.supervised_weight));
  }

  std::vector<NodeId> inputs = dec.surrogates;
  if (detach_coupling)
    for (NodeId& n : inputs) n = g.detach(n);
  NodeId probs = nlu_.forward_coupled(g, nlu_l, inputs, dec.content_mask);
  if (use_l2) {
    NodeId l2 = supervised_loss_nlu(g, probs, batch.frames);
    out.stats.l2 = g.value(l2).item();
    out.stats.has_l2 = true;
    total = g.add(total, g.scale(l2, cfg_.supervised_weight));
  }

  if (rl_active && cfg_.scheme.rl) {
    const RlSpec& rl = *cfg_.scheme.rl;
    if (rl.placement == RewardPlacement::kMid) {
      // reinforce the generator's sampled tokens
      DecodeOptions ropts;
      ropts.feedback = Feedback::kSample;
      ropts.rng = &rng_;
      ropts.max_steps = nlg_.config().max_len;
      DecodeResult roll = nlg_.decode(g, nlg_l, frames, ropts);
      std::vector<double> rewards(batch_n, 0.0);
      std::vector<bool> valid(batch_n, true);
      if (rl.sentence_family == RewardFamily::kReconstruction) {
        NodeId rprobs =
            nlu_.forward_coupled(g, nlu_l, roll.surrogates, roll.content_mask);
        rewards = reward_reconstruction_primal(g.value(rprobs), batch.frames);
      } else {
        for (int b = 0; b < batch_n; ++b) {
          std::vector<int> hyp = roll.content_ids(b);
          if (hyp.empty()) {
            valid[b] = false;
            continue;
          }
          if (rl.sentence_family == RewardFamily::kAutoMetric) {
            std::vector<int> gold(batch.tokens[b].begin() + 1,
                                  batch.tokens[b].begin() + 1 + batch.lengths[b]);
            rewards[b] = reward_auto_nlg(hyp, {gold});
          } else {
            rewards[b] = reward_lm(*lm_, hyp);
          }
        }
      }
      std::vector<double> observed;
      for (int b = 0; b < batch_n; ++b)
        if (valid[b]) observed.push_back(rewards[b]);
      std::vector<RewardSignal> signals(batch_n);
      if (!observed.empty()) {
        auto adj = baseline_.apply(rl.sentence_family, "nlg", observed);
        std::size_t k = 0;
        for (int b = 0; b < batch_n; ++b)
          signals[b] = valid[b] ? adj[k++]
                                : RewardSignal{0.0, 0.0, rl.sentence_family};
      }
      NodeId lp = sampled_token_logprob(g, roll.dists, roll.emitted, roll.step_mask);
      NodeId term = reinforce_term(g, lp, signals, cfg_.rl_weight);
      out.stats.rl_sentence = g.value(term).item();
      out.stats.has_rl = true;
      total = g.add(total, term);
    } else {
      // reinforce the understander's sampled label decisions; the inputs are
      // detached so only the frame-side parameters receive this gradient
      std::vector<NodeId> det = dec.surrogates;
      for (NodeId& n : det) n = g.detach(n);
      NodeId rl_probs = nlu_.forward_coupled(g, nlu_l, det, dec.content_mask);
      Tensor bits = sample_bits(g.value(rl_probs), rng_);
      std::vector<double> rewards(batch_n, 0.0);
      if (rl.frame_family == RewardFamily::kReconstruction) {
        rewards = reward_reconstruction_primal(g.value(rl_probs), batch.frames);
      } else {
        for (int b = 0; b < batch_n; ++b) {
          if (rl.frame_family == RewardFamily::kAutoMetric) {
            std::set<int> gold;
            for (int d = 0; d < batch.frames.cols(); ++d)
              if (batch.frames.at(b, d) > 0.5) gold.insert(d);
            rewards[b] = reward_auto_nlu(bits_to_set(bits, b), gold);
          } else {
            Tensor row({bits.cols()});
            for (int d = 0; d < bits.cols(); ++d) row.at(d) = bits.at(b, d);
            rewards[b] = reward_made(*made_, row);
          }
        }
      }
      auto signals = baseline_.apply(rl.frame_family, "nlu", rewards);
      NodeId lp = sampled_label_logprob(g, rl_probs, bits);
      NodeId term = reinforce_term(g, lp, signals, cfg_.rl_weight);
      out.stats.rl_frame = g.value(term).item();
      out.stats.has_rl = true;
      total = g.add(total, term);
    }
  }
  out.total = total;
  return out;
}

DualTrainer::CycleOutcome DualTrainer::run_dual(Graph& g, const Batch& batch,
                                                bool detach_coupling,
                                                bool use_l1, bool use_l2,
                                                bool rl_active) {
  CycleOutcome out;
  const int batch_n = static_cast<int>(batch.indices.size());
  auto nlu_l = nlu_.lease(g);
  auto rows = content_rows(batch);
  NodeId probs = nlu_.forward_tokens(g, nlu_l, rows, batch.lengths);

  NodeId total = g.constant(Tensor::scalar(0.0));
  if (use_l2) {
    NodeId l2 = supervised_loss_nlu(g, probs, batch.frames);
    out.stats.l2 = g.value(l2).item();
    out.stats.has_l2 = true;
    total = g.add(total, g.scale(l2, cfg_.supervised_weight));
  }

  if (!cfg_.scheme.joint || !joint_enabled_) {
    out.total = total;
    return out;
  }

  auto nlg_l = nlg_.lease(g);
  NodeId coupled = couple_frame_output(g, probs, cfg_.scheme.coupling.nlu_output,
                                       cfg_.nlu_threshold);
  NodeId frame_in = detach_coupling ? g.detach(coupled) : coupled;
  auto dists = nlg_.teacher_forced(g, nlg_l, frame_in, batch.tokens, batch.max_steps);
  if (use_l1) {
    NodeId l1 = supervised_loss_nlg(g, dists, batch.tokens, batch.lengths);
    out.stats.l1 = g.value(l1).item();
    out.stats.has_l1 = true;
    total = g.add(total, g.scale(l1, cfg_.supervised_weight));
  }

  if (rl_active && cfg_.scheme.rl) {
    const RlSpec& rl = *cfg_.scheme.rl;
    if (rl.placement == RewardPlacement::kMid) {
      // reinforce the understander's sampled decisions on gold sentences
      Tensor bits = sample_bits(g.value(probs), rng_);
      std::vector<double> rewards(batch_n, 0.0);
      if (rl.frame_family == RewardFamily::kReconstruction) {
        // likelihood of the original sentence under the generator given the
        // sampled frame
        NodeId bit_frames = g.constant(bits);
        auto rdists = nlg_.teacher_forced(g, nlg_l, bit_frames, batch.tokens,
                                          batch.max_steps);
        std::vector<Tensor> values;
        values.reserve(rdists.size());
        for (NodeId d : rdists) values.push_back(g.value(d));
        rewards = reward_reconstruction_dual(values, batch.tokens, batch.lengths);
      } else {
        for (int b = 0; b < batch_n; ++b) {
          if (rl.frame_family == RewardFamily::kAutoMetric) {
            std::set<int> gold;
            for (int d = 0; d < batch.frames.cols(); ++d)
              if (batch.frames.at(b, d) > 0.5) gold.insert(d);
            rewards[b] = reward_auto_nlu(bits_to_set(bits, b), gold);
          } else {
            Tensor row({bits.cols()});
            for (int d = 0; d < bits.cols(); ++d) row.at(d) = bits.at(b, d);
            rewards[b] = reward_made(*made_, row);
          }
        }
      }
      auto signals = baseline_.apply(rl.frame_family, "nlu", rewards);
      NodeId lp = sampled_label_logprob(g, probs, bits);
      NodeId term = reinforce_term(g, lp, signals, cfg_.rl_weight);
      out.stats.rl_frame = g.value(term).item();
      out.stats.has_rl = true;
      total = g.add(total, term);
    } else {
      // reinforce the generator's sampled reconstruction of y
      DecodeOptions ropts;
      ropts.feedback = Feedback::kSample;
      ropts.rng = &rng_;
      ropts.max_steps = nlg_.config().max_len;
      DecodeResult roll = nlg_.decode(g, nlg_l, g.detach(coupled), ropts);
      std::vector<double> rewards(batch_n, 0.0);
      std::vector<bool> valid(batch_n, true);
      if (rl.sentence_family == RewardFamily::kReconstruction) {
        std::vector<Tensor> values;
        values.reserve(dists.size());
        for (NodeId d : dists) values.push_back(g.value(d));
        rewards = reward_reconstruction_dual(values, batch.tokens, batch.lengths);
      } else {
        for (int b = 0; b < batch_n; ++b) {
          std::vector<int> hyp = roll.content_ids(b);
          if (hyp.empty()) {
            valid[b] = false;
            continue;
          }
          if (rl.sentence_family == RewardFamily::kAutoMetric) {
            std::vector<int> gold(batch.tokens[b].begin() + 1,
                                  batch.tokens[b].begin() + 1 + batch.lengths[b]);
            rewards[b] = reward_auto_nlg(hyp, {gold});
          } else {
            rewards[b] = reward_lm(*lm_, hyp);
          }
        }
      }
      std::vector<double> observed;
      for (int b = 0; b < batch_n; ++b)
        if (valid[b]) observed.push_back(rewards[b]);
      std::vector<RewardSignal> signals(batch_n);
      if (!observed.empty()) {
        auto adj = baseline_.apply(rl.sentence_family, "nlg", observed);
        std::size_t k = 0;
        for (int b = 0; b < batch_n; ++b)
          signals[b] = valid[b] ? adj[k++]
                                : RewardSignal{0.0, 0.0, rl.sentence_family};
      }
      NodeId lp = sampled_token_logprob(g, roll.dists, roll.emitted, roll.step_mask);
      NodeId term = reinforce_term(g, lp, signals, cfg_.rl_weight);
      out.stats.rl_sentence = g.value(term).item();
      out.stats.has_rl = true;
      total = g.add(total, term);
    }
  }
  out.total = total;
  return out;
}

StepStats DualTrainer::finish_step(Graph& g, NodeId total, StepStats stats,
                                   bool update, bool update_nlg, bool update_nlu,
                                   const char* cycle) {
  stats.total = g.value(total).item();
  if (!std::isfinite(stats.total))
    throw TrainAbort(std::string(cycle) + " step produced a non-finite loss");
  if (!update) {
    g.backward(total);
    return stats;
  }
  g.backward(total);
  if (update_nlg) {
    nlg_.store().clip_grad_norm(cfg_.clip_norm);
    nlg_.store().adam_step(cfg_.lr_nlg);
  } else {
    nlg_.store().zero_grads();
  }
  if (update_nlu) {
    nlu_.store().clip_grad_norm(cfg_.clip_norm);
    nlu_.store().adam_step(cfg_.lr_nlu);
  } else {
    nlu_.store().zero_grads();
  }
  return stats;
}

StepStats DualTrainer::primal_cycle_step(const Batch& batch, bool update) {
  Graph g;
  auto out = run_primal(g, batch, false, cfg_.scheme.l1_supervised,
                        cfg_.scheme.joint && cfg_.scheme.l2_supervised,
                        rl_enabled_);
  return finish_step(g, out.total, out.stats, update, true,
                     cfg_.scheme.joint && joint_enabled_, "primal");
}

StepStats DualTrainer::dual_cycle_step(const Batch& batch, bool update) {
  Graph g;
  auto out = run_dual(g, batch, false,
                      cfg_.scheme.joint && cfg_.scheme.l1_supervised,
                      cfg_.scheme.l2_supervised, rl_enabled_);
  return finish_step(g, out.total, out.stats, update,
                     cfg_.scheme.joint && joint_enabled_, true, "dual");
}

StepStats DualTrainer::unsupervised_primal_step(const Batch& batch, bool update,
                                                bool paired) {
  if (!cfg_.scheme.joint)
    throw ConfigError("unsupervised cycle requires a joint coupling mode");
  Graph g;
  Batch local = batch;
  if (!paired) {
    local.lengths.clear();
    local.tokens.clear();
  }
  auto out = run_primal(g, local, false, /*use_l1=*/false, /*use_l2=*/true,
                        /*rl_active=*/false);
  return finish_step(g, out.total, out.stats, update, true, true, "primal");
}

StepStats DualTrainer::unsupervised_dual_step(const Batch& batch, bool update) {
  if (!cfg_.scheme.joint)
    throw ConfigError("unsupervised cycle requires a joint coupling mode");
  Graph g;
  auto out = run_dual(g, batch, false, /*use_l1=*/true, /*use_l2=*/false,
                      /*rl_active=*/false);
  return finish_step(g, out.total, out.stats, update, true, true, "dual");
}

GradProbe DualTrainer::probe_primal(const Batch& batch, bool detach_coupling) {
  nlg_.store().zero_grads();
  nlu_.store().zero_grads();
  Graph g;
  auto out = run_primal(g, batch, detach_coupling, cfg_.scheme.l1_supervised,
                        cfg_.scheme.joint && cfg_.scheme.l2_supervised, false);
  g.backward(out.total);
  GradProbe p{nlg_.store().grad_norm(), nlu_.store().grad_norm(),
              nlg_.store().grad_hash(), nlu_.store().grad_hash()};
  nlg_.store().zero_grads();
  nlu_.store().zero_grads();
  return p;
}

GradProbe DualTrainer::probe_dual(const Batch& batch, bool detach_coupling) {
  nlg_.store().zero_grads();
  nlu_.store().zero_grads();
  Graph g;
  auto out = run_dual(g, batch, detach_coupling,
                      cfg_.scheme.joint && cfg_.scheme.l1_supervised,
                      cfg_.scheme.l2_supervised, false);
  g.backward(out.total);
  GradProbe p{nlg_.store().grad_norm(), nlu_.store().grad_norm(),
              nlg_.store().grad_hash(), nlu_.store().grad_hash()};
  nlg_.store().zero_grads();
  nlu_.store().zero_grads();
  return p;
}

GradProbe DualTrainer::probe_rl_primal(const Batch& batch) {
  if (!cfg_.scheme.rl) throw ConfigError("probe_rl_primal: scheme has no reward");
  nlg_.store().zero_grads();
  nlu_.store().zero_grads();
  Graph g;
  auto out = run_primal(g, batch, false, /*use_l1=*/false, /*use_l2=*/false,
                        /*rl_active=*/true);
  g.backward(out.total);
  GradProbe p{nlg_.store().grad_norm(), nlu_.store().grad_norm(),
              nlg_.store().grad_hash(), nlu_.store().grad_hash()};
  nlg_.store().zero_grads();
  nlu_.store().zero_grads();
  return p;
}

std::string frame_to_string(const SemanticFrame& frame, const LabelSpace& space) {
  std::string out;
  bool first = true;
  for (int i = 0; i < static_cast<int>(frame.labels.size()); ++i) {
    if (!frame.labels[i]) continue;
    const SlotValueLabel& l = space.label(i);
    if (!first) out += ", ";
    out += l.slot + "[" + l.value + "]";
    first = false;
  }
  return out;
}

std::string tokens_to_string(const std::vector<int>& content, const Vocabulary& v) {
  std::string out;
  for (std::size_t i = 0; i < content.size(); ++i) {
    if (i) out += " ";
    out += v.token(content[i]);
  }
  return out;
}

std::vector<CycleTrace> DualTrainer::sample_traces(const Batch& batch, int count) {
  std::vector<CycleTrace> traces;
  int n = std::min<int>(count, static_cast<int>(batch.indices.size()));
  if (n <= 0) return traces;

  // primal: x -> f(x) greedy -> g(f(x)) thresholded
  Graph g;
  auto nlg_l = nlg_.lease(g);
  auto nlu_l = nlu_.lease(g);
  NodeId frames = g.constant(batch.frames);
  DecodeOptions opts;
  opts.max_steps = nlg_.config().max_len;
  opts.joint = cfg_.scheme.joint ? std::optional<JointMode>(cfg_.scheme.coupling.nlg_output)
                                 : std::nullopt;
  DecodeResult dec = nlg_.decode(g, nlg_l, frames, opts);
  std::vector<std::vector<int>> hyp_rows(batch.indices.size());
  std::vector<int> hyp_lens(batch.indices.size());
  int max_hyp = 1;
  for (std::size_t b = 0; b < batch.indices.size(); ++b) {
    hyp_rows[b] = dec.content_ids(static_cast<int>(b));
    hyp_lens[b] = static_cast<int>(hyp_rows[b].size());
    max_hyp = std::max(max_hyp, hyp_lens[b]);
  }
  for (auto& row : hyp_rows) row.resize(max_hyp, Vocabulary::kPad);
  // tolerate empty generations in traces
  std::vector<int> safe_lens = hyp_lens;
  for (int& l : safe_lens)
    if (l == 0) l = 1;
  NodeId probs = nlu_.forward_tokens(g, nlu_l, hyp_rows, safe_lens);

  // dual: y -> g(y) thresholded -> f(g(y)) greedy
  auto rows = content_rows(batch);
  NodeId dual_probs = nlu_.forward_tokens(g, nlu_l, rows, batch.lengths);
  Tensor dual_bits({static_cast<int>(batch.indices.size()), nlu_.label_count()});
  const Tensor& dp = g.value(dual_probs);
  for (int b = 0; b < dp.rows(); ++b)
    for (int c = 0; c < dp.cols(); ++c)
      dual_bits.at(b, c) = dp.at(b, c) >= cfg_.nlu_threshold ? 1.0 : 0.0;
  DecodeResult dual_dec = nlg_.decode(g, nlg_l, g.constant(dual_bits), opts);

  for (int b = 0; b < n; ++b) {
    SemanticFrame gold;
    gold.labels.assign(nlu_.label_count(), 0);
    for (int c = 0; c < batch.frames.cols(); ++c)
      gold.labels[c] = batch.frames.at(b, c) > 0.5 ? 1 : 0;
    std::vector<int> gold_content(batch.tokens[b].begin() + 1,
                                  batch.tokens[b].begin() + 1 + batch.lengths[b]);

    CycleTrace primal;
    primal.cycle = "primal";
    primal.input_mr = frame_to_string(gold, dataset_.space);
    primal.input_text = tokens_to_string(gold_content, dataset_.vocab);
    primal.mid_output =
        tokens_to_string(dec.content_ids(b), dataset_.vocab);
    SemanticFrame rec;
    rec.labels.assign(nlu_.label_count(), 0);
    for (int c = 0; c < nlu_.label_count(); ++c)
      rec.labels[c] = g.value(probs).at(b, c) >= cfg_.nlu_threshold ? 1 : 0;
    primal.end_output = frame_to_string(rec, dataset_.space);
    primal.exact_reconstruction = rec.labels == gold.labels;
    traces.push_back(primal);

    CycleTrace dual;
    dual.cycle = "dual";
    dual.input_mr = primal.input_mr;
    dual.input_text = primal.input_text;
    SemanticFrame mid;
    mid.labels.assign(nlu_.label_count(), 0);
    for (int c = 0; c < nlu_.label_count(); ++c)
      mid.labels[c] = dual_bits.at(b, c) > 0.5 ? 1 : 0;
    dual.mid_output = frame_to_string(mid, dataset_.space);
    std::vector<int> rec_text = dual_dec.content_ids(b);
    dual.end_output = tokens_to_string(rec_text, dataset_.vocab);
    dual.exact_reconstruction = rec_text == gold_content;
    traces.push_back(dual);
  }
  return traces;
}

// ---------------------------------------------------------------------------
// train / evaluate

TrainResult train(NlgModel& nlg, NluModel& nlu, const Dataset& dataset,
                  const TrainConfig& config, const RnnLm* lm,
                  const MadeEstimator* made, const EpochCallback& on_epoch) {
  if (dataset.train.empty()) throw EmptyDatasetError("train: empty training split");
  DualTrainer trainer(nlg, nlu, dataset, config, lm, made);
  Rng data_rng(config.seed);
  TrainResult result;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    bool past_warm_start = epoch > config.warm_start_epochs;
    trainer.set_rl_enabled(config.scheme.rl.has_value() && past_warm_start);
    trainer.set_joint_enabled(!config.scheme.joint || past_warm_start);
    auto batches =
        batch_iter(dataset.train, config.batch_size, dataset.space.size(), data_rng);
    double primal_acc = 0.0, dual_acc = 0.0;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      try {
        primal_acc += trainer.primal_cycle_step(batches[bi]).total;
        dual_acc += trainer.dual_cycle_step(batches[bi]).total;
      } catch (const TrainAbort& e) {
        throw TrainAbort(std::string(e.what()) + " at epoch " +
                         std::to_string(epoch) + " batch " + std::to_string(bi));
      }
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.mean_primal_loss = primal_acc / static_cast<double>(batches.size());
    rec.mean_dual_loss = dual_acc / static_cast<double>(batches.size());
    rec.report = evaluate(nlg, nlu, dataset, config.nlu_threshold);
    rec.traces = trainer.sample_traces(batches.front(), config.trace_samples);
    if (on_epoch) on_epoch(rec);
    result.epochs.push_back(std::move(rec));
  }
  return result;
}

int eval_thread_count(int n_items) {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw < 1) hw = 1;
  if (const char* env = std::getenv("DUALCYCLE_THREADS")) {
    int cap = std::atoi(env);
    if (cap >= 1) hw = std::min(hw, cap);
  }
  return std::max(1, std::min(hw, n_items));
}

EvalReport evaluate(const NlgModel& nlg, const NluModel& nlu,
                    const Dataset& dataset, double nlu_threshold) {
  if (dataset.test.empty()) throw EmptyDatasetError("evaluate: empty test split");
  auto groups = group_references(dataset.test, dataset.space);
  const int d = dataset.space.size();

  // NLG: greedy decode once per distinct MR
  std::vector<TokenSeq> hyps(groups.size());
  std::vector<std::vector<TokenSeq>> refsets(groups.size());
  for (std::size_t i = 0; i < groups.size(); ++i) refsets[i] = groups[i].refs;

  int n_threads = eval_thread_count(static_cast<int>(groups.size()));
  auto decode_range = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t start = lo; start < hi; start += 64) {
      std::size_t end = std::min(hi, start + 64);
      int bn = static_cast<int>(end - start);
      Tensor frames({bn, d});
      for (int b = 0; b < bn; ++b)
        for (int c = 0; c < d; ++c)
          frames.at(b, c) = groups[start + b].frame.labels[c];
      Graph g;
      auto l = nlg.lease(g);
      DecodeOptions opts;
      opts.max_steps = nlg.config().max_len;
      DecodeResult dec = nlg.decode(g, l, g.constant(frames), opts);
      for (int b = 0; b < bn; ++b) hyps[start + b] = dec.content_ids(b);
    }
  };
  if (n_threads <= 1) {
    decode_range(0, groups.size());
  } else {
    std::vector<std::thread> workers;
    std::size_t chunk = (groups.size() + n_threads - 1) / n_threads;
    for (int t = 0; t < n_threads; ++t) {
      std::size_t lo = t * chunk, hi = std::min(groups.size(), lo + chunk);
      if (lo >= hi) break;
      workers.emplace_back(decode_range, lo, hi);
    }
    for (auto& w : workers) w.join();
  }

  // NLU: thresholded predictions over every test pair
  std::vector<std::set<int>> preds(dataset.test.size()), golds(dataset.test.size());
  auto nlu_range = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t start = lo; start < hi; start += 64) {
      std::size_t end = std::min(hi, start + 64);
      int bn = static_cast<int>(end - start);
      std::vector<std::vector<int>> rows(bn);
      std::vector<int> lens(bn);
      int max_len = 1;
      for (int b = 0; b < bn; ++b) {
        rows[b] = dataset.test[start + b].utterance.content();
        lens[b] = std::max<int>(1, static_cast<int>(rows[b].size()));
        max_len = std::max(max_len, lens[b]);
      }
      for (auto& r : rows) r.resize(max_len, Vocabulary::kPad);
      Graph g;
      auto l = nlu.lease(g);
      NodeId probs = nlu.forward_tokens(g, l, rows, lens);
      for (int b = 0; b < bn; ++b) {
        preds[start + b] = threshold_row(g.value(probs), b, nlu_threshold);
        golds[start + b] = dataset.test[start + b].frame.active();
      }
    }
  };
  int nlu_threads = eval_thread_count(static_cast<int>(dataset.test.size()));
  if (nlu_threads <= 1) {
    nlu_range(0, dataset.test.size());
  } else {
    std::vector<std::thread> workers;
    std::size_t chunk = (dataset.test.size() + nlu_threads - 1) / nlu_threads;
    for (int t = 0; t < nlu_threads; ++t) {
      std::size_t lo = t * chunk, hi = std::min(dataset.test.size(), lo + chunk);
      if (lo >= hi) break;
      workers.emplace_back(nlu_range, lo, hi);
    }
    for (auto& w : workers) w.join();
  }

  EvalReport report;
  report.micro_f1 = micro_f1(preds, golds);
  report.bleu = bleu(hyps, refsets);
  report.rouge_1 = corpus_rouge_n(hyps, refsets, 1);
  report.rouge_2 = corpus_rouge_n(hyps, refsets, 2);
  report.rouge_l = corpus_rouge_l(hyps, refsets);
  report.samples = static_cast<int>(dataset.test.size());
  return report;
}

EvalReport evaluate_with(const Dataset& dataset, const DecodeHook& decode,
                         const PredictHook& predict) {
  if (dataset.test.empty()) throw EmptyDatasetError("evaluate: empty test split");
  auto groups = group_references(dataset.test, dataset.space);
  std::vector<TokenSeq> hyps;
  std::vector<std::vector<TokenSeq>> refsets;
  for (const RefGroup& grp : groups) {
    hyps.push_back(decode(grp));
    refsets.push_back(grp.refs);
  }
  std::vector<std::set<int>> preds, golds;
  for (const DataPair& p : dataset.test) {
    preds.push_back(predict(p));
    golds.push_back(p.frame.active());
  }
  EvalReport report;
  report.micro_f1 = micro_f1(preds, golds);
  report.bleu = bleu(hyps, refsets);
  report.rouge_1 = corpus_rouge_n(hyps, refsets, 1);
  report.rouge_2 = corpus_rouge_n(hyps, refsets, 2);
  report.rouge_l = corpus_rouge_l(hyps, refsets);
  report.samples = static_cast<int>(dataset.test.size());
  return report;
}

}  // namespace dualcycle
