#ifndef DUALCYCLE_TRAINER_H_
#define DUALCYCLE_TRAINER_H_

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dualcycle/coupling.h"
#include "dualcycle/data.h"
#include "dualcycle/metrics.h"
#include "dualcycle/models.h"
#include "dualcycle/objectives.h"

namespace dualcycle {

// Table rows: (a) iterative supervised; (c)-(f) joint training with the four
// coupling combinations; (g)-(l) add a REINFORCE term at the mid or end of
// each cycle on top of (f).
enum class SchemeId { kA, kC, kD, kE, kF, kG, kH, kI, kJ, kK, kL, kCustom };

SchemeId scheme_from_string(const std::string& s);
std::string to_string(SchemeId id);

struct RlSpec {
  RewardPlacement placement = RewardPlacement::kMid;
  RewardFamily sentence_family = RewardFamily::kReconstruction;  // NLG decisions
  RewardFamily frame_family = RewardFamily::kReconstruction;     // NLU decisions
};

struct SchemeSpec {
  SchemeId id = SchemeId::kA;
  bool joint = false;
  CouplingMode coupling;
  bool l1_supervised = true;
  bool l2_supervised = true;
  std::optional<RlSpec> rl;

  bool needs_lm() const;
  bool needs_made() const;
  static SchemeSpec preset(SchemeId id);
};

struct TrainConfig {
  double lr_nlg = 1e-3;  // γ1, updates the generation parameters
  double lr_nlu = 1e-3;  // γ2, updates the understanding parameters
  int batch_size = 64;
  int epochs = 10;
  std::uint64_t seed = 13;
  SchemeSpec scheme;
  double clip_norm = 5.0;
  double supervised_weight = 1.0;
  double rl_weight = 0.1;
  double baseline_decay = 0.95;
  bool baseline_enabled = true;
  int warm_start_epochs = 2;  // supervised-only epochs before joint/RL terms
  bool nlg_feedback_teacher = false;  // joint cycles feed gold tokens back
  double nlu_threshold = 0.5;
  int trace_samples = 2;
  int unsup_max_steps = 0;  // free-decode cap for unpaired cycles; 0: max_len
};

struct StepStats {
  double l1 = 0.0;          // sentence-side supervised loss, when computed
  double l2 = 0.0;          // frame-side supervised loss, when computed
  bool has_l1 = false;
  bool has_l2 = false;
  double rl_sentence = 0.0;  // REINFORCE term value on NLG decisions
  double rl_frame = 0.0;     // REINFORCE term value on NLU decisions
  bool has_rl = false;
  double total = 0.0;
};

struct GradProbe {
  double nlg_grad_norm = 0.0;
  double nlu_grad_norm = 0.0;
  std::uint64_t nlg_grad_hash = 0;
  std::uint64_t nlu_grad_hash = 0;
};

struct CycleTrace {
  std::string cycle;        // "primal" | "dual"
  std::string input_mr;     // x
  std::string input_text;   // y
  std::string mid_output;   // f(x) or g(y)
  std::string end_output;   // g(f(x)) or f(g(y))
  bool exact_reconstruction = false;
};

struct EpochRecord {
  int epoch = 0;
  double mean_primal_loss = 0.0;
  double mean_dual_loss = 0.0;
  EvalReport report;
  std::vector<CycleTrace> traces;
};

struct TrainResult {
  std::vector<EpochRecord> epochs;
};

// Runs Primal and Dual cycles over paired batches, routing gradients per the
// two-rate update split: the first model of a cycle receives the full cycle
// gradient, the second only its own loss term.
class DualTrainer {
 public:
  DualTrainer(NlgModel& nlg, NluModel& nlu, const Dataset& dataset,
              const TrainConfig& config, const RnnLm* lm = nullptr,
              const MadeEstimator* made = nullptr);

  // One Primal Cycle step: x -> f(x) -> g(f(x)) -> losses -> updates.
  StepStats primal_cycle_step(const Batch& batch, bool update = true);
  // One Dual Cycle step: y -> g(y) -> f(g(y)) -> losses -> updates.
  StepStats dual_cycle_step(const Batch& batch, bool update = true);

  // Unsupervised cycles: only the end-of-cycle reconstruction loss applies.
  // On paired batches the decode protocol matches the supervised step.
  StepStats unsupervised_primal_step(const Batch& batch, bool update = true,
                                     bool paired = true);
  StepStats unsupervised_dual_step(const Batch& batch, bool update = true);

  // Gradient-norm accounting for the update-routing checks; no updates.
  GradProbe probe_primal(const Batch& batch, bool detach_coupling);
  GradProbe probe_dual(const Batch& batch, bool detach_coupling);
  // RL-only gradients on a probe batch (supervised terms off); no updates.
  GradProbe probe_rl_primal(const Batch& batch);

  void set_rl_enabled(bool on) { rl_enabled_ = on; }
  bool rl_enabled() const { return rl_enabled_; }
  // Warm-start switch: with the joint disabled, cycle steps fall back to the
  // iterative supervised updates of scheme (a).
  void set_joint_enabled(bool on) { joint_enabled_ = on; }
  bool joint_enabled() const { return joint_enabled_; }
  RewardBaseline& baseline() { return baseline_; }
  Rng& rng() { return rng_; }

  std::vector<CycleTrace> sample_traces(const Batch& batch, int count);

 private:
  struct CycleOutcome;
  CycleOutcome run_primal(Graph& g, const Batch& batch, bool detach_coupling,
                          bool use_l1, bool use_l2, bool rl_active);
  CycleOutcome run_dual(Graph& g, const Batch& batch, bool detach_coupling,
                        bool use_l1, bool use_l2, bool rl_active);
  void apply_updates(bool update_nlg, bool update_nlu);
  StepStats finish_step(Graph& g, NodeId total, StepStats stats, bool update,
                        bool update_nlg, bool update_nlu, const char* cycle);

  NlgModel& nlg_;
  NluModel& nlu_;
  const Dataset& dataset_;
  TrainConfig cfg_;
  const RnnLm* lm_;
  const MadeEstimator* made_;
  RewardBaseline baseline_;
  Rng rng_;
  bool rl_enabled_ = true;
  bool joint_enabled_ = true;
};

// Full training protocol: per batch one primal then one dual step, per-epoch
// evaluation on the test split, fixed epoch count without early stopping.
using EpochCallback = std::function<void(const EpochRecord&)>;
TrainResult train(NlgModel& nlg, NluModel& nlu, const Dataset& dataset,
                  const TrainConfig& config, const RnnLm* lm = nullptr,
                  const MadeEstimator* made = nullptr,
                  const EpochCallback& on_epoch = nullptr);

// Greedy-decode NLG scoring over grouped references plus thresholded NLU
// micro-F1 over the split. DUALCYCLE_THREADS caps decode parallelism.
EvalReport evaluate(const NlgModel& nlg, const NluModel& nlu,
                    const Dataset& dataset, double nlu_threshold = 0.5);

// Same scoring over pluggable decode/predict functions (oracle stubs, ablation
// probes). Shares the metric kernels with the model path.
using DecodeHook = std::function<TokenSeq(const RefGroup&)>;
using PredictHook = std::function<std::set<int>(const DataPair&)>;
EvalReport evaluate_with(const Dataset& dataset, const DecodeHook& decode,
                         const PredictHook& predict);

int eval_thread_count(int n_items);

// Renders a frame as its canonical slot[value] list.
std::string frame_to_string(const SemanticFrame& frame, const LabelSpace& space);
std::string tokens_to_string(const std::vector<int>& content, const Vocabulary& v);

}  // namespace dualcycle

#endif  // DUALCYCLE_TRAINER_H_
