#ifndef DUALCYCLE_COUPLING_H_
#define DUALCYCLE_COUPLING_H_

#include <string>

#include "dualcycle/tensor.h"

namespace dualcycle {

// How each joint of the NLG<->NLU loop passes values forward while keeping
// gradients flowing backward.
enum class JointMode {
  kStraightThrough,  // discrete forward value, identity backward
  kDistribution,     // continuous distribution as input, plain chain rule
};

struct CouplingMode {
  JointMode nlg_output = JointMode::kStraightThrough;  // NLG -> NLU joint
  JointMode nlu_output = JointMode::kStraightThrough;  // NLU -> NLG joint
};

JointMode joint_mode_from_string(const std::string& s);
std::string to_string(JointMode m);

// Argmax one-hot forward (ties -> lowest index), identity backward.
NodeId st_onehot(Graph& g, NodeId dist);

// Hard threshold forward (boundary maps to 1), identity backward.
NodeId st_threshold(Graph& g, NodeId probs, double threshold = 0.5);

// dist^T * embedding_table: the weighted-sum word embedding of a vocabulary
// distribution. Fully differentiable.
NodeId embed_distribution(Graph& g, NodeId dist, NodeId embedding_table);

// Label probabilities fed straight into the generator's input projection.
// Identity by construction; exists to name the joint.
NodeId frame_distribution_input(Graph& g, NodeId probs);

// NLG -> NLU joint: the sentence-side surrogate for one decoded step.
NodeId couple_token_output(Graph& g, NodeId dist, JointMode mode);

// NLU -> NLG joint: the frame-side surrogate.
NodeId couple_frame_output(Graph& g, NodeId probs, JointMode mode,
                           double threshold = 0.5);

}  // namespace dualcycle

#endif  // DUALCYCLE_COUPLING_H_
