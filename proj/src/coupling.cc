#include "dualcycle/coupling.h"

namespace dualcycle {

JointMode joint_mode_from_string(const std::string& s) {
  if (s == "straight_through" || s == "st") return JointMode::kStraightThrough;
  if (s == "distribution" || s == "dist") return JointMode::kDistribution;
  throw ConfigError("unknown joint mode '" + s + "'");
}

std::string to_string(JointMode m) {
  return m == JointMode::kStraightThrough ? "straight_through" : "distribution";
}

NodeId st_onehot(Graph& g, NodeId dist) { return g.st_onehot(dist); }

NodeId st_threshold(Graph& g, NodeId probs, double threshold) {
  return g.st_threshold(probs, threshold);
}

NodeId embed_distribution(Graph& g, NodeId dist, NodeId embedding_table) {
  const Tensor& d = g.value(dist);
  const Tensor& t = g.value(embedding_table);
  if (d.cols() != t.rows())
    throw ShapeError("embed_distribution: " + d.shape_str() + " vs table " +
                     t.shape_str());
  return g.matmul(dist, embedding_table);
}

NodeId frame_distribution_input(Graph& g, NodeId probs) {
  (void)g;
  return probs;
}

NodeId couple_token_output(Graph& g, NodeId dist, JointMode mode) {
  return mode == JointMode::kStraightThrough ? st_onehot(g, dist) : dist;
}

NodeId couple_frame_output(Graph& g, NodeId probs, JointMode mode,
                           double threshold) {
  return mode == JointMode::kStraightThrough ? st_threshold(g, probs, threshold)
                                             : frame_distribution_input(g, probs);
}

}  // namespace dualcycle
