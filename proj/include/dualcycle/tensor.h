#ifndef DUALCYCLE_TENSOR_H_
#define DUALCYCLE_TENSOR_H_

#include <cstdint>
#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "dualcycle/errors.h"

namespace dualcycle {

class Rng;

// Dense 64-bit float array, rank 1 or 2. Rank-1 tensors behave as a single
// row wherever a matrix is expected.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);
  Tensor(std::vector<int> shape, std::vector<double> values);

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<int> shape, double v);
  static Tensor scalar(double v) { return Tensor({1}, {v}); }
  static Tensor uniform(std::vector<int> shape, double lo, double hi, Rng& rng);

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  // Matrix view: rank-1 [n] reads as 1 x n.
  int rows() const { return rank() == 2 ? shape_[0] : 1; }
  int cols() const { return rank() == 2 ? shape_[1] : (rank() == 1 ? shape_[0] : 0); }
  std::int64_t size() const { return static_cast<std::int64_t>(v_.size()); }

  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }
  double& at(std::int64_t i) { return v_[static_cast<std::size_t>(i)]; }
  double at(std::int64_t i) const { return v_[static_cast<std::size_t>(i)]; }
  double& at(int r, int c) { return v_[static_cast<std::size_t>(r) * cols() + c]; }
  double at(int r, int c) const { return v_[static_cast<std::size_t>(r) * cols() + c]; }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  // Equal under the rank-1-as-row convention.
  bool same_extent(const Tensor& o) const {
    return rows() == o.rows() && cols() == o.cols();
  }
  bool all_finite() const;
  void fill(double v);
  double item() const;  // value of a 1-element tensor

  std::string shape_str() const;

 private:
  std::vector<int> shape_;
  std::vector<double> v_;
};

class ParamStore;
struct Param;

using NodeId = std::int32_t;

// Reverse-mode tape. Nodes are appended in forward order, which is a valid
// topological order, so backward() is a single reverse sweep. A Graph lives
// for one training/evaluation step; parameters enter as leaf nodes via
// param() and receive accumulated gradients in their owning ParamStore.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  NodeId constant(Tensor t);
  NodeId param(Param& p);

  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId scale(NodeId a, double c);
  NodeId one_minus(NodeId a);
  // [r x c] + row vector [c]
  NodeId add_rowvec(NodeId a, NodeId v);
  // row i of a scaled by m[i]; m is plain data, not differentiated through
  NodeId scale_rows(NodeId a, const Tensor& m);
  // C = A * B, or A * B^T when transpose_b
  NodeId matmul(NodeId a, NodeId b, bool transpose_b = false);
  NodeId sigmoid(NodeId a);
  NodeId tanh(NodeId a);
  // Row-wise softmax, stabilized by max subtraction.
  NodeId softmax(NodeId a);
  // out[b] = -log(clamp(dist[b, targets[b]])); dist rows are distributions
  NodeId cross_entropy(NodeId dist, const std::vector<int>& targets);
  // out[b] = mean_d -[t log p + (1-t) log(1-p)], targets in {0,1}
  NodeId binary_cross_entropy(NodeId probs, const Tensor& targets);
  // out[b] = sum_d [s log p + (1-s) log(1-p)] for outcome bits s
  NodeId bernoulli_loglik(NodeId probs, const Tensor& outcomes);
  // out[b, :] = table[ids[b], :]
  NodeId embed_rows(NodeId table, const std::vector<int>& ids);
  // Straight-through: forward argmax one-hot per row (ties -> lowest index),
  // backward identity.
  NodeId st_onehot(NodeId dist);
  // Straight-through: forward (p >= threshold) per element, backward identity.
  NodeId st_threshold(NodeId probs, double threshold = 0.5);
  // Forward identity, backward drops the gradient.
  NodeId detach(NodeId a);
  NodeId sum(NodeId a);
  NodeId mean(NodeId a);

  const Tensor& value(NodeId n) const { return nodes_[n].value; }
  const Tensor& grad(NodeId n) const { return nodes_[n].grad; }
  std::size_t node_count() const { return nodes_.size(); }

  // Reverse sweep from a scalar loss. Gradients of parameter leaves are
  // ADDED to their ParamStore slots; repeated calls keep accumulating.
  void backward(NodeId loss);

  // Probability floor used inside every log term.
  static constexpr double kProbFloor = 1e-12;

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    Param* leaf = nullptr;
    std::function<void(Graph&, NodeId)> back;  // null for leaves/constants
  };

  NodeId push(Tensor value, std::function<void(Graph&, NodeId)> back);
  Tensor& grad_ref(NodeId n) { return nodes_[n].grad; }

  std::deque<Node> nodes_;
};

// Spec-surface helpers operating on plain tensors (each builds a tiny graph
// internally where differentiation is part of the contract).
Tensor softmax(const Tensor& logits);
double cross_entropy(const Tensor& pred_dist, int target_index);
double binary_cross_entropy(const Tensor& pred, const Tensor& target);

}  // namespace dualcycle

#endif  // DUALCYCLE_TENSOR_H_
