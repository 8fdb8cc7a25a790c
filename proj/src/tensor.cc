#include "dualcycle/tensor.h"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "dualcycle/params.h"
#include "dualcycle/rng.h"

namespace dualcycle {

namespace {

std::int64_t numel(const std::vector<int>& shape) {
  std::int64_t n = 1;
  for (int d : shape) {
    if (d < 0) throw ShapeError("negative dimension");
    n *= d;
  }
  return shape.empty() ? 0 : n;
}

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<EMat>;
using MapC = Eigen::Map<const EMat>;

MapC cmap(const Tensor& t) { return MapC(t.data(), t.rows(), t.cols()); }
MapM mmap(Tensor& t) { return MapM(t.data(), t.rows(), t.cols()); }

}  // namespace

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
  if (shape_.size() > 2) throw ShapeError("rank > 2 unsupported");
  v_.assign(static_cast<std::size_t>(numel(shape_)), 0.0);
}

Tensor::Tensor(std::vector<int> shape, std::vector<double> values)
    : shape_(std::move(shape)), v_(std::move(values)) {
  if (shape_.size() > 2) throw ShapeError("rank > 2 unsupported");
  if (numel(shape_) != static_cast<std::int64_t>(v_.size()))
    throw ShapeError("shape/value length mismatch");
}

Tensor Tensor::full(std::vector<int> shape, double v) {
  Tensor t(std::move(shape));
  t.fill(v);
  return t;
}

Tensor Tensor::uniform(std::vector<int> shape, double lo, double hi, Rng& rng) {
  Tensor t(std::move(shape));
  for (std::int64_t i = 0; i < t.size(); ++i) t.at(i) = rng.uniform(lo, hi);
  return t;
}

bool Tensor::all_finite() const {
  for (double x : v_)
    if (!std::isfinite(x)) return false;
  return true;
}

void Tensor::fill(double v) { std::fill(v_.begin(), v_.end(), v); }

double Tensor::item() const {
  if (size() != 1) throw ContractError("item() on tensor of size " + std::to_string(size()));
  return v_[0];
}

std::string Tensor::shape_str() const {
  std::string s = "[";
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape_[i]);
  }
  return s + "]";
}

// ---------------------------------------------------------------------------
// Graph

NodeId Graph::push(Tensor value, std::function<void(Graph&, NodeId)> back) {
  Node n;
  n.value = std::move(value);
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Graph::constant(Tensor t) { return push(std::move(t), nullptr); }

NodeId Graph::param(Param& p) {
  NodeId id = push(p.value, nullptr);
  nodes_[id].leaf = &p;
  return id;
}

NodeId Graph::add(NodeId a, NodeId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (!ta.same_extent(tb))
    throw ShapeError("add: " + ta.shape_str() + " vs " + tb.shape_str());
  Tensor out = ta;
  for (std::int64_t i = 0; i < out.size(); ++i) out.at(i) += tb.at(i);
  return push(std::move(out), [a, b](Graph& g, NodeId n) {
    const Tensor& gr = g.grad(n);
    Tensor& ga = g.grad_ref(a);
    Tensor& gb = g.grad_ref(b);
    for (std::int64_t i = 0; i < gr.size(); ++i) {
      ga.at(i) += gr.at(i);
      gb.at(i) += gr.at(i);
    }
  });
}

NodeId Graph::sub(NodeId a, NodeId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (!ta.same_extent(tb))
    throw ShapeError("sub: " + ta.shape_str() + " vs " + tb.shape_str());
  Tensor out = ta;
  for (std::int64_t i = 0; i < out.size(); ++i) out.at(i) -= tb.at(i);
  return push(std::move(out), [a, b](Graph& g, NodeId n) {
    const Tensor& gr = g.grad(n);
    Tensor& ga = g.grad_ref(a);
    Tensor& gb = g.grad_ref(b);
    for (std::int64_t i = 0; i < gr.size(); ++i) {
      ga.at(i) += gr.at(i);
      gb.at(i) -= gr.at(i);
    }
  });
}

NodeId Graph::mul(NodeId a, NodeId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (!ta.same_extent(tb))
    throw ShapeError("mul: " + ta.shape_str() + " vs " + tb.shape_str());
  Tensor out = ta;
  for (std::int64_t i = 0; i < out.size(); ++i) out.at(i) *= tb.at(i);
  return push(std::move(out), [a, b](Graph& g, NodeId n) {
    const Tensor& gr = g.grad(n);
    const Tensor& va = g.value(a);
    const Tensor& vb = g.value(b);
    Tensor& ga = g.grad_ref(a);
    Tensor& gb = g.grad_ref(b);
    for (std::int64_t i = 0; i < gr.size(); ++i) {
      ga.at(i) += gr.at(i) * vb.at(i);
      gb.at(i) += gr.at(i) * va.at(i);
    }
  });
}

NodeId Graph::scale(NodeId a, double c) {
  Tensor out = value(a);
  for (std::int64_t i = 0; i < out.size(); ++i) out.at(i) *= c;
  return push(std::move(out), [a, c](Graph& g, NodeId n) {
    const Tensor& gr = g.grad(n);
    Tensor& ga = g.grad_ref(a);
    for (std::int64_t i = 0; i < gr.size(); ++i) ga.at(i) += c * gr.at(i);
  });
}

NodeId Graph::one_minus(NodeId a) {
  Tensor out = value(a);
  for (std::int64_t i = 0; i < out.size(); ++i) out.at(i) = 1.0 - out.at(i);
  return push(std::move(out), [a](Graph& g, NodeId n) {
    const Tensor& gr = g.grad(n);
    Tensor& ga = g.grad_ref(a);
    for (std::int64_t i = 0; i < gr.size(); ++i) ga.at(i) -= gr.at(i);
  });
}

NodeId Graph::add_rowvec(NodeId a, NodeId v) {
  const Tensor& ta = value(a);
  const Tensor& tv = value(v);
  if (tv.rows() != 1 || tv.cols() != ta.cols())
    throw ShapeError("add_rowvec: " + ta.shape_str() + " vs " + tv.shape_str());
  Tensor out = ta;
  for (int r = 0; r < out.rows(); ++r)
    for (int c = 0; c < out.cols(); ++c) out.at(r, c) += tv.at(c);
  return push(std::move(out), [a, v](Graph& g, NodeId n) {
    const Tensor& gr = g.grad(n);
    Tensor& ga = g.grad_ref(a);
    Tensor& gv = g.grad_ref(v);
    for (std::int64_t i = 0; i < gr.size(); ++i) ga.at(i) += gr.at(i);
    for (int r = 0; r < gr.rows(); ++r)
      for (int c = 0; c < gr.cols(); ++c) gv.at(c) += gr.at(r, c);
  });
}

NodeId Graph::scale_rows(NodeId a, const Tensor& m) {
  const Tensor& ta = value(a);
  if (m.size() != ta.rows()) throw ShapeError("scale_rows mask size");
  Tensor out = ta;
  for (int r = 0; r < out.rows(); ++r)
    for (int c = 0; c < out.cols(); ++c) out.at(r, c) *= m.at(r);
  Tensor mask = m;
  return push(std::move(out), [a, mask](Graph& g, NodeId n) {
    const Tensor& gr = g.grad(n);
    Tensor& ga = g.grad_ref(a);
    for (int r = 0; r < gr.rows(); ++r)
      for (int c = 0; c < gr.cols(); ++c) ga.at(r, c) += gr.at(r, c) * mask.at(r);
  });
}

NodeId Graph::matmul(NodeId a, NodeId b, bool transpose_b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  int inner_b = transpose_b ? tb.cols() : tb.rows();
  int out_cols = transpose_b ? tb.rows() : tb.cols();
  if (ta.cols() != inner_b)
    throw ShapeError("matmul: " + ta.shape_str() + (transpose_b ? " * T" : " * ") +
                     tb.shape_str());
  Tensor out(ta.rank() == 1 ? std::vector<int>{out_cols}
                            : std::vector<int>{ta.rows(), out_cols});
  if (transpose_b)
    mmap(out).noalias() = cmap(ta) * cmap(tb).transpose();
  else
    mmap(out).noalias() = cmap(ta) * cmap(tb);
  return push(std::move(out), [a, b, transpose_b](Graph& g, NodeId n) {
    const Tensor& gr = g.grad(n);
    const Tensor& va = g.value(a);
    const Tensor& vb = g.value(b);
    Tensor& ga = g.grad_ref(a);
    Tensor& gb = g.grad_ref(b);
    if (transpose_b) {
      // C = A B^T: dA += G B ; dB += G^T A
      mmap(ga).noalias() += cmap(gr) * cmap(vb);
      mmap(gb).noalias() += cmap(gr).transpose() * cmap(va);
    } else {
      // C = A B: dA += G B^T ; dB += A^T G
      mmap(ga).noalias() += cmap(gr) * cmap(vb).transpose();
      mmap(gb).noalias() += cmap(va).transpose() * cmap(gr);
    }
  });
}

NodeId Graph::sigmoid(NodeId a) {
  Tensor out = value(a);
  for (std::int64_t i = 0; i < out.size(); ++i) {
    double x = out.at(i);
    out.at(i) = x >= 0 ? 1.0 / (1.0 + std::exp(-x))
                       : std::exp(x) / (1.0 + std::exp(x));
  }
  return push(std::move(out), [a](Graph& g, NodeId n) {
    const Tensor& gr = g.grad(n);
    const Tensor& y = g.value(n);
    Tensor& ga = g.grad_ref(a);
    for (std::int64_t i = 0; i < gr.size(); ++i)
      ga.at(i) += gr.at(i) * y.at(i) * (1.0 - y.at(i));
  });
}

NodeId Graph::tanh(NodeId a) {
  Tensor out = value(a);
  for (std::int64_t i = 0; i < out.size(); ++i) out.at(i) = std::tanh(out.at(i));
  return push(std::move(out), [a](Graph& g, NodeId n) {
    const Tensor& gr = g.grad(n);
    const Tensor& y = g.value(n);
    Tensor& ga = g.grad_ref(a);
    for (std::int64_t i = 0; i < gr.size(); ++i)
      ga.at(i) += gr.at(i) * (1.0 - y.at(i) * y.at(i));
  });
}

NodeId Graph::softmax(NodeId a) {
  const Tensor& ta = value(a);
  if (ta.cols() < 1) throw ShapeError("softmax on empty rows");
  Tensor out = ta;
  for (int r = 0; r < out.rows(); ++r) {
    double mx = out.at(r, 0);
    for (int c = 1; c < out.cols(); ++c) mx = std::max(mx, out.at(r, c));
    double z = 0.0;
    for (int c = 0; c < out.cols(); ++c) {
      out.at(r, c) = std::exp(out.at(r, c) - mx);
      z += out.at(r, c);
    }
    for (int c = 0; c < out.cols(); ++c) out.at(r, c) /= z;
  }
  return push(std::move(out), [a](Graph& g, NodeId n) {
    const Tensor& gr = g.grad(n);
    const Tensor& y = g.value(n);
    Tensor& ga = g.grad_ref(a);
    for (int r = 0; r < gr.rows(); ++r) {
      double dot = 0.0;
      for (int c = 0; c < gr.cols(); ++c) dot += gr.at(r, c) * y.at(r, c);
      for (int c = 0; c < gr.cols(); ++c)
        ga.at(r, c) += y.at(r, c) * (gr.at(r, c) - dot);
    }
  });
}

NodeId Graph::cross_entropy(NodeId dist, const std::vector<int>& targets) {
  const Tensor& d = value(dist);
  if (static_cast<int>(targets.size()) != d.rows())
    throw ShapeError("cross_entropy: targets/rows mismatch");
  for (int t : targets)
    if (t < 0 || t >= d.cols())
      throw LabelError("cross_entropy: target index " + std::to_string(t) +
                       " out of range [0," + std::to_string(d.cols()) + ")");
  Tensor out({d.rows(), 1});
  for (int r = 0; r < d.rows(); ++r)
    out.at(r, 0) = -std::log(std::max(d.at(r, targets[r]), kProbFloor));
  std::vector<int> ts = targets;
  return push(std::move(out), [dist, ts](Graph& g, NodeId n) {
    const Tensor& gr = g.grad(n);
    const Tensor& d = g.value(dist);
    Tensor& gd = g.grad_ref(dist);
    for (int r = 0; r < d.rows(); ++r) {
      double p = d.at(r, ts[r]);
      if (p > kProbFloor) gd.at(r, ts[r]) -= gr.at(r, 0) / p;
    }
  });
}

NodeId Graph::binary_cross_entropy(NodeId probs, const Tensor& targets) {
  const Tensor& p = value(probs);
  if (!p.same_extent(targets))
    throw ShapeError("binary_cross_entropy: " + p.shape_str() + " vs " +
                     targets.shape_str());
  for (std::int64_t i = 0; i < targets.size(); ++i)
    if (targets.at(i) != 0.0 && targets.at(i) != 1.0)
      throw LabelError("binary_cross_entropy: target not in {0,1}");
  const double lo = kProbFloor, hi = 1.0 - kProbFloor;
  int d_cols = p.cols();
  Tensor out({p.rows(), 1});
  for (int r = 0; r < p.rows(); ++r) {
    double acc = 0.0;
    for (int c = 0; c < d_cols; ++c) {
      double pc = std::clamp(p.at(r, c), lo, hi);
      double t = targets.at(r, c);
      acc -= t * std::log(pc) + (1.0 - t) * std::log(1.0 - pc);
    }
    out.at(r, 0) = acc / d_cols;
  }
  Tensor tg = targets;
  return push(std::move(out), [probs, tg, lo, hi, d_cols](Graph& g, NodeId n) {
    const Tensor& gr = g.grad(n);
    const Tensor& p = g.value(probs);
    Tensor& gp = g.grad_ref(probs);
    for (int r = 0; r < p.rows(); ++r)
      for (int c = 0; c < d_cols; ++c) {
        double pc = p.at(r, c);
        if (pc <= lo || pc >= hi) continue;  // clamped: locally constant
        gp.at(r, c) += gr.at(r, 0) * (pc - tg.at(r, c)) / (pc * (1.0 - pc) * d_cols);
      }
  });
}

NodeId Graph::bernoulli_loglik(NodeId probs, const Tensor& outcomes) {
  const Tensor& p = value(probs);
  if (!p.same_extent(outcomes))
    throw ShapeError("bernoulli_loglik: " + p.shape_str() + " vs " +
                     outcomes.shape_str());
  const double lo = kProbFloor, hi = 1.0 - kProbFloor;
  Tensor out({p.rows(), 1});
  for (int r = 0; r < p.rows(); ++r) {
    double acc = 0.0;
    for (int c = 0; c < p.cols(); ++c) {
      double pc = std::clamp(p.at(r, c), lo, hi);
      double s = outcomes.at(r, c);
      acc += s * std::log(pc) + (1.0 - s) * std::log(1.0 - pc);
    }
    out.at(r, 0) = acc;
  }
  Tensor oc = outcomes;
  return push(std::move(out), [probs, oc, lo, hi](Graph& g, NodeId n) {
    const Tensor& gr = g.grad(n);
    const Tensor& p = g.value(probs);
    Tensor& gp = g.grad_ref(probs);
    for (int r = 0; r < p.rows(); ++r)
      for (int c = 0; c < p.cols(); ++c) {
        double pc = p.at(r, c);
        if (pc <= lo || pc >= hi) continue;
        gp.at(r, c) += gr.at(r, 0) * (oc.at(r, c) - pc) / (pc * (1.0 - pc));
      }
  });
}

NodeId Graph::embed_rows(NodeId table, const std::vector<int>& ids) {
  const Tensor& t = value(table);
  for (int id : ids)
    if (id < 0 || id >= t.rows()) throw LabelError("embed_rows: id out of range");
  Tensor out({static_cast<int>(ids.size()), t.cols()});
  for (std::size_t b = 0; b < ids.size(); ++b)
    for (int c = 0; c < t.cols(); ++c)
      out.at(static_cast<int>(b), c) = t.at(ids[b], c);
  std::vector<int> idv = ids;
  return push(std::move(out), [table, idv](Graph& g, NodeId n) {
    const Tensor& gr = g.grad(n);
    Tensor& gt = g.grad_ref(table);
    for (std::size_t b = 0; b < idv.size(); ++b)
      for (int c = 0; c < gr.cols(); ++c)
        gt.at(idv[b], c) += gr.at(static_cast<int>(b), c);
  });
}

NodeId Graph::st_onehot(NodeId dist) {
  const Tensor& d = value(dist);
  Tensor out = d;
  out.fill(0.0);
  for (int r = 0; r < d.rows(); ++r) {
    int best = 0;
    for (int c = 1; c < d.cols(); ++c)
      if (d.at(r, c) > d.at(r, best)) best = c;  // ties keep the lowest index
    out.at(r, best) = 1.0;
  }
  return push(std::move(out), [dist](Graph& g, NodeId n) {
    const Tensor& gr = g.grad(n);
    Tensor& gd = g.grad_ref(dist);
    for (std::int64_t i = 0; i < gr.size(); ++i) gd.at(i) += gr.at(i);
  });
}

NodeId Graph::st_threshold(NodeId probs, double threshold) {
  const Tensor& p = value(probs);
  Tensor out = p;
  for (std::int64_t i = 0; i < out.size(); ++i)
    out.at(i) = p.at(i) >= threshold ? 1.0 : 0.0;  // boundary maps up
  return push(std::move(out), [probs](Graph& g, NodeId n) {
    const Tensor& gr = g.grad(n);
    Tensor& gp = g.grad_ref(probs);
    for (std::int64_t i = 0; i < gr.size(); ++i) gp.at(i) += gr.at(i);
  });
}

NodeId Graph::detach(NodeId a) {
  return push(value(a), nullptr);
}

NodeId Graph::sum(NodeId a) {
  const Tensor& ta = value(a);
  double acc = 0.0;
  for (std::int64_t i = 0; i < ta.size(); ++i) acc += ta.at(i);
  return push(Tensor::scalar(acc), [a](Graph& g, NodeId n) {
    double gr = g.grad(n).at(0);
    Tensor& ga = g.grad_ref(a);
    for (std::int64_t i = 0; i < ga.size(); ++i) ga.at(i) += gr;
  });
}

NodeId Graph::mean(NodeId a) {
  const Tensor& ta = value(a);
  if (ta.size() == 0) throw ShapeError("mean of empty tensor");
  double acc = 0.0;
  for (std::int64_t i = 0; i < ta.size(); ++i) acc += ta.at(i);
  double inv = 1.0 / static_cast<double>(ta.size());
  return push(Tensor::scalar(acc * inv), [a, inv](Graph& g, NodeId n) {
    double gr = g.grad(n).at(0) * inv;
    Tensor& ga = g.grad_ref(a);
    for (std::int64_t i = 0; i < ga.size(); ++i) ga.at(i) += gr;
  });
}

void Graph::backward(NodeId loss) {
  if (value(loss).size() != 1)
    throw ContractError("backward: loss must be a scalar, got " +
                        value(loss).shape_str());
  for (Node& n : nodes_) {
    n.grad = Tensor(n.value.shape());
  }
  nodes_[loss].grad.at(0) = 1.0;
  for (NodeId i = static_cast<NodeId>(nodes_.size()) - 1; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.back) n.back(*this, i);
    if (n.leaf) accumulate_param_grad(*n.leaf, n.grad);
  }
}

// ---------------------------------------------------------------------------
// Plain-tensor spec surface

Tensor softmax(const Tensor& logits) {
  Graph g;
  return g.value(g.softmax(g.constant(logits)));
}

double cross_entropy(const Tensor& pred_dist, int target_index) {
  Graph g;
  return g.value(g.cross_entropy(g.constant(pred_dist), {target_index})).item();
}

double binary_cross_entropy(const Tensor& pred, const Tensor& target) {
  Graph g;
  return g.value(g.binary_cross_entropy(g.constant(pred), target)).item();
}

}  // namespace dualcycle
