#include "dualcycle/models.h"

#include <algorithm>
#include <cmath>

namespace dualcycle {

namespace {

constexpr int kBos = Vocabulary::kBos;
constexpr int kEos = Vocabulary::kEos;
constexpr int kPad = Vocabulary::kPad;

int argmax_row(const Tensor& t, int row) {
  int best = 0;
  for (int c = 1; c < t.cols(); ++c)
    if (t.at(row, c) > t.at(row, best)) best = c;
  return best;
}

int sample_row(const Tensor& t, int row, Rng& rng) {
  double u = rng.uniform();
  double acc = 0.0;
  for (int c = 0; c < t.cols(); ++c) {
    acc += t.at(row, c);
    if (u < acc) return c;
  }
  return t.cols() - 1;
}

// mask .* a + (1 - mask) .* b, used to freeze finished rows.
NodeId blend_rows(Graph& g, NodeId a, NodeId b, const Tensor& mask) {
  Tensor inv = mask;
  for (std::int64_t i = 0; i < inv.size(); ++i) inv.at(i) = 1.0 - inv.at(i);
  return g.add(g.scale_rows(a, mask), g.scale_rows(b, inv));
}

}  // namespace

Feedback feedback_for(JointMode joint, bool sample) {
  if (sample) return Feedback::kSample;
  return joint == JointMode::kStraightThrough ? Feedback::kStOnehot
                                              : Feedback::kDistribution;
}

std::vector<int> DecodeResult::content_ids(int row) const {
  std::vector<int> out;
  for (std::size_t t = 0; t < emitted.size(); ++t)
    if (content_mask[t].at(row) > 0.5) out.push_back(emitted[t][row]);
  return out;
}

// ---------------------------------------------------------------------------
// NlgModel

NlgModel::NlgModel(int label_count, int vocab_size, const ModelConfig& cfg,
                   std::uint64_t seed)
    : label_count_(label_count), vocab_size_(vocab_size), cfg_(cfg) {
  Rng rng(seed);
  store_.create("in_w", {cfg.hidden, label_count}, ParamStore::Init::kUniform, &rng);
  store_.create("in_b", {cfg.hidden}, ParamStore::Init::kZero);
  store_.create("emb", {vocab_size, cfg.embed}, ParamStore::Init::kUniform, &rng);
  gru_ = std::make_unique<GruCell>(store_, "gru", cfg.embed, cfg.hidden, rng);
  store_.create("out_w", {vocab_size, cfg.hidden}, ParamStore::Init::kUniform, &rng);
  store_.create("out_b", {vocab_size}, ParamStore::Init::kZero);
}

NlgModel::Leased NlgModel::lease(Graph& g) const {
  Leased l;
  auto& self = const_cast<NlgModel&>(*this);
  l.in_w = g.param(self.store_.at("in_w"));
  l.in_b = g.param(self.store_.at("in_b"));
  l.emb = g.param(self.store_.at("emb"));
  l.out_w = g.param(self.store_.at("out_w"));
  l.out_b = g.param(self.store_.at("out_b"));
  l.gru = gru_->lease(g);
  return l;
}

NodeId NlgModel::init_hidden(Graph& g, const Leased& l, NodeId frame_input) const {
  return g.tanh(affine(g, frame_input, l.in_w, l.in_b));
}

NodeId NlgModel::step(Graph& g, const Leased& l, NodeId input_embedding,
                      NodeId* h) const {
  *h = gru_->step(g, l.gru, input_embedding, *h);
  return g.softmax(affine(g, *h, l.out_w, l.out_b));
}

std::vector<NodeId> NlgModel::teacher_forced(
    Graph& g, const Leased& l, NodeId frame_input,
    const std::vector<std::vector<int>>& tokens, int steps) const {
  if (steps < 1) throw ContractError("teacher_forced: empty target");
  int batch = static_cast<int>(tokens.size());
  NodeId h = init_hidden(g, l, frame_input);
  std::vector<NodeId> dists;
  dists.reserve(steps);
  for (int t = 0; t < steps; ++t) {
    std::vector<int> in_ids(batch);
    for (int b = 0; b < batch; ++b) in_ids[b] = tokens[b][t];
    NodeId x = g.embed_rows(l.emb, in_ids);
    dists.push_back(step(g, l, x, &h));
  }
  return dists;
}

DecodeResult NlgModel::decode(Graph& g, const Leased& l, NodeId frame_input,
                              const DecodeOptions& opts) const {
  if (opts.max_steps < 1) throw ContractError("decode: max_steps must be >= 1");
  if (opts.feedback == Feedback::kTeacher && !opts.gold_tokens)
    throw ContractError("decode: teacher feedback needs gold tokens");
  if (opts.feedback == Feedback::kSample && !opts.rng)
    throw ContractError("decode: sample feedback needs an rng");

  int batch = g.value(frame_input).rows();
  DecodeResult res;
  res.lengths.assign(batch, 0);
  NodeId h = init_hidden(g, l, frame_input);
  NodeId x = g.embed_rows(l.emb, std::vector<int>(batch, kBos));
  std::vector<char> alive(batch, 1);

  int cap = opts.max_steps;
  if (opts.fixed_steps) {
    cap = 0;
    for (int s : *opts.fixed_steps) cap = std::max(cap, s);
  }
  for (int t = 0; t < cap; ++t) {
    Tensor active({batch});
    bool any = false;
    for (int b = 0; b < batch; ++b) {
      bool on = opts.fixed_steps ? t < (*opts.fixed_steps)[b]
                                 : static_cast<bool>(alive[b]);
      active.at(b) = on ? 1.0 : 0.0;
      any = any || on;
    }
    if (!any) break;

    NodeId h_prev = h;
    NodeId dist = step(g, l, x, &h);
    // frozen rows keep their previous hidden state
    h = blend_rows(g, h, h_prev, active);
    res.dists.push_back(dist);
    const Tensor& dv = g.value(dist);

    std::vector<int> chosen(batch, kPad);
    Tensor content({batch});
    for (int b = 0; b < batch; ++b) {
      if (active.at(b) < 0.5) continue;
      chosen[b] = opts.feedback == Feedback::kSample ? sample_row(dv, b, *opts.rng)
                                                     : argmax_row(dv, b);
      bool is_content;
      if (opts.fixed_steps) {
        is_content = t < (*opts.fixed_steps)[b] - 1;
      } else {
        is_content = chosen[b] != kEos;
        if (chosen[b] == kEos) alive[b] = 0;
        if (is_content && t == cap - 1) alive[b] = 0;  // cap reached
      }
      content.at(b) = is_content ? 1.0 : 0.0;
      if (is_content) res.lengths[b] += 1;
    }
    res.emitted.push_back(chosen);
    res.step_mask.push_back(active);
    res.content_mask.push_back(content);

    // joint surrogate
    NodeId surrogate;
    if (opts.joint && *opts.joint == JointMode::kStraightThrough) {
      surrogate = g.st_onehot(dist);
    } else if (opts.joint && *opts.joint == JointMode::kDistribution) {
      surrogate = dist;
    } else {
      Tensor onehot({batch, vocab_size_});
      for (int b = 0; b < batch; ++b)
        if (chosen[b] != kPad) onehot.at(b, chosen[b]) = 1.0;
      surrogate = g.constant(std::move(onehot));
    }
    res.surrogates.push_back(surrogate);

    if (t + 1 >= cap) break;
    // next input
    switch (opts.feedback) {
      case Feedback::kTeacher: {
        std::vector<int> in_ids(batch, kPad);
        for (int b = 0; b < batch; ++b) in_ids[b] = (*opts.gold_tokens)[b][t + 1];
        x = g.embed_rows(l.emb, in_ids);
        break;
      }
      case Feedback::kGreedy:
      case Feedback::kSample:
        x = g.embed_rows(l.emb, chosen);
        break;
      case Feedback::kStOnehot:
        x = g.matmul(opts.joint && *opts.joint == JointMode::kStraightThrough
                         ? surrogate
                         : g.st_onehot(dist),
                     l.emb);
        break;
      case Feedback::kDistribution:
        x = g.matmul(dist, l.emb);
        break;
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// NluModel

NluModel::NluModel(int label_count, int vocab_size, const ModelConfig& cfg,
                   std::uint64_t seed, Param* shared_embeddings)
    : label_count_(label_count),
      vocab_size_(vocab_size),
      cfg_(cfg),
      shared_emb_(cfg.share_embeddings ? shared_embeddings : nullptr) {
  if (cfg.share_embeddings && !shared_embeddings)
    throw ConfigError("share_embeddings set but no table supplied");
  Rng rng(seed);
  if (!shared_emb_)
    store_.create("emb", {vocab_size, cfg.embed}, ParamStore::Init::kUniform, &rng);
  gru_ = std::make_unique<GruCell>(store_, "gru", cfg.embed, cfg.hidden, rng);
  store_.create("out_w", {label_count, cfg.hidden}, ParamStore::Init::kUniform, &rng);
  store_.create("out_b", {label_count}, ParamStore::Init::kZero);
}

NluModel::Leased NluModel::lease(Graph& g) const {
  Leased l;
  auto& self = const_cast<NluModel&>(*this);
  l.emb = shared_emb_ ? g.param(*shared_emb_) : g.param(self.store_.at("emb"));
  l.out_w = g.param(self.store_.at("out_w"));
  l.out_b = g.param(self.store_.at("out_b"));
  l.gru = gru_->lease(g);
  return l;
}

NodeId NluModel::forward_tokens(Graph& g, const Leased& l,
                                const std::vector<std::vector<int>>& content_tokens,
                                const std::vector<int>& lengths) const {
  int batch = static_cast<int>(content_tokens.size());
  if (batch == 0) throw ContractError("nlu forward: empty batch");
  int max_len = 0;
  for (int b = 0; b < batch; ++b) {
    if (lengths[b] < 1) throw ContractError("nlu forward: empty input sequence");
    max_len = std::max(max_len, lengths[b]);
  }
  NodeId h = g.constant(Tensor({batch, cfg_.hidden}));
  for (int t = 0; t < max_len; ++t) {
    std::vector<int> ids(batch, kPad);
    Tensor mask({batch});
    for (int b = 0; b < batch; ++b) {
      if (t < lengths[b]) {
        ids[b] = content_tokens[b][t];
        mask.at(b) = 1.0;
      }
    }
    NodeId x = g.embed_rows(l.emb, ids);
    NodeId h_new = gru_->step(g, l.gru, x, h);
    h = blend_rows(g, h_new, h, mask);
  }
  return g.sigmoid(affine(g, h, l.out_w, l.out_b));
}

NodeId NluModel::forward_coupled(Graph& g, const Leased& l,
                                 const std::vector<NodeId>& step_inputs,
                                 const std::vector<Tensor>& content_mask) const {
  if (step_inputs.empty()) throw ContractError("nlu forward: empty input sequence");
  int batch = g.value(step_inputs[0]).rows();
  NodeId h = g.constant(Tensor({batch, cfg_.hidden}));
  for (std::size_t t = 0; t < step_inputs.size(); ++t) {
    NodeId x = g.matmul(step_inputs[t], l.emb);
    NodeId h_new = gru_->step(g, l.gru, x, h);
    h = blend_rows(g, h_new, h, content_mask[t]);
  }
  return g.sigmoid(affine(g, h, l.out_w, l.out_b));
}

// ---------------------------------------------------------------------------
// RnnLm

RnnLm::RnnLm(int vocab_size, const ModelConfig& cfg, std::uint64_t seed)
    : vocab_size_(vocab_size), cfg_(cfg) {
  Rng rng(seed);
  store_.create("emb", {vocab_size, cfg.embed}, ParamStore::Init::kUniform, &rng);
  gru_ = std::make_unique<GruCell>(store_, "gru", cfg.embed, cfg.hidden, rng);
  store_.create("out_w", {vocab_size, cfg.hidden}, ParamStore::Init::kUniform, &rng);
  store_.create("out_b", {vocab_size}, ParamStore::Init::kZero);
}

std::vector<double> RnnLm::logprob_batch(
    const std::vector<std::vector<int>>& content, bool normalized) const {
  int batch = static_cast<int>(content.size());
  if (batch == 0) return {};
  int max_len = 0;
  for (const auto& c : content) {
    if (c.empty()) throw ContractError("lm_logprob: empty utterance");
    max_len = std::max(max_len, static_cast<int>(c.size()));
  }
  Graph g;
  auto& self = const_cast<RnnLm&>(*this);
  NodeId emb = g.param(self.store_.at("emb"));
  NodeId out_w = g.param(self.store_.at("out_w"));
  NodeId out_b = g.param(self.store_.at("out_b"));
  auto gru = gru_->lease(g);

  std::vector<double> sums(batch, 0.0);
  NodeId h = g.constant(Tensor({batch, cfg_.hidden}));
  std::vector<int> in_ids(batch, kBos);
  for (int t = 0; t < max_len; ++t) {
    NodeId x = g.embed_rows(emb, in_ids);
    h = gru_->step(g, gru, x, h);
    NodeId dist = g.softmax(affine(g, h, out_w, out_b));
    const Tensor& dv = g.value(dist);
    for (int b = 0; b < batch; ++b) {
      if (t < static_cast<int>(content[b].size())) {
        double p = std::max(dv.at(b, content[b][t]), Graph::kProbFloor);
        sums[b] += std::log(p);
        in_ids[b] = content[b][t];
      } else {
        in_ids[b] = kPad;
      }
    }
  }
  if (normalized)
    for (int b = 0; b < batch; ++b) sums[b] /= static_cast<double>(content[b].size());
  return sums;
}

double RnnLm::logprob(const Utterance& utt, bool normalized) const {
  if (utt.content_length() < 1) throw ContractError("lm_logprob: empty utterance");
  return logprob_batch({utt.content()}, normalized)[0];
}

NodeId RnnLm::batch_loss(Graph& g, const std::vector<std::vector<int>>& tokens,
                         const std::vector<int>& lengths) const {
  int batch = static_cast<int>(tokens.size());
  int steps = 0;
  for (int len : lengths) steps = std::max(steps, len + 1);
  auto& self = const_cast<RnnLm&>(*this);
  NodeId emb = g.param(self.store_.at("emb"));
  NodeId out_w = g.param(self.store_.at("out_w"));
  NodeId out_b = g.param(self.store_.at("out_b"));
  auto gru = gru_->lease(g);

  NodeId h = g.constant(Tensor({batch, cfg_.hidden}));
  NodeId total = g.constant(Tensor({batch, 1}));
  for (int t = 0; t < steps; ++t) {
    std::vector<int> in_ids(batch), targets(batch, kPad);
    Tensor mask({batch});
    for (int b = 0; b < batch; ++b) {
      in_ids[b] = tokens[b][t];
      if (t <= lengths[b]) {
        targets[b] = tokens[b][t + 1];
        mask.at(b) = 1.0;
      }
    }
    NodeId x = g.embed_rows(emb, in_ids);
    h = gru_->step(g, gru, x, h);
    NodeId dist = g.softmax(affine(g, h, out_w, out_b));
    total = g.add(total, g.scale_rows(g.cross_entropy(dist, targets), mask));
  }
  // per-token mean, then batch mean
  Tensor inv_len({batch});
  for (int b = 0; b < batch; ++b) inv_len.at(b) = 1.0 / (lengths[b] + 1.0);
  return g.mean(g.scale_rows(total, inv_len));
}

// ---------------------------------------------------------------------------
// MADE

MadeMaskSet made_mask_set(const std::vector<int>& input_degree, int hidden,
                          Rng& rng) {
  int d = static_cast<int>(input_degree.size());
  MadeMaskSet m;
  m.input_degree = input_degree;
  int max_hidden_degree = std::max(1, d - 1);
  m.hidden_degree.resize(hidden);
  for (int k = 0; k < hidden; ++k)
    m.hidden_degree[k] = 1 + rng.uniform_int(max_hidden_degree);
  m.hidden_mask = Tensor({hidden, d});
  for (int k = 0; k < hidden; ++k)
    for (int i = 0; i < d; ++i)
      m.hidden_mask.at(k, i) = m.hidden_degree[k] >= input_degree[i] ? 1.0 : 0.0;
  m.output_mask = Tensor({d, hidden});
  for (int i = 0; i < d; ++i)
    for (int k = 0; k < hidden; ++k)
      m.output_mask.at(i, k) = input_degree[i] > m.hidden_degree[k] ? 1.0 : 0.0;
  return m;
}

std::vector<MadeMaskSet> made_build_masks(int label_count, int hidden,
                                          int n_orderings, std::uint64_t seed) {
  if (n_orderings < 1) throw ContractError("made: need at least one ordering");
  Rng rng(seed);
  std::vector<MadeMaskSet> sets;
  for (int o = 0; o < n_orderings; ++o) {
    std::vector<int> perm(label_count);
    for (int i = 0; i < label_count; ++i) perm[i] = i;
    rng.shuffle(perm);
    std::vector<int> degree(label_count);
    for (int pos = 0; pos < label_count; ++pos) degree[perm[pos]] = pos + 1;
    sets.push_back(made_mask_set(degree, hidden, rng));
  }
  return sets;
}

MadeEstimator::MadeEstimator(int label_count, int hidden, int n_orderings,
                             std::uint64_t seed)
    : label_count_(label_count), hidden_(hidden) {
  Rng rng(seed);
  store_.create("w1", {hidden, label_count}, ParamStore::Init::kUniform, &rng);
  store_.create("b1", {hidden}, ParamStore::Init::kZero);
  store_.create("w2", {label_count, hidden}, ParamStore::Init::kUniform, &rng);
  store_.create("b2", {label_count}, ParamStore::Init::kZero);
  masks_ = made_build_masks(label_count, hidden, n_orderings, rng.next());
}

MadeEstimator::Leased MadeEstimator::lease(Graph& g) const {
  auto& self = const_cast<MadeEstimator&>(*this);
  return Leased{g.param(self.store_.at("w1")), g.param(self.store_.at("b1")),
                g.param(self.store_.at("w2")), g.param(self.store_.at("b2"))};
}

NodeId MadeEstimator::forward(Graph& g, const Leased& l, NodeId x,
                              int ordering) const {
  const Tensor& xv = g.value(x);
  if (xv.cols() != label_count_)
    throw ShapeError("made forward: frame length " + std::to_string(xv.cols()) +
                     " != " + std::to_string(label_count_));
  const MadeMaskSet& m = masks_[ordering % masks_.size()];
  NodeId w1 = g.mul(l.w1, g.constant(m.hidden_mask));
  NodeId w2 = g.mul(l.w2, g.constant(m.output_mask));
  NodeId h = g.tanh(g.add_rowvec(g.matmul(x, w1, true), l.b1));
  return g.sigmoid(g.add_rowvec(g.matmul(h, w2, true), l.b2));
}

double MadeEstimator::logprob(const Tensor& frame_bits) const {
  Tensor row({1, label_count_});
  if (frame_bits.size() != label_count_)
    throw ShapeError("made logprob: frame length mismatch");
  for (int i = 0; i < label_count_; ++i) row.at(0, i) = frame_bits.at(i);
  return logprob_batch(row)[0];
}

std::vector<double> MadeEstimator::logprob_batch(const Tensor& frames) const {
  if (frames.cols() != label_count_)
    throw ShapeError("made logprob: frame length mismatch");
  int batch = frames.rows();
  std::vector<double> acc(batch, 0.0);
  Graph g;
  Leased l = lease(g);
  NodeId x = g.constant(frames);
  for (int o = 0; o < n_orderings(); ++o) {
    NodeId probs = forward(g, l, x, o);
    NodeId ll = g.bernoulli_loglik(probs, frames);
    const Tensor& v = g.value(ll);
    for (int b = 0; b < batch; ++b) acc[b] += v.at(b, 0);
  }
  for (double& a : acc) a /= n_orderings();
  return acc;
}

// ---------------------------------------------------------------------------
// Pretraining

PretrainResult pretrain_lm(RnnLm& lm, const std::vector<DataPair>& corpus,
                           int epochs, int batch_size, double learning_rate,
                           Rng& rng) {
  if (corpus.empty()) throw EmptyDatasetError("pretrain_lm: empty corpus");
  PretrainResult res;
  for (int e = 0; e < epochs; ++e) {
    auto batches = batch_iter(corpus, batch_size, 1, rng);
    double nll = 0.0;
    long count = 0;
    for (const Batch& b : batches) {
      Graph g;
      NodeId loss = lm.batch_loss(g, b.tokens, b.lengths);
      double v = g.value(loss).item();
      if (!std::isfinite(v)) throw TrainAbort("pretrain_lm: non-finite loss");
      g.backward(loss);
      lm.store().clip_grad_norm(5.0);
      lm.store().adam_step(learning_rate);
      nll += v * static_cast<double>(b.indices.size());
      count += static_cast<long>(b.indices.size());
    }
    res.epoch_nll.push_back(nll / count);
  }
  return res;
}

PretrainResult pretrain_made(MadeEstimator& made,
                             const std::vector<SemanticFrame>& frames,
                             int epochs, int batch_size, double learning_rate,
                             Rng& rng) {
  if (frames.empty()) throw EmptyDatasetError("pretrain_made: empty corpus");
  int d = made.label_count();
  PretrainResult res;
  long step = 0;
  for (int e = 0; e < epochs; ++e) {
    std::vector<int> order(frames.size());
    for (std::size_t i = 0; i < frames.size(); ++i) order[i] = static_cast<int>(i);
    rng.shuffle(order);
    double nll = 0.0;
    long count = 0;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      std::size_t end = std::min(order.size(), start + batch_size);
      int n = static_cast<int>(end - start);
      Tensor batch({n, d});
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j)
          batch.at(i, j) = frames[order[start + i]].labels[j];
      Graph g;
      auto l = made.lease(g);
      NodeId x = g.constant(batch);
      // cycle mask sets across steps; every set trains the shared weights
      NodeId probs = made.forward(g, l, x, static_cast<int>(step % made.n_orderings()));
      NodeId loss = g.scale(g.mean(g.bernoulli_loglik(probs, batch)), -1.0);
      double v = g.value(loss).item();
      if (!std::isfinite(v)) throw TrainAbort("pretrain_made: non-finite loss");
      g.backward(loss);
      made.store().clip_grad_norm(5.0);
      made.store().adam_step(learning_rate);
      nll += v * n;
      count += n;
      ++step;
    }
    res.epoch_nll.push_back(nll / count);
  }
  return res;
}

}  // namespace dualcycle
