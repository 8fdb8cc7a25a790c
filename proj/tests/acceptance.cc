// Acceptance suite: one binary, one pass/fail line per criterion.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "dualcycle/data_synth.h"
#include "dualcycle/experiment.h"
#include "dualcycle/metrics.h"
#include "dualcycle/objectives.h"
#include "dualcycle/trainer.h"
#include "test_util.h"

using namespace dualcycle;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double now_seconds() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

Dataset small_dataset(int mrs, std::uint64_t seed, int test_mrs = 8,
                      int refs_max = 1) {
  SynthConfig sc;
  sc.train_mrs = mrs;
  sc.train_refs_min = 1;
  sc.train_refs_max = refs_max;
  sc.test_mrs = test_mrs;
  sc.seed = seed;
  SynthCorpus corpus = synth_e2e_corpus(sc);
  DataConfig dc;
  dc.vocab_min_freq = 1;
  return build_dataset(corpus.train, corpus.test, dc);
}

// The frozen subset protocol shared by criteria 3 and 4.
ExperimentConfig protocol_config(const std::string& scheme,
                                 const std::string& out_dir) {
  ExperimentConfig cfg;
  cfg.synthetic = true;
  cfg.synth.seed = 20240901;
  cfg.synth.train_mrs = 700;
  cfg.synth.test_mrs = 200;
  cfg.subset = 1000;
  cfg.data.max_len = 60;
  cfg.data.vocab_min_freq = 2;
  cfg.model.hidden = 128;
  cfg.model.embed = 64;
  cfg.scheme = scheme;
  cfg.train.scheme = SchemeSpec::preset(scheme_from_string(scheme));
  cfg.train.epochs = 10;
  cfg.train.batch_size = 4;
  cfg.train.lr_nlg = 5e-3;
  cfg.train.lr_nlu = 5e-3;
  cfg.seeds = {13, 42, 1337};
  cfg.out_dir = out_dir;
  return cfg;
}

// ---------------------------------------------------------------------------
// 1. gradient correctness on randomized small models

Outcome criterion1() {
  const int d = 6, v = 16, h = 6, e = 4;
  ModelConfig mc;
  mc.hidden = h;
  mc.embed = e;
  mc.max_len = 8;
  double worst = 0.0;
  std::string worst_at;

  // operation soup: every differentiable op in one loss
  {
    Rng rng(401);
    ParamStore store;
    store.create("a", {3, 5}, ParamStore::Init::kUniform, &rng, -0.8, 0.8);
    store.create("b", {3, 5}, ParamStore::Init::kUniform, &rng, -0.8, 0.8);
    store.create("w", {5, 5}, ParamStore::Init::kUniform, &rng, -0.8, 0.8);
    store.create("v", {5}, ParamStore::Init::kUniform, &rng, -0.8, 0.8);
    store.create("emb", {7, 5}, ParamStore::Init::kUniform, &rng, -0.8, 0.8);
    Tensor mask({3}, {1, 0, 1});
    Tensor bits({3, 5}, {1, 0, 0, 1, 1, 1, 0, 0, 0, 1, 0, 1, 1, 0, 0});
    std::vector<int> ids = {2, 0, 6};
    std::vector<int> targets = {1, 4, 0};
    auto build = [&](Graph& g) {
      NodeId a = g.param(store.at("a"));
      NodeId b = g.param(store.at("b"));
      NodeId w = g.param(store.at("w"));
      NodeId vv = g.param(store.at("v"));
      NodeId emb = g.param(store.at("emb"));
      NodeId t1 = g.mul(g.tanh(a), g.sigmoid(b));
      NodeId t2 = g.add_rowvec(g.matmul(t1, w), vv);
      NodeId t3 = g.sub(t2, g.one_minus(g.scale(a, 0.5)));
      NodeId t4 = g.add(g.scale_rows(t3, mask), g.embed_rows(emb, ids));
      NodeId sm = g.softmax(t4);
      NodeId l1 = g.mean(g.cross_entropy(sm, targets));
      NodeId probs = g.sigmoid(g.matmul(t4, w, true));
      NodeId l2 = g.mean(g.binary_cross_entropy(probs, bits));
      NodeId l3 = g.mean(g.bernoulli_loglik(probs, bits));
      return g.add(g.sub(l1, g.scale(l3, 0.1)), l2);
    };
    auto fwd = [&]() {
      Graph g;
      return g.value(build(g)).item();
    };
    auto res = dctest::check_gradients({&store}, fwd, build);
    if (res.max_rel_err > worst) {
      worst = res.max_rel_err;
      worst_at = "op-soup " + res.worst;
    }
  }

  // f, g and g.f composites under distribution coupling
  Dataset ds = small_dataset(6, 402);
  (void)ds;
  for (std::uint64_t seed : {11ULL, 12ULL}) {
    NlgModel nlg(d, v, mc, seed);
    NluModel nlu(d, v, mc, seed + 50);
    Rng rng(seed + 100);
    Tensor frames({2, d});
    for (std::int64_t i = 0; i < frames.size(); ++i)
      frames.at(i) = rng.bernoulli(0.4) ? 1.0 : 0.0;
    std::vector<std::vector<int>> tokens = {
        {Vocabulary::kBos, 5, 7, 9, Vocabulary::kEos, 0},
        {Vocabulary::kBos, 8, 6, Vocabulary::kEos, 0, 0}};
    std::vector<int> lengths = {3, 2};
    std::vector<int> fixed = {4, 3};

    // f alone: teacher-forced likelihood
    auto build_f = [&](Graph& g) {
      auto l = nlg.lease(g);
      auto dists = nlg.teacher_forced(g, l, g.constant(frames), tokens, 4);
      return supervised_loss_nlg(g, dists, tokens, lengths);
    };
    auto fwd_f = [&]() {
      Graph g;
      return g.value(build_f(g)).item();
    };
    auto res_f = dctest::check_gradients({&nlg.store()}, fwd_f, build_f);
    if (res_f.max_rel_err > worst) {
      worst = res_f.max_rel_err;
      worst_at = "f " + res_f.worst;
    }

    // g alone: token classification
    auto build_g = [&](Graph& g) {
      auto l = nlu.lease(g);
      std::vector<std::vector<int>> content = {{5, 7, 9}, {8, 6, 0}};
      NodeId probs = nlu.forward_tokens(g, l, content, lengths);
      return supervised_loss_nlu(g, probs, frames);
    };
    auto fwd_g = [&]() {
      Graph g;
      return g.value(build_g(g)).item();
    };
    auto res_g = dctest::check_gradients({&nlu.store()}, fwd_g, build_g);
    if (res_g.max_rel_err > worst) {
      worst = res_g.max_rel_err;
      worst_at = "g " + res_g.worst;
    }

    // g(f(x)) composite under distribution coupling
    auto build_gf = [&](Graph& g) {
      auto lf = nlg.lease(g);
      auto lg = nlu.lease(g);
      DecodeOptions opts;
      opts.joint = JointMode::kDistribution;
      opts.feedback = Feedback::kDistribution;
      opts.fixed_steps = &fixed;
      opts.max_steps = 4;
      DecodeResult dec = nlg.decode(g, lf, g.constant(frames), opts);
      NodeId probs = nlu.forward_coupled(g, lg, dec.surrogates, dec.content_mask);
      NodeId l2 = supervised_loss_nlu(g, probs, frames);
      NodeId l1 = supervised_loss_nlg(g, dec.dists, tokens, lengths);
      return g.add(l1, l2);
    };
    auto fwd_gf = [&]() {
      Graph g;
      return g.value(build_gf(g)).item();
    };
    auto res_gf =
        dctest::check_gradients({&nlg.store(), &nlu.store()}, fwd_gf, build_gf);
    if (res_gf.max_rel_err > worst) {
      worst = res_gf.max_rel_err;
      worst_at = "g.f " + res_gf.worst;
    }
  }
  return {worst <= 1e-4,
          "max relative error " + fmt(worst, 8) + (worst_at.empty() ? "" : " at " + worst_at)};
}

// ---------------------------------------------------------------------------
// 2. overfit oracle on 8 pairs

Outcome criterion2() {
  Dataset full = small_dataset(24, 501);
  Dataset ds = full;
  ds.train.assign(full.train.begin(), full.train.begin() + 8);
  ModelConfig mc;
  mc.hidden = 128;
  mc.embed = 32;
  mc.max_len = 45;
  NlgModel nlg(ds.space.size(), ds.vocab.size(), mc, 502);
  NluModel nlu(ds.space.size(), ds.vocab.size(), mc, 503);
  TrainConfig tc;
  tc.scheme = SchemeSpec::preset(SchemeId::kA);
  tc.seed = 504;
  tc.lr_nlg = 5e-3;
  tc.lr_nlu = 1e-2;
  DualTrainer trainer(nlg, nlu, ds, tc);
  std::vector<int> all = {0, 1, 2, 3, 4, 5, 6, 7};
  Batch batch = make_batch(ds.train, all, ds.space.size());
  for (int step = 0; step < 500; ++step) {
    trainer.primal_cycle_step(batch);
    trainer.dual_cycle_step(batch);
  }
  // training-set micro F1
  std::vector<std::set<int>> preds, golds;
  {
    Graph g;
    auto l = nlu.lease(g);
    std::vector<std::vector<int>> rows(8);
    std::vector<int> lens(8);
    int ml = 1;
    for (int b = 0; b < 8; ++b) {
      rows[b] = ds.train[b].utterance.content();
      lens[b] = static_cast<int>(rows[b].size());
      ml = std::max(ml, lens[b]);
    }
    for (auto& r : rows) r.resize(ml, Vocabulary::kPad);
    NodeId probs = nlu.forward_tokens(g, l, rows, lens);
    for (int b = 0; b < 8; ++b) {
      std::set<int> p;
      for (int c = 0; c < ds.space.size(); ++c)
        if (g.value(probs).at(b, c) >= 0.5) p.insert(c);
      preds.push_back(p);
      golds.push_back(ds.train[b].frame.active());
    }
  }
  double f1 = micro_f1(preds, golds);
  int exact = 0;
  {
    Graph g;
    auto l = nlg.lease(g);
    DecodeOptions opts;
    opts.max_steps = mc.max_len;
    DecodeResult dec = nlg.decode(g, l, g.constant(batch.frames), opts);
    for (int b = 0; b < 8; ++b)
      if (dec.content_ids(b) == ds.train[b].utterance.content()) ++exact;
  }
  bool pass = f1 >= 0.95 && exact >= 7;
  return {pass, "micro-F1 " + fmt(f1) + " (need >= 0.95), exact decode " +
                    std::to_string(exact) + "/8 (need >= 7)"};
}

// ---------------------------------------------------------------------------
// 3 and 4. directional replication on the fixed subset protocol

EvalReport mean_of(const std::vector<SeedSummary>& seeds) {
  return summary_mean(seeds);
}

Outcome criterion3(EvalReport* mean_a_out, EvalReport* mean_f_out) {
  auto cfg_a = protocol_config("a", "acceptance_out/c3");
  auto cfg_f = protocol_config("f", "acceptance_out/c3");
  auto sums_a = run_experiment(cfg_a);
  auto sums_f = run_experiment(cfg_f);
  EvalReport ma = mean_of(sums_a), mf = mean_of(sums_f);
  if (mean_a_out) *mean_a_out = ma;
  if (mean_f_out) *mean_f_out = mf;
  double gap = (mf.micro_f1 - ma.micro_f1) * 100.0;
  return {gap >= 2.0, "mean micro-F1: scheme (a) " + fmt(ma.micro_f1 * 100, 2) +
                          ", scheme (f) " + fmt(mf.micro_f1 * 100, 2) +
                          ", gap " + fmt(gap, 2) + " points (need >= 2.00)"};
}

Outcome criterion4(const EvalReport& mean_f) {
  auto cfg_j = protocol_config("j", "acceptance_out/c4");
  auto sums_j = run_experiment(cfg_j);
  EvalReport mj = mean_of(sums_j);
  double bleu_drop = (mean_f.bleu - mj.bleu) * 100.0;
  double f1_drop = (mean_f.micro_f1 - mj.micro_f1) * 100.0;
  bool pass = bleu_drop <= 0.5 && f1_drop <= 1.0;
  return {pass, "BLEU: (f) " + fmt(mean_f.bleu * 100, 2) + " vs (j) " +
                    fmt(mj.bleu * 100, 2) + " (drop " + fmt(bleu_drop, 2) +
                    ", allowed <= 0.50); micro-F1: (f) " +
                    fmt(mean_f.micro_f1 * 100, 2) + " vs (j) " +
                    fmt(mj.micro_f1 * 100, 2) + " (drop " + fmt(f1_drop, 2) +
                    ", allowed <= 1.00)"};
}

// ---------------------------------------------------------------------------
// 5. metric oracles on 200 randomized cases each

namespace oracle {

std::map<std::vector<int>, int> grams(const TokenSeq& s, int n) {
  std::map<std::vector<int>, int> m;
  for (int i = 0; i + n <= (int)s.size(); ++i)
    m[std::vector<int>(s.begin() + i, s.begin() + i + n)]++;
  return m;
}

double bleu(const std::vector<TokenSeq>& hyps,
            const std::vector<std::vector<TokenSeq>>& refsets) {
  long hyp_len = 0, ref_len = 0;
  std::vector<long> num(4, 0), den(4, 0);
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    hyp_len += (long)hyps[i].size();
    long best = (long)refsets[i][0].size();
    for (const auto& r : refsets[i]) {
      long dr = std::labs((long)r.size() - (long)hyps[i].size());
      long db = std::labs(best - (long)hyps[i].size());
      if (dr < db || (dr == db && (long)r.size() < best)) best = (long)r.size();
    }
    ref_len += best;
    for (int n = 1; n <= 4; ++n) {
      auto h = grams(hyps[i], n);
      for (const auto& [g, c] : h) {
        den[n - 1] += c;
        int mx = 0;
        for (const auto& r : refsets[i]) {
          auto rg = grams(r, n);
          auto it = rg.find(g);
          if (it != rg.end()) mx = std::max(mx, it->second);
        }
        num[n - 1] += std::min(c, mx);
      }
    }
  }
  double lp = 0;
  for (int n = 0; n < 4; ++n) {
    if (num[n] == 0 || den[n] == 0) return 0.0;
    lp += std::log((double)num[n] / den[n]);
  }
  double bp = (hyp_len >= ref_len || hyp_len == 0)
                  ? 1.0
                  : std::exp(1.0 - (double)ref_len / hyp_len);
  return bp * std::exp(lp / 4.0);
}

int lcs(const TokenSeq& a, const TokenSeq& b) {
  std::map<std::pair<int, int>, int> memo;
  std::function<int(int, int)> rec = [&](int i, int j) -> int {
    if (i == 0 || j == 0) return 0;
    auto key = std::make_pair(i, j);
    auto it = memo.find(key);
    if (it != memo.end()) return it->second;
    int r = a[i - 1] == b[j - 1] ? rec(i - 1, j - 1) + 1
                                 : std::max(rec(i - 1, j), rec(i, j - 1));
    memo[key] = r;
    return r;
  };
  return rec((int)a.size(), (int)b.size());
}

}  // namespace oracle

Outcome criterion5() {
  Rng rng(601);
  auto rand_seq = [&](int vmax, int lo, int hi) {
    TokenSeq s(lo + rng.uniform_int(hi - lo + 1));
    for (int& t : s) t = rng.uniform_int(vmax);
    return s;
  };
  int checked = 0;
  // bleu
  for (int t = 0; t < 200; ++t) {
    int n = 1 + rng.uniform_int(4);
    std::vector<TokenSeq> hyps;
    std::vector<std::vector<TokenSeq>> refs;
    for (int i = 0; i < n; ++i) {
      hyps.push_back(rand_seq(6, 1, 10));
      std::vector<TokenSeq> rs;
      int nr = 1 + rng.uniform_int(3);
      for (int r = 0; r < nr; ++r) rs.push_back(rand_seq(6, 1, 10));
      refs.push_back(rs);
    }
    if (std::fabs(bleu(hyps, refs) - oracle::bleu(hyps, refs)) > 1e-9)
      return {false, "bleu mismatch at case " + std::to_string(t)};
    ++checked;
  }
  // rouge-n and rouge-l
  for (int t = 0; t < 200; ++t) {
    TokenSeq h = rand_seq(5, 1, 12);
    TokenSeq r = rand_seq(5, 1, 12);
    for (int n = 1; n <= 2; ++n) {
      auto hg = oracle::grams(h, n);
      auto rg = oracle::grams(r, n);
      long overlap = 0, ht = 0, rt = 0;
      for (auto& [g, c] : hg) {
        ht += c;
        auto it = rg.find(g);
        if (it != rg.end()) overlap += std::min(c, it->second);
      }
      for (auto& [g, c] : rg) rt += c;
      double expect = 0;
      if (overlap > 0) {
        double p = (double)overlap / ht, rec = (double)overlap / rt;
        expect = 2 * p * rec / (p + rec);
      }
      if (std::fabs(rouge_n(h, {r}, n) - expect) > 1e-9)
        return {false, "rouge_n mismatch at case " + std::to_string(t)};
    }
    int l = oracle::lcs(h, r);
    double expect = 0;
    if (l > 0) {
      double p = (double)l / h.size(), rec = (double)l / r.size();
      expect = 2 * p * rec / (p + rec);
    }
    if (std::fabs(rouge_l(h, {r}) - expect) > 1e-9)
      return {false, "rouge_l mismatch at case " + std::to_string(t)};
    ++checked;
  }
  // micro f1 with exhaustive confusion counts
  for (int t = 0; t < 200; ++t) {
    int samples = 1 + rng.uniform_int(6);
    std::vector<std::set<int>> pred(samples), gold(samples);
    long tp = 0, fp = 0, fn = 0;
    for (int i = 0; i < samples; ++i) {
      for (int l = 0; l < 5; ++l) {
        bool p = rng.bernoulli(0.4), g = rng.bernoulli(0.4);
        if (p) pred[i].insert(l);
        if (g) gold[i].insert(l);
        if (p && g) ++tp;
        else if (p) ++fp;
        else if (g) ++fn;
      }
    }
    double expect = 0;
    if (tp > 0) {
      double p = (double)tp / (tp + fp), r = (double)tp / (tp + fn);
      expect = 2 * p * r / (p + r);
    }
    if (std::fabs(micro_f1(pred, gold) - expect) > 1e-9)
      return {false, "micro_f1 mismatch at case " + std::to_string(t)};
    ++checked;
  }
  return {true, std::to_string(checked) + " randomized cases matched (600 total)"};
}

// ---------------------------------------------------------------------------
// 6. REINFORCE unbiasedness

Outcome criterion6() {
  const int n = 100000;
  auto run = [&](bool with_baseline, std::uint64_t seed) {
    Rng rng(seed);
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
      ParamStore store;
      Param& p = store.create("theta", {1}, ParamStore::Init::kZero);
      Graph g;
      NodeId probs = g.sigmoid(g.param(p));
      double a = rng.bernoulli(0.5) ? 1.0 : 0.0;
      NodeId lp = sampled_label_logprob(g, probs, Tensor({1, 1}, {a}));
      double baseline = with_baseline ? 0.5 : 0.0;
      std::vector<RewardSignal> rs = {{a, a - baseline, RewardFamily::kAutoMetric}};
      g.backward(reinforce_term(g, lp, rs, 1.0));
      double est = -p.grad.at(0);
      sum += est;
      sumsq += est * est;
    }
    double mean = sum / n;
    double var = std::max(0.0, sumsq / n - mean * mean);
    return std::make_pair(mean, std::sqrt(var / n));
  };
  auto [m0, se0] = run(false, 314159);
  auto [m1, se1] = run(true, 271828);
  bool pass = std::fabs(m0 - 0.25) <= 2 * se0 + 1e-12 &&
              std::fabs(m1 - 0.25) <= 2 * se1 + 1e-12 && m0 >= 0.24 && m0 <= 0.26;
  return {pass, "no-baseline mean " + fmt(m0, 5) + " (se " + fmt(se0, 5) +
                    "), converged-baseline mean " + fmt(m1, 5) + " (se " +
                    fmt(se1, 5) + "), analytic 0.25"};
}

// ---------------------------------------------------------------------------
// 7. MADE autoregressive property at D = 10

Outcome criterion7() {
  const int d = 10;
  MadeEstimator made(d, 32, 5, 701);
  // zero-head closed form
  MadeEstimator zeroed(d, 32, 5, 701);
  zeroed.store().at("w2").value.fill(0.0);
  zeroed.store().at("b2").value.fill(0.0);
  Tensor frame({d});
  Rng rng(702);
  for (int i = 0; i < d; ++i) frame.at(i) = rng.bernoulli(0.5) ? 1.0 : 0.0;
  double ll = zeroed.logprob(frame);
  if (std::fabs(ll + d * std::log(2.0)) > 1e-9)
    return {false, "zero-head log-likelihood " + fmt(ll, 12) + " != -D log 2"};

  // exhaustive perturbation over every (input, output, mask set) triple
  int checked = 0;
  for (int o = 0; o < made.n_orderings(); ++o) {
    const MadeMaskSet& m = made.mask_set(o);
    for (int in = 0; in < d; ++in) {
      Tensor base_row({1, d}), flip_row({1, d});
      for (int i = 0; i < d; ++i) {
        base_row.at(0, i) = frame.at(i);
        flip_row.at(0, i) = i == in ? 1.0 - frame.at(i) : frame.at(i);
      }
      Graph g;
      auto l = made.lease(g);
      const Tensor& a = g.value(made.forward(g, l, g.constant(base_row), o));
      const Tensor& b = g.value(made.forward(g, l, g.constant(flip_row), o));
      for (int out = 0; out < d; ++out) {
        if (m.input_degree[in] >= m.input_degree[out]) {
          // `in` lies outside this output's conditioning set
          if (std::fabs(a.at(0, out) - b.at(0, out)) > 1e-12)
            return {false, "conditional for unit " + std::to_string(out) +
                               " moved when flipping excluded input " +
                               std::to_string(in)};
          ++checked;
        }
      }
    }
  }
  return {true, std::to_string(checked) +
                    " excluded (input,output) pairs invariant across 5 mask sets; "
                    "zero-head log-likelihood = -D log 2"};
}

// ---------------------------------------------------------------------------
// 8. update routing on a fixed probe batch

Outcome criterion8() {
  Dataset ds = small_dataset(12, 801);
  ModelConfig mc;
  mc.hidden = 24;
  mc.embed = 12;
  mc.max_len = 40;
  NlgModel nlg(ds.space.size(), ds.vocab.size(), mc, 802);
  NluModel nlu(ds.space.size(), ds.vocab.size(), mc, 803);
  TrainConfig tc;
  tc.scheme = SchemeSpec::preset(SchemeId::kF);
  tc.seed = 804;
  Batch batch = make_batch(ds.train, {0, 1, 2, 3, 4, 5}, ds.space.size());

  DualTrainer trainer(nlg, nlu, ds, tc);
  GradProbe full = trainer.probe_primal(batch, false);
  GradProbe det = trainer.probe_primal(batch, true);
  // detaching the cross term: the understander keeps its exact gradient
  if (full.nlu_grad_hash != det.nlu_grad_hash)
    return {false, "primal: frame-side gradient changed under detachment"};
  if (full.nlg_grad_hash == det.nlg_grad_hash)
    return {false, "primal: sentence-side gradient kept its cross term"};

  // the detached gradient equals the mid-loss-only gradient, bit for bit
  TrainConfig no_l2 = tc;
  no_l2.scheme.l2_supervised = false;
  DualTrainer t2(nlg, nlu, ds, no_l2);
  GradProbe only_l1 = t2.probe_primal(batch, false);
  if (only_l1.nlg_grad_hash != det.nlg_grad_hash)
    return {false, "primal: detached gradient != pure mid-loss gradient"};
  if (only_l1.nlu_grad_norm != 0.0)
    return {false, "primal: mid loss leaked into the frame-side parameters"};

  GradProbe dual_full = trainer.probe_dual(batch, false);
  GradProbe dual_det = trainer.probe_dual(batch, true);
  if (dual_full.nlg_grad_hash != dual_det.nlg_grad_hash)
    return {false, "dual: sentence-side gradient changed under detachment"};
  if (dual_full.nlu_grad_hash == dual_det.nlu_grad_hash)
    return {false, "dual: frame-side gradient kept its cross term"};
  return {true,
          "cross-term detachment zeroes exactly the first model's extra "
          "gradient in both cycles (hash-verified)"};
}

// ---------------------------------------------------------------------------
// 9. unsupervised cycles on unpaired data

Outcome criterion9() {
  Dataset ds = small_dataset(64, 901);
  // 32 unpaired frames and 32 unpaired sentences, disjoint rows
  ModelConfig mc;
  mc.hidden = 32;
  mc.embed = 16;
  mc.max_len = 40;
  NlgModel nlg(ds.space.size(), ds.vocab.size(), mc, 902);
  NluModel nlu(ds.space.size(), ds.vocab.size(), mc, 903);
  TrainConfig tc;
  tc.scheme = SchemeSpec::preset(SchemeId::kF);
  tc.seed = 904;
  tc.lr_nlg = 5e-3;
  tc.lr_nlu = 5e-3;
  tc.unsup_max_steps = 8;
  DualTrainer trainer(nlg, nlu, ds, tc);

  std::vector<int> frame_rows, text_rows;
  for (int i = 0; i < 32; ++i) frame_rows.push_back(i);
  for (int i = 32; i < 64; ++i) text_rows.push_back(i);
  Batch frames = make_batch(ds.train, frame_rows, ds.space.size());
  Batch texts = make_batch(ds.train, text_rows, ds.space.size());

  double primal0 = trainer.unsupervised_primal_step(frames, false, false).l2;
  double dual0 = trainer.unsupervised_dual_step(texts, false).l1;
  nlg.store().zero_grads();
  nlu.store().zero_grads();

  double best_primal = primal0, best_dual = dual0;
  int steps_used = 0;
  for (int step = 0; step < 2000; ++step) {
    double p = trainer.unsupervised_primal_step(frames, true, false).l2;
    double du = trainer.unsupervised_dual_step(texts, true).l1;
    best_primal = std::min(best_primal, p);
    best_dual = std::min(best_dual, du);
    steps_used = step + 1;
    if (best_primal <= 0.5 * primal0 && best_dual <= 0.5 * dual0) break;
  }
  bool halved = best_primal <= 0.5 * primal0 && best_dual <= 0.5 * dual0;

  // instability aborts loudly
  bool aborted = false;
  nlg.store().at("out_b").value.at(0) = std::numeric_limits<double>::infinity();
  try {
    trainer.unsupervised_primal_step(frames, true, false);
  } catch (const TrainAbort&) {
    aborted = true;
  }
  bool pass = halved && aborted;
  return {pass, "primal reconstruction " + fmt(primal0) + " -> " + fmt(best_primal) +
                    ", dual " + fmt(dual0) + " -> " + fmt(best_dual) + " in " +
                    std::to_string(steps_used) + " steps (need both halved); " +
                    (aborted ? "non-finite loss aborted loudly"
                             : "NO abort on non-finite loss")};
}

// ---------------------------------------------------------------------------
// 10. end-to-end determinism

Outcome criterion10() {
  auto make_cfg = [](const std::string& dir) {
    ExperimentConfig cfg;
    cfg.synthetic = true;
    cfg.synth.seed = 424243;
    cfg.synth.train_mrs = 100;
    cfg.synth.test_mrs = 12;
    cfg.subset = 90;
    cfg.data.vocab_min_freq = 1;
    cfg.model.hidden = 16;
    cfg.model.embed = 8;
    cfg.scheme = "c";
    cfg.train.scheme = SchemeSpec::preset(SchemeId::kC);
    cfg.train.epochs = 2;
    cfg.train.batch_size = 16;
    cfg.seeds = {5};
    cfg.out_dir = dir;
    return cfg;
  };
  fs::remove_all("acceptance_out/c10_run1");
  fs::remove_all("acceptance_out/c10_run2");
  run_experiment(make_cfg("acceptance_out/c10_run1"));
  run_experiment(make_cfg("acceptance_out/c10_run2"));
  auto slurp = [](const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
  };
  std::string t1 = slurp("acceptance_out/c10_run1/c/summary.txt");
  std::string t2 = slurp("acceptance_out/c10_run2/c/summary.txt");
  std::string j1 = slurp("acceptance_out/c10_run1/c/summary.json");
  std::string j2 = slurp("acceptance_out/c10_run2/c/summary.json");
  bool pass = !t1.empty() && t1 == t2 && !j1.empty() && j1 == j2;
  return {pass, pass ? "summary.txt and summary.json byte-identical across two runs"
                     : "summaries differ between identical runs"};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  auto want = [&](int k) { return only.empty() || only.count(k); };

  int failures = 0;
  EvalReport mean_a, mean_f;
  bool have_f = false;
  auto report = [&](int k, const char* name, const Outcome& o, double secs) {
    std::printf("[%s] criterion %d (%s): %s [%.1fs]\n", o.pass ? "PASS" : "FAIL",
                k, name, o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failures;
  };
  auto timed = [&](int k, const char* name, const std::function<Outcome()>& fn) {
    if (!want(k)) return;
    double t0 = now_seconds();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    report(k, name, o, now_seconds() - t0);
  };

  timed(1, "gradient correctness", criterion1);
  timed(2, "overfit oracle", criterion2);
  timed(3, "directional (a) vs (f)", [&]() {
    Outcome o = criterion3(&mean_a, &mean_f);
    have_f = true;
    return o;
  });
  timed(4, "directional (f) vs (j)", [&]() {
    if (!have_f) {
      auto cfg_f = protocol_config("f", "acceptance_out/c4_f");
      mean_f = mean_of(run_experiment(cfg_f));
    }
    return criterion4(mean_f);
  });
  timed(5, "metric oracles", criterion5);
  timed(6, "reinforce unbiasedness", criterion6);
  timed(7, "made autoregressive property", criterion7);
  timed(8, "update routing", criterion8);
  timed(9, "unsupervised cycles", criterion9);
  timed(10, "end-to-end determinism", criterion10);

  if (failures == 0) {
    std::printf("all acceptance criteria passed\n");
    return 0;
  }
  std::printf("%d criterion(s) failed\n", failures);
  return 1;
}
