#include "dualcycle/metrics.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>

#include "dualcycle/errors.h"

namespace dualcycle {

namespace {

using NgramCounts = std::map<std::vector<int>, int>;

NgramCounts count_ngrams(const TokenSeq& seq, int n) {
  NgramCounts counts;
  if (static_cast<int>(seq.size()) < n) return counts;
  for (std::size_t i = 0; i + n <= seq.size(); ++i)
    counts[std::vector<int>(seq.begin() + i, seq.begin() + i + n)] += 1;
  return counts;
}

// Clipped matches: per-gram min(hyp count, max over references).
long clipped_matches(const TokenSeq& hyp, const std::vector<TokenSeq>& refs,
                     int n, long* hyp_total) {
  NgramCounts hc = count_ngrams(hyp, n);
  long total = 0;
  for (const auto& [gram, c] : hc) total += c;
  if (hyp_total) *hyp_total = total;
  NgramCounts max_ref;
  for (const TokenSeq& r : refs)
    for (const auto& [gram, c] : count_ngrams(r, n))
      max_ref[gram] = std::max(max_ref[gram], c);
  long matched = 0;
  for (const auto& [gram, c] : hc) {
    auto it = max_ref.find(gram);
    if (it != max_ref.end()) matched += std::min(c, it->second);
  }
  return matched;
}

int closest_ref_length(std::size_t hyp_len, const std::vector<TokenSeq>& refs) {
  int best = static_cast<int>(refs.front().size());
  for (const TokenSeq& r : refs) {
    int len = static_cast<int>(r.size());
    long d = std::labs(static_cast<long>(len) - static_cast<long>(hyp_len));
    long bd = std::labs(static_cast<long>(best) - static_cast<long>(hyp_len));
    if (d < bd || (d == bd && len < best)) best = len;
  }
  return best;
}

int lcs_length(const TokenSeq& a, const TokenSeq& b) {
  std::vector<int> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1
                                    : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double f1_from_counts(long tp, long fp, long fn) {
  if (tp == 0 && (fp > 0 || fn > 0)) return 0.0;
  if (tp == 0) return 0.0;
  double p = static_cast<double>(tp) / (tp + fp);
  double r = static_cast<double>(tp) / (tp + fn);
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

void check_refs(const std::vector<TokenSeq>& refs) {
  if (refs.empty()) throw ContractError("empty reference set");
}

}  // namespace

double micro_f1(const std::vector<std::set<int>>& predictions,
                const std::vector<std::set<int>>& golds) {
  if (predictions.size() != golds.size())
    throw ContractError("micro_f1: prediction/gold count mismatch");
  long tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    for (int p : predictions[i]) {
      if (golds[i].count(p))
        ++tp;
      else
        ++fp;
    }
    for (int g : golds[i])
      if (!predictions[i].count(g)) ++fn;
  }
  return f1_from_counts(tp, fp, fn);
}

double bleu(const std::vector<TokenSeq>& hypotheses,
            const std::vector<std::vector<TokenSeq>>& reference_sets,
            int max_n) {
  if (hypotheses.size() != reference_sets.size())
    throw ContractError("bleu: hypothesis/reference count mismatch");
  for (const auto& refs : reference_sets) check_refs(refs);
  std::vector<long> matched(max_n, 0), total(max_n, 0);
  long hyp_len = 0, ref_len = 0;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    const TokenSeq& hyp = hypotheses[i];
    const auto& refs = reference_sets[i];
    hyp_len += static_cast<long>(hyp.size());
    ref_len += closest_ref_length(hyp.size(), refs);
    for (int n = 1; n <= max_n; ++n) {
      long t = 0;
      matched[n - 1] += clipped_matches(hyp, refs, n, &t);
      total[n - 1] += t;
    }
  }
  double log_prec = 0.0;
  for (int n = 0; n < max_n; ++n) {
    if (matched[n] == 0 || total[n] == 0) return 0.0;
    log_prec += std::log(static_cast<double>(matched[n]) / total[n]);
  }
  double bp = hyp_len >= ref_len || hyp_len == 0
                  ? 1.0
                  : std::exp(1.0 - static_cast<double>(ref_len) / hyp_len);
  return bp * std::exp(log_prec / max_n);
}

double sentence_bleu_smoothed(const TokenSeq& hypothesis,
                              const std::vector<TokenSeq>& references,
                              int max_n) {
  check_refs(references);
  if (hypothesis.empty()) return 0.0;
  double log_prec = 0.0;
  for (int n = 1; n <= max_n; ++n) {
    long total = 0;
    long m = clipped_matches(hypothesis, references, n, &total);
    double p;
    if (n == 1) {
      if (m == 0 || total == 0) return 0.0;
      p = static_cast<double>(m) / total;
    } else {
      p = (static_cast<double>(m) + 1.0) / (static_cast<double>(total) + 1.0);
    }
    log_prec += std::log(p);
  }
  long hyp_len = static_cast<long>(hypothesis.size());
  long ref_len = closest_ref_length(hypothesis.size(), references);
  double bp = hyp_len >= ref_len
                  ? 1.0
                  : std::exp(1.0 - static_cast<double>(ref_len) / hyp_len);
  return bp * std::exp(log_prec / max_n);
}

double rouge_n(const TokenSeq& hypothesis, const std::vector<TokenSeq>& references,
               int n) {
  check_refs(references);
  NgramCounts hc = count_ngrams(hypothesis, n);
  long hyp_total = 0;
  for (const auto& [gram, c] : hc) hyp_total += c;
  double best = 0.0;
  for (const TokenSeq& ref : references) {
    NgramCounts rc = count_ngrams(ref, n);
    long ref_total = 0;
    for (const auto& [gram, c] : rc) ref_total += c;
    long overlap = 0;
    for (const auto& [gram, c] : hc) {
      auto it = rc.find(gram);
      if (it != rc.end()) overlap += std::min(c, it->second);
    }
    if (hyp_total == 0 || ref_total == 0 || overlap == 0) continue;
    double p = static_cast<double>(overlap) / hyp_total;
    double r = static_cast<double>(overlap) / ref_total;
    best = std::max(best, 2.0 * p * r / (p + r));
  }
  return best;
}

double rouge_l(const TokenSeq& hypothesis, const std::vector<TokenSeq>& references) {
  check_refs(references);
  double best = 0.0;
  for (const TokenSeq& ref : references) {
    if (hypothesis.empty() || ref.empty()) continue;
    int l = lcs_length(hypothesis, ref);
    if (l == 0) continue;
    double p = static_cast<double>(l) / hypothesis.size();
    double r = static_cast<double>(l) / ref.size();
    best = std::max(best, 2.0 * p * r / (p + r));
  }
  return best;
}

double corpus_rouge_n(const std::vector<TokenSeq>& hypotheses,
                      const std::vector<std::vector<TokenSeq>>& reference_sets,
                      int n) {
  if (hypotheses.size() != reference_sets.size())
    throw ContractError("corpus_rouge_n: count mismatch");
  if (hypotheses.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < hypotheses.size(); ++i)
    acc += rouge_n(hypotheses[i], reference_sets[i], n);
  return acc / hypotheses.size();
}

double corpus_rouge_l(const std::vector<TokenSeq>& hypotheses,
                      const std::vector<std::vector<TokenSeq>>& reference_sets) {
  if (hypotheses.size() != reference_sets.size())
    throw ContractError("corpus_rouge_l: count mismatch");
  if (hypotheses.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < hypotheses.size(); ++i)
    acc += rouge_l(hypotheses[i], reference_sets[i]);
  return acc / hypotheses.size();
}

}  // namespace dualcycle
