#ifndef DUALCYCLE_METRICS_H_
#define DUALCYCLE_METRICS_H_

#include <set>
#include <vector>

namespace dualcycle {

using TokenSeq = std::vector<int>;

struct EvalReport {
  double micro_f1 = 0.0;
  double bleu = 0.0;
  double rouge_1 = 0.0;
  double rouge_2 = 0.0;
  double rouge_l = 0.0;
  int samples = 0;
};

// Pooled-count micro F1 over multi-label predictions. 0 when P+R is 0.
double micro_f1(const std::vector<std::set<int>>& predictions,
                const std::vector<std::set<int>>& golds);

// Corpus BLEU: clipped n-gram precisions pooled over the corpus, geometric
// mean over n = 1..max_n, brevity penalty against the closest reference
// length (ties resolved to the shorter reference). Unsmoothed; this is the
// reporting path.
double bleu(const std::vector<TokenSeq>& hypotheses,
            const std::vector<std::vector<TokenSeq>>& reference_sets,
            int max_n = 4);

// Smoothed sentence BLEU used as a reward: add-one smoothing on the n >= 2
// precisions, same brevity penalty. Never used for reporting.
double sentence_bleu_smoothed(const TokenSeq& hypothesis,
                              const std::vector<TokenSeq>& references,
                              int max_n = 4);

// Max-over-references n-gram F1 (beta = 1).
double rouge_n(const TokenSeq& hypothesis, const std::vector<TokenSeq>& references,
               int n);

// Max-over-references LCS F1 (beta = 1).
double rouge_l(const TokenSeq& hypothesis, const std::vector<TokenSeq>& references);

// Corpus ROUGE: mean of the per-sample scores.
double corpus_rouge_n(const std::vector<TokenSeq>& hypotheses,
                      const std::vector<std::vector<TokenSeq>>& reference_sets,
                      int n);
double corpus_rouge_l(const std::vector<TokenSeq>& hypotheses,
                      const std::vector<std::vector<TokenSeq>>& reference_sets);

}  // namespace dualcycle

#endif  // DUALCYCLE_METRICS_H_
