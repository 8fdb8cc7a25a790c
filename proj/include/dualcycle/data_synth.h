#ifndef DUALCYCLE_DATA_SYNTH_H_
#define DUALCYCLE_DATA_SYNTH_H_

#include <cstdint>
#include <string>
#include <vector>

#include "dualcycle/data.h"

namespace dualcycle {

// Seeded restaurant-domain corpus generator producing `mr,ref` rows in the
// same shape as the E2E challenge files: 8 slots, 79 distinct slot-value
// labels (guaranteed covered by the train split), multi-reference test MRs
// disjoint from the train MRs.
struct SynthConfig {
  int train_mrs = 700;
  int train_refs_min = 1;
  int train_refs_max = 2;
  int test_mrs = 200;
  int test_refs_min = 2;
  int test_refs_max = 3;
  // Probability that a test-reference clause uses a held-out paraphrase
  // recombining training lexemes (crowd-style drift); 0 disables.
  double test_style_prob = 0.5;
  std::uint64_t seed = 20240901;
};

struct SynthCorpus {
  std::vector<RawRow> train;
  std::vector<RawRow> test;
};

SynthCorpus synth_e2e_corpus(const SynthConfig& config = {});

void write_csv(const std::string& path, const std::vector<RawRow>& rows);

}  // namespace dualcycle

#endif  // DUALCYCLE_DATA_SYNTH_H_
