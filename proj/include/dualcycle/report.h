#ifndef DUALCYCLE_REPORT_H_
#define DUALCYCLE_REPORT_H_

#include <string>
#include <vector>

#include "dualcycle/metrics.h"
#include "dualcycle/trainer.h"

namespace dualcycle {

// Scores render in percent with two decimals; ties in the decimal expansion
// resolve half-even via correctly-rounded formatting of the binary value.
std::string format_percent(double fraction);

std::string report_to_text(const EvalReport& r);
std::string report_to_json_string(const EvalReport& r);
EvalReport report_from_json_string(const std::string& s);

std::string traces_to_jsonl(const std::vector<CycleTrace>& traces);
std::vector<CycleTrace> traces_from_jsonl(const std::string& s);

// Side-by-side rendering of recorded cycles for qualitative inspection.
std::string render_traces(const std::vector<CycleTrace>& traces, int count);

struct SeedSummary {
  std::uint64_t seed = 0;
  EvalReport final_report;
};

// Seed-averaged summary table in the reporting column order:
// Micro-F1, BLEU, ROUGE-1, ROUGE-2, ROUGE-L.
std::string summary_table(const std::string& scheme,
                          const std::vector<SeedSummary>& seeds);
std::string summary_json(const std::string& scheme,
                         const std::vector<SeedSummary>& seeds,
                         const std::string& config_echo,
                         const std::string& manifest_sha1);
EvalReport summary_mean(const std::vector<SeedSummary>& seeds);

}  // namespace dualcycle

#endif  // DUALCYCLE_REPORT_H_
