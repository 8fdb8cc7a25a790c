#include "dualcycle/report.h"

#include <cstdio>
#include <sstream>

#include "json.hpp"

namespace dualcycle {

using ordered_json = nlohmann::ordered_json;

std::string format_percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", fraction * 100.0);
  return buf;
}

std::string report_to_text(const EvalReport& r) {
  std::ostringstream os;
  os << "micro_f1 " << format_percent(r.micro_f1) << "\n";
  os << "bleu " << format_percent(r.bleu) << "\n";
  os << "rouge_1 " << format_percent(r.rouge_1) << "\n";
  os << "rouge_2 " << format_percent(r.rouge_2) << "\n";
  os << "rouge_l " << format_percent(r.rouge_l) << "\n";
  os << "samples " << r.samples << "\n";
  return os.str();
}

namespace {

ordered_json report_json(const EvalReport& r) {
  ordered_json j;
  j["micro_f1"] = r.micro_f1;
  j["bleu"] = r.bleu;
  j["rouge_1"] = r.rouge_1;
  j["rouge_2"] = r.rouge_2;
  j["rouge_l"] = r.rouge_l;
  j["samples"] = r.samples;
  return j;
}

EvalReport report_from(const ordered_json& j) {
  EvalReport r;
  r.micro_f1 = j.at("micro_f1").get<double>();
  r.bleu = j.at("bleu").get<double>();
  r.rouge_1 = j.at("rouge_1").get<double>();
  r.rouge_2 = j.at("rouge_2").get<double>();
  r.rouge_l = j.at("rouge_l").get<double>();
  r.samples = j.at("samples").get<int>();
  return r;
}

}  // namespace

std::string report_to_json_string(const EvalReport& r) {
  return report_json(r).dump(2) + "\n";
}

EvalReport report_from_json_string(const std::string& s) {
  return report_from(ordered_json::parse(s));
}

std::string traces_to_jsonl(const std::vector<CycleTrace>& traces) {
  std::ostringstream os;
  for (const CycleTrace& t : traces) {
    ordered_json j;
    j["cycle"] = t.cycle;
    j["input_mr"] = t.input_mr;
    j["input_text"] = t.input_text;
    j["mid_output"] = t.mid_output;
    j["end_output"] = t.end_output;
    j["exact_reconstruction"] = t.exact_reconstruction;
    os << j.dump() << "\n";
  }
  return os.str();
}

std::vector<CycleTrace> traces_from_jsonl(const std::string& s) {
  std::vector<CycleTrace> out;
  std::istringstream is(s);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    ordered_json j = ordered_json::parse(line);
    CycleTrace t;
    t.cycle = j.at("cycle").get<std::string>();
    t.input_mr = j.at("input_mr").get<std::string>();
    t.input_text = j.at("input_text").get<std::string>();
    t.mid_output = j.at("mid_output").get<std::string>();
    t.end_output = j.at("end_output").get<std::string>();
    t.exact_reconstruction = j.at("exact_reconstruction").get<bool>();
    out.push_back(std::move(t));
  }
  return out;
}

std::string render_traces(const std::vector<CycleTrace>& traces, int count) {
  std::ostringstream os;
  int shown = 0;
  for (const CycleTrace& t : traces) {
    if (count > 0 && shown >= count) break;
    ++shown;
    if (t.cycle == "primal") {
      os << "== primal cycle ==\n";
      os << "x            : " << t.input_mr << "\n";
      os << "y            : " << t.input_text << "\n";
      os << "f(x)         : " << t.mid_output << "\n";
      os << "g(f(x))      : " << t.end_output;
    } else {
      os << "== dual cycle ==\n";
      os << "y            : " << t.input_text << "\n";
      os << "x            : " << t.input_mr << "\n";
      os << "g(y)         : " << t.mid_output << "\n";
      os << "f(g(y))      : " << t.end_output;
    }
    if (t.exact_reconstruction) os << "   [exact reconstruction]";
    os << "\n\n";
  }
  return os.str();
}

EvalReport summary_mean(const std::vector<SeedSummary>& seeds) {
  EvalReport mean;
  if (seeds.empty()) return mean;
  for (const SeedSummary& s : seeds) {
    mean.micro_f1 += s.final_report.micro_f1;
    mean.bleu += s.final_report.bleu;
    mean.rouge_1 += s.final_report.rouge_1;
    mean.rouge_2 += s.final_report.rouge_2;
    mean.rouge_l += s.final_report.rouge_l;
    mean.samples = s.final_report.samples;
  }
  double n = static_cast<double>(seeds.size());
  mean.micro_f1 /= n;
  mean.bleu /= n;
  mean.rouge_1 /= n;
  mean.rouge_2 /= n;
  mean.rouge_l /= n;
  return mean;
}

std::string summary_table(const std::string& scheme,
                          const std::vector<SeedSummary>& seeds) {
  std::ostringstream os;
  os << "scheme  seed     Micro-F1  BLEU    ROUGE-1  ROUGE-2  ROUGE-L\n";
  char buf[160];
  for (const SeedSummary& s : seeds) {
    std::snprintf(buf, sizeof(buf), "%-7s %-8llu %-9s %-7s %-8s %-8s %-8s\n",
                  scheme.c_str(), static_cast<unsigned long long>(s.seed),
                  format_percent(s.final_report.micro_f1).c_str(),
                  format_percent(s.final_report.bleu).c_str(),
                  format_percent(s.final_report.rouge_1).c_str(),
                  format_percent(s.final_report.rouge_2).c_str(),
                  format_percent(s.final_report.rouge_l).c_str());
    os << buf;
  }
  EvalReport mean = summary_mean(seeds);
  std::snprintf(buf, sizeof(buf), "%-7s %-8s %-9s %-7s %-8s %-8s %-8s\n",
                scheme.c_str(), "mean", format_percent(mean.micro_f1).c_str(),
                format_percent(mean.bleu).c_str(),
                format_percent(mean.rouge_1).c_str(),
                format_percent(mean.rouge_2).c_str(),
                format_percent(mean.rouge_l).c_str());
  os << buf;
  return os.str();
}

std::string summary_json(const std::string& scheme,
                         const std::vector<SeedSummary>& seeds,
                         const std::string& config_echo,
                         const std::string& manifest_sha1) {
  ordered_json j;
  j["scheme"] = scheme;
  j["dataset_manifest_sha1"] = manifest_sha1;
  ordered_json per_seed = ordered_json::array();
  for (const SeedSummary& s : seeds) {
    ordered_json e;
    e["seed"] = s.seed;
    e["report"] = report_json(s.final_report);
    per_seed.push_back(e);
  }
  j["seeds"] = per_seed;
  j["mean"] = report_json(summary_mean(seeds));
  j["config"] = config_echo;
  return j.dump(2) + "\n";
}

}  // namespace dualcycle
