#include "dualcycle/experiment.h"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "dualcycle/checkpoint.h"
#include "dualcycle/hash.h"
#include "json.hpp"

namespace dualcycle {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSubsetSeed = 9001;

std::string trimmed(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("expected a boolean, got '" + v + "'");
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

std::string epoch_dir(int epoch) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "epoch_%02d", epoch);
  return buf;
}

}  // namespace

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  ExperimentConfig cfg;
  std::string line, section;
  int lineno = 0;
  bool seeds_set = false;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trimmed(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[' && t.back() == ']') {
      section = t.substr(1, t.size() - 2);
      continue;
    }
    std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trimmed(t.substr(0, eq));
    std::string value = trimmed(t.substr(eq + 1));
    auto unknown = [&]() {
      throw ConfigError("unknown key '" + key + "' in section [" + section + "]");
    };
    if (section == "data") {
      if (key == "train") cfg.train_path = value;
      else if (key == "test") cfg.test_path = value;
      else if (key == "synthetic") cfg.synthetic = parse_bool(value);
      else if (key == "synth_seed") cfg.synth.seed = std::stoull(value);
      else if (key == "train_mrs") cfg.synth.train_mrs = std::stoi(value);
      else if (key == "test_mrs") cfg.synth.test_mrs = std::stoi(value);
      else if (key == "subset") cfg.subset = std::stoi(value);
      else if (key == "max_len") cfg.data.max_len = std::stoi(value);
      else if (key == "vocab_min_freq") cfg.data.vocab_min_freq = std::stoi(value);
      else unknown();
    } else if (section == "model") {
      if (key == "hidden") cfg.model.hidden = std::stoi(value);
      else if (key == "embed") cfg.model.embed = std::stoi(value);
      else if (key == "share_embeddings") cfg.model.share_embeddings = parse_bool(value);
      else if (key == "made_hidden") cfg.made_hidden = std::stoi(value);
      else if (key == "made_orderings") cfg.made_orderings = std::stoi(value);
      else unknown();
    } else if (section == "train") {
      if (key == "scheme") cfg.scheme = value;
      else if (key == "epochs") cfg.train.epochs = std::stoi(value);
      else if (key == "batch") cfg.train.batch_size = std::stoi(value);
      else if (key == "lr_nlg") cfg.train.lr_nlg = std::stod(value);
      else if (key == "lr_nlu") cfg.train.lr_nlu = std::stod(value);
      else if (key == "clip_norm") cfg.train.clip_norm = std::stod(value);
      else if (key == "rl_weight") cfg.train.rl_weight = std::stod(value);
      else if (key == "supervised_weight") cfg.train.supervised_weight = std::stod(value);
      else if (key == "baseline_decay") cfg.train.baseline_decay = std::stod(value);
      else if (key == "baseline") cfg.train.baseline_enabled = parse_bool(value);
      else if (key == "warm_start_epochs") cfg.train.warm_start_epochs = std::stoi(value);
      else if (key == "feedback") {
        if (value == "teacher") cfg.train.nlg_feedback_teacher = true;
        else if (value == "coupled") cfg.train.nlg_feedback_teacher = false;
        else throw ConfigError("feedback must be 'coupled' or 'teacher'");
      } else if (key == "threshold") cfg.train.nlu_threshold = std::stod(value);
      else if (key == "seeds") {
        cfg.seeds.clear();
        std::istringstream ss(value);
        std::uint64_t s;
        while (ss >> s) cfg.seeds.push_back(s);
        if (cfg.seeds.empty()) throw ConfigError("seeds must list at least one seed");
        seeds_set = true;
      } else unknown();
    } else if (section == "pretrain") {
      if (key == "lm_epochs") cfg.lm_epochs = std::stoi(value);
      else if (key == "lm_lr") cfg.lm_lr = std::stod(value);
      else if (key == "made_epochs") cfg.made_epochs = std::stoi(value);
      else if (key == "made_lr") cfg.made_lr = std::stod(value);
      else unknown();
    } else if (section == "out") {
      if (key == "dir") cfg.out_dir = value;
      else if (key == "traces") cfg.train.trace_samples = std::stoi(value);
      else unknown();
    } else {
      throw ConfigError("unknown section [" + section + "]");
    }
  }
  (void)seeds_set;
  // validates the scheme id before any training starts
  cfg.train.scheme = SchemeSpec::preset(scheme_from_string(cfg.scheme));
  cfg.model.nlu_threshold = cfg.train.nlu_threshold;
  return cfg;
}

std::string config_echo(const ExperimentConfig& cfg) {
  std::ostringstream os;
  os << "scheme=" << cfg.scheme;
  os << " synthetic=" << (cfg.synthetic ? 1 : 0);
  if (!cfg.train_path.empty()) os << " train=" << cfg.train_path;
  if (!cfg.test_path.empty()) os << " test=" << cfg.test_path;
  if (cfg.synthetic)
    os << " synth_seed=" << cfg.synth.seed << " train_mrs=" << cfg.synth.train_mrs
       << " test_mrs=" << cfg.synth.test_mrs;
  os << " subset=" << cfg.subset << " max_len=" << cfg.data.max_len
     << " vocab_min_freq=" << cfg.data.vocab_min_freq;
  os << " hidden=" << cfg.model.hidden << " embed=" << cfg.model.embed
     << " share_embeddings=" << (cfg.model.share_embeddings ? 1 : 0);
  os << " epochs=" << cfg.train.epochs << " batch=" << cfg.train.batch_size
     << " lr_nlg=" << cfg.train.lr_nlg << " lr_nlu=" << cfg.train.lr_nlu
     << " clip_norm=" << cfg.train.clip_norm
     << " supervised_weight=" << cfg.train.supervised_weight
     << " rl_weight=" << cfg.train.rl_weight
     << " baseline_decay=" << cfg.train.baseline_decay
     << " baseline=" << (cfg.train.baseline_enabled ? 1 : 0)
     << " warm_start_epochs=" << cfg.train.warm_start_epochs
     << " feedback=" << (cfg.train.nlg_feedback_teacher ? "teacher" : "coupled")
     << " threshold=" << cfg.train.nlu_threshold;
  os << " seeds=";
  for (std::size_t i = 0; i < cfg.seeds.size(); ++i)
    os << (i ? "," : "") << cfg.seeds[i];
  return os.str();
}

Dataset prepare_dataset(const ExperimentConfig& cfg) {
  std::vector<RawRow> train_rows, test_rows;
  if (cfg.synthetic) {
    SynthCorpus corpus = synth_e2e_corpus(cfg.synth);
    train_rows = std::move(corpus.train);
    test_rows = std::move(corpus.test);
  } else {
    if (cfg.train_path.empty() || cfg.test_path.empty())
      throw ConfigError("data paths missing; set [data] train/test or synthetic=true");
    train_rows = load_e2e_csv(cfg.train_path);
    test_rows = load_e2e_csv(cfg.test_path);
  }
  if (cfg.subset > 0 && static_cast<int>(train_rows.size()) > cfg.subset) {
    Rng rng(kSubsetSeed);
    rng.shuffle(train_rows);
    train_rows.resize(cfg.subset);
  }
  return build_dataset(train_rows, test_rows, cfg.data);
}

std::string scheme_dir(const ExperimentConfig& cfg) {
  return (fs::path(cfg.out_dir) / cfg.scheme).string();
}

std::vector<SeedSummary> run_experiment(const ExperimentConfig& cfg) {
  Dataset ds = prepare_dataset(cfg);
  fs::create_directories(cfg.out_dir);
  write_file(fs::path(cfg.out_dir) / "dataset_manifest.txt", ds.manifest());
  const std::string sdir = scheme_dir(cfg);
  fs::create_directories(sdir);

  std::vector<SeedSummary> summaries;
  for (std::uint64_t seed : cfg.seeds) {
    TrainConfig tc = cfg.train;
    tc.seed = seed;
    ModelConfig mc = cfg.model;
    mc.max_len = cfg.data.max_len;
    mc.nlu_threshold = tc.nlu_threshold;

    NlgModel nlg(ds.space.size(), ds.vocab.size(), mc, seed * 2654435761ULL + 1);
    NluModel nlu(ds.space.size(), ds.vocab.size(), mc, seed * 2654435761ULL + 2,
                 mc.share_embeddings ? &nlg.store().at("emb") : nullptr);

    std::unique_ptr<RnnLm> lm;
    std::unique_ptr<MadeEstimator> made;
    fs::path seed_dir = fs::path(sdir) / ("seed" + std::to_string(seed));
    fs::create_directories(seed_dir);
    if (tc.scheme.needs_lm()) {
      lm = std::make_unique<RnnLm>(ds.vocab.size(), mc, seed * 2654435761ULL + 3);
      Rng rng(seed * 31 + 5);
      pretrain_lm(*lm, ds.train, cfg.lm_epochs, tc.batch_size, cfg.lm_lr, rng);
      save_checkpoint((seed_dir / "lm.ckpt").string(), lm->store(), "lm",
                      ds.space.content_hash(), ds.vocab.content_hash());
    }
    if (tc.scheme.needs_made()) {
      made = std::make_unique<MadeEstimator>(ds.space.size(), cfg.made_hidden,
                                             cfg.made_orderings,
                                             seed * 2654435761ULL + 4);
      std::vector<SemanticFrame> frames;
      frames.reserve(ds.train.size());
      for (const DataPair& p : ds.train) frames.push_back(p.frame);
      Rng rng(seed * 31 + 6);
      pretrain_made(*made, frames, cfg.made_epochs, tc.batch_size, cfg.made_lr, rng);
      save_checkpoint((seed_dir / "made.ckpt").string(), made->store(), "made",
                      ds.space.content_hash(), ds.vocab.content_hash());
    }

    auto writer = [&](const EpochRecord& rec) {
      fs::path dir = seed_dir / epoch_dir(rec.epoch);
      fs::create_directories(dir);
      save_checkpoint((dir / "nlg.ckpt").string(), nlg.store(), "nlg",
                      ds.space.content_hash(), ds.vocab.content_hash());
      save_checkpoint((dir / "nlu.ckpt").string(), nlu.store(), "nlu",
                      ds.space.content_hash(), ds.vocab.content_hash());
      write_file(dir / "report.txt", report_to_text(rec.report));
      write_file(dir / "report.json", report_to_json_string(rec.report));
      write_file(dir / "traces.jsonl", traces_to_jsonl(rec.traces));
    };
    TrainResult res = train(nlg, nlu, ds, tc, lm.get(), made.get(), writer);
    summaries.push_back(SeedSummary{seed, res.epochs.back().report});
  }

  write_file(fs::path(sdir) / "summary.txt", summary_table(cfg.scheme, summaries));
  write_file(fs::path(sdir) / "summary.json",
             summary_json(cfg.scheme, summaries, config_echo(cfg),
                          ds.manifest_sha1()));
  return summaries;
}

ExportedSummary export_report(const std::string& scheme_dir_path) {
  fs::path sdir(scheme_dir_path);
  if (!fs::exists(sdir)) throw IoError("run directory missing: " + scheme_dir_path);
  std::string scheme = sdir.filename().string();
  std::vector<SeedSummary> summaries;
  std::vector<std::string> missing;
  std::vector<fs::path> seed_dirs;
  for (const auto& entry : fs::directory_iterator(sdir))
    if (entry.is_directory() &&
        entry.path().filename().string().rfind("seed", 0) == 0)
      seed_dirs.push_back(entry.path());
  std::sort(seed_dirs.begin(), seed_dirs.end());
  for (const fs::path& sd : seed_dirs) {
    // last epoch directory is the final report
    std::vector<fs::path> epochs;
    for (const auto& e : fs::directory_iterator(sd))
      if (e.is_directory() && e.path().filename().string().rfind("epoch_", 0) == 0)
        epochs.push_back(e.path());
    std::sort(epochs.begin(), epochs.end());
    if (epochs.empty()) {
      missing.push_back(sd.string() + "/epoch_*");
      continue;
    }
    fs::path report = epochs.back() / "report.json";
    if (!fs::exists(report)) {
      missing.push_back(report.string());
      continue;
    }
    SeedSummary s;
    s.seed = std::stoull(sd.filename().string().substr(4));
    s.final_report = report_from_json_string(read_file(report));
    summaries.push_back(s);
  }
  if (!missing.empty()) {
    std::string msg = "incomplete run directory; missing:";
    for (const std::string& m : missing) msg += " " + m;
    throw IoError(msg);
  }
  if (summaries.empty()) throw IoError("no seed results under " + scheme_dir_path);
  ExportedSummary out;
  out.table = summary_table(scheme, summaries);
  std::string config;
  std::string manifest_sha = "";
  fs::path old_summary = sdir / "summary.json";
  if (fs::exists(old_summary)) {
    auto j = nlohmann::ordered_json::parse(read_file(old_summary));
    config = j.value("config", "");
    manifest_sha = j.value("dataset_manifest_sha1", "");
  }
  out.json = summary_json(scheme, summaries, config, manifest_sha);
  return out;
}

std::string show_cycle_examples(const std::string& run_dir, int count) {
  fs::path dir(run_dir);
  if (!fs::exists(dir)) throw IoError("run directory missing: " + run_dir);
  // find the newest epoch's traces under the directory tree
  std::vector<fs::path> trace_files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().filename() == "traces.jsonl")
      trace_files.push_back(e.path());
  if (trace_files.empty()) throw IoError("no traces.jsonl under " + run_dir);
  std::sort(trace_files.begin(), trace_files.end());
  auto traces = traces_from_jsonl(read_file(trace_files.back()));
  return render_traces(traces, count);
}

}  // namespace dualcycle
