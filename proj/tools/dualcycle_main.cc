// Experiment driver for joint NLU/NLG dual-cycle training.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dualcycle/checkpoint.h"
#include "dualcycle/experiment.h"

namespace fs = std::filesystem;
using namespace dualcycle;

namespace {

struct CommonFlags {
  std::string config_path;
  std::string scheme;
  std::vector<std::uint64_t> seeds;
  std::string data_dir;
  std::string out;
  int subset = -1;
  bool no_warm_start = false;
};

ExperimentConfig effective_config(const CommonFlags& flags) {
  ExperimentConfig cfg;
  if (!flags.config_path.empty()) cfg = load_experiment_config(flags.config_path);
  if (!flags.scheme.empty()) {
    cfg.scheme = flags.scheme;
    cfg.train.scheme = SchemeSpec::preset(scheme_from_string(flags.scheme));
  }
  if (!flags.seeds.empty()) cfg.seeds = flags.seeds;
  if (!flags.data_dir.empty()) {
    cfg.train_path = (fs::path(flags.data_dir) / "trainset.csv").string();
    cfg.test_path = (fs::path(flags.data_dir) / "testset_w_refs.csv").string();
    cfg.synthetic = false;
  }
  if (!flags.out.empty()) cfg.out_dir = flags.out;
  if (flags.subset >= 0) cfg.subset = flags.subset;
  if (flags.no_warm_start) cfg.train.warm_start_epochs = 0;
  return cfg;
}

void add_common(CLI::App* cmd, CommonFlags& flags, bool config_required) {
  auto* opt = cmd->add_option("--config", flags.config_path, "experiment config file");
  if (config_required) opt->required();
  cmd->add_option("--scheme", flags.scheme, "learning scheme id (a, c-l)");
  cmd->add_option("--seed", flags.seeds, "seed (repeatable)");
  cmd->add_option("--data-dir", flags.data_dir,
                  "directory holding trainset.csv and testset_w_refs.csv");
  cmd->add_option("--out", flags.out, "output directory");
  cmd->add_option("--subset", flags.subset, "cap on training pairs");
  cmd->add_flag("--no-warm-start", flags.no_warm_start,
                "enable reward terms from the first epoch");
}

int do_train(const CommonFlags& flags) {
  ExperimentConfig cfg = effective_config(flags);
  auto summaries = run_experiment(cfg);
  std::cout << summary_table(cfg.scheme, summaries);
  std::cout << "artifacts written to " << scheme_dir(cfg) << "\n";
  return 0;
}

int do_evaluate(const CommonFlags& flags, const std::string& ckpt_dir) {
  ExperimentConfig cfg = effective_config(flags);
  Dataset ds = prepare_dataset(cfg);
  ModelConfig mc = cfg.model;
  mc.max_len = cfg.data.max_len;
  NlgModel nlg(ds.space.size(), ds.vocab.size(), mc, 1);
  NluModel nlu(ds.space.size(), ds.vocab.size(), mc, 2,
               mc.share_embeddings ? &nlg.store().at("emb") : nullptr);
  load_checkpoint((fs::path(ckpt_dir) / "nlg.ckpt").string(), nlg.store(), "nlg",
                  ds.space.content_hash(), ds.vocab.content_hash());
  load_checkpoint((fs::path(ckpt_dir) / "nlu.ckpt").string(), nlu.store(), "nlu",
                  ds.space.content_hash(), ds.vocab.content_hash());
  EvalReport rep = evaluate(nlg, nlu, ds, cfg.train.nlu_threshold);
  std::cout << report_to_text(rep);
  return 0;
}

int do_pretrain_lm(const CommonFlags& flags, const std::string& out_file,
                   std::uint64_t seed) {
  ExperimentConfig cfg = effective_config(flags);
  Dataset ds = prepare_dataset(cfg);
  ModelConfig mc = cfg.model;
  mc.max_len = cfg.data.max_len;
  RnnLm lm(ds.vocab.size(), mc, seed * 2654435761ULL + 3);
  Rng rng(seed * 31 + 5);
  PretrainResult res =
      pretrain_lm(lm, ds.train, cfg.lm_epochs, cfg.train.batch_size, cfg.lm_lr, rng);
  save_checkpoint(out_file, lm.store(), "lm", ds.space.content_hash(),
                  ds.vocab.content_hash());
  std::printf("lm nll: first epoch %.4f, final %.4f -> %s\n",
              res.epoch_nll.front(), res.epoch_nll.back(), out_file.c_str());
  return 0;
}

int do_pretrain_made(const CommonFlags& flags, const std::string& out_file,
                     std::uint64_t seed) {
  ExperimentConfig cfg = effective_config(flags);
  Dataset ds = prepare_dataset(cfg);
  MadeEstimator made(ds.space.size(), cfg.made_hidden, cfg.made_orderings,
                     seed * 2654435761ULL + 4);
  std::vector<SemanticFrame> frames;
  for (const DataPair& p : ds.train) frames.push_back(p.frame);
  Rng rng(seed * 31 + 6);
  PretrainResult res = pretrain_made(made, frames, cfg.made_epochs,
                                     cfg.train.batch_size, cfg.made_lr, rng);
  save_checkpoint(out_file, made.store(), "made", ds.space.content_hash(),
                  ds.vocab.content_hash());
  std::printf("made nll: first epoch %.4f, final %.4f -> %s\n",
              res.epoch_nll.front(), res.epoch_nll.back(), out_file.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"joint dual-cycle training of language understanding and generation"};
  app.require_subcommand(1);

  CommonFlags train_flags;
  auto* train_cmd = app.add_subcommand("train", "run the full experiment protocol");
  add_common(train_cmd, train_flags, /*config_required=*/true);

  CommonFlags eval_flags;
  std::string ckpt_dir;
  auto* eval_cmd = app.add_subcommand("evaluate", "score checkpoints on the test split");
  add_common(eval_cmd, eval_flags, true);
  eval_cmd->add_option("--ckpt", ckpt_dir, "directory holding nlg.ckpt and nlu.ckpt")
      ->required();

  std::string report_dir;
  auto* report_cmd = app.add_subcommand("report", "rebuild the summary from a run directory");
  report_cmd->add_option("--run", report_dir, "scheme output directory")->required();

  std::string examples_dir;
  int examples_count = 4;
  auto* examples_cmd = app.add_subcommand("examples", "render recorded cycle traces");
  examples_cmd->add_option("--run", examples_dir, "run directory")->required();
  examples_cmd->add_option("--count", examples_count, "traces to render");

  CommonFlags lm_flags;
  std::string lm_out = "lm.ckpt";
  std::uint64_t lm_seed = 13;
  auto* lm_cmd = app.add_subcommand("pretrain-lm", "pretrain the reward language model");
  add_common(lm_cmd, lm_flags, true);
  lm_cmd->add_option("--ckpt-out", lm_out, "checkpoint output path");
  lm_cmd->add_option("--pretrain-seed", lm_seed, "pretraining seed");

  CommonFlags made_flags;
  std::string made_out = "made.ckpt";
  std::uint64_t made_seed = 13;
  auto* made_cmd =
      app.add_subcommand("pretrain-made", "pretrain the frame distribution estimator");
  add_common(made_cmd, made_flags, true);
  made_cmd->add_option("--ckpt-out", made_out, "checkpoint output path");
  made_cmd->add_option("--pretrain-seed", made_seed, "pretraining seed");

  std::string synth_dir = "data";
  std::uint64_t synth_seed = 20240901;
  int synth_train_mrs = 700, synth_test_mrs = 200;
  auto* synth_cmd =
      app.add_subcommand("synth-data", "write a seeded synthetic corpus as CSV");
  synth_cmd->add_option("--out", synth_dir, "output directory");
  synth_cmd->add_option("--seed", synth_seed, "generator seed");
  synth_cmd->add_option("--train-mrs", synth_train_mrs, "distinct training MRs");
  synth_cmd->add_option("--test-mrs", synth_test_mrs, "distinct test MRs");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train_cmd->parsed()) return do_train(train_flags);
    if (eval_cmd->parsed()) return do_evaluate(eval_flags, ckpt_dir);
    if (report_cmd->parsed()) {
      ExportedSummary s = export_report(report_dir);
      std::cout << s.table;
      return 0;
    }
    if (examples_cmd->parsed()) {
      std::cout << show_cycle_examples(examples_dir, examples_count);
      return 0;
    }
    if (lm_cmd->parsed()) return do_pretrain_lm(lm_flags, lm_out, lm_seed);
    if (made_cmd->parsed()) return do_pretrain_made(made_flags, made_out, made_seed);
    if (synth_cmd->parsed()) {
      SynthConfig sc;
      sc.seed = synth_seed;
      sc.train_mrs = synth_train_mrs;
      sc.test_mrs = synth_test_mrs;
      SynthCorpus corpus = synth_e2e_corpus(sc);
      fs::create_directories(synth_dir);
      write_csv((fs::path(synth_dir) / "trainset.csv").string(), corpus.train);
      write_csv((fs::path(synth_dir) / "testset_w_refs.csv").string(), corpus.test);
      std::cout << "wrote " << corpus.train.size() << " train rows, "
                << corpus.test.size() << " test rows to " << synth_dir << "\n";
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error kind=" << e.kind() << " msg=\"" << e.what() << "\"\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error kind=internal msg=\"" << e.what() << "\"\n";
    return 1;
  }
  return 1;
}
