#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "dualcycle/experiment.h"
#include "dualcycle/report.h"

using namespace dualcycle;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

void write(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

std::string tiny_config(const std::string& out_dir, const std::string& scheme,
                        const std::string& seeds) {
  return "[data]\n"
         "synthetic = true\n"
         "synth_seed = 424242\n"
         "train_mrs = 90\n"
         "test_mrs = 10\n"
         "subset = 80\n"
         "vocab_min_freq = 1\n"
         "[model]\n"
         "hidden = 16\n"
         "embed = 8\n"
         "[train]\n"
         "scheme = " + scheme + "\n"
         "epochs = 1\n"
         "batch = 16\n"
         "seeds = " + seeds + "\n"
         "[out]\n"
         "dir = " + out_dir + "\n";
}

int run_cli(const std::string& args) {
  std::string cmd = std::string(CLI_BIN) + " " + args;
  return std::system(cmd.c_str());
}

}  // namespace

TEST_CASE("percent formatting uses correctly-rounded two decimals") {
  CHECK(format_percent(0.80035) == "80.03");  // binary value sits below the tie
  CHECK(format_percent(0.5) == "50.00");
  CHECK(format_percent(1.0) == "100.00");
  CHECK(format_percent(0.0012349) == "0.12");
  // exact binary ties resolve half-even
  CHECK(format_percent(0.00125) == "0.12");
  CHECK(format_percent(0.00375) == "0.38");
}

TEST_CASE("report json round trips losslessly") {
  EvalReport r;
  r.micro_f1 = 0.7114;
  r.bleu = 0.5505;
  r.rouge_1 = 0.5537;
  r.rouge_2 = 0.2795;
  r.rouge_l = 0.3990;
  r.samples = 630;
  EvalReport back = report_from_json_string(report_to_json_string(r));
  CHECK(back.micro_f1 == r.micro_f1);
  CHECK(back.bleu == r.bleu);
  CHECK(back.rouge_1 == r.rouge_1);
  CHECK(back.rouge_2 == r.rouge_2);
  CHECK(back.rouge_l == r.rouge_l);
  CHECK(back.samples == r.samples);
}

TEST_CASE("summary table columns follow the reporting order") {
  std::vector<SeedSummary> seeds = {{13, {0.7114, 0.5505, 0.5537, 0.2795, 0.3990, 10}}};
  std::string table = summary_table("a", seeds);
  auto f1 = table.find("Micro-F1");
  auto bl = table.find("BLEU");
  auto r1 = table.find("ROUGE-1");
  auto r2 = table.find("ROUGE-2");
  auto rl = table.find("ROUGE-L");
  REQUIRE(f1 != std::string::npos);
  CHECK(f1 < bl);
  CHECK(bl < r1);
  CHECK(r1 < r2);
  CHECK(r2 < rl);
  CHECK(table.find("71.14") != std::string::npos);
  CHECK(table.find("55.05") != std::string::npos);
}

TEST_CASE("summary mean is the arithmetic mean of the per-seed reports") {
  std::vector<SeedSummary> seeds = {{1, {0.2, 0.4, 0.1, 0.0, 0.6, 5}},
                                    {2, {0.4, 0.6, 0.3, 0.2, 0.8, 5}},
                                    {3, {0.6, 0.8, 0.5, 0.4, 1.0, 5}}};
  EvalReport m = summary_mean(seeds);
  CHECK(m.micro_f1 == doctest::Approx(0.4));
  CHECK(m.bleu == doctest::Approx(0.6));
  CHECK(m.rouge_1 == doctest::Approx(0.3));
  CHECK(m.rouge_2 == doctest::Approx(0.2));
  CHECK(m.rouge_l == doctest::Approx(0.8));
}

TEST_CASE("trace rendering marks exact reconstructions") {
  CycleTrace t;
  t.cycle = "primal";
  t.input_mr = "area[riverside], eattype[pub], name[blue spice]";
  t.input_text = "at the riverside there is a pub called the blue spice";
  t.mid_output = "in riverside there is a pub called blue spice";
  t.end_output = "area[riverside], eattype[pub], name[blue spice]";
  t.exact_reconstruction = true;
  std::string s = render_traces({t}, 1);
  CHECK(s.find("[exact reconstruction]") != std::string::npos);
  CHECK(s.find("f(x)") != std::string::npos);
  CHECK(s.find("g(f(x))") != std::string::npos);
  // count larger than recorded renders everything without error
  CHECK(render_traces({t}, 10).find("primal") != std::string::npos);
  // round trip through jsonl
  auto back = traces_from_jsonl(traces_to_jsonl({t}));
  REQUIRE(back.size() == 1);
  CHECK(back[0].end_output == t.end_output);
  CHECK(back[0].exact_reconstruction);
}

TEST_CASE("config parsing: full file, overrides and rejects") {
  fs::path dir = "cli_cfg_tmp";
  fs::create_directories(dir);
  write(dir / "ok.cfg", tiny_config("cli_cfg_tmp/out", "f", "13 42"));
  ExperimentConfig cfg = load_experiment_config((dir / "ok.cfg").string());
  CHECK(cfg.scheme == "f");
  CHECK(cfg.seeds == std::vector<std::uint64_t>{13, 42});
  CHECK(cfg.subset == 80);
  CHECK(cfg.model.hidden == 16);
  CHECK(cfg.train.scheme.joint);

  write(dir / "badkey.cfg", "[train]\nnope = 1\n");
  CHECK_THROWS_AS(load_experiment_config((dir / "badkey.cfg").string()), ConfigError);

  // unknown scheme ids are rejected at config time, before any training
  write(dir / "badscheme.cfg", "[train]\nscheme = q\n");
  CHECK_THROWS_AS(load_experiment_config((dir / "badscheme.cfg").string()),
                  ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("run_experiment writes the full artifact tree and averages seeds") {
  fs::path dir = "cli_run_tmp";
  fs::remove_all(dir);
  fs::create_directories(dir);
  write(dir / "exp.cfg", tiny_config("cli_run_tmp/out", "a", "7 8"));
  ExperimentConfig cfg = load_experiment_config((dir / "exp.cfg").string());
  auto summaries = run_experiment(cfg);
  REQUIRE(summaries.size() == 2);

  fs::path sdir = fs::path("cli_run_tmp/out") / "a";
  CHECK(fs::exists(fs::path("cli_run_tmp/out") / "dataset_manifest.txt"));
  CHECK(fs::exists(sdir / "summary.txt"));
  CHECK(fs::exists(sdir / "summary.json"));
  for (const char* seed : {"seed7", "seed8"}) {
    CHECK(fs::exists(sdir / seed / "epoch_01" / "nlg.ckpt"));
    CHECK(fs::exists(sdir / seed / "epoch_01" / "nlu.ckpt"));
    CHECK(fs::exists(sdir / seed / "epoch_01" / "report.json"));
    CHECK(fs::exists(sdir / seed / "epoch_01" / "traces.jsonl"));
  }

  // summary values equal the arithmetic mean of the per-seed reports
  EvalReport mean = summary_mean(summaries);
  std::string table = slurp(sdir / "summary.txt");
  CHECK(table.find(format_percent(mean.micro_f1)) != std::string::npos);

  // every summary number traces back to an epoch report file
  EvalReport e7 = report_from_json_string(
      slurp(sdir / "seed7" / "epoch_01" / "report.json"));
  CHECK(e7.micro_f1 == summaries[0].final_report.micro_f1);

  // export_report rebuilds the same table from the artifacts
  ExportedSummary ex = export_report(sdir.string());
  CHECK(ex.table == table);

  fs::remove_all(dir);
}

TEST_CASE("identical config and seeds give byte-identical summaries") {
  fs::path dir = "cli_det_tmp";
  fs::remove_all(dir);
  fs::create_directories(dir);
  write(dir / "exp.cfg", tiny_config("cli_det_tmp/out1", "c", "5"));
  ExperimentConfig cfg1 = load_experiment_config((dir / "exp.cfg").string());
  run_experiment(cfg1);
  write(dir / "exp2.cfg", tiny_config("cli_det_tmp/out2", "c", "5"));
  ExperimentConfig cfg2 = load_experiment_config((dir / "exp2.cfg").string());
  run_experiment(cfg2);
  CHECK(slurp("cli_det_tmp/out1/c/summary.txt") ==
        slurp("cli_det_tmp/out2/c/summary.txt"));
  std::string j1 = slurp("cli_det_tmp/out1/c/summary.json");
  std::string j2 = slurp("cli_det_tmp/out2/c/summary.json");
  // the config echo differs only in the out dir; reports must be identical
  auto strip = [](std::string s, const std::string& needle) {
    for (std::size_t p = s.find(needle); p != std::string::npos;
         p = s.find(needle))
      s.erase(p, needle.size());
    return s;
  };
  CHECK(strip(j1, "out1") == strip(j2, "out2"));
  fs::remove_all(dir);
}

TEST_CASE("cli binary: smoke train run, report, examples and error paths") {
  fs::path dir = "cli_bin_tmp";
  fs::remove_all(dir);
  fs::create_directories(dir);
  write(dir / "exp.cfg", tiny_config("cli_bin_tmp/out", "a", "3"));

  int rc = run_cli("train --config cli_bin_tmp/exp.cfg > cli_bin_tmp/train.log 2>&1");
  CHECK(rc == 0);
  CHECK(fs::exists("cli_bin_tmp/out/a/summary.txt"));

  rc = run_cli("report --run cli_bin_tmp/out/a > cli_bin_tmp/report.log 2>&1");
  CHECK(rc == 0);
  CHECK(slurp("cli_bin_tmp/report.log").find("Micro-F1") != std::string::npos);

  rc = run_cli("examples --run cli_bin_tmp/out/a --count 2 > cli_bin_tmp/ex.log 2>&1");
  CHECK(rc == 0);
  CHECK(slurp("cli_bin_tmp/ex.log").find("cycle") != std::string::npos);

  // unknown scheme rejected before any training, machine-parseable error line
  rc = run_cli("train --config cli_bin_tmp/exp.cfg --scheme q > cli_bin_tmp/err.log 2>&1");
  CHECK(rc != 0);
  std::string err = slurp("cli_bin_tmp/err.log");
  CHECK(err.find("error kind=config") != std::string::npos);

  // missing files give a clean nonzero exit as well
  rc = run_cli("report --run cli_bin_tmp/missing > cli_bin_tmp/err2.log 2>&1");
  CHECK(rc != 0);
  CHECK(slurp("cli_bin_tmp/err2.log").find("error kind=io") != std::string::npos);

  // input dataset files are never mutated by training: synthetic mode writes
  // nothing into the data directory at all; spot-check the evaluate verb too
  rc = run_cli(
      "evaluate --config cli_bin_tmp/exp.cfg --ckpt cli_bin_tmp/out/a/seed3/epoch_01 "
      "> cli_bin_tmp/eval.log 2>&1");
  CHECK(rc == 0);
  CHECK(slurp("cli_bin_tmp/eval.log").find("micro_f1") != std::string::npos);

  fs::remove_all(dir);
}

TEST_CASE("cli binary: synth-data and pretrain verbs produce artifacts") {
  fs::path dir = "cli_synth_tmp";
  fs::remove_all(dir);
  fs::create_directories(dir);
  int rc = run_cli(
      "synth-data --out cli_synth_tmp/data --seed 5 --train-mrs 90 --test-mrs 8 "
      "> cli_synth_tmp/synth.log 2>&1");
  CHECK(rc == 0);
  CHECK(fs::exists("cli_synth_tmp/data/trainset.csv"));
  CHECK(fs::exists("cli_synth_tmp/data/testset_w_refs.csv"));

  write(dir / "exp.cfg",
        "[data]\n"
        "train = cli_synth_tmp/data/trainset.csv\n"
        "test = cli_synth_tmp/data/testset_w_refs.csv\n"
        "vocab_min_freq = 1\n"
        "[model]\nhidden = 12\nembed = 6\n"
        "[pretrain]\nlm_epochs = 1\nmade_epochs = 1\n"
        "[train]\nscheme = a\nbatch = 16\n");
  rc = run_cli(
      "pretrain-lm --config cli_synth_tmp/exp.cfg --ckpt-out cli_synth_tmp/lm.ckpt "
      "> cli_synth_tmp/lm.log 2>&1");
  CHECK(rc == 0);
  CHECK(fs::exists("cli_synth_tmp/lm.ckpt"));
  rc = run_cli(
      "pretrain-made --config cli_synth_tmp/exp.cfg --ckpt-out cli_synth_tmp/made.ckpt "
      "> cli_synth_tmp/made.log 2>&1");
  CHECK(rc == 0);
  CHECK(fs::exists("cli_synth_tmp/made.ckpt"));
  fs::remove_all(dir);
}
