#include "dualcycle/data.h"

#include <cstdio>
#include <filesystem>
#include <set>

#include "doctest.h"
#include "dualcycle/data_synth.h"

using namespace dualcycle;

TEST_CASE("parse_mr on the five-pair frame") {
  auto pairs = parse_mr(
      "name[Bibimbap House], food[English], priceRange[moderate], "
      "area[riverside], near[Clare Hall]");
  REQUIRE(pairs.size() == 5);
  CHECK(pairs[0].slot == "name");
  CHECK(pairs[0].value == "bibimbap house");
  CHECK(pairs[2].slot == "priceRange");
  CHECK(pairs[2].value == "moderate");
  CHECK(pairs[4].value == "clare hall");
}

TEST_CASE("parse_mr trivial and derived cases") {
  CHECK(parse_mr("").empty());
  auto pairs = parse_mr("eatType[pub], area[riverside]");
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[0] == SlotValue{"eatType", "pub"});
  CHECK(pairs[1] == SlotValue{"area", "riverside"});
}

TEST_CASE("parse_mr reports byte offsets on malformed input") {
  CHECK_THROWS_AS(parse_mr("name[foo"), ParseError);
  CHECK_THROWS_AS(parse_mr("name foo]"), ParseError);
  CHECK_THROWS_AS(parse_mr("name[a] food[b]"), ParseError);
  try {
    parse_mr("name[foo], bad");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.offset() == 11);
  }
}

TEST_CASE("parse_mr o format_mr is the identity on canonical frames") {
  auto pairs = parse_mr("area[riverside], eattype[pub], name[blue spice]");
  std::string canon = format_mr(pairs);
  CHECK(parse_mr(canon) == pairs);
  // different orderings share a canonical key
  CHECK(format_mr(parse_mr("name[blue spice], area[riverside], eatType[pub]")) ==
        format_mr(parse_mr("eatType[pub], name[blue spice], area[riverside]")));
}

TEST_CASE("preprocess_text spec cases") {
  CHECK(preprocess_text(
            "At the riverside, there is a pub called The Blue Spice.") ==
        std::vector<std::string>{"at", "the", "riverside", "there", "is", "a",
                                 "pub", "called", "the", "blue", "spice"});
  CHECK(preprocess_text("").empty());
  CHECK(preprocess_text("PRICED") == std::vector<std::string>{"priced"});
}

TEST_CASE("preprocess_text lemmatizes plurals and irregulars") {
  CHECK(preprocess_text("serves dishes") ==
        std::vector<std::string>{"serve", "dish"});
  CHECK(preprocess_text("located near the cities") ==
        std::vector<std::string>{"locate", "near", "the", "city"});
  CHECK(preprocess_text("prices are less than £20") ==
        std::vector<std::string>{"price", "are", "less", "than", "£20"});
}

TEST_CASE("label space is sorted, unique and order independent") {
  std::vector<std::vector<SlotValue>> frames = {
      {{"food", "english"}, {"area", "riverside"}},
      {{"area", "riverside"}, {"name", "blue spice"}},
  };
  LabelSpace a = LabelSpace::build(frames);
  CHECK(a.size() == 3);
  CHECK(a.label(0).slot == "area");
  CHECK(a.label(1).slot == "food");
  CHECK(a.label(2).slot == "name");
  std::swap(frames[0], frames[1]);
  LabelSpace b = LabelSpace::build(frames);
  for (int i = 0; i < a.size(); ++i) {
    CHECK(a.label(i).slot == b.label(i).slot);
    CHECK(a.label(i).value == b.label(i).value);
  }
  CHECK(a.content_hash() == b.content_hash());
  CHECK_THROWS_AS(LabelSpace::build({}), EmptyDatasetError);
}

TEST_CASE("single frame with three pairs yields three labels") {
  LabelSpace s = LabelSpace::build({{{"a", "1"}, {"b", "2"}, {"c", "3"}}});
  CHECK(s.size() == 3);
  // duplicates across rows count once
  LabelSpace d = LabelSpace::build({{{"a", "1"}}, {{"a", "1"}}});
  CHECK(d.size() == 1);
}

TEST_CASE("encode_frame popcount equals in-space pair count") {
  LabelSpace space = LabelSpace::build({{{"name", "bibimbap house"},
                                         {"food", "english"},
                                         {"priceRange", "moderate"},
                                         {"area", "riverside"},
                                         {"near", "clare hall"}}});
  auto pairs = parse_mr(
      "name[Bibimbap House], food[English], priceRange[moderate], "
      "area[riverside], near[Clare Hall]");
  SemanticFrame f = encode_frame(pairs, space);
  CHECK(f.popcount() == 5);

  CHECK(encode_frame({}, space).popcount() == 0);

  int dropped = 0;
  pairs.push_back({"food", "martian"});
  SemanticFrame g = encode_frame(pairs, space, &dropped);
  CHECK(g.popcount() == 5);
  CHECK(dropped == 1);
}

TEST_CASE("vocabulary round trip and min frequency") {
  std::vector<std::vector<std::string>> corpus = {
      {"the", "pub", "serves", "food"}, {"the", "pub", "is", "cheap"}};
  Vocabulary v = Vocabulary::build(corpus, 2);
  CHECK(v.id("the") != Vocabulary::kUnk);
  CHECK(v.id("pub") != Vocabulary::kUnk);
  CHECK(v.id("serves") == Vocabulary::kUnk);  // frequency 1
  CHECK(v.token(v.id("the")) == "the");
  for (int i = 0; i < v.size(); ++i) CHECK(v.id(v.token(i)) == i);
}

TEST_CASE("group_references groups identical canonical MRs") {
  std::vector<RawRow> rows = {
      {"name[a], food[b]", "first text here"},
      {"food[b], name[a]", "second text now"},
      {"name[c]", "third text"},
  };
  Dataset ds = build_dataset(rows, {}, {});
  auto groups = group_references(ds.train, ds.space);
  REQUIRE(groups.size() == 2);
  CHECK(groups[0].refs.size() == 2);
  CHECK(groups[1].refs.size() == 1);
}

TEST_CASE("group count equals distinct MR count by independent set pass") {
  SynthConfig cfg;
  cfg.train_mrs = 120;
  cfg.test_mrs = 40;
  cfg.seed = 99;
  SynthCorpus corpus = synth_e2e_corpus(cfg);
  Dataset ds = build_dataset(corpus.train, corpus.test, {});
  auto groups = group_references(ds.test, ds.space);
  std::set<std::string> distinct;
  for (const DataPair& p : ds.test) distinct.insert(format_mr(parse_mr(p.raw_mr)));
  CHECK(groups.size() == distinct.size());
  CHECK(groups.size() == 40);
}

TEST_CASE("batch_iter partitions the dataset with the final short batch") {
  SynthConfig cfg;
  cfg.train_mrs = 100;
  cfg.train_refs_min = 1;
  cfg.train_refs_max = 1;
  cfg.test_mrs = 1;
  cfg.seed = 5;
  SynthCorpus corpus = synth_e2e_corpus(cfg);
  // exactly 130 pairs
  std::vector<RawRow> rows(corpus.train.begin(), corpus.train.begin() + 100);
  while (rows.size() < 130) rows.push_back(corpus.train[rows.size() - 100]);
  Dataset ds = build_dataset(rows, {}, {});
  REQUIRE(ds.train.size() == 130);

  Rng rng(42);
  auto batches = batch_iter(ds.train, 64, ds.space.size(), rng);
  REQUIRE(batches.size() == 3);
  CHECK(batches[0].indices.size() == 64);
  CHECK(batches[1].indices.size() == 64);
  CHECK(batches[2].indices.size() == 2);

  // same seed -> identical sequence
  Rng rng2(42);
  auto again = batch_iter(ds.train, 64, ds.space.size(), rng2);
  for (std::size_t b = 0; b < batches.size(); ++b)
    CHECK(batches[b].indices == again[b].indices);

  // union over one epoch covers each pair exactly once
  std::set<int> seen;
  int total = 0;
  for (const Batch& b : batches)
    for (int i : b.indices) {
      seen.insert(i);
      ++total;
    }
  CHECK(total == 130);
  CHECK(seen.size() == 130);

  // padding and mask shape: tokens rows are bos + max_steps + 1 long
  for (const Batch& b : batches)
    for (std::size_t r = 0; r < b.tokens.size(); ++r) {
      CHECK((int)b.tokens[r].size() == b.max_steps + 2);
      CHECK(b.tokens[r][0] == Vocabulary::kBos);
    }
}

TEST_CASE("csv round trip with quoting") {
  SynthConfig cfg;
  cfg.train_mrs = 30;
  cfg.test_mrs = 5;
  SynthCorpus corpus = synth_e2e_corpus(cfg);
  std::string path = "test_data_tmp.csv";
  write_csv(path, corpus.train);
  auto rows = load_e2e_csv(path);
  REQUIRE(rows.size() == corpus.train.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].mr == corpus.train[i].mr);
    CHECK(rows[i].ref == corpus.train[i].ref);
  }
  std::filesystem::remove(path);
}

TEST_CASE("synthetic corpus spans exactly 79 labels") {
  SynthCorpus corpus = synth_e2e_corpus({});
  Dataset ds = build_dataset(corpus.train, corpus.test, {});
  CHECK(ds.space.size() == 79);
  // test rows never add labels, only drop unknown ones
  for (const DataPair& p : ds.test) CHECK((int)p.frame.labels.size() == 79);
  // every training frame is non-empty
  for (const DataPair& p : ds.train) CHECK(p.frame.popcount() >= 1);
}

TEST_CASE("official E2E training split has 79 labels when available") {
  const char* path = "data/e2e/trainset.csv";
  if (!std::filesystem::exists(path)) {
    MESSAGE("official E2E file not present; covered by the synthetic corpus");
    return;
  }
  auto rows = load_e2e_csv(path);
  Dataset ds = build_dataset(rows, {}, {});
  CHECK(ds.space.size() == 79);
}

TEST_CASE("dataset manifest is deterministic and hash-stable") {
  SynthConfig cfg;
  cfg.train_mrs = 40;
  cfg.test_mrs = 10;
  SynthCorpus corpus = synth_e2e_corpus(cfg);
  Dataset a = build_dataset(corpus.train, corpus.test, {});
  Dataset b = build_dataset(corpus.train, corpus.test, {});
  CHECK(a.manifest() == b.manifest());
  CHECK(a.manifest_sha1() == b.manifest_sha1());
  CHECK(a.manifest_sha1().size() == 40);
}

TEST_CASE("utterances are truncated to max_len with a logged count") {
  std::string long_text;
  for (int i = 0; i < 100; ++i) long_text += "word ";
  std::vector<RawRow> rows = {{"name[a]", long_text}, {"name[a]", "short text"}};
  DataConfig cfg;
  cfg.max_len = 60;
  cfg.vocab_min_freq = 1;
  Dataset ds = build_dataset(rows, {}, cfg);
  CHECK(ds.truncated_train == 1);
  CHECK(ds.train[0].utterance.content_length() == 60);
}
