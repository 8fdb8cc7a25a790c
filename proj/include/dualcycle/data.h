#ifndef DUALCYCLE_DATA_H_
#define DUALCYCLE_DATA_H_

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dualcycle/errors.h"
#include "dualcycle/rng.h"
#include "dualcycle/tensor.h"

namespace dualcycle {

struct SlotValue {
  std::string slot;
  std::string value;
  bool operator==(const SlotValue&) const = default;
  auto operator<=>(const SlotValue&) const = default;
};

struct SlotValueLabel {
  std::string slot;
  std::string value;
  int index = 0;
};

// "slot[value], slot[value], ..." -> ordered pairs; values lowercased,
// whitespace trimmed. Malformed syntax raises ParseError with a byte offset.
std::vector<SlotValue> parse_mr(const std::string& mr);

// Canonical rendering: sorted, lowercased "slot[value], ..." string. Used as
// the grouping key for multi-reference evaluation and satisfies
// parse_mr(format_mr(pairs)) == sorted(pairs).
std::string format_mr(std::vector<SlotValue> pairs);

// Lowercase, strip punctuation, whitespace-tokenize, then apply the suffix
// lemmatizer (plural -s/-es rules with an exception list plus a fixed
// irregular-form map).
std::vector<std::string> preprocess_text(const std::string& raw);

// Ordered label space over distinct slot-value pairs, sorted by slot then
// value. Index is a bijection onto [0, D).
class LabelSpace {
 public:
  static LabelSpace build(const std::vector<std::vector<SlotValue>>& frames);

  int size() const { return static_cast<int>(labels_.size()); }
  int find(const SlotValue& sv) const;  // -1 when absent
  const SlotValueLabel& label(int index) const { return labels_[index]; }
  const std::vector<SlotValueLabel>& labels() const { return labels_; }
  std::uint64_t content_hash() const;

 private:
  std::vector<SlotValueLabel> labels_;
  std::map<std::pair<std::string, std::string>, int> index_;
};

struct SemanticFrame {
  std::vector<std::uint8_t> labels;  // length D, values in {0,1}
  int popcount() const;
  std::set<int> active() const;
  Tensor as_tensor() const;
};

// Binary frame; pairs missing from the space are dropped and counted.
SemanticFrame encode_frame(const std::vector<SlotValue>& pairs,
                           const LabelSpace& space, int* dropped = nullptr);

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;

  static Vocabulary build(const std::vector<std::vector<std::string>>& corpus,
                          int min_freq);

  int id(const std::string& token) const;  // kUnk when absent
  const std::string& token(int id) const;
  int size() const { return static_cast<int>(id_to_token_.size()); }
  std::uint64_t content_hash() const;

 private:
  std::map<std::string, int> token_to_id_;
  std::vector<std::string> id_to_token_;
};

// Token-id sequence including begin/end markers: [bos, w1..wk, eos].
struct Utterance {
  std::vector<int> tokens;
  int content_length() const { return static_cast<int>(tokens.size()) - 2; }
  std::vector<int> content() const {
    return std::vector<int>(tokens.begin() + 1, tokens.end() - 1);
  }
};

Utterance encode_utterance(const std::vector<std::string>& tokens,
                           const Vocabulary& vocab, int max_len,
                           int* truncated = nullptr);

struct DataPair {
  SemanticFrame frame;
  Utterance utterance;
  std::string raw_mr;
  std::string raw_text;
};

struct RawRow {
  std::string mr;
  std::string ref;
};

// RFC-4180 CSV with header columns `mr` and `ref`.
std::vector<RawRow> load_e2e_csv(const std::string& path);

struct DataConfig {
  int max_len = 60;
  int vocab_min_freq = 2;
};

struct Dataset {
  LabelSpace space;
  Vocabulary vocab;
  std::vector<DataPair> train;
  std::vector<DataPair> test;
  int dropped_labels = 0;    // unknown slot-value pairs in test rows
  int truncated_train = 0;   // over-length utterances
  int truncated_test = 0;
  int skipped_empty = 0;     // rows whose text preprocesses to nothing

  std::string manifest() const;  // line-oriented UTF-8 audit record
  std::string manifest_sha1() const;
};

// Builds label space and vocabulary from the training rows, then encodes
// both splits. Throws EmptyDatasetError on an empty training set.
Dataset build_dataset(const std::vector<RawRow>& train_rows,
                      const std::vector<RawRow>& test_rows,
                      const DataConfig& config = {});

struct RefGroup {
  SemanticFrame frame;
  std::string key;                      // canonical MR string
  std::vector<std::vector<int>> refs;   // content token ids per reference
};

// Groups utterances sharing the same canonicalized MR as co-references.
std::vector<RefGroup> group_references(const std::vector<DataPair>& pairs,
                                       const LabelSpace& space);

// One padded batch: frames [B x D], tokens [B x (1 + L + 1)] with bos/eos,
// step mask [B x L+1] covering content plus the end marker.
struct Batch {
  std::vector<int> indices;
  Tensor frames;
  std::vector<std::vector<int>> tokens;  // row-major, padded with kPad
  std::vector<int> lengths;              // content lengths
  int max_steps = 0;                     // max(content length) + 1 (end marker)
};

Batch make_batch(const std::vector<DataPair>& pairs,
                 const std::vector<int>& indices, int label_count);

// Epoch-shuffled batches; the final short batch is emitted.
std::vector<Batch> batch_iter(const std::vector<DataPair>& pairs,
                              int batch_size, int label_count, Rng& rng);

}  // namespace dualcycle

#endif  // DUALCYCLE_DATA_H_
