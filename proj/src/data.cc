#include "dualcycle/data.h"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "dualcycle/hash.h"

namespace dualcycle {

namespace {

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// Characters trimmed out of text before tokenization. Hyphens, currency
// signs and digits are kept so values like "£20-25" survive as one token.
bool is_punct(char c) {
  static const std::string punct = ".,!?;:\"'()[]{}*";
  return punct.find(c) != std::string::npos;
}

// Plural suffix rules skip these (and anything too short to strip safely).
const std::set<std::string>& plural_exceptions() {
  static const std::set<std::string> ex = {
      "is",   "its",  "this", "was",  "has",  "as",   "does", "goes",
      "yes",  "less", "plus", "gas",  "us",   "his",  "thus", "delicious",
      "serious", "various", "famous", "priced", "called"};
  return ex;
}

// Irregular forms normalized explicitly; the generic rules leave -ed/-ing
// words alone so surface forms like "called" and "priced" stay intact.
const std::map<std::string, std::string>& irregular_map() {
  static const std::map<std::string, std::string> m = {
      {"children", "child"}, {"women", "woman"}, {"men", "man"},
      {"located", "locate"}, {"situated", "situate"}, {"rated", "rate"},
      {"serving", "serve"},  {"offering", "offer"},   {"dining", "dine"}};
  return m;
}

std::string lemmatize(const std::string& tok) {
  auto it = irregular_map().find(tok);
  if (it != irregular_map().end()) return it->second;
  if (plural_exceptions().count(tok)) return tok;
  std::size_t n = tok.size();
  // -ies -> -y  (cities -> city)
  if (n > 4 && tok.compare(n - 3, 3, "ies") == 0)
    return tok.substr(0, n - 3) + "y";
  // -ses/-xes/-zes/-ches/-shes -> strip "es"
  if (n > 4 && tok.compare(n - 2, 2, "es") == 0) {
    char c = tok[n - 3];
    if (c == 's' || c == 'x' || c == 'z' ||
        (n > 5 && (tok.compare(n - 4, 2, "ch") == 0 ||
                   tok.compare(n - 4, 2, "sh") == 0)))
      return tok.substr(0, n - 2);
  }
  // plain plural -s (not -ss, -us, -is)
  if (n > 3 && tok.back() == 's') {
    char c = tok[n - 2];
    if (c != 's' && c != 'u' && c != 'i') return tok.substr(0, n - 1);
  }
  return tok;
}

bool has_digit(const std::string& s) {
  return std::any_of(s.begin(), s.end(),
                     [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

}  // namespace

std::vector<SlotValue> parse_mr(const std::string& mr) {
  std::vector<SlotValue> out;
  std::size_t i = 0;
  const std::size_t n = mr.size();
  while (true) {
    while (i < n && (mr[i] == ' ' || mr[i] == '\t')) ++i;
    if (i >= n) break;
    std::size_t open = mr.find('[', i);
    if (open == std::string::npos)
      throw ParseError("expected '[' after slot name", i);
    std::string slot = trim(mr.substr(i, open - i));
    if (slot.empty()) throw ParseError("empty slot name", i);
    if (slot.find(']') != std::string::npos || slot.find(',') != std::string::npos)
      throw ParseError("malformed slot name '" + slot + "'", i);
    std::size_t close = mr.find(']', open + 1);
    if (close == std::string::npos)
      throw ParseError("unterminated value for slot '" + slot + "'", open);
    std::string value = lower(trim(mr.substr(open + 1, close - open - 1)));
    out.push_back({slot, value});
    i = close + 1;
    while (i < n && (mr[i] == ' ' || mr[i] == '\t')) ++i;
    if (i >= n) break;
    if (mr[i] != ',') throw ParseError("expected ',' between pairs", i);
    ++i;
  }
  return out;
}

std::string format_mr(std::vector<SlotValue> pairs) {
  for (SlotValue& p : pairs) {
    p.slot = lower(trim(p.slot));
    p.value = lower(trim(p.value));
  }
  std::sort(pairs.begin(), pairs.end());
  std::string out;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (i) out += ", ";
    out += pairs[i].slot + "[" + pairs[i].value + "]";
  }
  return out;
}

std::vector<std::string> preprocess_text(const std::string& raw) {
  std::string cleaned;
  cleaned.reserve(raw.size());
  for (char c : raw) cleaned.push_back(is_punct(c) ? ' ' : c);
  std::vector<std::string> tokens;
  std::istringstream iss(lower(cleaned));
  std::string tok;
  while (iss >> tok) {
    if (!has_digit(tok)) tok = lemmatize(tok);
    tokens.push_back(tok);
  }
  return tokens;
}

LabelSpace LabelSpace::build(const std::vector<std::vector<SlotValue>>& frames) {
  if (frames.empty()) throw EmptyDatasetError("label space from empty training set");
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& frame : frames)
    for (const SlotValue& sv : frame) seen.insert({sv.slot, lower(sv.value)});
  LabelSpace space;
  int idx = 0;
  for (const auto& [slot, value] : seen) {
    space.labels_.push_back({slot, value, idx});
    space.index_[{slot, value}] = idx;
    ++idx;
  }
  return space;
}

int LabelSpace::find(const SlotValue& sv) const {
  auto it = index_.find({sv.slot, lower(sv.value)});
  return it == index_.end() ? -1 : it->second;
}

std::uint64_t LabelSpace::content_hash() const {
  std::string buf;
  for (const auto& l : labels_) buf += l.slot + "\x1f" + l.value + "\x1e";
  return fnv1a64(buf);
}

int SemanticFrame::popcount() const {
  int n = 0;
  for (std::uint8_t b : labels) n += b;
  return n;
}

std::set<int> SemanticFrame::active() const {
  std::set<int> out;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i]) out.insert(static_cast<int>(i));
  return out;
}

Tensor SemanticFrame::as_tensor() const {
  Tensor t({static_cast<int>(labels.size())});
  for (std::size_t i = 0; i < labels.size(); ++i)
    t.at(static_cast<std::int64_t>(i)) = labels[i];
  return t;
}

SemanticFrame encode_frame(const std::vector<SlotValue>& pairs,
                           const LabelSpace& space, int* dropped) {
  SemanticFrame f;
  f.labels.assign(space.size(), 0);
  for (const SlotValue& sv : pairs) {
    int idx = space.find(sv);
    if (idx < 0) {
      if (dropped) ++*dropped;
      continue;
    }
    f.labels[idx] = 1;
  }
  return f;
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& corpus,
                             int min_freq) {
  std::map<std::string, int> freq;
  for (const auto& sent : corpus)
    for (const auto& tok : sent) freq[tok] += 1;
  Vocabulary v;
  v.id_to_token_ = {"<pad>", "<unk>", "<bos>", "<eos>"};
  for (int i = 0; i < 4; ++i) v.token_to_id_[v.id_to_token_[i]] = i;
  for (const auto& [tok, count] : freq) {
    if (count < min_freq) continue;
    v.token_to_id_[tok] = static_cast<int>(v.id_to_token_.size());
    v.id_to_token_.push_back(tok);
  }
  return v;
}

int Vocabulary::id(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size()) throw LabelError("token id out of range");
  return id_to_token_[id];
}

std::uint64_t Vocabulary::content_hash() const {
  std::string buf;
  for (const auto& t : id_to_token_) buf += t + "\x1e";
  return fnv1a64(buf);
}

Utterance encode_utterance(const std::vector<std::string>& tokens,
                           const Vocabulary& vocab, int max_len,
                           int* truncated) {
  Utterance u;
  u.tokens.push_back(Vocabulary::kBos);
  int kept = std::min(static_cast<int>(tokens.size()), max_len);
  if (kept < static_cast<int>(tokens.size()) && truncated) ++*truncated;
  for (int i = 0; i < kept; ++i) u.tokens.push_back(vocab.id(tokens[i]));
  u.tokens.push_back(Vocabulary::kEos);
  return u;
}

std::vector<RawRow> load_e2e_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string content((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  // RFC-4180: quoted fields may contain commas, newlines and "" escapes.
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < content.size(); ++i) {
    char c = content[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < content.size() && content[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      row.push_back(field);
      field.clear();
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < content.size() && content[i + 1] == '\n') ++i;
      row.push_back(field);
      field.clear();
      if (row.size() > 1 || !row[0].empty()) rows.push_back(row);
      row.clear();
    } else {
      field.push_back(c);
    }
  }
  if (!field.empty() || !row.empty()) {
    row.push_back(field);
    rows.push_back(row);
  }
  if (rows.empty()) throw EmptyDatasetError("empty CSV " + path);

  int mr_col = -1, ref_col = -1;
  for (std::size_t c = 0; c < rows[0].size(); ++c) {
    std::string h = lower(trim(rows[0][c]));
    if (h == "mr") mr_col = static_cast<int>(c);
    if (h == "ref") ref_col = static_cast<int>(c);
  }
  if (mr_col < 0 || ref_col < 0)
    throw ParseError("CSV header must contain 'mr' and 'ref' columns", 0);
  std::vector<RawRow> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (static_cast<int>(rows[r].size()) <= std::max(mr_col, ref_col)) continue;
    out.push_back({rows[r][mr_col], rows[r][ref_col]});
  }
  return out;
}

Dataset build_dataset(const std::vector<RawRow>& train_rows,
                      const std::vector<RawRow>& test_rows,
                      const DataConfig& config) {
  if (train_rows.empty()) throw EmptyDatasetError("no training rows");
  Dataset ds;

  std::vector<std::vector<SlotValue>> train_frames;
  std::vector<std::vector<std::string>> train_tokens;
  train_frames.reserve(train_rows.size());
  for (const RawRow& row : train_rows) {
    train_frames.push_back(parse_mr(row.mr));
    train_tokens.push_back(preprocess_text(row.ref));
  }
  ds.space = LabelSpace::build(train_frames);
  ds.vocab = Vocabulary::build(train_tokens, config.vocab_min_freq);

  auto encode_rows = [&](const std::vector<RawRow>& rows,
                         const std::vector<std::vector<SlotValue>>* frames,
                         const std::vector<std::vector<std::string>>* tokens,
                         int* truncated, std::vector<DataPair>* out) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      std::vector<SlotValue> pairs = frames ? (*frames)[i] : parse_mr(rows[i].mr);
      std::vector<std::string> toks =
          tokens ? (*tokens)[i] : preprocess_text(rows[i].ref);
      if (toks.empty()) {
        ++ds.skipped_empty;
        continue;
      }
      DataPair p;
      p.frame = encode_frame(pairs, ds.space, &ds.dropped_labels);
      p.utterance = encode_utterance(toks, ds.vocab, config.max_len, truncated);
      p.raw_mr = rows[i].mr;
      p.raw_text = rows[i].ref;
      out->push_back(std::move(p));
    }
  };
  encode_rows(train_rows, &train_frames, &train_tokens, &ds.truncated_train,
              &ds.train);
  encode_rows(test_rows, nullptr, nullptr, &ds.truncated_test, &ds.test);
  return ds;
}

std::string Dataset::manifest() const {
  std::ostringstream os;
  os << "labels " << space.size() << "\n";
  for (const auto& l : space.labels())
    os << "label " << l.index << " " << l.slot << " " << l.value << "\n";
  os << "vocab " << vocab.size() << "\n";
  for (int i = 0; i < vocab.size(); ++i) os << "token " << i << " " << vocab.token(i) << "\n";
  os << "train_pairs " << train.size() << "\n";
  os << "test_pairs " << test.size() << "\n";
  os << "dropped_labels " << dropped_labels << "\n";
  os << "truncated_train " << truncated_train << "\n";
  os << "truncated_test " << truncated_test << "\n";
  os << "skipped_empty " << skipped_empty << "\n";
  os << "label_space_hash " << hex64(space.content_hash()) << "\n";
  os << "vocab_hash " << hex64(vocab.content_hash()) << "\n";
  return os.str();
}

std::string Dataset::manifest_sha1() const { return sha1_hex(manifest()); }

std::vector<RefGroup> group_references(const std::vector<DataPair>& pairs,
                                       const LabelSpace& space) {
  std::map<std::string, RefGroup> groups;
  std::vector<std::string> order;
  for (const DataPair& p : pairs) {
    std::string key = format_mr(parse_mr(p.raw_mr));
    auto it = groups.find(key);
    if (it == groups.end()) {
      RefGroup g;
      g.key = key;
      g.frame = p.frame;
      groups[key] = g;
      order.push_back(key);
      it = groups.find(key);
    }
    it->second.refs.push_back(p.utterance.content());
  }
  std::vector<RefGroup> out;
  out.reserve(order.size());
  for (const std::string& key : order) out.push_back(groups[key]);
  return out;
}

Batch make_batch(const std::vector<DataPair>& pairs,
                 const std::vector<int>& indices, int label_count) {
  Batch b;
  b.indices = indices;
  int n = static_cast<int>(indices.size());
  b.frames = Tensor({n, label_count});
  int max_content = 0;
  for (int i = 0; i < n; ++i) {
    const DataPair& p = pairs[indices[i]];
    max_content = std::max(max_content, p.utterance.content_length());
  }
  b.max_steps = max_content + 1;  // + end marker
  for (int i = 0; i < n; ++i) {
    const DataPair& p = pairs[indices[i]];
    for (int d = 0; d < label_count; ++d) b.frames.at(i, d) = p.frame.labels[d];
    std::vector<int> padded(static_cast<std::size_t>(b.max_steps) + 2,
                            Vocabulary::kPad);
    for (std::size_t t = 0; t < p.utterance.tokens.size(); ++t)
      padded[t] = p.utterance.tokens[t];
    b.tokens.push_back(std::move(padded));
    b.lengths.push_back(p.utterance.content_length());
  }
  return b;
}

std::vector<Batch> batch_iter(const std::vector<DataPair>& pairs,
                              int batch_size, int label_count, Rng& rng) {
  if (batch_size < 1) throw ContractError("batch_size must be >= 1");
  std::vector<int> order(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) order[i] = static_cast<int>(i);
  rng.shuffle(order);
  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    std::size_t end = std::min(order.size(), start + batch_size);
    std::vector<int> idx(order.begin() + start, order.begin() + end);
    batches.push_back(make_batch(pairs, idx, label_count));
  }
  return batches;
}

}  // namespace dualcycle
