#include "dualcycle/data_synth.h"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>

#include "dualcycle/rng.h"

namespace dualcycle {

namespace {

const std::vector<std::string> kNames = {
    "blue spice", "bibimbap house", "the golden curry", "the vaults",
    "the cricketers", "the phoenix", "the punter", "the waterman",
    "the plough", "the eagle", "cocum", "giraffe", "strada", "zizzi",
    "aromi", "clowns", "cotto", "fitzbillies", "green man", "loch fyne",
    "midsummer house", "taste of cambridge", "the cambridge blue",
    "the dumpling tree", "the golden palace", "the mill", "the olive grove"};

const std::vector<std::string> kNear = {
    "clare hall", "cafe adriatic", "burger king", "rainbow vegetarian cafe",
    "all bar one", "the six bells", "crowne plaza hotel", "cafe sicilia",
    "avalon", "cafe brazil", "the bakers", "yippee noodle bar",
    "express by holiday inn", "the rice boat", "the sorrento", "ranch",
    "the portland arms", "cafe rouge", "raja indian cuisine", "the nines",
    "riverside gallery", "city plaza", "king street market", "queens park",
    "station square", "harbour lights"};

const std::vector<std::string> kFood = {"chinese", "english",  "fast food",
                                        "french",  "indian",   "italian",
                                        "japanese"};
const std::vector<std::string> kPrice = {"cheap",         "moderate",
                                         "high",          "less than £20",
                                         "£20-25",        "more than £30"};
const std::vector<std::string> kRating = {"low",        "average",
                                          "high",       "1 out of 5",
                                          "3 out of 5", "5 out of 5"};
const std::vector<std::string> kArea = {"city centre", "riverside"};
const std::vector<std::string> kFamily = {"yes", "no"};
const std::vector<std::string> kEatType = {"coffee shop", "pub", "restaurant"};

struct SlotDef {
  const char* slot;
  const std::vector<std::string>* values;
};

const std::vector<SlotDef>& slot_defs() {
  static const std::vector<SlotDef> defs = {
      {"name", &kNames},          {"eatType", &kEatType},
      {"food", &kFood},           {"priceRange", &kPrice},
      {"customer rating", &kRating}, {"area", &kArea},
      {"familyFriendly", &kFamily},  {"near", &kNear}};
  return defs;
}

const std::string& pick(Rng& rng, const std::vector<std::string>& v) {
  return v[rng.uniform_int(static_cast<int>(v.size()))];
}

std::string get(const std::map<std::string, std::string>& mr,
                const std::string& slot) {
  auto it = mr.find(slot);
  return it == mr.end() ? "" : it->second;
}

bool word_value(const std::string& v) {
  return v == "cheap" || v == "moderate" || v == "high" || v == "low" ||
         v == "average";
}

// Clause realization pools. The test-only variants recombine lexemes that
// all occur in the training pools, mimicking crowd-written paraphrase drift
// without introducing out-of-vocabulary words.
std::string pick_variant(Rng& rng, bool test_style, double test_style_prob,
                         const std::vector<std::string>& train_pool,
                         const std::vector<std::string>& test_pool) {
  if (test_style && !test_pool.empty() && rng.uniform() < test_style_prob)
    return pick(rng, test_pool);
  return pick(rng, train_pool);
}

std::string realize(Rng& rng, const std::map<std::string, std::string>& mr,
                    bool test_style, double test_style_prob) {
  static const std::vector<std::string> kGenericVenue = {"place", "venue"};
  std::string name = get(mr, "name");
  std::string eat = get(mr, "eatType");
  std::string venue = eat.empty() ? pick(rng, kGenericVenue) : eat;
  std::string food = get(mr, "food");
  std::string price = get(mr, "priceRange");
  std::string rating = get(mr, "customer rating");
  std::string area = get(mr, "area");
  std::string family = get(mr, "familyFriendly");
  std::string near = get(mr, "near");

  auto variant = [&](const std::vector<std::string>& train_pool,
                     const std::vector<std::string>& test_pool) {
    return pick_variant(rng, test_style, test_style_prob, train_pool, test_pool);
  };

  std::vector<std::string> clauses;
  if (!food.empty())
    clauses.push_back(variant({"serving " + food + " food",
                               "that serves " + food + " food",
                               "offering " + food + " cuisine"},
                              {"that offers " + food + " food",
                               "serving " + food + " cuisine"}));
  if (!price.empty()) {
    if (word_value(price)) {
      clauses.push_back(variant({"with " + price + " prices",
                                 "in the " + price + " price range"},
                                {"with a " + price + " price range",
                                 "where prices are " + price}));
    } else {
      clauses.push_back(variant({"with a price range of " + price,
                                 "where prices are " + price},
                                {"in the " + price + " price range",
                                 "with prices of " + price}));
    }
  }
  if (!rating.empty()) {
    if (word_value(rating)) {
      clauses.push_back(variant({"with a " + rating + " customer rating",
                                 "rated " + rating + " by customers"},
                                {"rated " + rating,
                                 "with a customer rating of " + rating}));
    } else {
      clauses.push_back(variant({"with a customer rating of " + rating,
                                 "rated " + rating},
                                {"rated " + rating + " by customers",
                                 "with a " + rating + " customer rating"}));
    }
  }
  if (!family.empty()) {
    bool yes = family == "yes";
    clauses.push_back(variant(
        {yes ? "it is family friendly" : "it is not family friendly",
         yes ? "children are welcome" : "children are not welcome"},
        {yes ? "it welcomes children" : "it does not welcome children",
         yes ? "family friendly" : "not family friendly"}));
  }
  if (!near.empty())
    clauses.push_back(variant({"near " + near, "close to " + near},
                              {"located close to " + near, "near to " + near}));

  std::string out;
  bool area_done = false;
  int skeleton = rng.uniform_int(3);
  if (skeleton == 1 && !area.empty()) {
    out = variant({"in the " + area + " area there is a " + venue + " called " + name},
                  {"there is a " + venue + " called " + name + " in the " + area}) ;
    area_done = true;
  } else if (skeleton == 2) {
    out = name + " is a " + venue;
  } else {
    out = variant({name + " is a " + venue},
                  {name + ", a " + venue});
  }
  if (!area.empty() && !area_done) {
    out += " " + variant({"in the " + area + " area", "located in the " + area},
                         {"in " + area, "located in the " + area + " area"});
  }
  rng.shuffle(clauses);
  for (std::size_t i = 0; i < clauses.size(); ++i) {
    const std::string& c = clauses[i];
    if (c.rfind("it ", 0) == 0 || c.rfind("children", 0) == 0 ||
        c.rfind("family", 0) == 0 || c.rfind("not ", 0) == 0) {
      out += (rng.bernoulli(0.5) ? ". " : " and ") + c;
    } else {
      out += " " + c;
    }
  }
  out += ".";
  out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  return out;
}

std::string mr_string(const std::vector<SlotValue>& pairs) {
  std::string out;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (i) out += ", ";
    out += pairs[i].slot + "[" + pairs[i].value + "]";
  }
  return out;
}

std::vector<SlotValue> sample_mr(Rng& rng) {
  const auto& defs = slot_defs();
  std::vector<SlotValue> pairs;
  pairs.push_back({"name", pick(rng, kNames)});
  std::vector<int> others;
  for (std::size_t i = 1; i < defs.size(); ++i) others.push_back(static_cast<int>(i));
  rng.shuffle(others);
  int extra = 2 + rng.uniform_int(4);  // 3..6 slots total
  for (int k = 0; k < extra && k < static_cast<int>(others.size()); ++k) {
    const SlotDef& d = defs[others[k]];
    pairs.push_back({d.slot, pick(rng, *d.values)});
  }
  return pairs;
}

}  // namespace

SynthCorpus synth_e2e_corpus(const SynthConfig& config) {
  Rng rng(config.seed);
  SynthCorpus corpus;
  std::set<std::string> train_keys;
  std::vector<std::vector<SlotValue>> train_mrs;

  // Coverage pass: every one of the 79 slot values appears in some train MR.
  for (const SlotDef& d : slot_defs()) {
    for (const std::string& value : *d.values) {
      std::vector<SlotValue> pairs = sample_mr(rng);
      bool replaced = false;
      for (SlotValue& sv : pairs) {
        if (sv.slot == d.slot) {
          sv.value = value;
          replaced = true;
          break;
        }
      }
      if (!replaced) pairs.push_back({d.slot, value});
      train_mrs.push_back(pairs);
      train_keys.insert(format_mr(pairs));
    }
  }
  while (static_cast<int>(train_mrs.size()) < config.train_mrs) {
    std::vector<SlotValue> pairs = sample_mr(rng);
    std::string key = format_mr(pairs);
    if (train_keys.count(key)) continue;
    train_keys.insert(key);
    train_mrs.push_back(pairs);
  }
  rng.shuffle(train_mrs);

  for (const auto& pairs : train_mrs) {
    std::map<std::string, std::string> mr;
    for (const SlotValue& sv : pairs) mr[sv.slot] = sv.value;
    int refs = config.train_refs_min +
               rng.uniform_int(config.train_refs_max - config.train_refs_min + 1);
    for (int r = 0; r < refs; ++r)
      corpus.train.push_back(
          {mr_string(pairs), realize(rng, mr, false, 0.0)});
  }

  int made = 0;
  while (made < config.test_mrs) {
    std::vector<SlotValue> pairs = sample_mr(rng);
    std::string key = format_mr(pairs);
    if (train_keys.count(key)) continue;  // test MRs unseen in training
    train_keys.insert(key);
    std::map<std::string, std::string> mr;
    for (const SlotValue& sv : pairs) mr[sv.slot] = sv.value;
    int refs = config.test_refs_min +
               rng.uniform_int(config.test_refs_max - config.test_refs_min + 1);
    for (int r = 0; r < refs; ++r)
      corpus.test.push_back(
          {mr_string(pairs), realize(rng, mr, true, config.test_style_prob)});
    ++made;
  }
  return corpus;
}

void write_csv(const std::string& path, const std::vector<RawRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  auto quote = [](const std::string& s) {
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += "\"\"";
      else q.push_back(c);
    }
    return q + "\"";
  };
  out << "mr,ref\n";
  for (const RawRow& r : rows) out << quote(r.mr) << "," << quote(r.ref) << "\n";
}

}  // namespace dualcycle
