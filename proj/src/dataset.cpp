#include "spbs/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

namespace spbs {

using ordered_json = nlohmann::ordered_json;

Pos parse_pos(const std::string& s) {
  if (s == "noun") return Pos::Noun;
  if (s == "verb") return Pos::Verb;
  if (s == "adj") return Pos::Adj;
  if (s == "adv") return Pos::Adv;
  throw ParseError("unknown pos '" + s + "' (expected noun/verb/adj/adv)");
}

const char* pos_name(Pos pos) {
  switch (pos) {
    case Pos::Noun: return "noun";
    case Pos::Verb: return "verb";
    case Pos::Adj: return "adj";
    case Pos::Adv: return "adv";
  }
  return "noun";
}

SememeInventory SememeInventory::from_labels(const std::vector<std::string>& labels) {
  SememeInventory inv;
  for (const auto& label : labels) {
    if (label.empty()) throw ValidationError("empty sememe label");
    if (inv.index_.count(label) > 0) throw ValidationError("duplicate sememe label '" + label + "'");
    int id = static_cast<int>(inv.sememes_.size());
    inv.sememes_.push_back({id, label});
    inv.index_[label] = id;
  }
  inv.frequency_.assign(inv.sememes_.size(), 0);
  return inv;
}

const std::string& SememeInventory::label(int id) const {
  if (id < 0 || id >= size()) throw ContractError("sememe id out of range");
  return sememes_[static_cast<std::size_t>(id)].label;
}

int SememeInventory::id_of(const std::string& label) const {
  auto it = index_.find(label);
  return it == index_.end() ? -1 : it->second;
}

void SememeInventory::set_frequencies(std::vector<int> freq) {
  if (static_cast<int>(freq.size()) != size())
    throw ContractError("frequency vector size mismatch");
  frequency_ = std::move(freq);
}

std::uint64_t SememeInventory::fingerprint() const {
  std::string blob;
  for (const auto& s : sememes_) {
    blob += s.label;
    blob += '\n';
  }
  return fnv1a64(blob);
}

void WordSememeLexicon::add(const std::string& word, const std::string& language,
                            const std::set<int>& sememes) {
  if (language != "en" && language != "zh")
    throw ValidationError("lexicon language must be en or zh, got '" + language + "'");
  if (word.empty()) throw ValidationError("empty lexicon word");
  if (sememes.empty()) throw ValidationError("empty sememe set for lexicon word '" + word + "'");
  entries_[{word, language}] = sememes;
}

const std::set<int>* WordSememeLexicon::lookup(const std::string& word,
                                               const std::string& language) const {
  auto it = entries_.find({word, language});
  return it == entries_.end() ? nullptr : &it->second;
}

const Synset* Corpus::find(const std::string& id) const {
  for (const auto& s : synsets)
    if (s.id == id) return &s;
  return nullptr;
}

const Synset& Corpus::at(const std::string& id) const {
  const Synset* s = find(id);
  if (s == nullptr) throw ValidationError("unknown synset id '" + id + "'");
  return *s;
}

std::vector<const Synset*> Corpus::split_synsets(const std::vector<std::string>& ids) const {
  std::vector<const Synset*> out;
  out.reserve(ids.size());
  for (const auto& id : ids) out.push_back(&at(id));
  return out;
}

EmbeddingStore EmbeddingStore::load(const std::string& path) {
  auto lines = read_lines(path);
  if (lines.empty()) throw ParseError(path + ": missing store header");
  const std::string& header = lines[0];
  if (header.rfind("dim=", 0) != 0) throw ParseError(path + ": header must be 'dim=<d>'");
  EmbeddingStore store;
  try {
    store.dim_ = std::stoi(header.substr(4));
  } catch (const std::exception&) {
    throw ParseError(path + ": bad dimension in header '" + header + "'");
  }
  if (store.dim_ <= 0) throw ParseError(path + ": dimension must be positive");
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    auto fields = split_ws(lines[i]);
    if (static_cast<int>(fields.size()) != store.dim_ + 1)
      throw ParseError(path + ": line " + std::to_string(i + 1) + ": expected id plus " +
                       std::to_string(store.dim_) + " floats");
    Eigen::VectorXd v(store.dim_);
    for (int j = 0; j < store.dim_; ++j) {
      try {
        v(j) = std::stod(fields[static_cast<std::size_t>(j) + 1]);
      } catch (const std::exception&) {
        throw ParseError(path + ": line " + std::to_string(i + 1) + ": bad float '" +
                         fields[static_cast<std::size_t>(j) + 1] + "'");
      }
    }
    if (store.vectors_.count(fields[0]) > 0)
      throw ValidationError(path + ": line " + std::to_string(i + 1) + ": duplicate image id '" +
                            fields[0] + "'");
    store.vectors_[fields[0]] = v;
  }
  return store;
}

void EmbeddingStore::save(const std::string& path) const {
  std::ostringstream out;
  out << "dim=" << dim_ << "\n";
  for (const auto& [id, v] : vectors_) {
    out << id;
    for (int j = 0; j < dim_; ++j) out << ' ' << format_fixed(v(j));
    out << "\n";
  }
  write_file(path, out.str());
}

const Eigen::VectorXd& EmbeddingStore::get(const std::string& id) const {
  auto it = vectors_.find(id);
  if (it == vectors_.end()) throw ValidationError("unknown image id '" + id + "'");
  return it->second;
}

void EmbeddingStore::put(const std::string& id, const Eigen::VectorXd& v) {
  if (v.size() != dim_) throw ContractError("embedding dimension mismatch");
  vectors_[id] = v;
}

std::vector<std::string> EmbeddingStore::ids_with_prefix(const std::string& prefix) const {
  std::vector<std::string> out;
  for (auto it = vectors_.lower_bound(prefix); it != vectors_.end(); ++it) {
    if (it->first.rfind(prefix, 0) != 0) break;
    out.push_back(it->first);
  }
  return out;
}

std::vector<int> count_sememe_frequencies(int inventory_size,
                                          const std::vector<const Synset*>& train_synsets) {
  std::vector<int> freq(static_cast<std::size_t>(inventory_size), 0);
  for (const Synset* s : train_synsets)
    for (int id : s->gold_sememes) {
      if (id < 0 || id >= inventory_size) throw ValidationError("sememe id out of range");
      ++freq[static_cast<std::size_t>(id)];
    }
  return freq;
}

SememeInventory build_inventory(const std::vector<std::string>& labels,
                                const std::vector<const Synset*>& train_synsets) {
  SememeInventory inv = SememeInventory::from_labels(labels);
  inv.set_frequencies(count_sememe_frequencies(inv.size(), train_synsets));
  return inv;
}

namespace {

std::string loc(const std::string& file, std::size_t line) {
  return file + ": line " + std::to_string(line) + ": ";
}

Synset parse_synset(const ordered_json& rec, const SememeInventory& inventory,
                    bool inventory_declared, std::vector<std::string>* new_labels,
                    std::map<std::string, int>* label_ids, const std::string& where,
                    bool ignore_unknown = false) {
  if (!rec.is_object()) throw ParseError(where + "record is not a JSON object");
  Synset s;
  if (!rec.contains("id") || !rec["id"].is_string())
    throw ParseError(where + "missing or non-string field 'id'");
  s.id = rec["id"].get<std::string>();
  if (s.id.empty()) throw ParseError(where + "empty field 'id'");
  if (!rec.contains("pos") || !rec["pos"].is_string())
    throw ParseError(where + "missing or non-string field 'pos'");
  try {
    s.pos = parse_pos(rec["pos"].get<std::string>());
  } catch (const ParseError& e) {
    throw ParseError(where + "field 'pos': " + e.what());
  }
  if (!rec.contains("entries") || !rec["entries"].is_object())
    throw ParseError(where + "missing or non-object field 'entries'");
  for (const auto& [lang, entry] : rec["entries"].items()) {
    if (lang.empty()) throw ParseError(where + "empty language code in 'entries'");
    if (!entry.is_object()) throw ParseError(where + "entry for '" + lang + "' is not an object");
    MonolingualEntry mono;
    mono.language = lang;
    if (entry.contains("synonyms")) {
      if (!entry["synonyms"].is_array())
        throw ParseError(where + "field 'synonyms' of '" + lang + "' is not an array");
      for (const auto& w : entry["synonyms"]) {
        if (!w.is_string()) throw ParseError(where + "non-string synonym in '" + lang + "'");
        std::string word = w.get<std::string>();
        if (word.empty())
          throw ValidationError(where + "empty synonym string in '" + lang + "'");
        mono.synonyms.push_back(word);
      }
    }
    if (entry.contains("gloss") && !entry["gloss"].is_null()) {
      if (!entry["gloss"].is_string())
        throw ParseError(where + "field 'gloss' of '" + lang + "' is not a string");
      std::string gloss = entry["gloss"].get<std::string>();
      if (gloss.empty()) throw ValidationError(where + "empty gloss in '" + lang + "'");
      mono.gloss = gloss;
    }
    s.entries[lang] = std::move(mono);
  }
  if (s.entries.empty())
    throw ValidationError(where + "synset '" + s.id + "' has no monolingual entries");
  if (rec.contains("sememes")) {
    if (!rec["sememes"].is_array()) throw ParseError(where + "field 'sememes' is not an array");
    for (const auto& lbl : rec["sememes"]) {
      if (!lbl.is_string()) throw ParseError(where + "non-string sememe label");
      std::string label = lbl.get<std::string>();
      int id;
      if (inventory_declared) {
        id = inventory.id_of(label);
        if (id < 0) {
          if (ignore_unknown) continue;
          throw ValidationError(where + "unknown sememe label '" + label + "'");
        }
      } else {
        auto it = label_ids->find(label);
        if (it == label_ids->end()) {
          id = static_cast<int>(new_labels->size());
          new_labels->push_back(label);
          (*label_ids)[label] = id;
        } else {
          id = it->second;
        }
      }
      s.gold_sememes.insert(id);  // duplicates collapse here
    }
  }
  if (rec.contains("images")) {
    if (!rec["images"].is_array()) throw ParseError(where + "field 'images' is not an array");
    for (const auto& img : rec["images"]) {
      if (!img.is_string()) throw ParseError(where + "non-string image id");
      s.images.push_back(img.get<std::string>());
    }
  }
  if (rec.contains("external_key") && !rec["external_key"].is_null()) {
    if (!rec["external_key"].is_string())
      throw ParseError(where + "field 'external_key' is not a string");
    s.external_key = rec["external_key"].get<std::string>();
  }
  return s;
}

DatasetSplit parse_split(const std::string& path) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
  if (!doc.is_object()) throw ParseError(path + ": split file must be a JSON object");
  DatasetSplit split;
  auto read_ids = [&](const char* key, std::vector<std::string>* out) {
    if (!doc.contains(key)) return;
    if (!doc[key].is_array()) throw ParseError(path + ": field '" + std::string(key) + "' is not an array");
    for (const auto& id : doc[key]) {
      if (!id.is_string()) throw ParseError(path + ": non-string id in '" + std::string(key) + "'");
      out->push_back(id.get<std::string>());
    }
  };
  read_ids("train", &split.train);
  read_ids("valid", &split.valid);
  read_ids("test", &split.test);
  return split;
}

void validate_split(const Corpus& corpus, const std::string& dir) {
  std::unordered_set<std::string> corpus_ids;
  for (const auto& s : corpus.synsets) corpus_ids.insert(s.id);
  std::unordered_set<std::string> seen;
  auto check = [&](const std::vector<std::string>& ids, const char* name) {
    for (const auto& id : ids) {
      if (corpus_ids.count(id) == 0)
        throw ValidationError(dir + ": split '" + std::string(name) + "' references unknown synset '" +
                              id + "'");
      if (!seen.insert(id).second)
        throw ValidationError(dir + ": synset '" + id + "' appears in more than one split");
    }
  };
  check(corpus.split.train, "train");
  check(corpus.split.valid, "valid");
  check(corpus.split.test, "test");
  for (const auto& s : corpus.synsets)
    if (seen.count(s.id) == 0)
      throw ValidationError(dir + ": synset '" + s.id + "' is missing from the split");
}

}  // namespace

Corpus load_corpus(const std::string& dir) {
  namespace fs = std::filesystem;
  const std::string corpus_path = dir + "/corpus.jsonl";
  const std::string sememes_path = dir + "/sememes.txt";
  const std::string split_path = dir + "/split.json";

  Corpus corpus;
  bool inventory_declared = fs::exists(sememes_path);
  std::vector<std::string> labels;
  if (inventory_declared) {
    for (const auto& line : read_lines(sememes_path)) {
      std::string label = trim(line);
      if (!label.empty()) labels.push_back(label);
    }
    corpus.inventory = SememeInventory::from_labels(labels);
  }

  std::vector<std::string> discovered_labels;
  std::map<std::string, int> label_ids;
  std::unordered_set<std::string> ids;
  auto lines = read_lines(corpus_path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    ordered_json rec;
    try {
      rec = ordered_json::parse(lines[i]);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(loc(corpus_path, i + 1) + e.what());
    }
    Synset s = parse_synset(rec, corpus.inventory, inventory_declared, &discovered_labels,
                            &label_ids, loc(corpus_path, i + 1));
    if (!ids.insert(s.id).second)
      throw ValidationError(loc(corpus_path, i + 1) + "duplicate synset id '" + s.id + "'");
    corpus.synsets.push_back(std::move(s));
  }
  if (!inventory_declared) corpus.inventory = SememeInventory::from_labels(discovered_labels);

  for (const auto& s : corpus.synsets)
    for (int id : s.gold_sememes)
      if (id < 0 || id >= corpus.inventory.size())
        throw ValidationError(dir + ": synset '" + s.id + "' has out-of-range sememe id");

  if (fs::exists(split_path)) {
    corpus.split = parse_split(split_path);
  } else {
    for (const auto& s : corpus.synsets) corpus.split.train.push_back(s.id);
  }
  validate_split(corpus, dir);

  corpus.inventory.set_frequencies(
      count_sememe_frequencies(corpus.inventory.size(), corpus.split_synsets(corpus.split.train)));
  return corpus;
}

std::vector<Synset> load_synsets_jsonl(const std::string& path, const SememeInventory& inventory,
                                       bool ignore_unknown) {
  std::vector<Synset> out;
  std::unordered_set<std::string> ids;
  auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    ordered_json rec;
    try {
      rec = ordered_json::parse(lines[i]);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(loc(path, i + 1) + e.what());
    }
    Synset s = parse_synset(rec, inventory, /*inventory_declared=*/true, nullptr, nullptr,
                            loc(path, i + 1), ignore_unknown);
    if (!ids.insert(s.id).second)
      throw ValidationError(loc(path, i + 1) + "duplicate synset id '" + s.id + "'");
    out.push_back(std::move(s));
  }
  return out;
}

std::string serialize_corpus(const Corpus& corpus) {
  std::ostringstream out;
  for (const auto& s : corpus.synsets) {
    ordered_json rec;
    rec["id"] = s.id;
    rec["pos"] = pos_name(s.pos);
    ordered_json entries = ordered_json::object();
    for (const auto& [lang, entry] : s.entries) {
      ordered_json e = ordered_json::object();
      e["synonyms"] = entry.synonyms;
      if (entry.gloss) e["gloss"] = *entry.gloss;
      entries[lang] = e;
    }
    rec["entries"] = entries;
    std::vector<std::string> labels;
    for (int id : s.gold_sememes) labels.push_back(corpus.inventory.label(id));
    rec["sememes"] = labels;
    rec["images"] = s.images;
    if (s.external_key) rec["external_key"] = *s.external_key;
    out << rec.dump() << "\n";
  }
  return out.str();
}

void save_corpus(const Corpus& corpus, const std::string& dir) {
  std::filesystem::create_directories(dir);
  write_file(dir + "/corpus.jsonl", serialize_corpus(corpus));
  std::string labels;
  for (const auto& s : corpus.inventory.sememes()) labels += s.label + "\n";
  write_file(dir + "/sememes.txt", labels);
  ordered_json split;
  split["train"] = corpus.split.train;
  split["valid"] = corpus.split.valid;
  split["test"] = corpus.split.test;
  write_file(dir + "/split.json", split.dump(2) + "\n");
}

WordSememeLexicon load_lexicon(const std::string& path, const SememeInventory& inventory) {
  WordSememeLexicon lex;
  auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    auto fields = split(lines[i], '\t');
    if (fields.size() != 3)
      throw ParseError(loc(path, i + 1) + "expected 3 tab-separated fields");
    std::set<int> sememes;
    for (const auto& label : split(fields[2], ',')) {
      int id = inventory.id_of(trim(label));
      if (id < 0)
        throw ValidationError(loc(path, i + 1) + "unknown sememe label '" + trim(label) + "'");
      sememes.insert(id);
    }
    try {
      lex.add(fields[0], fields[1], sememes);
    } catch (const ValidationError& e) {
      throw ValidationError(loc(path, i + 1) + e.what());
    }
  }
  return lex;
}

void save_lexicon(const WordSememeLexicon& lexicon, const SememeInventory& inventory,
                  const std::string& path) {
  std::ostringstream out;
  for (const auto& [key, sememes] : lexicon.entries()) {
    std::vector<std::string> labels;
    for (int id : sememes) labels.push_back(inventory.label(id));
    out << key.first << '\t' << key.second << '\t' << join(labels, ",") << "\n";
  }
  write_file(path, out.str());
}

}  // namespace spbs
