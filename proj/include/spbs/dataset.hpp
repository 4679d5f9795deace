#pragma once

#include <Eigen/Core>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "spbs/common.hpp"

namespace spbs {

enum class Pos { Noun, Verb, Adj, Adv };

Pos parse_pos(const std::string& s);
const char* pos_name(Pos pos);

struct Sememe {
  int id = 0;
  std::string label;
};

// The global sememe label space with stable dense ids and per-sememe
// training-set frequencies.
class SememeInventory {
 public:
  SememeInventory() = default;
  static SememeInventory from_labels(const std::vector<std::string>& labels);

  int size() const { return static_cast<int>(sememes_.size()); }
  const std::vector<Sememe>& sememes() const { return sememes_; }
  const std::string& label(int id) const;
  // -1 when the label is unknown.
  int id_of(const std::string& label) const;

  const std::vector<int>& frequency() const { return frequency_; }
  void set_frequencies(std::vector<int> freq);

  // Hash over the ordered label list; used to detect checkpoint/corpus
  // mismatches.
  std::uint64_t fingerprint() const;

 private:
  std::vector<Sememe> sememes_;
  std::map<std::string, int> index_;
  std::vector<int> frequency_;
};

struct MonolingualEntry {
  std::string language;
  std::vector<std::string> synonyms;
  std::optional<std::string> gloss;

  bool operator==(const MonolingualEntry&) const = default;
};

struct Synset {
  std::string id;
  Pos pos = Pos::Noun;
  // At most one entry per language, ordered by language code.
  std::map<std::string, MonolingualEntry> entries;
  std::set<int> gold_sememes;
  std::vector<std::string> images;
  std::optional<std::string> external_key;

  bool operator==(const Synset&) const = default;
};

struct DatasetSplit {
  std::vector<std::string> train;
  std::vector<std::string> valid;
  std::vector<std::string> test;
};

// (word surface form, language in {en, zh}) -> sememe id set.
class WordSememeLexicon {
 public:
  void add(const std::string& word, const std::string& language, const std::set<int>& sememes);
  const std::set<int>* lookup(const std::string& word, const std::string& language) const;
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }
  const std::map<std::pair<std::string, std::string>, std::set<int>>& entries() const {
    return entries_;
  }

 private:
  std::map<std::pair<std::string, std::string>, std::set<int>> entries_;
};

struct Corpus {
  std::vector<Synset> synsets;
  SememeInventory inventory;
  DatasetSplit split;

  const Synset* find(const std::string& id) const;
  const Synset& at(const std::string& id) const;
  std::vector<const Synset*> split_synsets(const std::vector<std::string>& ids) const;
};

// Per-image fixed-dimension embedding vectors, file-backed.
// Format: header "dim=<d>", then "<image-id> <f> <f> ..." per line.
class EmbeddingStore {
 public:
  EmbeddingStore() = default;
  explicit EmbeddingStore(int dim) : dim_(dim) {}

  static EmbeddingStore load(const std::string& path);
  void save(const std::string& path) const;

  int dim() const { return dim_; }
  bool has(const std::string& id) const { return vectors_.count(id) > 0; }
  const Eigen::VectorXd& get(const std::string& id) const;
  void put(const std::string& id, const Eigen::VectorXd& v);
  std::size_t size() const { return vectors_.size(); }
  std::vector<std::string> ids_with_prefix(const std::string& prefix) const;
  const std::map<std::string, Eigen::VectorXd>& vectors() const { return vectors_; }

 private:
  int dim_ = 0;
  std::map<std::string, Eigen::VectorXd> vectors_;
};

// Recomputes per-sememe frequencies as the number of training synsets whose
// gold set contains the sememe.
std::vector<int> count_sememe_frequencies(int inventory_size,
                                          const std::vector<const Synset*>& train_synsets);

SememeInventory build_inventory(const std::vector<std::string>& labels,
                                const std::vector<const Synset*>& train_synsets);

// Loads corpus.jsonl plus optional sememes.txt / split.json from a directory
// and validates every schema invariant. Violations name the record line.
Corpus load_corpus(const std::string& dir);

// Parses bare synset records against a fixed inventory; used by prediction,
// where gold labels may be absent. Unknown labels are dropped when
// `ignore_unknown` is set.
std::vector<Synset> load_synsets_jsonl(const std::string& path, const SememeInventory& inventory,
                                       bool ignore_unknown);

std::string serialize_corpus(const Corpus& corpus);
void save_corpus(const Corpus& corpus, const std::string& dir);

WordSememeLexicon load_lexicon(const std::string& path, const SememeInventory& inventory);
void save_lexicon(const WordSememeLexicon& lexicon, const SememeInventory& inventory,
                  const std::string& path);

}  // namespace spbs
