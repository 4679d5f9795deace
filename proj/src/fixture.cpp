#include "spbs/fixture.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "json.hpp"

namespace spbs {

namespace {

const std::vector<std::string> kSyllables = {"ba", "ce", "di", "fo", "gu", "ha", "ki",
                                             "lo", "mu", "ne", "pa", "re", "si", "to",
                                             "vu", "wa", "xe", "yo", "zu", "qa"};

std::string syllable_word(int k, int syllables) {
  std::string out;
  int v = k;
  for (int i = 0; i < syllables; ++i) {
    out += kSyllables[static_cast<std::size_t>(v) % kSyllables.size()];
    v /= static_cast<int>(kSyllables.size());
  }
  return out;
}

std::string sememe_label(int k) {
  std::string base = syllable_word(k, 2);
  int cycle = k / static_cast<int>(kSyllables.size() * kSyllables.size());
  if (cycle > 0) base += std::to_string(cycle);
  return base;
}

std::string cjk_char(int offset) {
  int cp = 0x4E00 + offset;
  std::string out;
  out += static_cast<char>(0xE0 | (cp >> 12));
  out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
  out += static_cast<char>(0x80 | (cp & 0x3F));
  return out;
}

std::string indicative_token(int sememe, const std::string& language) {
  if (language == "zh") return cjk_char((2 * sememe) % 2000) + cjk_char((2 * sememe + 1) % 2000);
  if (language == "en") return sememe_label(sememe);
  if (language == "fr") return sememe_label(sememe) + "eur";
  return sememe_label(sememe) + "_" + language;
}

std::string filler_token(int j, const std::string& language) {
  if (language == "zh") return cjk_char(2000 + (2 * j) % 2000) + cjk_char(2000 + (2 * j + 1) % 2000);
  if (language == "en") return syllable_word(j, 2) + "n";
  if (language == "fr") return syllable_word(j, 2) + "re";
  return syllable_word(j, 2) + "_" + language;
}

Pos draw_pos(Rng* rng) {
  double u = rng->uniform();
  if (u < 0.55) return Pos::Noun;
  if (u < 0.75) return Pos::Verb;
  if (u < 0.92) return Pos::Adj;
  return Pos::Adv;
}

Eigen::VectorXd random_vector(int dim, Rng* rng, double stddev = 1.0) {
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v(i) = rng->normal(0.0, stddev);
  return v;
}

}  // namespace

void FixtureParams::validate() const {
  if (sememes <= 0) throw ConfigError("fixture requires at least one sememe");
  if (synsets <= 0) throw ConfigError("fixture requires at least one synset");
  if (languages.empty()) throw ConfigError("fixture requires at least one language");
  if (images_per_synset < 0) throw ConfigError("images_per_synset must be non-negative");
  if (!(outlier_fraction >= 0.0 && outlier_fraction <= 1.0))
    throw ConfigError("outlier_fraction must lie in [0, 1]");
  if (max_gold <= 0 || max_gold > sememes)
    throw ConfigError("max_gold must lie in [1, sememes]");
  if (image_dim <= 0) throw ConfigError("image_dim must be positive");
  if (!(train_fraction > 0.0 && valid_fraction >= 0.0 &&
        train_fraction + valid_fraction <= 1.0))
    throw ConfigError("split fractions are infeasible");
  if (std::find(languages.begin(), languages.end(), "en") == languages.end())
    throw ConfigError("fixture requires English among the languages");
}

FixtureOutput generate_fixture(const FixtureParams& params) {
  params.validate();
  Rng rng(params.seed);
  FixtureOutput out;

  std::vector<std::string> labels;
  for (int k = 0; k < params.sememes; ++k) labels.push_back(sememe_label(k));

  // Word -> sememe lexicon over the indicative tokens; every seventh token
  // carries a second sememe so masking targets are occasionally polysemous.
  for (int k = 0; k < params.sememes; ++k) {
    std::set<int> senses{k};
    if (params.sememes > 1 && k % 7 == 0) senses.insert((k + 1) % params.sememes);
    out.lexicon.add(indicative_token(k, "en"), "en", senses);
    out.lexicon.add(indicative_token(k, "zh"), "zh", senses);
  }

  // Zipf-like sememe popularity for gold-set sampling.
  std::vector<double> weights(static_cast<std::size_t>(params.sememes));
  double weight_total = 0.0;
  for (int k = 0; k < params.sememes; ++k) {
    weights[static_cast<std::size_t>(k)] = 1.0 / std::pow(static_cast<double>(k + 1), 0.8);
    weight_total += weights[static_cast<std::size_t>(k)];
  }
  auto draw_sememe = [&]() {
    double u = rng.uniform() * weight_total;
    for (int k = 0; k < params.sememes; ++k) {
      u -= weights[static_cast<std::size_t>(k)];
      if (u <= 0.0) return k;
    }
    return params.sememes - 1;
  };

  std::vector<Eigen::VectorXd> centers;
  for (int k = 0; k < params.sememes; ++k)
    centers.push_back(random_vector(params.image_dim, &rng));

  out.images = EmbeddingStore(params.image_dim);
  out.external_images = EmbeddingStore(params.image_dim);
  const double outlier_distance =
      params.outlier_distance_scale * params.cluster_noise * std::sqrt(params.image_dim);

  int external_counter = 0;
  for (int n = 0; n < params.synsets; ++n) {
    Synset synset;
    synset.id = "syn" + std::to_string(n);
    synset.pos = draw_pos(&rng);

    int gold_count = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(params.max_gold)));
    while (static_cast<int>(synset.gold_sememes.size()) < gold_count)
      synset.gold_sememes.insert(draw_sememe());
    std::vector<int> gold(synset.gold_sememes.begin(), synset.gold_sememes.end());

    for (const auto& lang : params.languages) {
      if (lang != "en" && !rng.bernoulli(params.language_coverage)) continue;
      MonolingualEntry entry;
      entry.language = lang;
      int synonym_count = 1 + static_cast<int>(rng.below(3));
      for (int i = 0; i < synonym_count; ++i)
        entry.synonyms.push_back("s" + syllable_word(static_cast<int>(rng.below(8000)), 3));
      std::vector<std::string> tokens;
      if (params.gloss_signal)
        for (int s : gold) tokens.push_back(indicative_token(s, lang));
      for (int i = 0; i < params.distractors; ++i)
        tokens.push_back(filler_token(static_cast<int>(rng.below(
                             static_cast<std::uint64_t>(params.filler_vocab))), lang));
      rng.shuffle(tokens);
      entry.gloss = join(tokens, lang == "zh" ? "" : " ");
      synset.entries[lang] = std::move(entry);
    }

    // Image bag: cluster samples for the gold sememes plus planted outliers.
    if (params.images_per_synset > 0) {
      int m = params.images_per_synset;
      int n_out = std::min(m, static_cast<int>(std::llround(params.outlier_fraction * m)));
      std::vector<bool> outlier_slot(static_cast<std::size_t>(m), false);
      {
        std::vector<int> slots(static_cast<std::size_t>(m));
        for (int i = 0; i < m; ++i) slots[static_cast<std::size_t>(i)] = i;
        rng.shuffle(slots);
        for (int i = 0; i < n_out; ++i) outlier_slot[static_cast<std::size_t>(slots[static_cast<std::size_t>(i)])] = true;
      }
      std::vector<std::string> planted;
      for (int i = 0; i < m; ++i) {
        std::string image_id = synset.id + "_img" + std::to_string(i);
        Eigen::VectorXd v;
        std::string source;
        const Eigen::VectorXd& anchor = centers[static_cast<std::size_t>(gold[0])];
        if (outlier_slot[static_cast<std::size_t>(i)]) {
          Eigen::VectorXd dir = random_vector(params.image_dim, &rng);
          dir.normalize();
          v = (params.image_signal ? anchor : Eigen::VectorXd::Zero(params.image_dim)) +
              dir * outlier_distance + random_vector(params.image_dim, &rng, params.cluster_noise);
          source = "outlier";
          planted.push_back(image_id);
        } else if (params.image_signal) {
          int s = gold[static_cast<std::size_t>(i) % gold.size()];
          v = centers[static_cast<std::size_t>(s)] +
              random_vector(params.image_dim, &rng, params.cluster_noise);
          source = "sememe:" + labels[static_cast<std::size_t>(s)];
        } else {
          v = random_vector(params.image_dim, &rng);
          source = "noise";
        }
        out.images.put(image_id, v);
        out.image_sources.emplace_back(image_id, source);
        synset.images.push_back(image_id);
      }
      if (!planted.empty()) out.planted_outliers.emplace_back(synset.id, planted);
    }

    if (params.external_fraction > 0.0 && rng.bernoulli(params.external_fraction)) {
      std::string key = "ext" + std::to_string(external_counter++);
      synset.external_key = key;
      for (int i = 0; i < params.external_images; ++i) {
        std::string image_id = key + "#" + std::to_string(i);
        Eigen::VectorXd v;
        if (params.image_signal) {
          int s = gold[static_cast<std::size_t>(i) % gold.size()];
          v = centers[static_cast<std::size_t>(s)] +
              random_vector(params.image_dim, &rng, 0.5 * params.cluster_noise);
        } else {
          v = random_vector(params.image_dim, &rng);
        }
        out.external_images.put(image_id, v);
        out.image_sources.emplace_back(image_id, "external");
      }
    }

    out.corpus.synsets.push_back(std::move(synset));
  }

  std::vector<std::string> ids;
  for (const auto& s : out.corpus.synsets) ids.push_back(s.id);
  rng.shuffle(ids);
  std::size_t n_train = static_cast<std::size_t>(std::llround(params.train_fraction * params.synsets));
  std::size_t n_valid = static_cast<std::size_t>(std::llround(params.valid_fraction * params.synsets));
  n_train = std::min(n_train, ids.size());
  n_valid = std::min(n_valid, ids.size() - n_train);
  out.corpus.split.train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.corpus.split.valid.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train),
                                ids.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid));
  out.corpus.split.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid), ids.end());

  out.corpus.inventory = SememeInventory::from_labels(labels);
  out.corpus.inventory.set_frequencies(count_sememe_frequencies(
      out.corpus.inventory.size(), out.corpus.split_synsets(out.corpus.split.train)));
  return out;
}

void write_fixture(const FixtureOutput& fixture, const FixtureParams& params,
                   const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  save_corpus(fixture.corpus, dir);
  save_lexicon(fixture.lexicon, fixture.corpus.inventory, dir + "/lexicon.tsv");
  fixture.images.save(dir + "/images.embs");
  fixture.external_images.save(dir + "/external.embs");

  nlohmann::ordered_json manifest;
  manifest["params"] = {{"seed", params.seed},
                        {"synsets", params.synsets},
                        {"sememes", params.sememes},
                        {"languages", params.languages},
                        {"images_per_synset", params.images_per_synset},
                        {"outlier_fraction", params.outlier_fraction},
                        {"max_gold", params.max_gold},
                        {"distractors", params.distractors},
                        {"gloss_signal", params.gloss_signal},
                        {"image_signal", params.image_signal},
                        {"image_dim", params.image_dim},
                        {"cluster_noise", params.cluster_noise},
                        {"outlier_distance_scale", params.outlier_distance_scale},
                        {"external_fraction", params.external_fraction}};
  nlohmann::ordered_json outliers = nlohmann::ordered_json::object();
  for (const auto& [synset_id, image_ids] : fixture.planted_outliers)
    outliers[synset_id] = image_ids;
  manifest["planted_outliers"] = outliers;
  nlohmann::ordered_json sources = nlohmann::ordered_json::object();
  for (const auto& [image_id, source] : fixture.image_sources) sources[image_id] = source;
  manifest["image_sources"] = sources;
  nlohmann::ordered_json frequencies = nlohmann::ordered_json::object();
  for (const auto& sememe : fixture.corpus.inventory.sememes())
    frequencies[sememe.label] = fixture.corpus.inventory.frequency()[static_cast<std::size_t>(sememe.id)];
  manifest["train_frequencies"] = frequencies;
  write_file(dir + "/manifest.json", manifest.dump(2) + "\n");
}

}  // namespace spbs
