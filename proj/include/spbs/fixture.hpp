#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spbs/dataset.hpp"

namespace spbs {

// Deterministic synthetic corpus generator. Glosses are built from
// sememe-indicative tokens plus distractors, image embeddings come from
// per-sememe clusters, and a fraction of images are planted far outliers
// recorded in the manifest.
struct FixtureParams {
  std::uint64_t seed = 1;
  int synsets = 500;
  int sememes = 30;
  std::vector<std::string> languages = {"en", "fr", "zh"};
  int images_per_synset = 8;
  double outlier_fraction = 0.0;
  int max_gold = 3;
  int distractors = 5;       // filler tokens per gloss
  int filler_vocab = 50;     // filler tokens per language
  bool gloss_signal = true;  // indicative tokens present in glosses
  bool image_signal = true;  // images clustered by gold sememe
  int image_dim = 16;
  double cluster_noise = 0.5;
  double outlier_distance_scale = 8.0;  // times noise * sqrt(dim)
  double language_coverage = 0.85;      // non-English entry probability
  double external_fraction = 0.3;       // synsets that gain an external key
  int external_images = 3;
  double train_fraction = 0.7;
  double valid_fraction = 0.15;

  void validate() const;
};

struct FixtureOutput {
  Corpus corpus;
  WordSememeLexicon lexicon;
  EmbeddingStore images;
  EmbeddingStore external_images;
  // image id -> "sememe:<label>" or "outlier", the generator's bookkeeping
  std::vector<std::pair<std::string, std::string>> image_sources;
  std::vector<std::pair<std::string, std::vector<std::string>>> planted_outliers;
};

FixtureOutput generate_fixture(const FixtureParams& params);

// Writes corpus.jsonl, sememes.txt, split.json, lexicon.tsv, images.embs,
// external.embs and manifest.json under `dir`.
void write_fixture(const FixtureOutput& fixture, const FixtureParams& params,
                   const std::string& dir);

}  // namespace spbs
