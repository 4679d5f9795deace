#include "spbs/ablation.hpp"

#include <algorithm>
#include <sstream>

namespace spbs {

namespace {

std::uint64_t derive(std::uint64_t seed, const std::string& tag) {
  return fnv1a64(std::to_string(seed) + "/" + tag);
}

// Shared seed, deterministic 8:1:1 resplit of a synset subset.
Corpus subset_resplit(const Corpus& corpus, const std::vector<const Synset*>& keep,
                      std::uint64_t seed) {
  Corpus out;
  out.inventory = SememeInventory::from_labels([&] {
    std::vector<std::string> labels;
    for (const auto& s : corpus.inventory.sememes()) labels.push_back(s.label);
    return labels;
  }());
  for (const Synset* s : keep) out.synsets.push_back(*s);
  std::vector<std::string> ids;
  for (const auto& s : out.synsets) ids.push_back(s.id);
  Rng rng(derive(seed, "resplit"));
  rng.shuffle(ids);
  std::size_t n_train = ids.size() * 8 / 10;
  std::size_t n_valid = ids.size() / 10;
  out.split.train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.split.valid.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train),
                         ids.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid));
  out.split.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid), ids.end());
  out.inventory.set_frequencies(
      count_sememe_frequencies(out.inventory.size(), out.split_synsets(out.split.train)));
  return out;
}

AblationRow train_and_eval(const std::string& name, const Corpus& corpus,
                           const WordSememeLexicon* lexicon, const EmbeddingStore* images,
                           const EmbeddingStore* external, const CuratedMap* curated,
                           const TrainConfig& config, const EvalConfig& eval_config) {
  PipelineResult pipeline =
      run_training_pipeline(corpus, lexicon, images, external, curated, config);
  InstanceBuilder builder(config, config.no_image ? nullptr : images, external, curated);
  Scorer scorer = make_scorer(&pipeline.train.model, &builder);

  EvalConfig tuned = eval_config;
  EvalReport valid_report = evaluate(scorer, corpus.split_synsets(corpus.split.valid), tuned);
  if (!valid_report.records.empty())
    tuned.delta = tune_threshold(valid_report.records, tuned.threshold_grid(), tuned.f1_mode);
  EvalReport test_report = evaluate(scorer, corpus.split_synsets(corpus.split.test), tuned);

  AblationRow row;
  row.variant = name;
  row.map = test_report.map;
  row.f1 = test_report.f1;
  row.delta = tuned.delta;
  row.test_synsets = test_report.scored;
  return row;
}

}  // namespace

PipelineResult run_training_pipeline(const Corpus& corpus, const WordSememeLexicon* lexicon,
                                     const EmbeddingStore* images, const EmbeddingStore* external,
                                     const CuratedMap* curated, const TrainConfig& config) {
  PipelineResult result;
  std::unique_ptr<TextEncoder> encoder;
  if (config.mcsp) {
    if (lexicon == nullptr)
      throw ConfigError("MCSP pre-training requires a lexicon");
    encoder = make_encoder(corpus, lexicon, config);
    result.pretrain = pretrain_mcsp(corpus, *lexicon, encoder.get(), config);
  }
  result.train = train_spbs(corpus, images, external, curated, config, std::move(encoder));
  return result;
}

std::vector<AblationRow> run_parts_ablation(const Corpus& corpus, const WordSememeLexicon* lexicon,
                                            const EmbeddingStore* images,
                                            const EmbeddingStore* external,
                                            const CuratedMap* curated, const TrainConfig& base,
                                            const EvalConfig& eval_config) {
  std::vector<AblationRow> rows;
  auto variant = [&](const std::string& name, auto mutate) {
    TrainConfig config = base;
    mutate(config);
    AblationRow row =
        train_and_eval(name, corpus, lexicon, images, external, curated, config, eval_config);
    rows.push_back(std::move(row));
  };
  variant("full", [](TrainConfig&) {});
  variant("-Synonym", [](TrainConfig& c) { c.no_synonym = true; });
  variant("-Gloss", [](TrainConfig& c) {
    c.no_gloss = true;
    // MCSP masks gloss words only; without glosses there is nothing to mask.
    c.mcsp = false;
  });
  variant("-Image", [](TrainConfig& c) { c.no_image = true; });
  variant("-MCSP", [](TrainConfig& c) { c.mcsp = false; });
  if (base.mcsp)
    for (auto& row : rows)
      if (row.variant == "-Gloss") row.note = "mcsp skipped (no glosses to mask)";
  return rows;
}

std::vector<AblationRow> run_image_ablation(const Corpus& corpus, const WordSememeLexicon* lexicon,
                                            const EmbeddingStore* images,
                                            const EmbeddingStore* external, const TrainConfig& base,
                                            const EvalConfig& eval_config,
                                            const CurationConfig& curation_config) {
  if (images == nullptr) throw ConfigError("image ablation requires an image store");
  std::vector<const Synset*> with_images;
  for (const auto& synset : corpus.synsets)
    if (!synset.images.empty()) with_images.push_back(&synset);
  if (with_images.empty()) throw ConfigError("no image-bearing synsets in the corpus");
  Corpus subset = subset_resplit(corpus, with_images, base.seed);

  CurationConfig filter_only = curation_config;
  filter_only.merge_external = false;
  CuratedMap filtered = curated_map_of(curate_corpus(subset, *images, nullptr, filter_only));
  CurationConfig with_external = curation_config;
  with_external.merge_external = true;
  CuratedMap merged = curated_map_of(curate_corpus(subset, *images, external, with_external));

  std::vector<AblationRow> rows;
  auto variant = [&](const std::string& name, bool no_image, const CuratedMap* curated,
                     const EmbeddingStore* ext) {
    TrainConfig config = base;
    config.no_image = no_image;
    rows.push_back(
        train_and_eval(name, subset, lexicon, images, ext, curated, config, eval_config));
  };
  variant("no-images", true, nullptr, nullptr);
  variant("all-images", false, nullptr, nullptr);
  variant("filtered-images", false, &filtered, nullptr);
  variant("filtered+external", false, &merged, external);
  return rows;
}

std::vector<AblationRow> run_language_ablation(const Corpus& corpus,
                                               const WordSememeLexicon* lexicon,
                                               const EmbeddingStore* images,
                                               const EmbeddingStore* external,
                                               const CuratedMap* curated, const TrainConfig& base,
                                               const EvalConfig& eval_config) {
  std::vector<const Synset*> covered;
  for (const auto& synset : corpus.synsets) {
    bool all = true;
    for (const auto& lang : base.language_order) {
      auto it = synset.entries.find(lang);
      if (it == synset.entries.end() || !it->second.gloss || it->second.synonyms.empty()) {
        all = false;
        break;
      }
    }
    if (all) covered.push_back(&synset);
  }
  if (covered.empty()) throw ConfigError("no synsets cover every requested language");
  Corpus subset = subset_resplit(corpus, covered, base.seed);

  std::vector<std::vector<std::string>> combos;
  const auto& langs = base.language_order;
  for (std::size_t mask = 1; mask < (std::size_t{1} << langs.size()); ++mask) {
    std::vector<std::string> combo;
    for (std::size_t i = 0; i < langs.size(); ++i)
      if (mask & (std::size_t{1} << i)) combo.push_back(langs[i]);
    combos.push_back(std::move(combo));
  }
  std::sort(combos.begin(), combos.end(),
            [](const auto& a, const auto& b) { return a.size() < b.size(); });

  std::vector<AblationRow> rows;
  for (const auto& combo : combos) {
    TrainConfig config = base;
    config.language_order = combo;
    // The lexicon only covers en/zh; a combination without them cannot mask.
    bool maskable = std::find(combo.begin(), combo.end(), "en") != combo.end() ||
                    std::find(combo.begin(), combo.end(), "zh") != combo.end();
    std::string note;
    if (config.mcsp && !maskable) {
      config.mcsp = false;
      note = "mcsp skipped (no en/zh gloss)";
    }
    AblationRow row = train_and_eval(join(combo, "+"), subset, lexicon, images, external, curated,
                                     config, eval_config);
    row.note = note;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string ablation_table_tsv(const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  out << "variant\tmap\tf1\tdelta\ttest_synsets\tnote\n";
  for (const auto& row : rows)
    out << row.variant << '\t' << format_fixed(row.map, 4) << '\t' << format_fixed(row.f1, 4)
        << '\t' << format_fixed(row.delta, 2) << '\t' << row.test_synsets << '\t' << row.note
        << "\n";
  return out.str();
}

CuratedMap curated_map_of(const CurationResult& result) {
  CuratedMap map;
  for (const auto& [id, ids] : result.curated) map[id] = ids;
  return map;
}

}  // namespace spbs
