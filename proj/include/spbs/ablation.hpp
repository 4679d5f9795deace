#pragma once

#include <optional>
#include <string>
#include <vector>

#include "spbs/training.hpp"

namespace spbs {

struct PipelineResult {
  TrainResult train;
  std::optional<PretrainResult> pretrain;
};

// MCSP pre-training (when enabled) followed by SPBS training.
PipelineResult run_training_pipeline(const Corpus& corpus, const WordSememeLexicon* lexicon,
                                     const EmbeddingStore* images, const EmbeddingStore* external,
                                     const CuratedMap* curated, const TrainConfig& config);

struct AblationRow {
  std::string variant;
  double map = 0.0;
  double f1 = 0.0;
  double delta = 0.0;
  int test_synsets = 0;
  std::string note;
};

// Component knock-outs: full, -Synonym, -Gloss, -Image, -MCSP, shared seed.
std::vector<AblationRow> run_parts_ablation(const Corpus& corpus, const WordSememeLexicon* lexicon,
                                            const EmbeddingStore* images,
                                            const EmbeddingStore* external,
                                            const CuratedMap* curated, const TrainConfig& base,
                                            const EvalConfig& eval_config);

// Image-set variants (none / all / filtered / filtered+external) on the
// image-bearing subset, resplit 8:1:1 by the shared seed.
std::vector<AblationRow> run_image_ablation(const Corpus& corpus, const WordSememeLexicon* lexicon,
                                            const EmbeddingStore* images,
                                            const EmbeddingStore* external, const TrainConfig& base,
                                            const EvalConfig& eval_config,
                                            const CurationConfig& curation_config);

// Every nonempty language combination on the fully-covered subset, resplit
// 8:1:1 by the shared seed.
std::vector<AblationRow> run_language_ablation(const Corpus& corpus,
                                               const WordSememeLexicon* lexicon,
                                               const EmbeddingStore* images,
                                               const EmbeddingStore* external,
                                               const CuratedMap* curated, const TrainConfig& base,
                                               const EvalConfig& eval_config);

std::string ablation_table_tsv(const std::vector<AblationRow>& rows);

CuratedMap curated_map_of(const CurationResult& result);

}  // namespace spbs
