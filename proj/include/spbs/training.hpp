#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "spbs/config.hpp"
#include "spbs/curation.hpp"
#include "spbs/evaluation.hpp"
#include "spbs/model.hpp"

namespace spbs {

struct TrainConfig {
  double encoder_lr = 1e-5;  // paper's tuned pick for the text encoder
  double head_lr = 1e-3;     // and for the classifier group
  int batch_size = 16;
  int epochs = 20;
  std::uint64_t seed = 1;
  bool freeze_encoder = false;

  bool mcsp = true;
  int mcsp_epochs = 5;
  double mcsp_rate = 0.15;

  // Ablations are pure configuration; -MCSP is mcsp=false.
  bool no_synonym = false;
  bool no_gloss = false;
  bool no_image = false;
  std::vector<std::string> language_order = {"en", "fr", "zh"};

  EncoderConfig encoder;
  std::string encoder_checkpoint;  // start from this encoder when set
  double delta = 0.42;

  void validate() const;
  SegmentOptions segment_options() const;
  static TrainConfig from_kv(const KeyValueConfig& kv);
  KeyValueConfig to_kv() const;
  std::uint64_t hash() const;
};

// Known config-file keys across all subcommand configs.
const std::vector<std::string>& known_config_keys();

EvalConfig eval_config_from_kv(const KeyValueConfig& kv);
CurationConfig curation_config_from_kv(const KeyValueConfig& kv);

class Adam {
 public:
  struct Group {
    std::vector<ad::Tensor*> params;
    double lr = 1e-3;
  };

  explicit Adam(std::vector<Group> groups, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);
  void step();
  void zero_grad();

 private:
  std::vector<Group> groups_;
  std::vector<std::vector<std::pair<Eigen::MatrixXd, Eigen::MatrixXd>>> state_;  // (m, v)
  double beta1_, beta2_, eps_;
  long t_ = 0;
};

using CuratedMap = std::map<std::string, std::vector<std::string>>;

// Resolves one synset into its canonical sequence and raw image-embedding
// rows under a training configuration.
class InstanceBuilder {
 public:
  InstanceBuilder(const TrainConfig& config, const EmbeddingStore* images,
                  const EmbeddingStore* external, const CuratedMap* curated);

  MultilingualSequence sequence(const Synset& synset) const;
  Eigen::MatrixXd image_matrix(const Synset& synset) const;
  int image_dim() const { return image_dim_; }

 private:
  const TrainConfig& config_;
  const EmbeddingStore* images_;
  const EmbeddingStore* external_;
  const CuratedMap* curated_;
  int image_dim_ = 0;
};

struct EpochMetric {
  int epoch = 0;
  double train_loss = 0.0;
  double valid_map = 0.0;
};

struct RunManifest {
  std::string config_snapshot;
  std::uint64_t seed = 0;
  std::vector<EpochMetric> epochs;
  int best_epoch = 0;
  double best_valid_map = 0.0;
  std::string checkpoint;
  double wall_seconds = 0.0;

  std::string to_json() const;
};

struct PretrainResult {
  std::vector<double> epoch_losses;
  int instances_used = 0;
};

// Masked contextual sememe prediction over the training split's sequences.
// Optimizes the encoder and a throwaway mask head; the encoder comes back
// adapted, the head is discarded.
PretrainResult pretrain_mcsp(const Corpus& corpus, const WordSememeLexicon& lexicon,
                             TextEncoder* encoder, const TrainConfig& config);

// Builds the encoder dictated by the config: load a checkpoint when given,
// else a fresh tiny-trainable one with a vocabulary from the train split.
std::unique_ptr<TextEncoder> make_encoder(const Corpus& corpus, const WordSememeLexicon* lexicon,
                                          const TrainConfig& config);

struct TrainResult {
  MsgiModel model;
  RunManifest manifest;
};

// Full supervised training with per-epoch validation MAP and
// best-checkpoint selection. Image embeddings are never updated. A null
// `encoder` means "build the one the config dictates".
TrainResult train_spbs(const Corpus& corpus, const EmbeddingStore* images,
                       const EmbeddingStore* external, const CuratedMap* curated,
                       const TrainConfig& config,
                       std::unique_ptr<TextEncoder> encoder = nullptr);

// Scores rank sememes by training-set frequency; the no-model baseline the
// learnability checks compare against.
Eigen::VectorXd frequency_prior_scores(const SememeInventory& inventory);

Scorer make_scorer(MsgiModel* model, const InstanceBuilder* builder);

}  // namespace spbs
