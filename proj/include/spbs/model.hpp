#pragma once

#include <Eigen/Core>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "spbs/autodiff.hpp"
#include "spbs/encoders.hpp"

namespace spbs {

// Linear map from raw image-embedding space into the text hidden space.
struct ProjectionParams {
  ad::Tensor weight;  // d_img x d_t
  ad::Tensor bias;    // 1 x d_t

  ProjectionParams() = default;
  ProjectionParams(int d_img, int d_t, Rng* rng);
  std::vector<ad::Tensor*> tensors() { return {&weight, &bias}; }
};

// Single-layer sigmoid classifier over the concatenated [text; image]
// representation.
struct ClassifierParams {
  ad::Tensor weight;  // 2*d_t x |S|
  ad::Tensor bias;    // 1 x |S|

  ClassifierParams() = default;
  ClassifierParams(int d_t, int inventory_size, Rng* rng);
  std::vector<ad::Tensor*> tensors() { return {&weight, &bias}; }
};

// Mask-state sememe predictor used only during pre-training.
struct McspHeadParams {
  ad::Tensor weight;  // d_t x |S|
  ad::Tensor bias;    // 1 x |S|

  McspHeadParams() = default;
  McspHeadParams(int d_t, int inventory_size, Rng* rng);
  std::vector<ad::Tensor*> tensors() { return {&weight, &bias}; }
};

struct AttentionResult {
  Eigen::VectorXd image_representation;  // d_t; zero vector when no images
  Eigen::VectorXd weights;               // one weight per image, sums to 1
};

// Softmax attention of the text representation over projected image vectors,
// followed by the attention-weighted sum.
AttentionResult attend_images(const Eigen::VectorXd& text_repr, const Eigen::MatrixXd& projected);

Eigen::MatrixXd project_images(const Eigen::MatrixXd& raw, const ProjectionParams& params);

// Per-sememe sigmoid prediction scores; every entry strictly inside (0, 1).
Eigen::VectorXd predict_scores(const Eigen::VectorXd& text_repr,
                               const Eigen::VectorXd& image_repr, const ClassifierParams& params);

// Multi-label cross-entropy normalized by the full inventory size.
double spbs_loss(const Eigen::VectorXd& scores, const std::set<int>& gold, int inventory_size,
                 double eps = 1e-7);

// Mean of the per-mask multi-label cross-entropy under the MCSP head.
double mcsp_loss(const Eigen::MatrixXd& mask_states, const std::vector<std::set<int>>& targets,
                 const McspHeadParams& head, int inventory_size, double eps = 1e-7);

// Thresholded selection with strict inequality.
std::set<int> select_sememes(const Eigen::VectorXd& scores, double delta);

Eigen::MatrixXd gold_row(const std::set<int>& gold, int inventory_size);

// Graph builders used by training; the plain functions above are the
// inference path and are cross-checked against these in tests.
ad::Graph::Var build_fusion_scores(ad::Graph& graph, ad::Graph::Var hidden,
                                   const Eigen::MatrixXd& raw_images, ProjectionParams& projection,
                                   ClassifierParams& classifier, bool use_images);
ad::Graph::Var build_spbs_loss(ad::Graph& graph, ad::Graph::Var hidden,
                               const Eigen::MatrixXd& raw_images, const std::set<int>& gold,
                               ProjectionParams& projection, ClassifierParams& classifier,
                               int inventory_size, bool use_images);
ad::Graph::Var build_mcsp_loss(ad::Graph& graph, ad::Graph::Var hidden,
                               const std::vector<int>& mask_rows,
                               const std::vector<std::set<int>>& targets, McspHeadParams& head,
                               int inventory_size);

// The full scoring bundle: text encoder, image projection and classifier,
// pinned to one sememe inventory.
struct MsgiModel {
  std::unique_ptr<TextEncoder> encoder;
  ProjectionParams projection;
  ClassifierParams classifier;
  int d_img = 0;
  bool use_images = true;
  std::vector<std::string> language_order = {"en", "fr", "zh"};
  bool no_synonym = false;
  bool no_gloss = false;
  std::vector<std::string> sememe_labels;
  std::uint64_t inventory_fingerprint = 0;
  std::uint64_t config_hash = 0;

  int inventory_size() const { return static_cast<int>(sememe_labels.size()); }

  // Scores one synset from its canonical sequence and raw image embeddings
  // (rows; pass a 0-row matrix when the synset has no images).
  Eigen::VectorXd score(const MultilingualSequence& seq, const Eigen::MatrixXd& raw_images);

  std::vector<ad::Tensor*> head_parameters();
};

void save_model(const MsgiModel& model, const std::string& path);
MsgiModel load_model(const std::string& path);

// Refuses checkpoints whose inventory fingerprint differs from the corpus.
void check_inventory(const MsgiModel& model, const SememeInventory& inventory);

}  // namespace spbs
