#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

#include "spbs/dataset.hpp"
#include "spbs/encoders.hpp"

namespace spbs {

struct CurationConfig {
  double nu = 0.1;            // expected outlier fraction
  int min_set_size = 5;       // below this, filtering is skipped
  double gamma_scale = 0.05;  // gamma = gamma_scale / mean pairwise sq. distance
  std::optional<double> gamma;  // explicit kernel width override
  bool merge_external = true;

  void validate() const;
};

// nu-parameterized One-Class SVM with an RBF kernel, solved by SMO on the
// dual. Decision values are positive inside the estimated support region.
class OneClassSvm {
 public:
  OneClassSvm(double nu, double gamma);

  // Rows of `points` are samples. Returns per-sample decision values.
  Eigen::VectorXd fit_decision(const Eigen::MatrixXd& points);

 private:
  double nu_;
  double gamma_;
};

// Kernel width heuristic: gamma_scale over the mean pairwise squared
// distance of the set.
double rbf_gamma_for(const Eigen::MatrixXd& points, const CurationConfig& config);

struct FilterOutcome {
  ImageEmbeddingSet set;
  std::vector<std::string> removed;
  std::string warning;  // nonempty for degenerate bypasses
};

// Keeps the One-Class-SVM inliers of a synset's image set. Sets below the
// minimum size or with degenerate embeddings pass through unchanged, and at
// least one image always survives.
FilterOutcome filter_outliers(const ImageEmbeddingSet& set, const CurationConfig& config);

// Adds the external images registered under the synset's external key; these
// bypass outlier filtering. External image ids use the "<key>#<n>" convention.
ImageEmbeddingSet merge_external_images(const ImageEmbeddingSet& set, const Synset& synset,
                                        const EmbeddingStore& external_store);

struct CurationRecord {
  std::string synset_id;
  int kept = 0;
  int removed = 0;
  int added = 0;
};

struct CurationResult {
  // synset id -> curated image id list (order preserved, external last)
  std::vector<std::pair<std::string, std::vector<std::string>>> curated;
  std::vector<CurationRecord> report;
};

// Filter first, then merge external images, for every synset in the corpus.
CurationResult curate_corpus(const Corpus& corpus, const EmbeddingStore& images,
                             const EmbeddingStore* external_store, const CurationConfig& config);

void save_curated_sets(const CurationResult& result, const std::string& path);
void save_curation_report(const CurationResult& result, const std::string& path);
// synset id -> curated image ids, from a JSON-lines file.
std::vector<std::pair<std::string, std::vector<std::string>>> load_curated_sets(
    const std::string& path);

}  // namespace spbs
