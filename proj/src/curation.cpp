#include "spbs/curation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace spbs {

void CurationConfig::validate() const {
  if (!(nu > 0.0 && nu < 1.0)) throw ConfigError("nu must lie in (0, 1)");
  if (min_set_size < 1) throw ConfigError("min_set_size must be at least 1");
  if (gamma_scale <= 0.0) throw ConfigError("gamma_scale must be positive");
  if (gamma && *gamma <= 0.0) throw ConfigError("gamma must be positive");
}

OneClassSvm::OneClassSvm(double nu, double gamma) : nu_(nu), gamma_(gamma) {
  if (!(nu > 0.0 && nu < 1.0)) throw ContractError("nu must lie in (0, 1)");
  if (gamma <= 0.0) throw ContractError("gamma must be positive");
}

Eigen::VectorXd OneClassSvm::fit_decision(const Eigen::MatrixXd& points) {
  const Eigen::Index m = points.rows();
  if (m == 0) throw ContractError("fit_decision: empty point set");

  Eigen::MatrixXd kernel(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    kernel(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < m; ++j) {
      double sq = (points.row(i) - points.row(j)).squaredNorm();
      double k = std::exp(-gamma_ * sq);
      kernel(i, j) = k;
      kernel(j, i) = k;
    }
  }

  // Dual: min 1/2 a'Ka  s.t.  0 <= a_i <= C, sum a = 1, with C = 1/(nu*m).
  const double box = 1.0 / (nu_ * static_cast<double>(m));
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(m);
  double remaining = 1.0;
  for (Eigen::Index i = 0; i < m && remaining > 0.0; ++i) {
    alpha(i) = std::min(box, remaining);
    remaining -= alpha(i);
  }
  Eigen::VectorXd g = kernel * alpha;

  const double tol = 1e-10;
  const int max_iter = 200 * static_cast<int>(m) + 2000;
  for (int iter = 0; iter < max_iter; ++iter) {
    // Maximal violating pair: raise the smallest gradient, lower the largest.
    Eigen::Index up = -1, down = -1;
    double g_up = std::numeric_limits<double>::infinity();
    double g_down = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < m; ++i) {
      if (alpha(i) < box - 1e-15 && g(i) < g_up) {
        g_up = g(i);
        up = i;
      }
      if (alpha(i) > 1e-15 && g(i) > g_down) {
        g_down = g(i);
        down = i;
      }
    }
    if (up < 0 || down < 0 || g_down - g_up < tol) break;
    double eta = kernel(up, up) + kernel(down, down) - 2.0 * kernel(up, down);
    eta = std::max(eta, 1e-12);
    double step = std::min({(g_down - g_up) / eta, box - alpha(up), alpha(down)});
    if (step <= 0.0) break;
    alpha(up) += step;
    alpha(down) -= step;
    g += step * (kernel.col(up) - kernel.col(down));
  }

  // rho from free support vectors, else the midpoint of the KKT bounds.
  double rho;
  double free_sum = 0.0;
  int free_count = 0;
  for (Eigen::Index i = 0; i < m; ++i)
    if (alpha(i) > 1e-12 && alpha(i) < box - 1e-12) {
      free_sum += g(i);
      ++free_count;
    }
  if (free_count > 0) {
    rho = free_sum / free_count;
  } else {
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < m; ++i) {
      if (alpha(i) >= box - 1e-12) lower = std::max(lower, g(i));
      if (alpha(i) <= 1e-12) upper = std::min(upper, g(i));
    }
    if (!std::isfinite(lower)) lower = upper;
    if (!std::isfinite(upper)) upper = lower;
    rho = 0.5 * (lower + upper);
  }
  return g.array() - rho;
}

double rbf_gamma_for(const Eigen::MatrixXd& points, const CurationConfig& config) {
  if (config.gamma) return *config.gamma;
  const Eigen::Index m = points.rows();
  double total = 0.0;
  std::size_t pairs = 0;
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = i + 1; j < m; ++j) {
      total += (points.row(i) - points.row(j)).squaredNorm();
      ++pairs;
    }
  if (pairs == 0) return 0.0;
  double mean_sq = total / static_cast<double>(pairs);
  if (mean_sq <= 0.0) return 0.0;
  return config.gamma_scale / mean_sq;
}

FilterOutcome filter_outliers(const ImageEmbeddingSet& set, const CurationConfig& config) {
  config.validate();
  FilterOutcome outcome;
  if (static_cast<int>(set.size()) < config.min_set_size) {
    outcome.set = set;
    return outcome;
  }
  Eigen::MatrixXd points = set.matrix();
  double gamma = rbf_gamma_for(points, config);
  if (gamma <= 0.0) {
    // All embeddings coincide; nothing to separate.
    outcome.set = set;
    outcome.warning = "degenerate embeddings (all identical); set left unchanged";
    return outcome;
  }

  OneClassSvm svm(config.nu, gamma);
  Eigen::VectorXd decision = svm.fit_decision(points);

  constexpr double kTieTol = 1e-9;
  std::vector<bool> keep(set.size(), false);
  int kept = 0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (decision(static_cast<Eigen::Index>(i)) >= -kTieTol) {
      keep[i] = true;
      ++kept;
    }
  }
  if (kept == 0) {
    // Keep the best-scoring image rather than emptying the set; ties break on
    // the smaller image id.
    std::size_t best = 0;
    for (std::size_t i = 1; i < set.size(); ++i) {
      double d = decision(static_cast<Eigen::Index>(i)) - decision(static_cast<Eigen::Index>(best));
      if (d > kTieTol || (std::abs(d) <= kTieTol && set.ids[i] < set.ids[best])) best = i;
    }
    keep[best] = true;
  }

  outcome.set.synset_id = set.synset_id;
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (keep[i]) {
      outcome.set.ids.push_back(set.ids[i]);
      outcome.set.embeddings.push_back(set.embeddings[i]);
      outcome.set.provenance.push_back(set.provenance[i]);
    } else {
      outcome.removed.push_back(set.ids[i]);
    }
  }
  return outcome;
}

ImageEmbeddingSet merge_external_images(const ImageEmbeddingSet& set, const Synset& synset,
                                        const EmbeddingStore& external_store) {
  if (!synset.external_key) return set;
  ImageEmbeddingSet out = set;
  for (const auto& id : external_store.ids_with_prefix(*synset.external_key + "#")) {
    if (std::find(out.ids.begin(), out.ids.end(), id) != out.ids.end()) continue;
    out.ids.push_back(id);
    out.embeddings.push_back(external_store.get(id));
    out.provenance.push_back(ImageProvenance::External);
  }
  return out;
}

CurationResult curate_corpus(const Corpus& corpus, const EmbeddingStore& images,
                             const EmbeddingStore* external_store, const CurationConfig& config) {
  config.validate();
  StoreEmbeddingProvider provider(&images);
  CurationResult result;
  for (const auto& synset : corpus.synsets) {
    ImageEmbeddingSet set = embed_images(synset.id, synset.images, provider).set;
    FilterOutcome filtered = filter_outliers(set, config);
    ImageEmbeddingSet final_set = filtered.set;
    int added = 0;
    if (config.merge_external && external_store != nullptr) {
      ImageEmbeddingSet merged = merge_external_images(final_set, synset, *external_store);
      added = static_cast<int>(merged.size() - final_set.size());
      final_set = std::move(merged);
    }
    CurationRecord record;
    record.synset_id = synset.id;
    record.kept = static_cast<int>(filtered.set.size());
    record.removed = static_cast<int>(filtered.removed.size());
    record.added = added;
    result.report.push_back(record);
    result.curated.emplace_back(synset.id, final_set.ids);
  }
  return result;
}

void save_curated_sets(const CurationResult& result, const std::string& path) {
  std::ostringstream out;
  for (const auto& [id, images] : result.curated) {
    nlohmann::ordered_json rec;
    rec["id"] = id;
    rec["images"] = images;
    out << rec.dump() << "\n";
  }
  write_file(path, out.str());
}

void save_curation_report(const CurationResult& result, const std::string& path) {
  std::ostringstream out;
  out << "synset\tkept\tremoved\tadded\n";
  for (const auto& record : result.report)
    out << record.synset_id << '\t' << record.kept << '\t' << record.removed << '\t'
        << record.added << "\n";
  write_file(path, out.str());
}

std::vector<std::pair<std::string, std::vector<std::string>>> load_curated_sets(
    const std::string& path) {
  std::vector<std::pair<std::string, std::vector<std::string>>> out;
  auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(lines[i]);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(path + ": line " + std::to_string(i + 1) + ": " + e.what());
    }
    out.emplace_back(rec.at("id").get<std::string>(),
                     rec.at("images").get<std::vector<std::string>>());
  }
  return out;
}

}  // namespace spbs
