#pragma once

#include <Eigen/Core>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "spbs/dataset.hpp"

namespace spbs {

enum class F1Mode { InstanceAveraged, Micro };

struct EvalConfig {
  double delta = 0.42;
  double grid_step = 0.01;  // threshold grid over (0, 1)
  F1Mode f1_mode = F1Mode::InstanceAveraged;
  // Upper-exclusive bin edges; values at or above the last edge fall in the
  // final open-ended bin.
  std::vector<int> sememe_count_edges = {2, 3, 4, 5, 6};
  std::vector<int> frequency_edges = {10, 20, 50, 100, 200};
  double good_threshold = 0.85;

  std::vector<double> threshold_grid() const;
};

// Rank-based average precision of the gold sememes; sememes are ranked by
// descending score with ties broken by ascending id.
double average_precision(const Eigen::VectorXd& scores, const std::set<int>& gold);

double f1_of_sets(const std::set<int>& pred, const std::set<int>& gold);

enum class ErrorCategory { Good, Fewer, More, Other };
const char* error_category_name(ErrorCategory c);

struct SynsetRecord {
  std::string id;
  Pos pos = Pos::Noun;
  std::set<int> gold;
  Eigen::VectorXd scores;
  std::set<int> predicted;
  double ap = 0.0;
  double f1 = 0.0;
};

struct BreakdownRow {
  std::string bin;
  int count = 0;
  double map = 0.0;
  double f1 = 0.0;
};

struct EvalReport {
  double map = 0.0;
  double f1 = 0.0;
  int scored = 0;
  int skipped_empty_gold = 0;
  std::map<std::string, BreakdownRow> per_pos;
  std::vector<SynsetRecord> records;
};

using Scorer = std::function<Eigen::VectorXd(const Synset&)>;

// Scores every synset, selects at `config.delta`, and aggregates MAP/F1
// overall and per part of speech. Synsets with empty gold sets are excluded
// from the means.
EvalReport evaluate(const Scorer& scorer, const std::vector<const Synset*>& synsets,
                    const EvalConfig& config);

// Grid value maximizing mean F1 over the already-scored records; ties go to
// the smaller threshold.
double tune_threshold(const std::vector<SynsetRecord>& records, const std::vector<double>& grid,
                      F1Mode mode = F1Mode::InstanceAveraged);

std::vector<BreakdownRow> breakdown_by_sememe_count(const EvalReport& report,
                                                    const std::vector<int>& edges);

// Synsets group into the frequency band of their minimum-frequency gold
// sememe.
std::vector<BreakdownRow> breakdown_by_sememe_frequency(const EvalReport& report,
                                                        const SememeInventory& inventory,
                                                        const std::vector<int>& edges);

ErrorCategory categorize_errors(const SynsetRecord& record, const EvalConfig& config);

std::map<std::string, int> error_category_counts(const EvalReport& report,
                                                 const EvalConfig& config);

std::string report_to_json(const EvalReport& report, const SememeInventory& inventory,
                           const EvalConfig& config);
std::string report_to_tsv(const EvalReport& report);
std::string breakdown_to_tsv(const std::vector<BreakdownRow>& rows, const std::string& key_name);

}  // namespace spbs
