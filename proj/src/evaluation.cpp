#include "spbs/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "spbs/model.hpp"

namespace spbs {

std::vector<double> EvalConfig::threshold_grid() const {
  if (!(grid_step > 0.0 && grid_step < 1.0)) throw ConfigError("grid_step must lie in (0, 1)");
  std::vector<double> grid;
  for (double v = grid_step; v < 1.0 - 1e-12; v += grid_step) grid.push_back(v);
  return grid;
}

double average_precision(const Eigen::VectorXd& scores, const std::set<int>& gold) {
  if (gold.empty()) throw ContractError("average_precision: empty gold set");
  const int n = static_cast<int>(scores.size());
  for (int s : gold)
    if (s < 0 || s >= n) throw ContractError("average_precision: gold id out of range");
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (scores(a) != scores(b)) return scores(a) > scores(b);
    return a < b;
  });
  double ap = 0.0;
  int hits = 0;
  for (int rank = 1; rank <= n; ++rank) {
    if (gold.count(order[static_cast<std::size_t>(rank - 1)]) > 0) {
      ++hits;
      ap += static_cast<double>(hits) / static_cast<double>(rank);
    }
  }
  return ap / static_cast<double>(gold.size());
}

double f1_of_sets(const std::set<int>& pred, const std::set<int>& gold) {
  if (pred.empty()) return 0.0;
  int hit = 0;
  for (int s : pred)
    if (gold.count(s) > 0) ++hit;
  double precision = static_cast<double>(hit) / static_cast<double>(pred.size());
  double recall = gold.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(gold.size());
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

const char* error_category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Good: return "Good";
    case ErrorCategory::Fewer: return "Fewer";
    case ErrorCategory::More: return "More";
    case ErrorCategory::Other: return "Other";
  }
  return "Other";
}

EvalReport evaluate(const Scorer& scorer, const std::vector<const Synset*>& synsets,
                    const EvalConfig& config) {
  EvalReport report;
  std::map<std::string, std::pair<double, double>> pos_sums;  // pos -> (ap sum, f1 sum)
  std::map<std::string, int> pos_counts;
  double ap_sum = 0.0;
  double f1_sum = 0.0;
  for (const Synset* synset : synsets) {
    if (synset->gold_sememes.empty()) {
      ++report.skipped_empty_gold;
      continue;
    }
    SynsetRecord record;
    record.id = synset->id;
    record.pos = synset->pos;
    record.gold = synset->gold_sememes;
    record.scores = scorer(*synset);
    record.predicted = select_sememes(record.scores, config.delta);
    record.ap = average_precision(record.scores, record.gold);
    record.f1 = f1_of_sets(record.predicted, record.gold);
    ap_sum += record.ap;
    f1_sum += record.f1;
    auto& sums = pos_sums[pos_name(record.pos)];
    sums.first += record.ap;
    sums.second += record.f1;
    ++pos_counts[pos_name(record.pos)];
    report.records.push_back(std::move(record));
  }
  report.scored = static_cast<int>(report.records.size());
  if (report.scored > 0) {
    report.map = ap_sum / report.scored;
    report.f1 = f1_sum / report.scored;
  }
  for (const auto& [pos, sums] : pos_sums) {
    BreakdownRow row;
    row.bin = pos;
    row.count = pos_counts[pos];
    row.map = sums.first / row.count;
    row.f1 = sums.second / row.count;
    report.per_pos[pos] = row;
  }
  return report;
}

double tune_threshold(const std::vector<SynsetRecord>& records, const std::vector<double>& grid,
                      F1Mode mode) {
  if (grid.empty()) throw ContractError("tune_threshold: empty grid");
  double best_delta = grid.front();
  double best_f1 = -1.0;
  for (double delta : grid) {
    double value;
    if (mode == F1Mode::InstanceAveraged) {
      double sum = 0.0;
      for (const auto& r : records) sum += f1_of_sets(select_sememes(r.scores, delta), r.gold);
      value = records.empty() ? 0.0 : sum / static_cast<double>(records.size());
    } else {
      long hit = 0, pred_total = 0, gold_total = 0;
      for (const auto& r : records) {
        auto pred = select_sememes(r.scores, delta);
        pred_total += static_cast<long>(pred.size());
        gold_total += static_cast<long>(r.gold.size());
        for (int s : pred)
          if (r.gold.count(s) > 0) ++hit;
      }
      double precision = pred_total > 0 ? static_cast<double>(hit) / pred_total : 0.0;
      double recall = gold_total > 0 ? static_cast<double>(hit) / gold_total : 0.0;
      value = precision + recall > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    }
    if (value > best_f1) {
      best_f1 = value;
      best_delta = delta;
    }
  }
  return best_delta;
}

namespace {

std::string bin_label(const std::vector<int>& edges, std::size_t bin, int min_value) {
  int lo = bin == 0 ? min_value : edges[bin - 1];
  if (bin == edges.size()) return ">=" + std::to_string(edges.back());
  int hi = edges[bin] - 1;
  if (lo == hi) return std::to_string(lo);
  return std::to_string(lo) + "-" + std::to_string(hi);
}

std::size_t bin_of(const std::vector<int>& edges, int value) {
  for (std::size_t i = 0; i < edges.size(); ++i)
    if (value < edges[i]) return i;
  return edges.size();
}

std::vector<BreakdownRow> aggregate_bins(const std::vector<int>& edges,
                                         const std::vector<std::pair<std::size_t, const SynsetRecord*>>& assigned,
                                         int min_value) {
  std::vector<BreakdownRow> rows(edges.size() + 1);
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i].bin = bin_label(edges, i, min_value);
  for (const auto& [bin, record] : assigned) {
    rows[bin].count += 1;
    rows[bin].map += record->ap;
    rows[bin].f1 += record->f1;
  }
  for (auto& row : rows) {
    if (row.count > 0) {
      row.map /= row.count;
      row.f1 /= row.count;
    }
  }
  return rows;
}

}  // namespace

std::vector<BreakdownRow> breakdown_by_sememe_count(const EvalReport& report,
                                                    const std::vector<int>& edges) {
  if (edges.empty() || !std::is_sorted(edges.begin(), edges.end()))
    throw ConfigError("bin edges must be nonempty and sorted");
  std::vector<std::pair<std::size_t, const SynsetRecord*>> assigned;
  for (const auto& record : report.records)
    assigned.emplace_back(bin_of(edges, static_cast<int>(record.gold.size())), &record);
  return aggregate_bins(edges, assigned, 1);
}

std::vector<BreakdownRow> breakdown_by_sememe_frequency(const EvalReport& report,
                                                        const SememeInventory& inventory,
                                                        const std::vector<int>& edges) {
  if (edges.empty() || !std::is_sorted(edges.begin(), edges.end()))
    throw ConfigError("bin edges must be nonempty and sorted");
  std::vector<std::pair<std::size_t, const SynsetRecord*>> assigned;
  for (const auto& record : report.records) {
    int min_freq = std::numeric_limits<int>::max();
    for (int s : record.gold)
      min_freq = std::min(min_freq, inventory.frequency()[static_cast<std::size_t>(s)]);
    assigned.emplace_back(bin_of(edges, min_freq), &record);
  }
  return aggregate_bins(edges, assigned, 0);
}

ErrorCategory categorize_errors(const SynsetRecord& record, const EvalConfig& config) {
  if (record.ap > config.good_threshold && record.f1 > config.good_threshold)
    return ErrorCategory::Good;
  if (record.predicted.size() < record.gold.size()) return ErrorCategory::Fewer;
  if (record.predicted.size() > record.gold.size()) return ErrorCategory::More;
  return ErrorCategory::Other;
}

std::map<std::string, int> error_category_counts(const EvalReport& report,
                                                 const EvalConfig& config) {
  std::map<std::string, int> counts{{"Good", 0}, {"Fewer", 0}, {"More", 0}, {"Other", 0}};
  for (const auto& record : report.records)
    ++counts[error_category_name(categorize_errors(record, config))];
  return counts;
}

std::string report_to_json(const EvalReport& report, const SememeInventory& inventory,
                           const EvalConfig& config) {
  nlohmann::ordered_json doc;
  doc["map"] = report.map;
  doc["f1"] = report.f1;
  doc["scored"] = report.scored;
  doc["skipped_empty_gold"] = report.skipped_empty_gold;
  doc["delta"] = config.delta;
  nlohmann::ordered_json per_pos = nlohmann::ordered_json::object();
  for (const auto& [pos, row] : report.per_pos)
    per_pos[pos] = {{"count", row.count}, {"map", row.map}, {"f1", row.f1}};
  doc["per_pos"] = per_pos;
  nlohmann::ordered_json categories = nlohmann::ordered_json::object();
  for (const auto& [name, count] : error_category_counts(report, config)) categories[name] = count;
  doc["error_categories"] = categories;
  nlohmann::ordered_json records = nlohmann::ordered_json::array();
  for (const auto& record : report.records) {
    std::vector<std::string> gold_labels, pred_labels;
    for (int s : record.gold) gold_labels.push_back(inventory.label(s));
    for (int s : record.predicted) pred_labels.push_back(inventory.label(s));
    records.push_back({{"id", record.id},
                       {"pos", pos_name(record.pos)},
                       {"ap", record.ap},
                       {"f1", record.f1},
                       {"gold", gold_labels},
                       {"predicted", pred_labels}});
  }
  doc["records"] = records;
  return doc.dump(2) + "\n";
}

std::string report_to_tsv(const EvalReport& report) {
  std::ostringstream out;
  out << "cohort\tcount\tmap\tf1\n";
  out << "all\t" << report.scored << '\t' << format_fixed(report.map, 4) << '\t'
      << format_fixed(report.f1, 4) << "\n";
  for (const auto& [pos, row] : report.per_pos)
    out << pos << '\t' << row.count << '\t' << format_fixed(row.map, 4) << '\t'
        << format_fixed(row.f1, 4) << "\n";
  return out.str();
}

std::string breakdown_to_tsv(const std::vector<BreakdownRow>& rows, const std::string& key_name) {
  std::ostringstream out;
  out << key_name << "\tcount\tmap\tf1\n";
  for (const auto& row : rows)
    out << row.bin << '\t' << row.count << '\t' << format_fixed(row.map, 4) << '\t'
        << format_fixed(row.f1, 4) << "\n";
  return out.str();
}

}  // namespace spbs
