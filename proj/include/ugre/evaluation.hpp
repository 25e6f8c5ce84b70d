#pragma once
// Held-out evaluation: ranked candidate triplets, PR curve, AUC, P@N, and
// path-attention diagnostics grouped by path type and by length.

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ugre/attention_model.hpp"
#include "ugre/data_io.hpp"

namespace ugre {

struct EvalRecord {
  std::size_t pair = 0;  // tie-break key together with relation
  RelationIndex relation = 0;
  double score = 0.0;
  bool gold = false;

  friend bool operator==(const EvalRecord&, const EvalRecord&) = default;
};

// One record per bag and non-NA relation, dropout off. `pair_ids` (one per
// bag) defaults to the bag position.
std::vector<EvalRecord> predict_all(const Model& model, std::span<const EncodedBag> bags,
                                    const GoldIndex& gold,
                                    std::span<const std::size_t> pair_ids = {});

// Score descending, then pair, then relation.
void sort_records(std::vector<EvalRecord>& records);

struct PRPoint {
  double recall = 0.0;
  double precision = 0.0;
};

struct PRCurve {
  std::vector<PRPoint> points;  // one per rank
  std::size_t total_gold = 0;
};

// Sweeps the ranking; total_gold defaults to the number of gold records.
// Throws std::invalid_argument when there is no gold record.
PRCurve pr_curve(std::vector<EvalRecord> records, std::size_t total_gold = 0);

// Trapezoids over the sweep points, starting from (0, precision at rank 1).
double auc_trapezoid(const PRCurve& curve);
// Sum of recall increments times precision at that rank.
double auc_step(const PRCurve& curve);

// Fraction of gold records among the top n. Throws for n == 0 or n > size.
double precision_at_n(std::vector<EvalRecord> records, std::size_t n);

inline constexpr std::size_t kPrecisionGrid[] = {100, 200, 300, 500, 1000, 2000};

struct PathWeight {
  std::size_t bag = 0;
  std::size_t path = 0;
  PathType type = PathType::kg;
  std::size_t tau1 = 0;
  std::size_t tau2 = 0;
  double weight = 0.0;
};

struct BiasGroup {
  std::string grouping;  // "type" or "length"
  std::string group;     // type name, or "lo-hi" token range
  std::size_t count = 0;
  double mean_weight = 0.0;
};

struct BiasReport {
  std::vector<PathWeight> raw;
  std::vector<BiasGroup> groups;
};

// Global path-attention weights of every bag with paths.
std::vector<PathWeight> path_attention_weights(const Model& model,
                                               std::span<const EncodedBag> bags);
// Groups by type (KG, Textual, Hybrid; non-empty only) and by token-length
// bucket of `bucket_width`, non-empty buckets only.
std::vector<BiasGroup> group_path_weights(const std::vector<PathWeight>& raw,
                                          std::size_t bucket_width = 10);
BiasReport attention_bias_report(const Model& model, std::span<const EncodedBag> bags,
                                 std::size_t bucket_width = 10);

struct Metrics {
  double auc_trapezoid = 0.0;
  double auc_step = 0.0;
  std::size_t records = 0;
  std::size_t total_gold = 0;
  std::vector<std::pair<std::size_t, double>> precision_at;  // grid entries that fit
};

Metrics compute_metrics(const std::vector<EvalRecord>& records);

void write_pr_curve_csv(const PRCurve& curve, const std::filesystem::path& path);
void write_metrics(const Metrics& m, const std::filesystem::path& path);
void write_bias_groups_csv(const std::vector<BiasGroup>& groups,
                           const std::filesystem::path& path);
void write_path_weights_csv(const std::vector<PathWeight>& raw,
                            const std::filesystem::path& path);
std::vector<PathWeight> read_path_weights_csv(const std::filesystem::path& path);
void write_pr_curve_svg(const PRCurve& curve, const std::filesystem::path& path);

}  // namespace ugre
