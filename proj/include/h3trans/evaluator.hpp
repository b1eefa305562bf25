#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "h3trans/dataingest.hpp"
#include "h3trans/model.hpp"

namespace h3t::eval {

struct RankResult {
  UserId user = 0;
  int domain = 0;
  ItemId held_out = 0;
  std::size_t rank = 0;
  std::size_t candidates = 0;
};

/// 1 + number of other entries scoring at least as high as scores[target]
/// (ties count against the target).
std::size_t pessimistic_rank(std::span<const double> scores, std::size_t target);

double hr_at_k(std::span<const RankResult> results, std::size_t k);
double mrr(std::span<const RankResult> results);
/// Single relevant item: 1 / log2(rank + 1) inside the cutoff, 0 beyond it.
double ndcg_at_k(std::span<const RankResult> results, std::size_t k);

/// Activity group (0-based) per user: users sorted by (training interaction
/// count, user id) and cut into `groups` contiguous blocks whose sizes differ
/// by at most one.
std::vector<int> activity_groups(const ingest::Dataset& train, int groups = 5);

struct EvalConfig {
  std::vector<std::size_t> ks{20, 50};
  int groups = 5;
};

struct MetricRow {
  int domain = 0;
  std::string group;   // "ALL" or "G1".."G5"
  std::string metric;  // "HR", "NDCG" or "MRR"
  std::size_t k = 0;   // 0 for MRR
  std::optional<double> value;  // absent when no test records fall in the cell
  std::size_t count = 0;
};

struct MetricsTable {
  std::vector<MetricRow> rows;

  /// Columns: domain group metric K value count. Absent values print as NA.
  void write_tsv(std::ostream& out) const;
  void write_jsonl(std::ostream& out) const;
  std::optional<double> find(int domain, const std::string& group, const std::string& metric,
                             std::size_t k = 0) const;
};

/// Aggregates rank results into per-domain and per-group metrics.
MetricsTable tabulate(std::span<const RankResult> results, const ingest::Dataset& train, const EvalConfig& cfg);

/// All-ranking: each test record's item is ranked against every item of its
/// domain that the user did not interact with there during training.
/// `representations[m]` holds the full-graph representations for domain m.
std::vector<RankResult> rank_all(const model::Model& model, const std::vector<nc::Tensor2>& representations,
                                 const ingest::SplitDataset& split);

/// Full-graph representations per domain for the given parameters (one pass
/// per domain with item transfer, a single shared pass otherwise).
std::vector<nc::Tensor2> domain_representations(const model::Model& model, const nc::ParamStore& params);

MetricsTable evaluate(const model::Model& model, const nc::ParamStore& params, const ingest::SplitDataset& split,
                      const EvalConfig& cfg);

}  // namespace h3t::eval
