#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "h3trans/dataingest.hpp"
#include "h3trans/evaluator.hpp"
#include "h3trans/model.hpp"
#include "h3trans/trainer.hpp"

namespace h3t::ablate {

struct AblationConfig {
  std::vector<model::Variant> variants{model::Variant::Vanilla, model::Variant::HUplus, model::Variant::EHIplus};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  /// Also re-generate the synthetic data with 1..T domains.
  bool domain_sweep = false;
  ingest::GenConfig gen;
  model::ModelConfig model;
  train::TrainConfig train;
  eval::EvalConfig eval;
  /// Use this prepared dataset for every seed instead of generating one.
  std::optional<std::filesystem::path> data;
};

struct AblationRun {
  model::Variant variant = model::Variant::Vanilla;
  int domains = 0;
  std::uint64_t seed = 0;
  eval::MetricsTable metrics;
  std::size_t steps = 0;
  double seconds = 0;
};

struct SeedStat {
  double mean = 0;
  double stderr_mean = 0;  // 0 with fewer than two seeds
  std::size_t seeds = 0;
};

struct AblationResult {
  std::vector<AblationRun> runs;

  /// Mean and standard error over seeds of one metric cell.
  std::optional<SeedStat> stat(model::Variant variant, int domains, int domain, const std::string& group,
                               const std::string& metric, std::size_t k = 0) const;
  /// Columns: variant T seed domain group metric K value count.
  void write_runs_tsv(std::ostream& out) const;
  /// Columns: variant T domain group metric K mean stderr seeds.
  void write_summary_tsv(std::ostream& out) const;
};

/// Trains one model on split.train and evaluates it on split.test. Hyperedges
/// of the embedding method are rebuilt from the final parameters first.
AblationRun train_and_evaluate(const ingest::SplitDataset& split, const model::ModelConfig& model_cfg,
                               const train::TrainConfig& train_cfg, const eval::EvalConfig& eval_cfg,
                               std::ostream* log = nullptr);

/// Every (domain count, seed, variant) combination; seeds drive both the data
/// generator and training.
AblationResult run_ablation(const AblationConfig& cfg, std::ostream* progress = nullptr);

}  // namespace h3t::ablate
