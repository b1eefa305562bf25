#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "h3trans/dataingest.hpp"
#include "h3trans/interaction_index.hpp"
#include "h3trans/mdgraph.hpp"
#include "h3trans/model.hpp"
#include "h3trans/numeric/adam.hpp"
#include "h3trans/numeric/checkpoint.hpp"

namespace h3t::train {

struct TrainConfig {
  std::size_t batch_size = 512;
  std::size_t negatives = 64;
  /// Fixed step budget; 0 means `epochs` x ceil(|train| / batch_size).
  std::size_t steps = 0;
  double epochs = 30;
  std::uint64_t seed = 1;
  /// 0 disables periodic checkpoints.
  std::size_t checkpoint_every = 0;
  std::size_t log_every = 10;
  nc::AdamConfig adam;

  void validate() const;
  std::size_t total_steps(std::size_t train_records) const;
};

struct Sample {
  UserId user = 0;
  int domain = 0;
  ItemId positive = 0;
  std::vector<ItemId> negatives;
  /// Some negative is an observed item (rejection cap reached).
  bool collision = false;
};

/// Positives uniform over the training records; negatives uniform over the
/// positive's domain items, rejecting observed (user, item, domain) pairs up
/// to 100 times per draw.
std::vector<Sample> sample_batch(const ingest::Dataset& train, const InteractionIndex& observed,
                                 std::size_t batch_size, std::size_t negatives, Rng& rng);

/// -log(exp(s+/tau) / (exp(s+/tau) + sum exp(s-/tau))), log-sum-exp stabilised.
double infonce_loss(double positive, std::span<const double> negatives, double tau);
/// Mean over rows of the same loss; column 0 holds the positive score.
nc::Var infonce_loss(nc::Var scores, double tau);

/// Random stream owned by one training step.
Rng step_stream(std::uint64_t seed, std::uint64_t step);

struct LogLine {
  std::string event;  // "step" or "refresh"
  std::uint64_t step = 0;
  double loss = 0;
  double wall_ms = 0;
  /// Hyperedges built (refresh) or negatives that hit the rejection cap since
  /// the previous step line.
  std::size_t count = 0;
};

class Trainer {
 public:
  Trainer(const ingest::Dataset& train, model::ModelConfig model_cfg, TrainConfig train_cfg);

  /// Fresh parameters and hyperedges for step 0.
  void initialize();
  /// Restores parameters, optimizer state, step and hyperedges.
  void resume(const std::filesystem::path& checkpoint);

  /// Runs steps until `until` (default: the configured budget). Log lines go
  /// to `log` as JSON objects, one per line. Periodic checkpoints are written
  /// into `checkpoint_dir` when it is non-empty.
  void run(std::ostream* log, std::size_t until = 0, const std::filesystem::path& checkpoint_dir = {});
  /// One optimisation step; returns the batch loss.
  double step();

  /// Rebuilds embedding-based hyperedges from the current parameters so
  /// evaluation sees the final item neighbourhoods.
  void prepare_evaluation();

  nc::Checkpoint checkpoint() const;
  void save(const std::filesystem::path& path) const;
  /// Header identifying the model and training setup of a checkpoint.
  std::string header() const;

  std::uint64_t current_step() const { return step_; }
  std::size_t budget() const { return train_cfg_.total_steps(train_->records.size()); }
  const nc::ParamStore& params() const { return params_; }
  nc::ParamStore& params() { return params_; }
  const nc::AdamState& adam() const { return adam_; }
  const graph::MultiDomainGraph& graph() const { return *graph_; }
  const model::Model& model() const { return *model_; }
  const model::ModelConfig& model_config() const { return model_cfg_; }
  const TrainConfig& train_config() const { return train_cfg_; }

 private:
  void refresh_if_due(std::ostream* log);
  void write(std::ostream* log, const LogLine& line) const;

  const ingest::Dataset* train_;
  model::ModelConfig model_cfg_;
  TrainConfig train_cfg_;
  std::unique_ptr<graph::MultiDomainGraph> graph_;
  std::unique_ptr<model::Model> model_;
  InteractionIndex observed_;
  nc::ParamStore params_;
  nc::AdamState adam_;
  std::uint64_t step_ = 0;
  std::size_t pending_collisions_ = 0;
  std::optional<std::uint64_t> refreshed_at_;
};

/// Text form of the hyperedge-i set, used inside checkpoints.
std::string serialize_hyperedges_i(const graph::MultiDomainGraph& graph);
std::vector<graph::Hyperedge> parse_hyperedges_i(const std::string& text);

}  // namespace h3t::train
