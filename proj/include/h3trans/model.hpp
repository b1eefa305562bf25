#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "h3trans/itemretrieval.hpp"
#include "h3trans/mdgraph.hpp"
#include "h3trans/numeric/attention.hpp"
#include "h3trans/numeric/tape.hpp"

namespace h3t::model {

using graph::NodeIndex;
using nc::Tape;
using nc::Tensor2;
using nc::Var;

/// Ablation ladder, from the plain GNN up to the full model.
enum class Variant { Vanilla, HU, HUplus, PHI, EHI, EHIplus };

Variant parse_variant(std::string_view name);
std::string_view variant_name(Variant v);
bool has_hyper_u(Variant v);
/// HUplus and above use attention in the user module; HU uses a mean combine.
bool hyper_u_attention(Variant v);
bool has_hyper_i(Variant v);
bool has_distance_bias(Variant v);
/// Retrieval method used by variants with item transfer.
retrieval::Method retrieval_method(Variant v);

struct ModelConfig {
  /// Layer output widths; the embedding width equals dims[0].
  std::vector<int> dims{128, 64};
  int heads = 4;
  /// Neighbors sampled per node and layer during training.
  std::size_t neighbors = 10;
  double temperature = 0.2;
  int d_max = 6;
  Variant variant = Variant::EHIplus;
  /// k, window and refresh interval; the method field is overridden by the variant.
  retrieval::RetrievalConfig retrieval;
  retrieval::Similarity score = retrieval::Similarity::InnerProduct;
  /// Disables the between-layer nonlinearity.
  bool linear = false;
  double slope = 0.01;

  int layers() const { return static_cast<int>(dims.size()); }
  int embedding_dim() const { return dims.front(); }
  /// Width entering layer l (1-based) and leaving it.
  int in_dim(int l) const { return l == 1 ? dims.front() : dims[l - 2]; }
  int out_dim(int l) const { return dims[l - 1]; }
  retrieval::RetrievalConfig effective_retrieval() const;

  void validate() const;
  /// Canonical text form, stored in checkpoint headers.
  std::string describe() const;
};

/// Creates every parameter of the model (all variants share one layout, so
/// equal seeds give equal initial weights across the ladder). The distance
/// bias table starts at zero.
void init_params(nc::ParamStore& store, const ModelConfig& cfg, std::size_t users, std::size_t items,
                 std::uint64_t seed);

/// Binds stored parameters to a tape, either as trainable leaves or as
/// constants (inference).
class ParamBinder {
 public:
  ParamBinder(Tape& tape, const nc::ParamStore& store, bool trainable)
      : tape_(&tape), store_(&store), trainable_(trainable) {}

  Var operator()(const std::string& name);
  nc::AttentionWeights attention(const std::string& prefix);
  Tape& tape() { return *tape_; }

 private:
  Tape* tape_;
  const nc::ParamStore* store_;
  bool trainable_;
  std::map<std::string, Var> constants_;
};

enum class Phase { HyperI, MessagePass, HyperU, Readout };
std::string_view phase_name(Phase p);
using PhaseHook = std::function<void(Phase, int layer)>;

/// Identifies the per-node neighbor sampling streams of one training step.
struct SamplingKey {
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
};

/// Node sets per level and the row links between consecutive levels.
/// nodes[l] is sorted, so user nodes come first.
struct Plan {
  int target_domain = -1;
  std::vector<std::vector<NodeIndex>> nodes;  // levels 0..L
  std::vector<std::size_t> user_rows;         // user nodes per level
  std::vector<std::vector<int>> self_pos;     // [l] position in level l-1 of nodes[l][k]
  std::vector<std::vector<int>> nb_offsets;   // [l] CSR offsets into nb_pos[l]
  std::vector<std::vector<int>> nb_pos;       // [l] neighbor positions in level l-1
};

/// One scoring request: user u in domain m against a list of items.
struct Query {
  UserId user = 0;
  int domain = 0;
  std::vector<ItemId> items;
};

class Model {
 public:
  Model(const graph::MultiDomainGraph& graph, ModelConfig cfg);

  const ModelConfig& config() const { return cfg_; }
  const graph::MultiDomainGraph& graph() const { return *graph_; }
  void set_hook(PhaseHook hook) { hook_ = std::move(hook); }

  /// Layered subgraph for `targets`. With a key, each node keeps up to n
  /// sampled neighbors per layer; without one, full neighborhoods are used.
  /// `target_domain` selects the hyperedge-i set (-1: no item transfer).
  Plan plan(std::span<const NodeIndex> targets, int target_domain, const SamplingKey* key) const;
  /// Every node at every level with full neighborhoods.
  Plan full_plan(int target_domain) const;

  /// Layer-0 rows: both nodes of a user share that user's embedding row.
  Var gather_initial(ParamBinder& p, std::span<const NodeIndex> nodes) const;
  /// Refines non-native item rows of level l-1 toward the plan's target domain.
  Var hyper_i_layer(ParamBinder& p, Var h, const Plan& plan, int l) const;
  /// Mean aggregation plus linear update for every node of level l.
  Var message_pass_layer(ParamBinder& p, Var h, const Plan& plan, int l) const;
  /// Cross-domain user refinement over each user's T rows of level l.
  Var hyper_u_layer(ParamBinder& p, Var h, const Plan& plan, int l) const;

  /// Final-layer representations of plan.nodes[L] (readout = last layer).
  Var run(ParamBinder& p, const Plan& plan) const;

  /// Score matrix (queries x items-per-query). All queries carry the same
  /// number of items. With item transfer, each target domain gets its own pass.
  Var forward(ParamBinder& p, std::span<const Query> batch, const SamplingKey* key) const;

  /// Full-graph representations (rows in node-index order) for one target
  /// domain. Without item transfer the domain argument is ignored.
  Tensor2 representations(const nc::ParamStore& params, int target_domain) const;

 private:
  void phase(Phase ph, int l) const {
    if (hook_) hook_(ph, l);
  }
  void finish_plan(Plan& plan, std::vector<std::vector<std::vector<NodeIndex>>>& nb) const;

  const graph::MultiDomainGraph* graph_;
  ModelConfig cfg_;
  PhaseHook hook_;
  mutable graph::ItemDistanceCache distances_;
};

/// Standalone item transfer for one source row: attention over
/// [source; candidates], returning row 0. No candidates returns the source
/// row itself. `distances` (of size 1 + candidates) adds the bias table when
/// given.
Var hyper_i_refine(Var source_row, Var candidate_rows, const graph::DistanceMatrix* distances,
                   const nc::AttentionWeights& w, Var bias_table, int heads);

/// Standalone user refinement of a user's T domain rows.
Var hyper_u_refine(Var rows, const nc::AttentionWeights& w, Var combine, Variant variant, int heads);

/// Row-wise score of paired representations.
Var predict(Var users, Var items, retrieval::Similarity similarity);

/// Recomputes every hyperedge-i for the variant's retrieval method. The
/// embedding method ranks by the items' current embedding rows.
void refresh_hyperedges_i(graph::MultiDomainGraph& graph, const nc::ParamStore& params,
                          const ModelConfig& cfg, std::uint64_t seed);

}  // namespace h3t::model
