#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "h3trans/mdgraph.hpp"
#include "h3trans/numeric/tensor.hpp"
#include "h3trans/rng.hpp"

namespace h3t::retrieval {

enum class Method { PathBased, EmbeddingBased };
enum class Similarity { InnerProduct, Cosine };

struct RetrievalConfig {
  Method method = Method::EmbeddingBased;
  std::size_t k = 20;
  /// Half-width of the symmetric click-time window for path-based retrieval.
  std::int64_t time_window = 604800;
  /// Training steps between embedding-based recomputations.
  std::size_t refresh_interval = 100;
  Similarity similarity = Similarity::InnerProduct;

  void validate() const;
};

/// One walk endpoint j of i -> u^s -> u^t -> j whose click falls inside the
/// time window of the source click. Each path contributes one entry.
std::vector<ItemId> path_multiset(const graph::MultiDomainGraph& graph, ItemId item, int source,
                                  int target, std::int64_t time_window);

/// Frequency-weighted sampling of up to k distinct items from a path
/// multiset, without replacement. Result is sorted by item id.
std::vector<ItemId> sample_from_multiset(std::vector<ItemId> paths, std::size_t k, Rng& rng);

/// S_i^t by co-click walks restricted to a time window around each source click.
std::vector<ItemId> path_based_candidates(const graph::MultiDomainGraph& graph, ItemId item,
                                          int source, int target, const RetrievalConfig& cfg,
                                          Rng& rng);

/// Exact top-k of `candidates` by similarity of rows of `reps` (indexed by
/// item id) to `query`. Ties go to the smaller item id; `exclude` is skipped.
/// Returned in descending-similarity order.
std::vector<ItemId> embedding_based_candidates(const nc::Tensor2& reps,
                                               std::span<const ItemId> candidates,
                                               const Eigen::Ref<const Eigen::RowVectorXd>& query,
                                               std::size_t k, Similarity similarity,
                                               std::int64_t exclude = -1);

/// Builds every hyperedge-i: for each target domain t and each item i that
/// belongs to some other domain, nodes [i] ++ S_i^t. `item_reps` is used by
/// the embedding method only (rows indexed by item id).
std::vector<graph::Hyperedge> build_hyperedges_i(const graph::MultiDomainGraph& graph,
                                                 const nc::Tensor2* item_reps,
                                                 const RetrievalConfig& cfg, std::uint64_t seed);

/// True when an embedding-based refresh is due at this training step.
bool refresh_due(const RetrievalConfig& cfg, std::size_t step);

}  // namespace h3t::retrieval
