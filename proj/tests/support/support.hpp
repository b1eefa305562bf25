#pragma once

// Independent oracles and fixtures shared by the unit and acceptance suites.
// Nothing here calls the library routine it is meant to check.

#include <cstdint>
#include <functional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "h3trans/dataingest.hpp"
#include "h3trans/evaluator.hpp"
#include "h3trans/mdgraph.hpp"
#include "h3trans/model.hpp"
#include "h3trans/numeric/tape.hpp"

namespace h3t::fx {

using nc::Index;
using nc::Tensor2;

struct Click {
  std::string user;
  std::string item;
  int domain = 0;
  std::int64_t ts = 0;
};

/// Raw records without ratings, in the given order.
std::vector<ingest::RawRecord> raw(const std::vector<Click>& clicks);
/// Dense dataset (remap in first-appearance order).
ingest::Dataset dataset(const std::vector<Click>& clicks, int domains = 0);

Tensor2 random_matrix(Index rows, Index cols, std::uint64_t seed, double scale = 1.0);

// -- gradient checking -------------------------------------------------------

/// Builds a scalar from leaves bound to the given inputs.
using ScalarFn = std::function<nc::Var(nc::Tape&, const std::vector<nc::Var>&)>;

/// Largest per-input relative error ||analytic - numeric|| / max(||analytic||,
/// ||numeric||, 1e-12) under central differences with step h.
double gradient_error(const std::vector<Tensor2>& inputs, const ScalarFn& f, double h = 1e-5);

/// Same check against every block of a parameter store.
using StoreFn = std::function<nc::Var(nc::Tape&, const nc::ParamStore&)>;
struct BlockError {
  std::string name;
  double error = 0;
};
std::vector<BlockError> store_gradient_errors(nc::ParamStore store, const StoreFn& f, double h = 1e-5);

/// Weighted sum of all entries with fixed pseudo-random weights, so every
/// output entry reaches the scalar with a distinct coefficient.
nc::Var weighted_sum(nc::Var out, std::uint64_t seed);

// -- oracles -----------------------------------------------------------------

/// Repeated full rescans removing users and items below k until nothing changes.
std::vector<ingest::RawRecord> kcore_oracle(const std::vector<ingest::RawRecord>& records, int k);

/// All-pairs shortest paths over ordinary edges (Floyd-Warshall), bucketed
/// like DistanceMatrix (d_max + 1 for far or disconnected pairs).
std::vector<std::vector<std::uint8_t>> floyd_warshall_buckets(const graph::MultiDomainGraph& g,
                                                              const std::vector<graph::NodeIndex>& nodes,
                                                              int d_max);

/// Distinct endpoints j of walks i -> u^s -> u^t -> j read directly off the
/// records, with |ts(u,j,t) - ts(u,i,s)| <= window and j != i.
std::set<ItemId> path_oracle(const ingest::Dataset& data, ItemId item, int source, int target,
                             std::int64_t window);

/// Full argsort by inner product, descending, ties to the smaller id.
std::vector<ItemId> argsort_topk(const Tensor2& reps, const std::vector<ItemId>& candidates,
                                 const Eigen::RowVectorXd& query, std::size_t k, std::int64_t exclude);

/// Rank by sorting (score desc, held-out item last among equals).
std::size_t rank_by_sort(const std::vector<double>& scores, std::size_t target);

double recount_hr(const std::vector<std::size_t>& ranks, std::size_t k);
double recount_mrr(const std::vector<std::size_t>& ranks);
double recount_ndcg(const std::vector<std::size_t>& ranks, std::size_t k);

/// Dense full-graph mean-pool GNN for a single-domain dataset: X gathered,
/// then per layer H <- act(H_self W_self + (D^-1 A H) W_nb) with separate user
/// and item weights, activation on hidden layers only.
Tensor2 dense_reference_gnn(const ingest::Dataset& train, const nc::ParamStore& params,
                            const model::ModelConfig& cfg);

/// Small synthetic split used by trainer and CLI tests.
ingest::SplitDataset tiny_split(std::uint64_t seed, int domains = 2, int users = 24, int items = 20);

/// Cosine between category histograms of each user's domain-0 and domain-1
/// records, averaged over users.
double histogram_correlation(const ingest::SyntheticWorld& world);

}  // namespace h3t::fx
