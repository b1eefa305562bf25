#include "h3trans/itemretrieval.hpp"

#include <algorithm>
#include <cmath>

#include "h3trans/errors.hpp"

namespace h3t::retrieval {

using graph::Hyperedge;
using graph::MultiDomainGraph;
using graph::NodeIndex;

void RetrievalConfig::validate() const {
  if (k < 1) throw ConfigError("k must be >= 1");
  if (time_window < 0) throw ConfigError("time_window must be >= 0");
  if (refresh_interval < 1) throw ConfigError("refresh_interval must be >= 1");
}

std::vector<ItemId> path_multiset(const MultiDomainGraph& graph, ItemId item, int source, int target,
                                  std::int64_t time_window) {
  std::vector<ItemId> out;
  const NodeIndex i = graph.item_node(item);
  const auto users = graph.neighbors(i);
  const auto clicks = graph.neighbor_timestamps(i);
  for (std::size_t k = 0; k < users.size(); ++k) {
    if (graph.domain_of(users[k]) != source) continue;
    const std::int64_t t0 = clicks[k];
    const NodeIndex ut = graph.user_node(graph.user_of(users[k]), target);
    const auto items = graph.neighbors(ut);
    const auto ts = graph.neighbor_timestamps(ut);
    for (std::size_t j = 0; j < items.size(); ++j) {
      if (ts[j] < t0 - time_window || ts[j] > t0 + time_window) continue;
      const ItemId cand = graph.item_of(items[j]);
      if (cand != item) out.push_back(cand);
    }
  }
  return out;
}

std::vector<ItemId> sample_from_multiset(std::vector<ItemId> paths, std::size_t k, Rng& rng) {
  std::sort(paths.begin(), paths.end());
  std::vector<ItemId> items;
  std::vector<std::size_t> weight;
  for (ItemId j : paths) {
    if (items.empty() || items.back() != j) {
      items.push_back(j);
      weight.push_back(0);
    }
    ++weight.back();
  }
  std::vector<ItemId> out;
  std::size_t total = paths.size();
  while (out.size() < k && total > 0) {
    std::size_t r = uniform_index(rng, total);
    std::size_t pick = 0;
    while (r >= weight[pick]) r -= weight[pick++];
    out.push_back(items[pick]);
    total -= weight[pick];
    weight[pick] = 0;
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<ItemId> path_based_candidates(const MultiDomainGraph& graph, ItemId item, int source,
                                          int target, const RetrievalConfig& cfg, Rng& rng) {
  return sample_from_multiset(path_multiset(graph, item, source, target, cfg.time_window), cfg.k, rng);
}

std::vector<ItemId> embedding_based_candidates(const nc::Tensor2& reps, std::span<const ItemId> candidates,
                                               const Eigen::Ref<const Eigen::RowVectorXd>& query,
                                               std::size_t k, Similarity similarity,
                                               std::int64_t exclude) {
  if (query.size() != reps.cols()) throw DimensionError("embedding_based_candidates: query width mismatch");
  std::vector<std::pair<double, ItemId>> scored;
  scored.reserve(candidates.size());
  const double qnorm = query.norm();
  for (ItemId j : candidates) {
    if (static_cast<std::int64_t>(j) == exclude) continue;
    double s = reps.row(j).dot(query);
    if (similarity == Similarity::Cosine) {
      const double denom = reps.row(j).norm() * qnorm;
      s = denom > 0 ? s / denom : 0.0;
    }
    scored.emplace_back(s, j);
  }
  const std::size_t n = std::min(k, scored.size());
  auto better = [](const auto& a, const auto& b) {
    return a.first > b.first || (a.first == b.first && a.second < b.second);
  };
  std::partial_sort(scored.begin(), scored.begin() + n, scored.end(), better);
  std::vector<ItemId> out(n);
  for (std::size_t r = 0; r < n; ++r) out[r] = scored[r].second;
  return out;
}

std::vector<Hyperedge> build_hyperedges_i(const MultiDomainGraph& graph, const nc::Tensor2* item_reps,
                                          const RetrievalConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (cfg.method == Method::EmbeddingBased) {
    if (item_reps == nullptr) throw DataError("embedding-based retrieval needs item representations");
    if (static_cast<std::size_t>(item_reps->rows()) != graph.item_count())
      throw DimensionError("item representation rows must equal the item count");
  }
  std::vector<Hyperedge> out;
  for (ItemId i = 0; i < graph.item_count(); ++i) {
    const auto& domains = graph.item_domains(i);
    for (int t = 0; t < graph.domains(); ++t) {
      bool has_source = false;
      for (int s : domains) has_source |= (s != t);
      if (!has_source) continue;

      std::vector<ItemId> picked;
      if (cfg.method == Method::PathBased) {
        std::vector<ItemId> paths;
        for (int s : domains) {
          if (s == t) continue;
          auto part = path_multiset(graph, i, s, t, cfg.time_window);
          paths.insert(paths.end(), part.begin(), part.end());
        }
        Rng rng = stream(seed, {0x9a7aULL, i, static_cast<std::uint64_t>(t)});
        picked = sample_from_multiset(std::move(paths), cfg.k, rng);
      } else {
        picked = embedding_based_candidates(*item_reps, graph.domain_items()[t], item_reps->row(i),
                                            cfg.k, cfg.similarity, i);
      }
      Hyperedge e;
      e.kind = Hyperedge::Kind::HyperI;
      e.owner = i;
      e.target_domain = t;
      e.nodes.push_back(graph.item_node(i));
      for (ItemId j : picked) e.nodes.push_back(graph.item_node(j));
      out.push_back(std::move(e));
    }
  }
  return out;
}

bool refresh_due(const RetrievalConfig& cfg, std::size_t step) {
  return cfg.method == Method::EmbeddingBased && step % cfg.refresh_interval == 0;
}

}  // namespace h3t::retrieval
