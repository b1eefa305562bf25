#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "h3trans/dataingest.hpp"
#include "h3trans/rng.hpp"

namespace h3t::graph {

enum class NodeKind : std::uint8_t { User, Item };

/// A node of the unified graph: UserNode(u, m) is user u's domain-m node,
/// ItemNode(i) the single node of item i.
struct NodeId {
  NodeKind kind = NodeKind::Item;
  std::uint32_t id = 0;
  DomainId domain = 0;  // meaningful for user nodes only

  static NodeId user(UserId u, int m) { return {NodeKind::User, u, static_cast<DomainId>(m)}; }
  static NodeId item(ItemId i) { return {NodeKind::Item, i, 0}; }

  bool is_user() const { return kind == NodeKind::User; }
  friend bool operator==(const NodeId&, const NodeId&) = default;
};

/// Dense node index: user nodes occupy [0, |U|*T) as u*T + m, items follow.
using NodeIndex = std::uint32_t;

struct Hyperedge {
  enum class Kind : std::uint8_t { HyperU, HyperI };
  Kind kind = Kind::HyperU;
  /// HyperU: the owner's T user nodes in domain order. HyperI: source item
  /// first, then the picked target-domain items.
  std::vector<NodeIndex> nodes;
  std::uint32_t owner = 0;   // user id (HyperU) or source item id (HyperI)
  int target_domain = -1;    // HyperI only

  friend bool operator==(const Hyperedge&, const Hyperedge&) = default;
};

class MultiDomainGraph {
 public:
  MultiDomainGraph() = default;

  /// One user node per (user, domain), one item node per item, typed edges
  /// mirroring the training records. Adjacency lists are sorted by node index,
  /// so the result does not depend on record order.
  static MultiDomainGraph build(const ingest::Dataset& train);

  int domains() const { return domains_; }
  std::size_t user_count() const { return user_count_; }
  std::size_t item_count() const { return item_count_; }
  std::size_t user_node_count() const { return user_count_ * domains_; }
  std::size_t node_count() const { return user_node_count() + item_count_; }
  std::size_t edge_count() const { return edge_count_; }

  NodeIndex index(NodeId node) const;
  NodeId node(NodeIndex index) const;
  NodeIndex user_node(UserId u, int m) const { return static_cast<NodeIndex>(u * domains_ + m); }
  NodeIndex item_node(ItemId i) const { return static_cast<NodeIndex>(user_node_count() + i); }
  bool is_user(NodeIndex v) const { return v < user_node_count(); }
  ItemId item_of(NodeIndex v) const { return static_cast<ItemId>(v - user_node_count()); }
  UserId user_of(NodeIndex v) const { return static_cast<UserId>(v / domains_); }
  int domain_of(NodeIndex v) const { return static_cast<int>(v % domains_); }

  std::span<const NodeIndex> neighbors(NodeIndex v) const;
  /// Click timestamps aligned with neighbors(v).
  std::span<const std::int64_t> neighbor_timestamps(NodeIndex v) const;
  std::size_t degree(NodeIndex v) const { return offsets_[v + 1] - offsets_[v]; }
  /// Timestamp of edge (v, w) or nullopt.
  std::optional<std::int64_t> edge_timestamp(NodeIndex v, NodeIndex w) const;

  const std::vector<std::vector<ItemId>>& domain_items() const { return domain_items_; }
  bool item_in_domain(ItemId item, int m) const;
  /// Domains whose item set contains `item`, ascending.
  const std::vector<int>& item_domains(ItemId item) const { return item_domains_[item]; }

  void build_hyperedges_u();
  const std::vector<Hyperedge>& hyperedges_u() const { return hyper_u_; }

  /// Replaces every hyperedge-i. Each edge must carry a valid (owner, target).
  void set_hyperedges_i(std::vector<Hyperedge> edges);
  /// nullptr when no hyperedge-i is keyed by (item, target).
  const Hyperedge* hyperedge_i(ItemId item, int target) const;
  std::vector<Hyperedge> hyperedges_i() const;
  std::size_t hyperedge_i_count() const { return hyper_i_count_; }

  /// Graph dump: edges as `domain user item timestamp`, hyperedges as
  /// `kind owner node,node,...`. Header comments carry the sizes and domain
  /// item sets so the dump round-trips losslessly.
  void write_dump(std::ostream& edges, std::ostream& hyperedges) const;
  static MultiDomainGraph read_dump(std::istream& edges, std::istream& hyperedges);

  friend bool operator==(const MultiDomainGraph&, const MultiDomainGraph&) = default;

 private:
  int domains_ = 0;
  std::size_t user_count_ = 0;
  std::size_t item_count_ = 0;
  std::size_t edge_count_ = 0;
  std::vector<std::size_t> offsets_;
  std::vector<NodeIndex> adjacency_;
  std::vector<std::int64_t> timestamps_;
  std::vector<std::vector<ItemId>> domain_items_;
  std::vector<std::vector<int>> item_domains_;
  std::vector<Hyperedge> hyper_u_;
  std::vector<Hyperedge> hyper_i_;  // slot item*T + target; empty nodes = absent
  std::size_t hyper_i_count_ = 0;
};

std::string format_node(const MultiDomainGraph& g, NodeIndex v);

/// Incidence-matrix queries over every hyperedge of a graph (hyperedge-u
/// first, then hyperedge-i in (item, target) order).
class IncidenceView {
 public:
  explicit IncidenceView(const MultiDomainGraph& graph);

  std::size_t hyperedge_count() const { return edges_.size(); }
  const Hyperedge& hyperedge(std::size_t e) const { return edges_[e]; }
  /// h_ve
  bool contains(NodeIndex v, std::size_t e) const;
  /// E_v
  std::span<const std::size_t> edges_of(NodeIndex v) const { return node_edges_[v]; }
  /// V_e
  std::span<const NodeIndex> nodes_of(std::size_t e) const { return edges_[e].nodes; }
  /// N_v: other nodes sharing at least one hyperedge with v, ascending.
  std::vector<NodeIndex> neighbors(NodeIndex v) const;

 private:
  std::vector<Hyperedge> edges_;
  std::vector<std::vector<std::size_t>> node_edges_;
};

/// All neighbors in adjacency order when degree <= n, otherwise n distinct
/// neighbors drawn uniformly without replacement (returned in adjacency order).
std::vector<NodeIndex> sample_neighbors(const MultiDomainGraph& graph, NodeIndex node, std::size_t n,
                                        Rng& rng);

/// Bucketed shortest-path lengths: 0..d_max, and d_max + 1 for pairs farther
/// than d_max or disconnected.
class DistanceMatrix {
 public:
  DistanceMatrix(std::size_t size, int d_max);

  std::size_t size() const { return size_; }
  int d_max() const { return d_max_; }
  std::uint8_t unreachable() const { return static_cast<std::uint8_t>(d_max_ + 1); }
  std::uint8_t at(std::size_t a, std::size_t b) const { return buckets_[a * size_ + b]; }
  void set(std::size_t a, std::size_t b, std::uint8_t v) { buckets_[a * size_ + b] = v; }
  const std::vector<std::uint8_t>& buckets() const { return buckets_; }

 private:
  std::size_t size_;
  int d_max_;
  std::vector<std::uint8_t> buckets_;
};

/// BFS over ordinary user-item edges only, truncated at d_max.
DistanceMatrix shortest_path_distances(const MultiDomainGraph& graph, std::span<const NodeIndex> nodes,
                                       int d_max);

/// Per-source BFS rows over item nodes, computed on first use.
class ItemDistanceCache {
 public:
  ItemDistanceCache(const MultiDomainGraph& graph, int d_max);

  std::uint8_t distance(ItemId a, ItemId b);
  int d_max() const { return d_max_; }

 private:
  const MultiDomainGraph* graph_;
  int d_max_;
  std::vector<std::vector<std::uint8_t>> rows_;
};

}  // namespace h3t::graph
