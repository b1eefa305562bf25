#include "h3trans/mdgraph.hpp"

#include <algorithm>
#include <deque>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "h3trans/errors.hpp"

namespace h3t::graph {

namespace {

// Truncated BFS from `source`; calls visit(node, depth) for every node within
// d_max hops (source included at depth 0).
template <class Visit>
void bfs(const MultiDomainGraph& g, NodeIndex source, int d_max, std::vector<int>& depth,
         std::vector<NodeIndex>& touched, Visit&& visit) {
  std::deque<NodeIndex> queue{source};
  depth[source] = 0;
  touched.push_back(source);
  while (!queue.empty()) {
    const NodeIndex v = queue.front();
    queue.pop_front();
    visit(v, depth[v]);
    if (depth[v] == d_max) continue;
    for (NodeIndex w : g.neighbors(v)) {
      if (depth[w] >= 0) continue;
      depth[w] = depth[v] + 1;
      touched.push_back(w);
      queue.push_back(w);
    }
  }
  for (NodeIndex v : touched) depth[v] = -1;
  touched.clear();
}

}  // namespace

MultiDomainGraph MultiDomainGraph::build(const ingest::Dataset& train) {
  MultiDomainGraph g;
  g.domains_ = train.domains;
  g.user_count_ = train.user_count;
  g.item_count_ = train.item_count;
  g.domain_items_ = train.per_domain_items;
  g.item_domains_.assign(g.item_count_, {});
  for (int m = 0; m < g.domains_; ++m)
    for (ItemId i : g.domain_items_[m]) g.item_domains_[i].push_back(m);

  std::vector<std::vector<std::pair<NodeIndex, std::int64_t>>> lists(g.node_count());
  for (const auto& r : train.records) {
    const NodeIndex u = g.user_node(r.user, r.domain);
    const NodeIndex i = g.item_node(r.item);
    lists[u].emplace_back(i, r.timestamp);
    lists[i].emplace_back(u, r.timestamp);
  }
  g.offsets_.assign(g.node_count() + 1, 0);
  for (NodeIndex v = 0; v < g.node_count(); ++v) {
    auto& l = lists[v];
    std::sort(l.begin(), l.end());
    // Duplicate clicks collapse onto the earliest one.
    l.erase(std::unique(l.begin(), l.end(),
                        [](const auto& a, const auto& b) { return a.first == b.first; }),
            l.end());
    g.offsets_[v + 1] = g.offsets_[v] + l.size();
    for (const auto& [w, ts] : l) {
      g.adjacency_.push_back(w);
      g.timestamps_.push_back(ts);
    }
  }
  g.edge_count_ = g.adjacency_.size() / 2;
  g.hyper_i_.assign(g.item_count_ * g.domains_, {});
  return g;
}

NodeIndex MultiDomainGraph::index(NodeId node) const {
  if (node.is_user()) {
    if (node.id >= user_count_ || node.domain >= domains_) throw DataError("user node out of range");
    return user_node(node.id, node.domain);
  }
  if (node.id >= item_count_) throw DataError("item node out of range");
  return item_node(node.id);
}

NodeId MultiDomainGraph::node(NodeIndex index) const {
  if (is_user(index)) return NodeId::user(user_of(index), domain_of(index));
  return NodeId::item(item_of(index));
}

std::span<const NodeIndex> MultiDomainGraph::neighbors(NodeIndex v) const {
  return {adjacency_.data() + offsets_[v], offsets_[v + 1] - offsets_[v]};
}

std::span<const std::int64_t> MultiDomainGraph::neighbor_timestamps(NodeIndex v) const {
  return {timestamps_.data() + offsets_[v], offsets_[v + 1] - offsets_[v]};
}

std::optional<std::int64_t> MultiDomainGraph::edge_timestamp(NodeIndex v, NodeIndex w) const {
  const auto nb = neighbors(v);
  auto it = std::lower_bound(nb.begin(), nb.end(), w);
  if (it == nb.end() || *it != w) return std::nullopt;
  return neighbor_timestamps(v)[it - nb.begin()];
}

bool MultiDomainGraph::item_in_domain(ItemId item, int m) const {
  if (m < 0 || m >= domains_) return false;
  const auto& items = domain_items_[m];
  return std::binary_search(items.begin(), items.end(), item);
}

void MultiDomainGraph::build_hyperedges_u() {
  hyper_u_.clear();
  hyper_u_.reserve(user_count_);
  for (UserId u = 0; u < user_count_; ++u) {
    Hyperedge e;
    e.kind = Hyperedge::Kind::HyperU;
    e.owner = u;
    for (int m = 0; m < domains_; ++m) e.nodes.push_back(user_node(u, m));
    hyper_u_.push_back(std::move(e));
  }
}

void MultiDomainGraph::set_hyperedges_i(std::vector<Hyperedge> edges) {
  hyper_i_.assign(item_count_ * domains_, {});
  hyper_i_count_ = 0;
  for (auto& e : edges) {
    if (e.kind != Hyperedge::Kind::HyperI || e.owner >= item_count_ || e.target_domain < 0 ||
        e.target_domain >= domains_)
      throw DataError("malformed hyperedge-i");
    if (e.nodes.empty() || e.nodes.front() != item_node(e.owner))
      throw DataError("hyperedge-i must start with its source item");
    auto& slot = hyper_i_[static_cast<std::size_t>(e.owner) * domains_ + e.target_domain];
    if (slot.nodes.empty()) ++hyper_i_count_;
    slot = std::move(e);
  }
}

const Hyperedge* MultiDomainGraph::hyperedge_i(ItemId item, int target) const {
  if (hyper_i_.empty() || item >= item_count_ || target < 0 || target >= domains_) return nullptr;
  const auto& e = hyper_i_[static_cast<std::size_t>(item) * domains_ + target];
  return e.nodes.empty() ? nullptr : &e;
}

std::vector<Hyperedge> MultiDomainGraph::hyperedges_i() const {
  std::vector<Hyperedge> out;
  out.reserve(hyper_i_count_);
  for (const auto& e : hyper_i_)
    if (!e.nodes.empty()) out.push_back(e);
  return out;
}

std::string format_node(const MultiDomainGraph& g, NodeIndex v) {
  if (g.is_user(v)) return "U" + std::to_string(g.user_of(v)) + "." + std::to_string(g.domain_of(v));
  return "I" + std::to_string(g.item_of(v));
}

void MultiDomainGraph::write_dump(std::ostream& edges, std::ostream& hyperedges) const {
  edges << "# h3trans-graph domains=" << domains_ << " users=" << user_count_
        << " items=" << item_count_ << '\n';
  for (int m = 0; m < domains_; ++m) {
    edges << "# domain_items " << m << ' ';
    for (std::size_t k = 0; k < domain_items_[m].size(); ++k)
      edges << (k ? "," : "") << domain_items_[m][k];
    edges << '\n';
  }
  for (NodeIndex v = 0; v < user_node_count(); ++v) {
    const auto nb = neighbors(v);
    const auto ts = neighbor_timestamps(v);
    for (std::size_t k = 0; k < nb.size(); ++k)
      edges << domain_of(v) << '\t' << user_of(v) << '\t' << item_of(nb[k]) << '\t' << ts[k] << '\n';
  }
  auto write_edge = [&](const Hyperedge& e) {
    if (e.kind == Hyperedge::Kind::HyperU)
      hyperedges << "HyperU\t" << e.owner << '\t';
    else
      hyperedges << "HyperI\t" << e.owner << '.' << e.target_domain << '\t';
    for (std::size_t k = 0; k < e.nodes.size(); ++k)
      hyperedges << (k ? "," : "") << format_node(*this, e.nodes[k]);
    hyperedges << '\n';
  };
  for (const auto& e : hyper_u_) write_edge(e);
  for (const auto& e : hyper_i_)
    if (!e.nodes.empty()) write_edge(e);
}

MultiDomainGraph MultiDomainGraph::read_dump(std::istream& edges, std::istream& hyperedges) {
  ingest::Dataset ds;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(edges, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line.rfind("# h3trans-graph", 0) == 0) {
      std::istringstream in(line.substr(16));
      std::string tok;
      while (in >> tok) {
        const auto eq = tok.find('=');
        const auto key = tok.substr(0, eq);
        const auto value = std::stoull(tok.substr(eq + 1));
        if (key == "domains") ds.domains = static_cast<int>(value);
        if (key == "users") ds.user_count = value;
        if (key == "items") ds.item_count = value;
      }
      ds.per_domain_items.assign(ds.domains, {});
      header = true;
      continue;
    }
    if (line.rfind("# domain_items ", 0) == 0) {
      if (!header) throw ParseError("edges", line_no, "domain_items before header");
      std::istringstream in(line.substr(15));
      int m = 0;
      std::string list;
      in >> m;
      in >> list;
      std::istringstream items(list);
      std::string tok;
      while (std::getline(items, tok, ','))
        if (!tok.empty()) ds.per_domain_items.at(m).push_back(static_cast<ItemId>(std::stoul(tok)));
      continue;
    }
    if (line.front() == '#') continue;
    std::istringstream in(line);
    ingest::InteractionRecord r;
    unsigned domain = 0;
    if (!(in >> domain >> r.user >> r.item >> r.timestamp))
      throw ParseError("edges", line_no, "expected domain user item timestamp");
    r.domain = static_cast<DomainId>(domain);
    ds.records.push_back(r);
  }
  if (!header) throw DataError("graph dump lacks its header line");
  MultiDomainGraph g = build(ds);

  auto parse_node = [&](const std::string& tok, std::size_t ln) -> NodeIndex {
    if (tok.size() < 2) throw ParseError("hyperedges", ln, "bad node '" + tok + "'");
    if (tok[0] == 'I') return g.item_node(static_cast<ItemId>(std::stoul(tok.substr(1))));
    const auto dot = tok.find('.');
    if (tok[0] != 'U' || dot == std::string::npos) throw ParseError("hyperedges", ln, "bad node '" + tok + "'");
    return g.user_node(static_cast<UserId>(std::stoul(tok.substr(1, dot - 1))), std::stoi(tok.substr(dot + 1)));
  };
  std::vector<Hyperedge> hyper_i;
  line_no = 0;
  while (std::getline(hyperedges, line)) {
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    std::istringstream in(line);
    std::string kind, owner, nodes;
    if (!(in >> kind >> owner >> nodes)) throw ParseError("hyperedges", line_no, "expected kind owner nodes");
    Hyperedge e;
    std::istringstream list(nodes);
    std::string tok;
    while (std::getline(list, tok, ',')) e.nodes.push_back(parse_node(tok, line_no));
    if (kind == "HyperU") {
      e.kind = Hyperedge::Kind::HyperU;
      e.owner = static_cast<std::uint32_t>(std::stoul(owner));
      g.hyper_u_.push_back(std::move(e));
    } else if (kind == "HyperI") {
      const auto dot = owner.find('.');
      if (dot == std::string::npos) throw ParseError("hyperedges", line_no, "HyperI owner must be item.target");
      e.kind = Hyperedge::Kind::HyperI;
      e.owner = static_cast<std::uint32_t>(std::stoul(owner.substr(0, dot)));
      e.target_domain = std::stoi(owner.substr(dot + 1));
      hyper_i.push_back(std::move(e));
    } else {
      throw ParseError("hyperedges", line_no, "unknown hyperedge kind '" + kind + "'");
    }
  }
  g.set_hyperedges_i(std::move(hyper_i));
  return g;
}

IncidenceView::IncidenceView(const MultiDomainGraph& graph)
    : edges_(graph.hyperedges_u()), node_edges_(graph.node_count()) {
  for (auto& e : graph.hyperedges_i()) edges_.push_back(std::move(e));
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    auto nodes = edges_[e].nodes;
    std::sort(nodes.begin(), nodes.end());
    nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
    for (NodeIndex v : nodes) node_edges_[v].push_back(e);
  }
}

bool IncidenceView::contains(NodeIndex v, std::size_t e) const {
  const auto& nodes = edges_[e].nodes;
  return std::find(nodes.begin(), nodes.end(), v) != nodes.end();
}

std::vector<NodeIndex> IncidenceView::neighbors(NodeIndex v) const {
  std::vector<NodeIndex> out;
  for (std::size_t e : node_edges_[v])
    for (NodeIndex w : edges_[e].nodes)
      if (w != v) out.push_back(w);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<NodeIndex> sample_neighbors(const MultiDomainGraph& graph, NodeIndex node, std::size_t n,
                                        Rng& rng) {
  const auto nb = graph.neighbors(node);
  if (nb.size() <= n) return {nb.begin(), nb.end()};
  // Partial Fisher-Yates over positions, then restore adjacency order.
  std::vector<std::size_t> pos(nb.size());
  for (std::size_t k = 0; k < pos.size(); ++k) pos[k] = k;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = k + uniform_index(rng, pos.size() - k);
    std::swap(pos[k], pos[j]);
  }
  std::sort(pos.begin(), pos.begin() + n);
  std::vector<NodeIndex> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = nb[pos[k]];
  return out;
}

DistanceMatrix::DistanceMatrix(std::size_t size, int d_max)
    : size_(size), d_max_(d_max), buckets_(size * size, static_cast<std::uint8_t>(d_max + 1)) {
  if (d_max < 1 || d_max > 250) throw DataError("d_max must lie in [1, 250]");
}

DistanceMatrix shortest_path_distances(const MultiDomainGraph& graph, std::span<const NodeIndex> nodes,
                                       int d_max) {
  DistanceMatrix out(nodes.size(), d_max);
  if (nodes.empty()) return out;
  // Positions of each requested node (a node may be requested twice).
  std::vector<std::vector<std::size_t>> slots(graph.node_count());
  for (std::size_t k = 0; k < nodes.size(); ++k) slots.at(nodes[k]).push_back(k);
  std::vector<int> depth(graph.node_count(), -1);
  std::vector<NodeIndex> touched;
  for (std::size_t a = 0; a < nodes.size(); ++a) {
    bfs(graph, nodes[a], d_max, depth, touched, [&](NodeIndex v, int d) {
      for (std::size_t b : slots[v]) out.set(a, b, static_cast<std::uint8_t>(d));
    });
  }
  return out;
}

ItemDistanceCache::ItemDistanceCache(const MultiDomainGraph& graph, int d_max)
    : graph_(&graph), d_max_(d_max), rows_(graph.item_count()) {}

std::uint8_t ItemDistanceCache::distance(ItemId a, ItemId b) {
  auto& row = rows_[a];
  if (row.empty()) {
    row.assign(graph_->item_count(), static_cast<std::uint8_t>(d_max_ + 1));
    std::vector<int> depth(graph_->node_count(), -1);
    std::vector<NodeIndex> touched;
    bfs(*graph_, graph_->item_node(a), d_max_, depth, touched, [&](NodeIndex v, int d) {
      if (!graph_->is_user(v)) row[graph_->item_of(v)] = static_cast<std::uint8_t>(d);
    });
  }
  return row[b];
}

}  // namespace h3t::graph
