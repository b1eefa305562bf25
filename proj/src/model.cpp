#include "h3trans/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include "h3trans/errors.hpp"
#include "h3trans/numeric/ops.hpp"

namespace h3t::model {

namespace {

constexpr std::uint64_t kNeighborStream = 0x6e62;
constexpr std::uint64_t kInitStream = 0x1417;

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
         });
}

std::string layer_prefix(int l) { return "L" + std::to_string(l) + "."; }

int position(const std::vector<NodeIndex>& sorted, NodeIndex v) {
  auto it = std::lower_bound(sorted.begin(), sorted.end(), v);
  if (it == sorted.end() || *it != v) return -1;
  return static_cast<int>(it - sorted.begin());
}

}  // namespace

Variant parse_variant(std::string_view name) {
  for (Variant v : {Variant::Vanilla, Variant::HU, Variant::HUplus, Variant::PHI, Variant::EHI, Variant::EHIplus})
    if (iequals(name, variant_name(v))) return v;
  throw ConfigError("unknown variant '" + std::string(name) + "' (Vanilla, HU, HUplus, PHI, EHI, EHIplus)");
}

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::Vanilla: return "Vanilla";
    case Variant::HU: return "HU";
    case Variant::HUplus: return "HUplus";
    case Variant::PHI: return "PHI";
    case Variant::EHI: return "EHI";
    case Variant::EHIplus: return "EHIplus";
  }
  return "?";
}

bool has_hyper_u(Variant v) { return v != Variant::Vanilla; }
bool hyper_u_attention(Variant v) { return v != Variant::Vanilla && v != Variant::HU; }
bool has_hyper_i(Variant v) { return v == Variant::PHI || v == Variant::EHI || v == Variant::EHIplus; }
bool has_distance_bias(Variant v) { return v == Variant::EHIplus; }
retrieval::Method retrieval_method(Variant v) {
  return v == Variant::PHI ? retrieval::Method::PathBased : retrieval::Method::EmbeddingBased;
}

std::string_view phase_name(Phase p) {
  switch (p) {
    case Phase::HyperI: return "hyper_i";
    case Phase::MessagePass: return "message_pass";
    case Phase::HyperU: return "hyper_u";
    case Phase::Readout: return "readout";
  }
  return "?";
}

retrieval::RetrievalConfig ModelConfig::effective_retrieval() const {
  retrieval::RetrievalConfig r = retrieval;
  r.method = retrieval_method(variant);
  return r;
}

void ModelConfig::validate() const {
  if (dims.empty()) throw ConfigError("dims must list at least one layer width");
  if (heads < 1) throw ConfigError("heads must be >= 1");
  for (int d : dims) {
    if (d < 1) throw ConfigError("layer widths must be >= 1");
    if (d % heads != 0)
      throw ConfigError("heads (" + std::to_string(heads) + ") must divide every layer width, got " +
                        std::to_string(d));
  }
  if (neighbors < 1) throw ConfigError("neighbors must be >= 1");
  if (!(temperature > 0)) throw ConfigError("temperature must be > 0");
  if (d_max < 1 || d_max > 250) throw ConfigError("d_max must lie in [1, 250]");
  if (!std::isfinite(slope)) throw ConfigError("slope must be finite");
  retrieval.validate();
}

std::string ModelConfig::describe() const {
  std::ostringstream s;
  s.precision(17);
  s << "dims=";
  for (std::size_t k = 0; k < dims.size(); ++k) s << (k ? "," : "") << dims[k];
  s << " heads=" << heads << " neighbors=" << neighbors << " temperature=" << temperature << " d_max=" << d_max
    << " variant=" << variant_name(variant) << " k=" << retrieval.k << " time_window=" << retrieval.time_window
    << " refresh_interval=" << retrieval.refresh_interval
    << " retrieval_similarity=" << (retrieval.similarity == retrieval::Similarity::Cosine ? "cosine" : "inner")
    << " score=" << (score == retrieval::Similarity::Cosine ? "cosine" : "inner") << " linear=" << linear
    << " slope=" << slope;
  return s.str();
}

void init_params(nc::ParamStore& store, const ModelConfig& cfg, std::size_t users, std::size_t items,
                 std::uint64_t seed) {
  cfg.validate();
  Rng rng = stream(seed, {kInitStream});
  const int e = cfg.embedding_dim();
  store.add_uniform("embedding", static_cast<nc::Index>(users + items), e, e, rng);
  for (int l = 1; l <= cfg.layers(); ++l) {
    const std::string pre = layer_prefix(l);
    const int in = cfg.in_dim(l), out = cfg.out_dim(l);
    for (const char* block : {"up_u", "up_i"})
      for (const char* part : {".self", ".nb"}) store.add_uniform(pre + block + part, in, out, in, rng);
    // Value and output maps start as identity so early transfer passes item embeddings through unchanged.
    for (const char* w : {".wq", ".wk"}) store.add_uniform(pre + "hyper_i" + w, in, in, in, rng);
    for (const char* w : {".wv", ".wo"}) store.add(pre + "hyper_i" + w, Tensor2::Identity(in, in));
    for (const char* w : {".wq", ".wk", ".wv", ".wo", ".combine"})
      store.add_uniform(pre + "hyper_u" + w, out, out, out, rng);
  }
  store.add("phi", Tensor2::Zero(cfg.heads, cfg.d_max + 2));
}

Var ParamBinder::operator()(const std::string& name) {
  if (trainable_) return tape_->parameter(*store_, name);
  auto it = constants_.find(name);
  if (it != constants_.end()) return it->second;
  Var v = tape_->constant(store_->at(name));
  constants_.emplace(name, v);
  return v;
}

nc::AttentionWeights ParamBinder::attention(const std::string& prefix) {
  return {(*this)(prefix + ".wq"), (*this)(prefix + ".wk"), (*this)(prefix + ".wv"), (*this)(prefix + ".wo")};
}

Model::Model(const graph::MultiDomainGraph& graph, ModelConfig cfg)
    : graph_(&graph), cfg_(std::move(cfg)), distances_(graph, cfg_.d_max) {
  cfg_.validate();
}

Plan Model::plan(std::span<const NodeIndex> targets, int target_domain, const SamplingKey* key) const {
  const auto& g = *graph_;
  const int L = cfg_.layers();
  const int T = g.domains();
  const bool item_transfer = has_hyper_i(cfg_.variant) && target_domain >= 0;
  const bool siblings = has_hyper_u(cfg_.variant);
  std::vector<char> mark(g.node_count(), 0);
  auto add = [&](NodeIndex v) {
    if (siblings && g.is_user(v)) {
      const UserId u = g.user_of(v);
      for (int t = 0; t < T; ++t) mark[g.user_node(u, t)] = 1;
    } else {
      mark[v] = 1;
    }
  };
  auto collect = [&] {
    std::vector<NodeIndex> out;
    for (NodeIndex v = 0; v < mark.size(); ++v)
      if (mark[v]) {
        out.push_back(v);
        mark[v] = 0;
      }
    return out;
  };

  Plan plan;
  plan.target_domain = item_transfer ? target_domain : -1;
  plan.nodes.assign(L + 1, {});
  std::vector<std::vector<std::vector<NodeIndex>>> nb(L + 1);
  for (NodeIndex v : targets) {
    if (v >= g.node_count()) throw DimensionError("plan: node index out of range");
    add(v);
  }
  plan.nodes[L] = collect();

  for (int l = L; l >= 1; --l) {
    const auto& cur = plan.nodes[l];
    nb[l].resize(cur.size());
    for (std::size_t k = 0; k < cur.size(); ++k) {
      const NodeIndex v = cur[k];
      add(v);
      if (key) {
        Rng rng = stream(key->seed, {kNeighborStream, key->step, static_cast<std::uint64_t>(l), v});
        nb[l][k] = graph::sample_neighbors(g, v, cfg_.neighbors, rng);
      } else {
        auto all = g.neighbors(v);
        nb[l][k].assign(all.begin(), all.end());
      }
      for (NodeIndex w : nb[l][k]) add(w);
    }
    if (item_transfer) {
      for (NodeIndex v = static_cast<NodeIndex>(g.user_node_count()); v < mark.size(); ++v) {
        if (!mark[v]) continue;
        const ItemId i = g.item_of(v);
        if (g.item_in_domain(i, target_domain)) continue;
        if (const auto* e = g.hyperedge_i(i, target_domain))
          for (NodeIndex w : e->nodes) mark[w] = 1;
      }
    }
    plan.nodes[l - 1] = collect();
  }
  finish_plan(plan, nb);
  return plan;
}

Plan Model::full_plan(int target_domain) const {
  const auto& g = *graph_;
  const int L = cfg_.layers();
  Plan plan;
  plan.target_domain = has_hyper_i(cfg_.variant) && target_domain >= 0 ? target_domain : -1;
  std::vector<NodeIndex> all(g.node_count());
  for (NodeIndex v = 0; v < all.size(); ++v) all[v] = v;
  plan.nodes.assign(L + 1, all);
  std::vector<std::vector<NodeIndex>> full(all.size());
  for (NodeIndex v = 0; v < all.size(); ++v) {
    auto n = g.neighbors(v);
    full[v].assign(n.begin(), n.end());
  }
  std::vector<std::vector<std::vector<NodeIndex>>> nb(L + 1, full);
  finish_plan(plan, nb);
  return plan;
}

void Model::finish_plan(Plan& plan, std::vector<std::vector<std::vector<NodeIndex>>>& nb) const {
  const int L = cfg_.layers();
  std::vector<int> pos(graph_->node_count(), -1);
  plan.user_rows.assign(L + 1, 0);
  plan.self_pos.assign(L + 1, {});
  plan.nb_offsets.assign(L + 1, {});
  plan.nb_pos.assign(L + 1, {});
  for (int l = 0; l <= L; ++l) {
    const auto& nodes = plan.nodes[l];
    plan.user_rows[l] = static_cast<std::size_t>(
        std::partition_point(nodes.begin(), nodes.end(), [&](NodeIndex v) { return graph_->is_user(v); }) -
        nodes.begin());
    if (l == 0) continue;
    const auto& prev = plan.nodes[l - 1];
    for (std::size_t k = 0; k < prev.size(); ++k) pos[prev[k]] = static_cast<int>(k);
    auto& self = plan.self_pos[l];
    auto& off = plan.nb_offsets[l];
    auto& idx = plan.nb_pos[l];
    self.reserve(nodes.size());
    off.reserve(nodes.size() + 1);
    off.push_back(0);
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      self.push_back(pos[nodes[k]]);
      for (NodeIndex w : nb[l][k]) idx.push_back(pos[w]);
      off.push_back(static_cast<int>(idx.size()));
    }
    for (NodeIndex v : prev) pos[v] = -1;
  }
}

Var Model::gather_initial(ParamBinder& p, std::span<const NodeIndex> nodes) const {
  std::vector<int> rows(nodes.size());
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const NodeIndex v = nodes[k];
    if (v >= graph_->node_count()) throw DimensionError("gather_initial: node index out of range");
    rows[k] = graph_->is_user(v) ? static_cast<int>(graph_->user_of(v))
                                 : static_cast<int>(graph_->user_count() + graph_->item_of(v));
  }
  return nc::embedding_gather(p("embedding"), rows);
}

Var Model::hyper_i_layer(ParamBinder& p, Var h, const Plan& plan, int l) const {
  const int m = plan.target_domain;
  if (m < 0) return h;
  const auto& g = *graph_;
  const auto& nodes = plan.nodes[l - 1];
  const std::size_t ur = plan.user_rows[l - 1];
  const bool bias = has_distance_bias(cfg_.variant);
  std::vector<nc::AttentionGroup> groups;
  std::vector<int> rows;
  // Only queries and hyperedge members are projected; key_slot maps a level row to its K/V row.
  std::vector<int> key_rows;
  std::vector<int> key_slot(nodes.size(), -1);
  for (std::size_t k = ur; k < nodes.size(); ++k) {
    const ItemId i = g.item_of(nodes[k]);
    if (g.item_in_domain(i, m)) continue;
    const auto* e = g.hyperedge_i(i, m);
    if (!e || e->nodes.size() < 2) continue;
    nc::AttentionGroup grp;
    grp.queries.push_back(static_cast<int>(groups.size()));
    for (NodeIndex w : e->nodes) {
      const int at = position(nodes, w);
      if (at < 0) throw DimensionError("hyper_i_layer: hyperedge member missing from the layer");
      if (key_slot[at] < 0) {
        key_slot[at] = static_cast<int>(key_rows.size());
        key_rows.push_back(at);
      }
      grp.keys.push_back(key_slot[at]);
      if (bias) grp.buckets.push_back(distances_.distance(i, g.item_of(w)));
    }
    groups.push_back(std::move(grp));
    rows.push_back(static_cast<int>(k));
  }
  if (groups.empty()) return h;
  const auto w = p.attention(layer_prefix(l) + "hyper_i");
  Var queries = nc::gather_rows(h, rows);
  Var keys = nc::gather_rows(h, key_rows);
  Var q = nc::matmul(queries, w.wq);
  Var k = nc::matmul(keys, w.wk);
  Var v = nc::matmul(keys, w.wv);
  Var att = nc::grouped_attention(q, k, v, groups, cfg_.heads, bias ? p("phi") : Var());
  return nc::replace_rows(h, rows, nc::matmul(att, w.wo));
}

Var Model::message_pass_layer(ParamBinder& p, Var h, const Plan& plan, int l) const {
  const auto& nodes = plan.nodes[l];
  const std::size_t ur = plan.user_rows[l];
  const std::string pre = layer_prefix(l);
  const std::span<const int> self(plan.self_pos[l]);
  const std::span<const int> off(plan.nb_offsets[l]);
  std::vector<Var> blocks;
  auto update = [&](const char* block, std::size_t lo, std::size_t hi) {
    if (hi == lo) return;
    Var s = nc::gather_rows(h, self.subspan(lo, hi - lo));
    Var n = nc::segment_mean(h, off.subspan(lo, hi - lo + 1), plan.nb_pos[l]);
    blocks.push_back(nc::add(nc::matmul(s, p(pre + block + ".self")), nc::matmul(n, p(pre + block + ".nb"))));
  };
  update("up_u", 0, ur);
  update("up_i", ur, nodes.size());
  if (blocks.empty()) throw DimensionError("message_pass_layer: empty level");
  return blocks.size() == 1 ? blocks.front() : nc::concat_rows(blocks);
}

Var Model::hyper_u_layer(ParamBinder& p, Var h, const Plan& plan, int l) const {
  const auto& g = *graph_;
  const auto& nodes = plan.nodes[l];
  const std::size_t ur = plan.user_rows[l];
  if (ur == 0) return h;
  const int T = g.domains();
  if (ur % T != 0) throw DimensionError("hyper_u_layer: level does not hold complete user groups");
  for (std::size_t k = 0; k < ur; ++k)
    if (g.user_of(nodes[k]) != g.user_of(nodes[k - k % T]) || g.domain_of(nodes[k]) != static_cast<int>(k % T))
      throw DimensionError("hyper_u_layer: level does not hold complete user groups");
  const std::string pre = layer_prefix(l) + "hyper_u";
  const auto users = static_cast<nc::Index>(ur);
  Var block = nc::slice_rows(h, 0, users);
  Var out;
  if (hyper_u_attention(cfg_.variant)) {
    const auto w = p.attention(pre);
    std::vector<nc::AttentionGroup> groups(ur / T);
    for (std::size_t b = 0; b < groups.size(); ++b)
      for (int t = 0; t < T; ++t) {
        groups[b].queries.push_back(static_cast<int>(b * T + t));
        groups[b].keys.push_back(static_cast<int>(b * T + t));
      }
    Var q = nc::matmul(block, w.wq);
    Var k = nc::matmul(block, w.wk);
    Var v = nc::matmul(block, w.wv);
    out = nc::matmul(nc::grouped_attention(q, k, v, groups, cfg_.heads, Var()), w.wo);
  } else {
    std::vector<int> offsets(ur / T + 1), members(ur), expand(ur);
    for (std::size_t b = 0; b <= ur / T; ++b) offsets[b] = static_cast<int>(b * T);
    for (std::size_t k = 0; k < ur; ++k) {
      members[k] = static_cast<int>(k);
      expand[k] = static_cast<int>(k / T);
    }
    Var mean = nc::matmul(nc::segment_mean(block, offsets, members), p(pre + ".combine"));
    out = nc::gather_rows(mean, expand);
  }
  if (ur == nodes.size()) return out;
  return nc::concat_rows({out, nc::slice_rows(h, users, static_cast<nc::Index>(nodes.size() - ur))});
}

Var Model::run(ParamBinder& p, const Plan& plan) const {
  const int L = cfg_.layers();
  Var h = gather_initial(p, plan.nodes[0]);
  for (int l = 1; l <= L; ++l) {
    if (has_hyper_i(cfg_.variant)) {
      phase(Phase::HyperI, l);
      h = hyper_i_layer(p, h, plan, l);
    }
    phase(Phase::MessagePass, l);
    h = message_pass_layer(p, h, plan, l);
    if (has_hyper_u(cfg_.variant)) {
      phase(Phase::HyperU, l);
      h = hyper_u_layer(p, h, plan, l);
    }
    if (!cfg_.linear && l < L) h = nc::leaky_relu(h, cfg_.slope);
  }
  phase(Phase::Readout, L);
  return h;
}

Var Model::forward(ParamBinder& p, std::span<const Query> batch, const SamplingKey* key) const {
  if (batch.empty()) throw DimensionError("forward: empty batch");
  const auto& g = *graph_;
  const std::size_t cols = batch.front().items.size();
  if (cols == 0) throw DimensionError("forward: queries without items");
  for (const auto& q : batch) {
    if (q.items.size() != cols) throw DimensionError("forward: queries must carry equally many items");
    if (q.user >= g.user_count() || q.domain < 0 || q.domain >= g.domains())
      throw DimensionError("forward: query user or domain out of range");
    for (ItemId i : q.items)
      if (i >= g.item_count()) throw DimensionError("forward: item out of range");
  }

  std::vector<int> pass_domains;
  if (has_hyper_i(cfg_.variant)) {
    for (const auto& q : batch) pass_domains.push_back(q.domain);
    std::sort(pass_domains.begin(), pass_domains.end());
    pass_domains.erase(std::unique(pass_domains.begin(), pass_domains.end()), pass_domains.end());
  } else {
    pass_domains.push_back(-1);
  }

  std::vector<Var> parts;
  std::vector<int> order;  // batch index of each produced row
  for (int m : pass_domains) {
    std::vector<std::size_t> members;
    for (std::size_t r = 0; r < batch.size(); ++r)
      if (m < 0 || batch[r].domain == m) members.push_back(r);
    std::vector<NodeIndex> targets;
    for (std::size_t r : members) {
      targets.push_back(g.user_node(batch[r].user, batch[r].domain));
      for (ItemId i : batch[r].items) targets.push_back(g.item_node(i));
    }
    const Plan pl = plan(targets, m, key);
    Var z = run(p, pl);
    const auto& top = pl.nodes.back();
    std::vector<int> urows, irows;
    urows.reserve(members.size() * cols);
    irows.reserve(members.size() * cols);
    for (std::size_t r : members) {
      const int up = position(top, g.user_node(batch[r].user, batch[r].domain));
      for (ItemId i : batch[r].items) {
        urows.push_back(up);
        irows.push_back(position(top, g.item_node(i)));
      }
      order.push_back(static_cast<int>(r));
    }
    Var s = predict(nc::gather_rows(z, urows), nc::gather_rows(z, irows), cfg_.score);
    parts.push_back(nc::reshape(s, static_cast<nc::Index>(members.size()), static_cast<nc::Index>(cols)));
  }
  Var all = parts.size() == 1 ? parts.front() : nc::concat_rows(parts);
  if (parts.size() == 1) return all;
  std::vector<int> inverse(order.size());
  for (std::size_t k = 0; k < order.size(); ++k) inverse[order[k]] = static_cast<int>(k);
  return nc::gather_rows(all, inverse);
}

Tensor2 Model::representations(const nc::ParamStore& params, int target_domain) const {
  Tape tape;
  ParamBinder p(tape, params, false);
  const Plan pl = full_plan(target_domain);
  return run(p, pl).value();
}

Var hyper_i_refine(Var source_row, Var candidate_rows, const graph::DistanceMatrix* distances,
                   const nc::AttentionWeights& w, Var bias_table, int heads) {
  if (!candidate_rows.valid() || candidate_rows.rows() == 0) return source_row;
  if (source_row.rows() != 1) throw DimensionError("hyper_i_refine: source must be a single row");
  Var stack = nc::concat_rows({source_row, candidate_rows});
  const nc::Index n = stack.rows();
  std::vector<Var> bias;
  if (distances) {
    if (static_cast<nc::Index>(distances->size()) != n)
      throw DimensionError("hyper_i_refine: distance matrix size does not match 1 + candidates");
    for (int p = 0; p < heads; ++p) bias.push_back(nc::table_lookup(bias_table, p, n, n, distances->buckets()));
  }
  return nc::slice_rows(nc::attention(stack, stack, stack, bias, heads, w), 0, 1);
}

Var hyper_u_refine(Var rows, const nc::AttentionWeights& w, Var combine, Variant variant, int heads) {
  if (!has_hyper_u(variant)) throw ConfigError("hyper_u_refine: the Vanilla variant has no user module");
  if (hyper_u_attention(variant)) return nc::attention(rows, rows, rows, {}, heads, w);
  std::vector<int> expand(static_cast<std::size_t>(rows.rows()), 0);
  return nc::gather_rows(nc::matmul(nc::mean_rows(rows), combine), expand);
}

Var predict(Var users, Var items, retrieval::Similarity similarity) {
  return similarity == retrieval::Similarity::Cosine ? nc::cosine_rows(users, items)
                                                     : nc::inner_product_rows(users, items);
}

void refresh_hyperedges_i(graph::MultiDomainGraph& graph, const nc::ParamStore& params, const ModelConfig& cfg,
                          std::uint64_t seed) {
  if (!has_hyper_i(cfg.variant)) {
    graph.set_hyperedges_i({});
    return;
  }
  const auto rc = cfg.effective_retrieval();
  if (rc.method == retrieval::Method::EmbeddingBased) {
    const Tensor2 reps = params.at("embedding").bottomRows(static_cast<nc::Index>(graph.item_count()));
    graph.set_hyperedges_i(retrieval::build_hyperedges_i(graph, &reps, rc, seed));
  } else {
    graph.set_hyperedges_i(retrieval::build_hyperedges_i(graph, nullptr, rc, seed));
  }
}

}  // namespace h3t::model
