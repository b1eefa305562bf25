#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "h3trans/numeric/ops.hpp"
#include "h3trans/rng.hpp"

namespace h3t::fx {

std::vector<ingest::RawRecord> raw(const std::vector<Click>& clicks) {
  std::vector<ingest::RawRecord> out;
  for (const auto& c : clicks) out.push_back({c.user, c.item, c.domain, c.ts, std::nullopt});
  return out;
}

ingest::Dataset dataset(const std::vector<Click>& clicks, int domains) {
  return ingest::remap_ids(raw(clicks), domains).dataset;
}

Tensor2 random_matrix(Index rows, Index cols, std::uint64_t seed, double scale) {
  Rng rng = stream(seed, {0x7e57});
  Tensor2 t(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) t(r, c) = scale * uniform(rng, -1.0, 1.0);
  return t;
}

namespace {

double relative(const Tensor2& a, const Tensor2& n) {
  const double denom = std::max({a.norm(), n.norm(), 1e-12});
  return (a - n).norm() / denom;
}

std::string input_name(std::size_t k) { return "x" + std::to_string(k); }

}  // namespace

double gradient_error(const std::vector<Tensor2>& inputs, const ScalarFn& f, double h) {
  nc::ParamStore store;
  for (std::size_t k = 0; k < inputs.size(); ++k) store.add(input_name(k), inputs[k]);
  const auto blocks = store_gradient_errors(store, [&](nc::Tape& tape, const nc::ParamStore& s) {
    std::vector<nc::Var> vars;
    for (std::size_t k = 0; k < inputs.size(); ++k) vars.push_back(tape.parameter(s, input_name(k)));
    return f(tape, vars);
  }, h);
  double worst = 0;
  for (const auto& b : blocks) worst = std::max(worst, b.error);
  return worst;
}

std::vector<BlockError> store_gradient_errors(nc::ParamStore store, const StoreFn& f, double h) {
  nc::Gradients analytic;
  {
    nc::Tape tape;
    nc::Var loss = f(tape, store);
    analytic = tape.backward(loss, store);
  }
  auto eval = [&] {
    nc::Tape tape;
    return f(tape, store).value()(0, 0);
  };
  std::vector<BlockError> out;
  for (auto& [name, value] : store.entries()) {
    Tensor2 numeric(value.rows(), value.cols());
    for (Index r = 0; r < value.rows(); ++r)
      for (Index c = 0; c < value.cols(); ++c) {
        const double keep = value(r, c);
        value(r, c) = keep + h;
        const double up = eval();
        value(r, c) = keep - h;
        const double down = eval();
        value(r, c) = keep;
        numeric(r, c) = (up - down) / (2 * h);
      }
    out.push_back({name, relative(analytic.at(name), numeric)});
  }
  return out;
}

nc::Var weighted_sum(nc::Var out, std::uint64_t seed) {
  nc::Var w = out.tape()->constant(random_matrix(out.rows(), out.cols(), seed));
  return nc::sum_all(nc::hadamard(out, w));
}

std::vector<ingest::RawRecord> kcore_oracle(const std::vector<ingest::RawRecord>& records, int k) {
  std::vector<ingest::RawRecord> cur = records;
  while (true) {
    std::map<std::string, int> users, items;
    for (const auto& r : cur) {
      ++users[r.user];
      ++items[r.item];
    }
    std::vector<ingest::RawRecord> next;
    for (const auto& r : cur)
      if (users[r.user] >= k && items[r.item] >= k) next.push_back(r);
    if (next.size() == cur.size()) return cur;
    cur = std::move(next);
  }
}

std::vector<std::vector<std::uint8_t>> floyd_warshall_buckets(const graph::MultiDomainGraph& g,
                                                              const std::vector<graph::NodeIndex>& nodes,
                                                              int d_max) {
  const std::size_t n = g.node_count();
  const int inf = std::numeric_limits<int>::max() / 4;
  std::vector<std::vector<int>> d(n, std::vector<int>(n, inf));
  for (std::size_t v = 0; v < n; ++v) {
    d[v][v] = 0;
    for (auto w : g.neighbors(static_cast<graph::NodeIndex>(v))) d[v][w] = 1;
  }
  for (std::size_t m = 0; m < n; ++m)
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b) d[a][b] = std::min(d[a][b], d[a][m] + d[m][b]);
  std::vector<std::vector<std::uint8_t>> out(nodes.size(), std::vector<std::uint8_t>(nodes.size()));
  for (std::size_t a = 0; a < nodes.size(); ++a)
    for (std::size_t b = 0; b < nodes.size(); ++b) {
      const int x = d[nodes[a]][nodes[b]];
      out[a][b] = static_cast<std::uint8_t>(x > d_max ? d_max + 1 : x);
    }
  return out;
}

std::set<ItemId> path_oracle(const ingest::Dataset& data, ItemId item, int source, int target,
                             std::int64_t window) {
  std::set<ItemId> out;
  for (const auto& a : data.records) {
    if (a.item != item || a.domain != source) continue;
    for (const auto& b : data.records) {
      if (b.user != a.user || b.domain != target || b.item == item) continue;
      if (std::llabs(b.timestamp - a.timestamp) <= window) out.insert(b.item);
    }
  }
  return out;
}

std::vector<ItemId> argsort_topk(const Tensor2& reps, const std::vector<ItemId>& candidates,
                                 const Eigen::RowVectorXd& query, std::size_t k, std::int64_t exclude) {
  std::vector<ItemId> ids;
  for (ItemId j : candidates)
    if (static_cast<std::int64_t>(j) != exclude) ids.push_back(j);
  std::vector<double> score(reps.rows());
  for (ItemId j : ids) score[j] = reps.row(j).dot(query);
  std::sort(ids.begin(), ids.end(), [&](ItemId a, ItemId b) {
    if (score[a] != score[b]) return score[a] > score[b];
    return a < b;
  });
  ids.resize(std::min(k, ids.size()));
  return ids;
}

std::size_t rank_by_sort(const std::vector<double>& scores, std::size_t target) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    if (a == target || b == target) return b == target;
    return a < b;
  });
  return static_cast<std::size_t>(std::find(order.begin(), order.end(), target) - order.begin()) + 1;
}

double recount_hr(const std::vector<std::size_t>& ranks, std::size_t k) {
  if (ranks.empty()) return 0;
  double hits = 0;
  for (auto r : ranks)
    if (r <= k) hits += 1;
  return hits / static_cast<double>(ranks.size());
}

double recount_mrr(const std::vector<std::size_t>& ranks) {
  if (ranks.empty()) return 0;
  double s = 0;
  for (auto r : ranks) s += 1.0 / static_cast<double>(r);
  return s / static_cast<double>(ranks.size());
}

double recount_ndcg(const std::vector<std::size_t>& ranks, std::size_t k) {
  if (ranks.empty()) return 0;
  double s = 0;
  for (auto r : ranks)
    if (r <= k) s += std::log(2.0) / std::log(static_cast<double>(r) + 1.0);
  return s / static_cast<double>(ranks.size());
}

Tensor2 dense_reference_gnn(const ingest::Dataset& train, const nc::ParamStore& params,
                            const model::ModelConfig& cfg) {
  const Index users = static_cast<Index>(train.user_count);
  const Index n = users + static_cast<Index>(train.item_count);
  Tensor2 adj = Tensor2::Zero(n, n);
  for (const auto& r : train.records) {
    adj(r.user, users + r.item) = 1;
    adj(users + r.item, r.user) = 1;
  }
  for (Index v = 0; v < n; ++v) {
    const double deg = adj.row(v).sum();
    if (deg > 0) adj.row(v) /= deg;
  }
  Tensor2 h = params.at("embedding");
  for (int l = 1; l <= cfg.layers(); ++l) {
    const std::string pre = "L" + std::to_string(l) + ".";
    const Tensor2 agg = adj * h;
    Tensor2 next(n, cfg.out_dim(l));
    next.topRows(users) = h.topRows(users) * params.at(pre + "up_u.self") +
                          agg.topRows(users) * params.at(pre + "up_u.nb");
    next.bottomRows(n - users) = h.bottomRows(n - users) * params.at(pre + "up_i.self") +
                                 agg.bottomRows(n - users) * params.at(pre + "up_i.nb");
    if (!cfg.linear && l < cfg.layers())
      next = next.unaryExpr([&](double x) { return x > 0 ? x : cfg.slope * x; });
    h = std::move(next);
  }
  return h;
}

ingest::SplitDataset tiny_split(std::uint64_t seed, int domains, int users, int items) {
  ingest::GenConfig g;
  g.domains = domains;
  g.users = users;
  g.items_per_domain = items;
  g.interactions_per_user = 4;
  g.latent_dim = 4;
  g.seed = seed;
  return ingest::leave_one_out_split(ingest::generate_synthetic(g));
}

double histogram_correlation(const ingest::SyntheticWorld& world) {
  const auto& ds = world.dataset;
  const std::size_t cats = world.item_factors.empty() ? 0 : world.item_factors.front().size();
  std::vector<std::vector<double>> h0(ds.user_count, std::vector<double>(cats, 0)), h1 = h0;
  for (const auto& r : ds.records) {
    if (r.domain == 0) h0[r.user][world.item_category[r.item]] += 1;
    if (r.domain == 1) h1[r.user][world.item_category[r.item]] += 1;
  }
  double total = 0;
  for (std::size_t u = 0; u < ds.user_count; ++u) {
    double dot = 0, a = 0, b = 0;
    for (std::size_t c = 0; c < cats; ++c) {
      dot += h0[u][c] * h1[u][c];
      a += h0[u][c] * h0[u][c];
      b += h1[u][c] * h1[u][c];
    }
    total += (a > 0 && b > 0) ? dot / std::sqrt(a * b) : 0.0;
  }
  return total / static_cast<double>(ds.user_count);
}

}  // namespace h3t::fx
