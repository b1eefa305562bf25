#include "h3trans/evaluator.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "h3trans/errors.hpp"
#include "h3trans/interaction_index.hpp"

namespace h3t::eval {

std::size_t pessimistic_rank(std::span<const double> scores, std::size_t target) {
  if (target >= scores.size()) throw std::out_of_range("pessimistic_rank: target outside the score list");
  const double s = scores[target];
  std::size_t rank = 1;
  for (std::size_t k = 0; k < scores.size(); ++k)
    if (k != target && scores[k] >= s) ++rank;
  return rank;
}

double hr_at_k(std::span<const RankResult> results, std::size_t k) {
  if (results.empty()) return 0;
  std::size_t hits = 0;
  for (const auto& r : results) hits += r.rank <= k ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(results.size());
}

double mrr(std::span<const RankResult> results) {
  if (results.empty()) return 0;
  double sum = 0;
  for (const auto& r : results) sum += 1.0 / static_cast<double>(r.rank);
  return sum / static_cast<double>(results.size());
}

double ndcg_at_k(std::span<const RankResult> results, std::size_t k) {
  if (results.empty()) return 0;
  double sum = 0;
  for (const auto& r : results)
    if (r.rank <= k) sum += 1.0 / std::log2(static_cast<double>(r.rank) + 1.0);
  return sum / static_cast<double>(results.size());
}

std::vector<int> activity_groups(const ingest::Dataset& train, int groups) {
  if (groups < 1) throw ConfigError("group count must be >= 1");
  std::vector<std::size_t> count(train.user_count, 0);
  for (const auto& r : train.records) ++count[r.user];
  std::vector<UserId> order(train.user_count);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](UserId a, UserId b) { return count[a] < count[b]; });
  std::vector<int> out(train.user_count, 0);
  const std::size_t n = order.size();
  for (std::size_t r = 0; r < n; ++r) out[order[r]] = static_cast<int>(r * groups / n);
  return out;
}

void MetricsTable::write_tsv(std::ostream& out) const {
  out << "domain\tgroup\tmetric\tK\tvalue\tcount\n";
  out.precision(10);
  for (const auto& r : rows) {
    out << r.domain << '\t' << r.group << '\t' << r.metric << '\t';
    if (r.k) out << r.k;
    else out << '-';
    out << '\t';
    if (r.value) out << *r.value;
    else out << "NA";
    out << '\t' << r.count << '\n';
  }
}

void MetricsTable::write_jsonl(std::ostream& out) const {
  for (const auto& r : rows) {
    nlohmann::ordered_json j;
    j["domain"] = r.domain;
    j["group"] = r.group;
    j["metric"] = r.metric;
    if (r.k) j["K"] = r.k;
    else j["K"] = nullptr;
    if (r.value) j["value"] = *r.value;
    else j["value"] = nullptr;
    j["count"] = r.count;
    out << j.dump() << '\n';
  }
}

std::optional<double> MetricsTable::find(int domain, const std::string& group, const std::string& metric,
                                         std::size_t k) const {
  for (const auto& r : rows)
    if (r.domain == domain && r.group == group && r.metric == metric && r.k == k) return r.value;
  return std::nullopt;
}

MetricsTable tabulate(std::span<const RankResult> results, const ingest::Dataset& train, const EvalConfig& cfg) {
  const auto group_of = activity_groups(train, cfg.groups);
  MetricsTable table;
  auto emit = [&](int m, const std::string& group, const std::vector<RankResult>& cell) {
    const bool any = !cell.empty();
    auto value = [&](double v) { return any ? std::optional<double>(v) : std::nullopt; };
    table.rows.push_back({m, group, "MRR", 0, value(mrr(cell)), cell.size()});
    for (std::size_t k : cfg.ks) {
      table.rows.push_back({m, group, "HR", k, value(hr_at_k(cell, k)), cell.size()});
      table.rows.push_back({m, group, "NDCG", k, value(ndcg_at_k(cell, k)), cell.size()});
    }
  };
  for (int m = 0; m < train.domains; ++m) {
    std::vector<RankResult> all;
    std::vector<std::vector<RankResult>> by_group(cfg.groups);
    for (const auto& r : results) {
      if (r.domain != m) continue;
      all.push_back(r);
      by_group[group_of[r.user]].push_back(r);
    }
    emit(m, "ALL", all);
    for (int g = 0; g < cfg.groups; ++g) emit(m, "G" + std::to_string(g + 1), by_group[g]);
  }
  return table;
}

std::vector<nc::Tensor2> domain_representations(const model::Model& model, const nc::ParamStore& params) {
  const int T = model.graph().domains();
  std::vector<nc::Tensor2> out;
  if (!model::has_hyper_i(model.config().variant)) {
    out.assign(T, model.representations(params, -1));
    return out;
  }
  for (int m = 0; m < T; ++m) out.push_back(model.representations(params, m));
  return out;
}

std::vector<RankResult> rank_all(const model::Model& model, const std::vector<nc::Tensor2>& representations,
                                 const ingest::SplitDataset& split) {
  const auto& g = model.graph();
  const InteractionIndex observed(split.train);
  const bool cosine = model.config().score == retrieval::Similarity::Cosine;
  std::vector<RankResult> out;
  out.reserve(split.test.size());
  std::vector<double> scores;
  for (const auto& t : split.test) {
    if (t.domain >= g.domains() || t.user >= g.user_count())
      throw ProtocolError("test record outside the training graph");
    if (!g.item_in_domain(t.item, t.domain))
      throw ProtocolError("held-out item " + std::to_string(t.item) + " is not an item of domain " +
                          std::to_string(t.domain));
    const nc::Tensor2& z = representations[t.domain];
    const auto zu = z.row(g.user_node(t.user, t.domain));
    const double nu = zu.norm();
    scores.clear();
    std::size_t target = 0;
    for (ItemId i : g.domain_items()[t.domain]) {
      if (i != t.item && observed.contains(t.user, t.domain, i)) continue;
      if (i == t.item) target = scores.size();
      const auto zi = z.row(g.item_node(i));
      double s = zu.dot(zi);
      if (cosine) {
        const double denom = nu * zi.norm();
        s = denom > 0 ? s / denom : 0.0;
      }
      scores.push_back(s);
    }
    out.push_back({t.user, t.domain, t.item, pessimistic_rank(scores, target), scores.size()});
  }
  return out;
}

MetricsTable evaluate(const model::Model& model, const nc::ParamStore& params, const ingest::SplitDataset& split,
                      const EvalConfig& cfg) {
  const auto reps = domain_representations(model, params);
  const auto results = rank_all(model, reps, split);
  return tabulate(results, split.train, cfg);
}

}  // namespace h3t::eval
