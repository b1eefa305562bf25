#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "h3trans/errors.hpp"
#include "h3trans/evaluator.hpp"
#include "h3trans/interaction_index.hpp"
#include "support.hpp"

using namespace h3t;
using namespace h3t::eval;

namespace {

std::vector<RankResult> from_ranks(const std::vector<std::size_t>& ranks) {
  std::vector<RankResult> out;
  for (auto r : ranks) out.push_back({0, 0, 0, r, 1000});
  return out;
}

std::vector<std::size_t> random_ranks(std::uint64_t seed, std::size_t n) {
  Rng rng(seed);
  std::vector<std::size_t> r(n);
  for (auto& x : r) x = 1 + uniform_index(rng, 80);
  return r;
}

}  // namespace

TEST(Rank, UniqueMaxIsFirst) {
  const std::vector<double> s{0.1, 0.9, 0.3};
  EXPECT_EQ(pessimistic_rank(s, 1), 1u);
}

TEST(Rank, TieCountsAgainstTarget) {
  const std::vector<double> s{0.9, 0.9, 0.3};
  EXPECT_EQ(pessimistic_rank(s, 0), 2u);
  EXPECT_EQ(pessimistic_rank(s, 1), 2u);
}

TEST(Rank, MatchesSortOracleOnFiftyItems) {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> s(50);
    // Coarse grid so ties appear.
    for (auto& x : s) x = std::round(uniform(rng, 0, 10));
    for (std::size_t t = 0; t < s.size(); ++t) EXPECT_EQ(pessimistic_rank(s, t), fx::rank_by_sort(s, t));
  }
}

TEST(Metrics, ClosedFormExamples) {
  EXPECT_EQ(hr_at_k(from_ranks({1, 1, 1}), 20), 1.0);
  EXPECT_EQ(hr_at_k(from_ranks({1, 30}), 20), 0.5);
  EXPECT_EQ(mrr(from_ranks({1})), 1.0);
  EXPECT_EQ(mrr(from_ranks({1, 2})), 0.75);
  EXPECT_EQ(ndcg_at_k(from_ranks({1}), 20), 1.0);
  EXPECT_NEAR(ndcg_at_k(from_ranks({2}), 20), 1.0 / std::log2(3.0), 1e-15);
  EXPECT_NEAR(ndcg_at_k(from_ranks({2}), 20), 0.6309, 1e-4);
  EXPECT_EQ(ndcg_at_k(from_ranks({25}), 20), 0.0);
}

TEST(Metrics, MatchRecountOnRandomLists) {
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto ranks = random_ranks(seed, 1 + seed % 37);
    const auto res = from_ranks(ranks);
    for (std::size_t k : {1, 5, 20, 50}) {
      EXPECT_NEAR(hr_at_k(res, k), fx::recount_hr(ranks, k), 1e-15);
      EXPECT_NEAR(ndcg_at_k(res, k), fx::recount_ndcg(ranks, k), 1e-12);
    }
    EXPECT_NEAR(mrr(res), fx::recount_mrr(ranks), 1e-12);
  }
}

TEST(Metrics, OrderingInvariants) {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const auto res = from_ranks(random_ranks(seed, 25));
    double prev = 0;
    for (std::size_t k = 1; k <= 80; ++k) {
      const double hr = hr_at_k(res, k);
      EXPECT_GE(hr, prev);
      EXPECT_LE(ndcg_at_k(res, k), hr);
      prev = hr;
    }
    EXPECT_LE(hr_at_k(res, 1), mrr(res));
    EXPECT_LE(mrr(res), 1.0);
  }
}

TEST(Groups, SizesDifferByAtMostOneAndFollowActivity) {
  for (int users : {5, 7, 23, 24}) {
    std::vector<fx::Click> cs;
    for (int u = 0; u < users; ++u)
      for (int k = 0; k <= (u * 5) % 7; ++k) cs.push_back({"u" + std::to_string(u), "i" + std::to_string(k), 0, k});
    const auto ds = fx::dataset(cs, 1);
    const auto g = activity_groups(ds, 5);
    ASSERT_EQ(g.size(), ds.user_count);
    std::vector<int> size(5, 0);
    for (int x : g) ++size[x];
    EXPECT_LE(*std::max_element(size.begin(), size.end()) - *std::min_element(size.begin(), size.end()), 1);
    std::vector<std::size_t> count(ds.user_count, 0);
    for (const auto& r : ds.records) ++count[r.user];
    for (std::size_t a = 0; a < ds.user_count; ++a)
      for (std::size_t b = 0; b < ds.user_count; ++b)
        if (count[a] < count[b] || (count[a] == count[b] && a < b)) {
          EXPECT_LE(g[a], g[b]);
        }
  }
}

TEST(Tabulate, EmptyDomainIsAbsentNotZero) {
  const auto ds = fx::dataset({{"a", "x", 0, 1}, {"b", "y", 0, 2}, {"a", "z", 1, 3}}, 2);
  const std::vector<RankResult> res{{0, 0, 0, 3, 10}, {1, 0, 1, 1, 10}};
  const auto table = tabulate(res, ds, EvalConfig{});
  ASSERT_TRUE(table.find(0, "ALL", "HR", 20).has_value());
  EXPECT_EQ(*table.find(0, "ALL", "HR", 20), 1.0);
  EXPECT_FALSE(table.find(1, "ALL", "HR", 20).has_value());
  EXPECT_FALSE(table.find(1, "ALL", "MRR").has_value());
  std::ostringstream tsv;
  table.write_tsv(tsv);
  EXPECT_NE(tsv.str().find("NA"), std::string::npos);
  EXPECT_EQ(tsv.str().rfind("domain\tgroup\tmetric\tK\tvalue\tcount", 0), 0u);
}

TEST(Tabulate, GroupCellsMatchRecount) {
  const auto split = fx::tiny_split(6, 2, 40, 25);
  const auto groups = activity_groups(split.train, 5);
  std::vector<RankResult> res;
  Rng rng(3);
  for (const auto& t : split.test) res.push_back({t.user, t.domain, t.item, 1 + uniform_index(rng, 60), 60});
  const auto table = tabulate(res, split.train, EvalConfig{});
  for (int m = 0; m < 2; ++m)
    for (int grp = 0; grp < 5; ++grp) {
      std::vector<std::size_t> ranks;
      for (const auto& r : res)
        if (r.domain == m && groups[r.user] == grp) ranks.push_back(r.rank);
      const std::string name = "G" + std::to_string(grp + 1);
      const auto hr = table.find(m, name, "HR", 20);
      if (ranks.empty()) {
        EXPECT_FALSE(hr.has_value());
        continue;
      }
      ASSERT_TRUE(hr.has_value());
      EXPECT_EQ(*hr, fx::recount_hr(ranks, 20));
      EXPECT_NEAR(*table.find(m, name, "NDCG", 50), fx::recount_ndcg(ranks, 50), 1e-12);
      EXPECT_NEAR(*table.find(m, name, "MRR"), fx::recount_mrr(ranks), 1e-12);
    }
}

class EvalFixture : public ::testing::Test {
 protected:
  void SetUp() override {
    split = fx::tiny_split(4, 2, 24, 20);
    g = graph::MultiDomainGraph::build(split.train);
    g.build_hyperedges_u();
    cfg.dims = {8, 4};
    cfg.heads = 2;
    cfg.variant = model::Variant::EHIplus;
    cfg.retrieval.k = 3;
    model::init_params(params, cfg, g.user_count(), g.item_count(), 2);
    model::refresh_hyperedges_i(g, params, cfg, 1);
  }
  ingest::SplitDataset split;
  graph::MultiDomainGraph g;
  model::ModelConfig cfg;
  nc::ParamStore params;
};

TEST_F(EvalFixture, RanksMatchArgsortOverCandidates) {
  const model::Model m(g, cfg);
  const auto reps = domain_representations(m, params);
  const auto ranks = rank_all(m, reps, split);
  ASSERT_EQ(ranks.size(), split.test.size());
  const InteractionIndex seen(split.train);
  for (std::size_t k = 0; k < ranks.size(); ++k) {
    const auto& t = split.test[k];
    const auto& z = reps[t.domain];
    std::vector<double> scores;
    std::size_t target = 0;
    for (ItemId j : g.domain_items()[t.domain]) {
      if (j != t.item && seen.contains(t.user, t.domain, j)) continue;
      if (j == t.item) target = scores.size();
      scores.push_back(z.row(g.user_node(t.user, t.domain)).dot(z.row(g.item_node(j))));
    }
    EXPECT_EQ(ranks[k].rank, fx::rank_by_sort(scores, target));
    EXPECT_EQ(ranks[k].candidates, scores.size());
    EXPECT_GE(ranks[k].rank, 1u);
    EXPECT_LE(ranks[k].rank, ranks[k].candidates);
  }
}

TEST_F(EvalFixture, EvaluateIsRepeatable) {
  const model::Model m(g, cfg);
  const EvalConfig ec;
  std::ostringstream a, b;
  evaluate(m, params, split, ec).write_tsv(a);
  evaluate(m, params, split, ec).write_tsv(b);
  EXPECT_EQ(a.str(), b.str());
}

TEST_F(EvalFixture, HeldOutItemOutsideDomainIsProtocolError) {
  const model::Model m(g, cfg);
  auto bad = split;
  ASSERT_FALSE(bad.test.empty());
  const auto& other = g.domain_items()[1 - bad.test.front().domain];
  for (ItemId j : other)
    if (!g.item_in_domain(j, bad.test.front().domain)) {
      bad.test.front().item = j;
      break;
    }
  EXPECT_THROW(rank_all(m, domain_representations(m, params), bad), ProtocolError);
}
