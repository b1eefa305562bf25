#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <regex>
#include <sstream>

#include <json.hpp>

#include "h3trans/errors.hpp"
#include "h3trans/numeric/ops.hpp"
#include "h3trans/trainer.hpp"
#include "support.hpp"

using namespace h3t;
using namespace h3t::train;

namespace {

model::ModelConfig small_model(model::Variant v) {
  model::ModelConfig c;
  c.dims = {16, 8};
  c.heads = 2;
  c.neighbors = 5;
  c.variant = v;
  c.retrieval.k = 4;
  c.retrieval.refresh_interval = 7;
  return c;
}

TrainConfig small_train(std::uint64_t seed) {
  TrainConfig t;
  t.batch_size = 32;
  t.negatives = 8;
  t.seed = seed;
  t.steps = 60;
  t.log_every = 5;
  return t;
}

std::string without_wall_time(const std::string& log) {
  return std::regex_replace(log, std::regex("\"wall_ms\":[-0-9.eE+]+"), "\"wall_ms\":_");
}

}  // namespace

TEST(InfoNce, EqualScoresGiveLogOnePlusN) {
  for (std::size_t n : {1u, 8u, 64u}) {
    const std::vector<double> neg(n, 0.37);
    EXPECT_NEAR(infonce_loss(0.37, neg, 0.2), std::log(1.0 + static_cast<double>(n)), 1e-12);
  }
}

TEST(InfoNce, DominantPositiveGoesToZero) {
  const std::vector<double> neg{0.0, -1.0, 0.5};
  EXPECT_LT(infonce_loss(100.0, neg, 0.2), 1e-100);
  EXPECT_TRUE(std::isfinite(infonce_loss(-1e6, neg, 0.2)));
}

TEST(InfoNce, DependsOnlyOnScoreOverTemperature) {
  const std::vector<double> neg{0.3, -0.2, 0.9}, scaled{0.9, -0.6, 2.7};
  EXPECT_NEAR(infonce_loss(0.1, neg, 0.2), infonce_loss(0.3, scaled, 0.6), 1e-13);
}

TEST(InfoNce, NonNegativeAndPermutationInvariant) {
  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> neg(10);
    for (auto& x : neg) x = uniform(rng, -3, 3);
    const double pos = uniform(rng, -3, 3);
    const double a = infonce_loss(pos, neg, 0.5);
    EXPECT_GE(a, 0.0);
    std::reverse(neg.begin(), neg.end());
    std::rotate(neg.begin(), neg.begin() + 3, neg.end());
    EXPECT_NEAR(infonce_loss(pos, neg, 0.5), a, 1e-13);
  }
}

TEST(InfoNce, BatchFormAgreesAndHasSignedGradients) {
  nc::ParamStore s;
  s.add("scores", fx::random_matrix(6, 5, 4, 2.0));
  nc::Tape t;
  nc::Var sc = t.parameter(s, "scores");
  nc::Var loss = infonce_loss(sc, 0.2);
  double mean = 0;
  const auto& m = s.at("scores");
  for (nc::Index r = 0; r < m.rows(); ++r) {
    std::vector<double> neg(m.row(r).data() + 1, m.row(r).data() + m.cols());
    mean += infonce_loss(m(r, 0), neg, 0.2) / static_cast<double>(m.rows());
  }
  EXPECT_NEAR(loss.value()(0, 0), mean, 1e-12);
  const auto g = t.backward(loss).at("scores");
  for (nc::Index r = 0; r < g.rows(); ++r) {
    EXPECT_LT(g(r, 0), 0.0);
    for (nc::Index c = 1; c < g.cols(); ++c) EXPECT_GT(g(r, c), 0.0);
  }
}

TEST(BatchSampling, NegativesInDomainAndCounted) {
  const auto split = fx::tiny_split(4, 3, 30, 25);
  const InteractionIndex idx(split.train);
  Rng rng(2);
  const auto batch = sample_batch(split.train, idx, 40, 7, rng);
  ASSERT_EQ(batch.size(), 40u);
  std::size_t total = 0;
  const auto g = graph::MultiDomainGraph::build(split.train);
  for (const auto& s : batch) {
    total += s.negatives.size();
    EXPECT_TRUE(idx.contains(s.user, s.domain, s.positive));
    for (ItemId n : s.negatives) {
      EXPECT_TRUE(g.item_in_domain(n, s.domain));
      if (!s.collision) {
        EXPECT_FALSE(idx.contains(s.user, s.domain, n));
      }
    }
  }
  EXPECT_EQ(total, 40u * 7u);
}

TEST(BatchSampling, DomainMixFollowsRecordShare) {
  // Unequal domain sizes so the share test has something to detect.
  std::vector<fx::Click> cs;
  for (int u = 0; u < 40; ++u)
    for (int k = 0; k < 1 + u % 4; ++k) {
      cs.push_back({"u" + std::to_string(u), "a" + std::to_string((u + k) % 30), 0, k});
      if (k % 2 == 0) cs.push_back({"u" + std::to_string(u), "b" + std::to_string((u * 7 + k) % 30), 1, k});
    }
  const auto ds = fx::dataset(cs, 2);
  const InteractionIndex idx(ds);
  double share0 = 0;
  for (const auto& r : ds.records) share0 += r.domain == 0;
  share0 /= static_cast<double>(ds.records.size());
  for (std::uint64_t seed : {1, 2, 3}) {
    Rng rng(seed);
    const auto batch = sample_batch(ds, idx, 10000, 1, rng);
    double got = 0;
    for (const auto& s : batch) got += s.domain == 0;
    EXPECT_NEAR(got / 10000.0, share0, 0.02) << "seed " << seed;
  }
}

TEST(BatchSampling, DenseUserFlagsCollision) {
  const auto ds = fx::dataset({{"u", "a", 0, 1}, {"u", "b", 0, 2}}, 1);
  const InteractionIndex idx(ds);
  Rng rng(1);
  const auto batch = sample_batch(ds, idx, 3, 2, rng);
  for (const auto& s : batch) EXPECT_TRUE(s.collision);
}

TEST(Training, LossFallsWithinFiftySteps) {
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto split = fx::tiny_split(seed, 2, 40, 30);
    Trainer tr(split.train, small_model(model::Variant::HUplus), small_train(seed));
    tr.initialize();
    double at5 = 0, at50 = 0;
    for (int s = 1; s <= 50; ++s) {
      const double l = tr.step();
      if (s == 5) at5 = l;
      if (s == 50) at50 = l;
    }
    EXPECT_LT(at50, at5) << "seed " << seed;
  }
}

TEST(Training, SameSeedSameLogAndParameters) {
  const auto split = fx::tiny_split(2, 2, 30, 20);
  auto once = [&] {
    Trainer tr(split.train, small_model(model::Variant::EHIplus), small_train(5));
    tr.initialize();
    std::ostringstream log;
    tr.run(&log, 15);
    return std::make_pair(without_wall_time(log.str()), tr.checkpoint());
  };
  const auto a = once(), b = once();
  EXPECT_FALSE(a.first.empty());
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second.params, b.second.params);
  EXPECT_TRUE(a.second.adam == b.second.adam);
  EXPECT_EQ(a.second.extras, b.second.extras);
}

TEST(Training, ResumeMatchesUninterrupted) {
  const auto split = fx::tiny_split(3, 2, 30, 20);
  const auto dir = std::filesystem::temp_directory_path() / "h3t_resume_test";
  std::filesystem::create_directories(dir);
  Trainer full(split.train, small_model(model::Variant::EHIplus), small_train(9));
  full.initialize();
  full.run(nullptr, 40);

  Trainer first(split.train, small_model(model::Variant::EHIplus), small_train(9));
  first.initialize();
  first.run(nullptr, 20);
  first.save(dir / "at20.ckpt");
  Trainer second(split.train, small_model(model::Variant::EHIplus), small_train(9));
  second.resume(dir / "at20.ckpt");
  EXPECT_EQ(second.current_step(), 20u);
  second.run(nullptr, 40);
  EXPECT_EQ(second.params(), full.params());
  EXPECT_TRUE(second.adam() == full.adam());
  EXPECT_EQ(second.graph(), full.graph());
  std::filesystem::remove_all(dir);
}

TEST(Training, ResumeRefusesOtherConfig) {
  const auto split = fx::tiny_split(3, 2, 30, 20);
  const auto path = std::filesystem::temp_directory_path() / "h3t_resume_other.ckpt";
  Trainer a(split.train, small_model(model::Variant::HUplus), small_train(1));
  a.initialize();
  a.save(path);
  auto other = small_model(model::Variant::HUplus);
  other.dims = {16, 4};
  Trainer b(split.train, other, small_train(1));
  EXPECT_THROW(b.resume(path), ConfigError);
  std::filesystem::remove(path);
}

TEST(Training, LogCarriesStepsAndRefreshes) {
  const auto split = fx::tiny_split(1, 2, 30, 20);
  Trainer tr(split.train, small_model(model::Variant::EHIplus), small_train(2));
  tr.initialize();
  std::ostringstream log;
  tr.run(&log, 15);
  std::istringstream in(log.str());
  std::string line;
  std::vector<std::uint64_t> refresh_steps, step_lines;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j.at("variant"), "EHIplus");
    EXPECT_EQ(j.at("seed"), 2);
    EXPECT_TRUE(j.contains("wall_ms"));
    if (j.at("event") == "refresh") {
      refresh_steps.push_back(j.at("step"));
      EXPECT_GT(j.at("count").get<std::size_t>(), 0u);
    } else {
      ASSERT_EQ(j.at("event"), "step");
      step_lines.push_back(j.at("step"));
      EXPECT_TRUE(std::isfinite(j.at("loss").get<double>()));
    }
  }
  EXPECT_EQ(refresh_steps, (std::vector<std::uint64_t>{0, 7, 14}));
  EXPECT_EQ(step_lines, (std::vector<std::uint64_t>{5, 10, 15}));
}

TEST(Training, BudgetFromEpochs) {
  TrainConfig t;
  t.batch_size = 100;
  t.epochs = 3;
  EXPECT_EQ(t.total_steps(250), 9u);
  t.steps = 4;
  EXPECT_EQ(t.total_steps(250), 4u);
  t.batch_size = 0;
  EXPECT_THROW(t.validate(), ConfigError);
}

TEST(Hyperedges, SerializedFormRoundTrips) {
  const auto split = fx::tiny_split(1, 3, 20, 12);
  auto g = graph::MultiDomainGraph::build(split.train);
  const auto cfg = small_model(model::Variant::EHIplus);
  nc::ParamStore s;
  model::init_params(s, cfg, g.user_count(), g.item_count(), 1);
  model::refresh_hyperedges_i(g, s, cfg, 1);
  EXPECT_EQ(parse_hyperedges_i(serialize_hyperedges_i(g)), g.hyperedges_i());
}
