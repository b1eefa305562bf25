#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "h3trans/dataingest.hpp"
#include "h3trans/errors.hpp"
#include "support.hpp"

using namespace h3t;
using namespace h3t::ingest;
using h3t::fx::Click;

namespace {

std::multiset<std::tuple<std::string, std::string, int, std::int64_t>> as_set(const std::vector<RawRecord>& rs) {
  std::multiset<std::tuple<std::string, std::string, int, std::int64_t>> s;
  for (const auto& r : rs) s.emplace(r.user, r.item, r.domain, r.timestamp);
  return s;
}

// Cascade: u7 (one record) goes, which drops e, then u6, then d, then u5;
// u4 goes, which drops c, then u3. Only u1 and u2 on a and b survive k = 2.
std::vector<Click> cascade_fixture() {
  return {{"u1", "a", 0, 1}, {"u1", "b", 1, 2}, {"u2", "a", 0, 3}, {"u2", "b", 1, 4},
          {"u3", "b", 1, 5}, {"u3", "c", 0, 6}, {"u4", "c", 0, 7}, {"u5", "d", 1, 8},
          {"u5", "a", 0, 9}, {"u6", "d", 1, 10}, {"u6", "e", 0, 11}, {"u7", "e", 0, 12}};
}

}  // namespace

TEST(Parse, NativeLineMapsFields) {
  std::istringstream in("u7\ti3\t1\t100\t5\n");
  const auto rs = parse_interactions(in, Format::Native);
  ASSERT_EQ(rs.size(), 1u);
  EXPECT_EQ(rs[0], (RawRecord{"u7", "i3", 1, 100, 5}));
}

TEST(Parse, EmptyStreamGivesNoRecords) {
  std::istringstream in("");
  EXPECT_TRUE(parse_interactions(in, Format::Native).empty());
}

TEST(Parse, CommentsAndMissingRatingInNative) {
  std::istringstream in("# header\nu1\ti1\t0\t5\n");
  const auto rs = parse_interactions(in, Format::Native);
  ASSERT_EQ(rs.size(), 1u);
  EXPECT_FALSE(rs[0].rating.has_value());
}

TEST(Parse, AmazonFixtureFile) {
  std::ifstream in(std::string(H3T_FIXTURE_DIR) + "/amazon_small.csv");
  ASSERT_TRUE(in);
  const auto rs = parse_interactions(in, Format::AmazonRatings, 2);
  ASSERT_EQ(rs.size(), 5u);
  EXPECT_EQ(rs[0], (RawRecord{"u9", "B000X", 2, 1300000000, 4}));
  EXPECT_EQ(rs[4], (RawRecord{"u2", "B000Y", 2, 1300000400, 3}));
  for (const auto& r : rs) EXPECT_EQ(r.domain, 2);
}

TEST(Parse, MalformedLineCitesLineNumber) {
  std::istringstream in("u1\ti1\t0\t5\nu2\ti2\t0\tlater\n");
  try {
    parse_interactions(in, Format::Native, 0, "f.tsv");
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_NE(std::string(e.what()).find("f.tsv:2"), std::string::npos);
  }
  std::istringstream short_line("u1\ti1\t0\n");
  EXPECT_THROW(parse_interactions(short_line, Format::Native), ParseError);
}

TEST(Parse, UnknownFormatTagIsConfigError) {
  EXPECT_THROW(parse_format("parquet"), ConfigError);
  EXPECT_EQ(parse_format("native"), Format::Native);
  EXPECT_EQ(parse_format("amazon_ratings"), Format::AmazonRatings);
}

TEST(Binarize, ThresholdAndClickRecords) {
  std::vector<RawRecord> rs = {{"u", "a", 0, 1, 4}, {"u", "b", 0, 2, 3}, {"u", "c", 0, 3, std::nullopt}};
  const auto out = binarize(rs, 4);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].item, "a");
  EXPECT_EQ(out[1].item, "c");
}

TEST(Deduplicate, KeepsEarliestTimestamp) {
  std::vector<RawRecord> rs = {{"u", "a", 0, 9, {}}, {"u", "a", 0, 3, {}}, {"u", "a", 1, 5, {}}};
  const auto out = deduplicate(rs);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].timestamp, 3);
  EXPECT_EQ(out[1].domain, 1);
}

TEST(KCore, LightUserRemovedPartnersKept) {
  std::vector<Click> cs;
  std::int64_t ts = 0;
  for (int h = 0; h < 6; ++h)
    for (int p = 0; p < 5; ++p) cs.push_back({"h" + std::to_string(h), "p" + std::to_string(p), 0, ts++});
  for (int p = 0; p < 4; ++p) cs.push_back({"x", "p" + std::to_string(p), 0, ts++});
  const auto out = k_core_filter(fx::raw(cs), 5);
  EXPECT_EQ(out.size(), 30u);
  for (const auto& r : out) EXPECT_NE(r.user, "x");
}

TEST(KCore, FixedPointInputUnchanged) {
  std::vector<Click> cs;
  for (int u = 0; u < 3; ++u)
    for (int i = 0; i < 3; ++i) cs.push_back({"u" + std::to_string(u), "i" + std::to_string(i), u % 2, u * 3 + i});
  const auto in = fx::raw(cs);
  EXPECT_EQ(k_core_filter(in, 3), in);
}

TEST(KCore, CascadeMatchesOracle) {
  const auto in = fx::raw(cascade_fixture());
  const auto out = k_core_filter(in, 2);
  EXPECT_EQ(as_set(out), as_set(fx::kcore_oracle(in, 2)));
  EXPECT_EQ(out.size(), 4u);
  for (const auto& r : out) EXPECT_TRUE(r.user == "u1" || r.user == "u2");
}

TEST(KCore, BinarizeThenCoreMatchesOracle) {
  auto in = fx::raw(cascade_fixture());
  for (std::size_t k = 0; k < in.size(); ++k) in[k].rating = k % 5 == 4 ? 2 : 5;
  const auto kept = binarize(in, 4);
  EXPECT_EQ(as_set(k_core_filter(kept, 2)), as_set(fx::kcore_oracle(kept, 2)));
}

TEST(KCore, InvariantToRecordOrder) {
  std::mt19937 gen(3);
  std::vector<RawRecord> in;
  std::uniform_int_distribution<int> user(0, 14), item(0, 9), dom(0, 2);
  for (int k = 0; k < 120; ++k)
    in.push_back({"u" + std::to_string(user(gen)), "i" + std::to_string(item(gen)), dom(gen), k, {}});
  const auto ref = as_set(k_core_filter(in, 5));
  EXPECT_EQ(ref, as_set(fx::kcore_oracle(in, 5)));
  for (int rep = 0; rep < 5; ++rep) {
    std::shuffle(in.begin(), in.end(), gen);
    EXPECT_EQ(as_set(k_core_filter(in, 5)), ref);
  }
}

TEST(Remap, FirstAppearanceOrderAndSharedItems) {
  const auto r = remap_ids(fx::raw({{"c", "X", 0, 1}, {"a", "Y", 1, 2}, {"b", "X", 1, 3}}));
  EXPECT_EQ(r.mapping.users, (std::vector<std::string>{"c", "a", "b"}));
  EXPECT_EQ(r.dataset.user_count, 3u);
  EXPECT_EQ(r.dataset.item_count, 2u);
  EXPECT_EQ(r.dataset.domains, 2);
  EXPECT_TRUE(r.dataset.item_in_domain(0, 0));
  EXPECT_TRUE(r.dataset.item_in_domain(0, 1));
  std::set<ItemId> all;
  for (const auto& d : r.dataset.per_domain_items) all.insert(d.begin(), d.end());
  EXPECT_EQ(all.size(), r.dataset.item_count);
  EXPECT_THROW(remap_ids({}), DataError);
}

TEST(Split, LastInteractionGoesToTest) {
  const auto ds = fx::dataset({{"u", "a", 0, 10}, {"u", "b", 0, 20}, {"u", "c", 0, 30}, {"u", "d", 1, 5}});
  const auto split = leave_one_out_split(ds);
  ASSERT_EQ(split.test.size(), 1u);
  EXPECT_EQ(split.test[0].timestamp, 30);
  EXPECT_EQ(split.test[0].domain, 0);
  EXPECT_EQ(split.train.records.size(), 3u);
}

TEST(Split, TieGoesToLargerItemId) {
  const auto ds = fx::dataset({{"u", "a", 0, 10}, {"u", "b", 0, 50}, {"u", "c", 0, 50}});
  const auto split = leave_one_out_split(ds);
  ASSERT_EQ(split.test.size(), 1u);
  EXPECT_EQ(split.test[0].item, 2u);
}

TEST(Split, PartitionProperties) {
  GenConfig g;
  g.users = 40;
  g.items_per_domain = 30;
  g.seed = 5;
  const Dataset ds = generate_synthetic(g);
  const auto split = leave_one_out_split(ds);
  EXPECT_EQ(split.train.records.size() + split.test.size(), ds.records.size());
  std::set<std::tuple<UserId, ItemId, int>> train;
  for (const auto& r : split.train.records) train.emplace(r.user, r.item, r.domain);
  for (const auto& t : split.test) {
    EXPECT_FALSE(train.count({t.user, t.item, t.domain}));
    for (const auto& r : split.train.records)
      if (r.user == t.user && r.domain == t.domain) {
        EXPECT_LE(r.timestamp, t.timestamp);
      }
  }
  EXPECT_EQ(split.train.per_domain_items, ds.per_domain_items);
}

TEST(Generator, SameSeedIdenticalRecords) {
  GenConfig g;
  g.users = 50;
  g.seed = 11;
  EXPECT_EQ(generate_synthetic(g).records, generate_synthetic(g).records);
  GenConfig h = g;
  h.seed = 12;
  EXPECT_NE(generate_synthetic(g).records, generate_synthetic(h).records);
}

TEST(Generator, RecordCount) {
  GenConfig g;
  g.users = 37;
  g.interactions_per_user = 6;
  g.domains = 4;
  EXPECT_EQ(generate_synthetic(g).records.size(), 37u * 6u * 4u);
}

TEST(Generator, FullCorrelationSharesUserFactors) {
  GenConfig g;
  g.users = 20;
  g.domain_correlation = 1.0;
  const auto w = generate_world(g);
  for (int m = 1; m < g.domains; ++m) EXPECT_EQ(w.user_factors[m], w.user_factors[0]);
}

TEST(Generator, CorrelationRaisesCrossDomainHistogramSimilarity) {
  for (std::uint64_t seed : {1, 2, 3}) {
    GenConfig hi;
    hi.seed = seed;
    hi.domain_correlation = 0.9;
    GenConfig lo = hi;
    lo.domain_correlation = 0.0;
    EXPECT_GT(fx::histogram_correlation(generate_world(hi)),
              fx::histogram_correlation(generate_world(lo)))
        << "seed " << seed;
  }
}

TEST(Generator, ImpossibleConfigRejected) {
  GenConfig g;
  g.interactions_per_user = g.items_per_domain + 1;
  EXPECT_THROW(g.validate(), ConfigError);
  g = GenConfig{};
  g.overlap_fraction = 1.5;
  EXPECT_THROW(generate_synthetic(g), ConfigError);
}

TEST(Generator, DatasetInvariantsHold) {
  GenConfig g;
  g.seed = 4;
  const Dataset ds = generate_synthetic(g);
  EXPECT_NO_THROW(ds.validate());
  std::set<std::tuple<UserId, ItemId, int>> seen;
  for (const auto& r : ds.records) {
    EXPECT_TRUE(ds.item_in_domain(r.item, r.domain));
    EXPECT_TRUE(seen.emplace(r.user, r.item, r.domain).second);
  }
}

TEST(SplitDir, RoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "h3t_splitdir_test";
  std::filesystem::remove_all(dir);
  const auto split = fx::tiny_split(3);
  write_split_dir(dir, split, identity_mapping(split.train));
  const auto back = read_split_dir(dir);
  EXPECT_EQ(back.train.records, split.train.records);
  EXPECT_EQ(back.test, split.test);
  EXPECT_EQ(back.train.per_domain_items, split.train.per_domain_items);
  EXPECT_EQ(back.train.user_count, split.train.user_count);
  EXPECT_EQ(back.train.item_count, split.train.item_count);
  std::filesystem::remove_all(dir);
}

TEST(SplitDir, MissingDirectoryIsDataError) {
  EXPECT_THROW(read_split_dir("/nonexistent/h3t/dir"), DataError);
}
