#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace h3t {

using UserId = std::uint32_t;
using ItemId = std::uint32_t;
using DomainId = std::uint16_t;

namespace ingest {

/// A parsed line with the original string identifiers.
struct RawRecord {
  std::string user;
  std::string item;
  int domain = 0;
  std::int64_t timestamp = 0;
  std::optional<int> rating;

  friend bool operator==(const RawRecord&, const RawRecord&) = default;
};

enum class Format { Native, AmazonRatings };

/// "native" or "amazon_ratings"; anything else is a ConfigError.
Format parse_format(std::string_view tag);
std::string_view format_name(Format f);

/// Native: TSV `user item domain timestamp [rating]`, '#' comments skipped.
/// Amazon: CSV `item,user,rating,timestamp`, domain taken from `amazon_domain`.
/// Ratings given as reals ("4.0") are truncated to integers.
std::vector<RawRecord> parse_interactions(std::istream& source, Format format,
                                          int amazon_domain = 0,
                                          const std::string& source_name = "<stream>");

/// Keeps records with rating >= threshold and every record without a rating.
std::vector<RawRecord> binarize(std::vector<RawRecord> records, int threshold = 4);

/// Keeps the earliest record of each (user, item, domain) triple; order preserved.
std::vector<RawRecord> deduplicate(std::vector<RawRecord> records);

/// Maximal k-core of the user/item interaction multigraph. User counts are
/// summed over domains, item counts are per shared item. Surviving records keep
/// their input order.
std::vector<RawRecord> k_core_filter(std::vector<RawRecord> records, int k = 5);

struct InteractionRecord {
  UserId user = 0;
  ItemId item = 0;
  DomainId domain = 0;
  std::int64_t timestamp = 0;
  std::optional<int> rating;

  friend bool operator==(const InteractionRecord&, const InteractionRecord&) = default;
};

struct Dataset {
  std::vector<InteractionRecord> records;
  int domains = 0;
  std::size_t user_count = 0;
  std::size_t item_count = 0;
  /// Sorted item ids observed in each domain (I^m). Computed on the full data
  /// before splitting, so held-out items remain members of their domain.
  std::vector<std::vector<ItemId>> per_domain_items;

  bool item_in_domain(ItemId item, int domain) const;
  /// Throws DataError when an invariant does not hold.
  void validate() const;
};

struct IdMapping {
  std::vector<std::string> users;  // dense id -> original id
  std::vector<std::string> items;
};

struct RemapResult {
  Dataset dataset;
  IdMapping mapping;
};

/// Dense ids in first-appearance order. Domain count is max(domain) + 1 unless
/// `domains` is given. Duplicate triples are collapsed to the earliest one.
RemapResult remap_ids(const std::vector<RawRecord>& records, int domains = 0);

struct SplitDataset {
  Dataset train;
  std::vector<InteractionRecord> test;
};

/// Per (user, domain) with >= 2 records the latest one (ties: larger item id)
/// moves to test.
SplitDataset leave_one_out_split(const Dataset& dataset);

/// Path-window default for generated data, whose timestamps count
/// interaction slots rather than seconds.
inline constexpr std::int64_t kSyntheticTimeWindow = 50;

struct GenConfig {
  int domains = 3;
  int users = 300;
  int items_per_domain = 200;
  double overlap_fraction = 0.2;
  int interactions_per_user = 8;
  int latent_dim = 8;
  double domain_correlation = 0.8;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Latent state of a synthetic draw, exposed for tests and diagnostics.
struct SyntheticWorld {
  Dataset dataset;
  /// user_factors[m] is users x latent_dim, row u = user u's domain-m factor.
  std::vector<std::vector<std::vector<double>>> user_factors;
  std::vector<std::vector<double>> item_factors;
  /// argmax coordinate of the item factor.
  std::vector<int> item_category;
  /// Relative activity weight per user (power law).
  std::vector<double> activity;
};

SyntheticWorld generate_world(const GenConfig& config);
Dataset generate_synthetic(const GenConfig& config);

// -- file layer ------------------------------------------------------------

/// Writes records in the native TSV layout (dense ids).
void write_native(std::ostream& out, const std::vector<InteractionRecord>& records);
std::vector<InteractionRecord> read_native_dense(std::istream& in, const std::string& source_name);

void write_mapping(std::ostream& out, const std::vector<std::string>& dense_to_original);
std::vector<std::string> read_mapping(std::istream& in, const std::string& source_name);

/// Directory layout shared by `prepare` and `synth`:
///   train.tsv, test.tsv, domain_items.tsv, users.map, items.map, manifest.txt
void write_split_dir(const std::filesystem::path& dir, const SplitDataset& split,
                     const IdMapping& mapping, bool synthetic = false);
/// Whether the directory was written from generated data.
bool split_dir_is_synthetic(const std::filesystem::path& dir);
SplitDataset read_split_dir(const std::filesystem::path& dir);

IdMapping identity_mapping(const Dataset& dataset);

}  // namespace ingest
}  // namespace h3t
