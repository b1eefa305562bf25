#include "h3trans/dataingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <deque>
#include <istream>
#include <map>
#include <set>
#include <unordered_map>

#include "h3trans/errors.hpp"

namespace h3t::ingest {

namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  return s;
}

bool parse_int(std::string_view s, std::int64_t& out) {
  s = trim(s);
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

// Accepts "4" as well as "4.0"; the fractional part is dropped.
bool parse_rating(std::string_view s, int& out) {
  s = trim(s);
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return false;
  out = static_cast<int>(v);
  return true;
}

}  // namespace

Format parse_format(std::string_view tag) {
  if (tag == "native") return Format::Native;
  if (tag == "amazon_ratings") return Format::AmazonRatings;
  throw ConfigError("unknown dataset format '" + std::string(tag) +
                    "' (expected native or amazon_ratings)");
}

std::string_view format_name(Format f) {
  return f == Format::Native ? "native" : "amazon_ratings";
}

std::vector<RawRecord> parse_interactions(std::istream& source, Format format, int amazon_domain,
                                          const std::string& source_name) {
  std::vector<RawRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(source, line)) {
    ++line_no;
    std::string_view view = trim(line);
    if (view.empty() || view.front() == '#') continue;

    RawRecord rec;
    if (format == Format::Native) {
      auto fields = split(view, '\t');
      if (fields.size() != 4 && fields.size() != 5) {
        throw ParseError(source_name, line_no,
                         "expected 4 or 5 tab-separated fields, got " +
                             std::to_string(fields.size()));
      }
      rec.user = std::string(trim(fields[0]));
      rec.item = std::string(trim(fields[1]));
      std::int64_t domain = 0;
      if (!parse_int(fields[2], domain) || domain < 0 || domain > 65535)
        throw ParseError(source_name, line_no, "bad domain id '" + std::string(fields[2]) + "'");
      rec.domain = static_cast<int>(domain);
      if (!parse_int(fields[3], rec.timestamp))
        throw ParseError(source_name, line_no, "non-numeric timestamp '" + std::string(fields[3]) + "'");
      if (fields.size() == 5) {
        int rating = 0;
        if (!parse_rating(fields[4], rating))
          throw ParseError(source_name, line_no, "non-numeric rating '" + std::string(fields[4]) + "'");
        rec.rating = rating;
      }
    } else {
      auto fields = split(view, ',');
      if (fields.size() != 4) {
        throw ParseError(source_name, line_no,
                         "expected 4 comma-separated fields, got " + std::to_string(fields.size()));
      }
      rec.item = std::string(trim(fields[0]));
      rec.user = std::string(trim(fields[1]));
      int rating = 0;
      if (!parse_rating(fields[2], rating))
        throw ParseError(source_name, line_no, "non-numeric rating '" + std::string(fields[2]) + "'");
      rec.rating = rating;
      if (!parse_int(fields[3], rec.timestamp))
        throw ParseError(source_name, line_no, "non-numeric timestamp '" + std::string(fields[3]) + "'");
      rec.domain = amazon_domain;
    }
    if (rec.user.empty() || rec.item.empty())
      throw ParseError(source_name, line_no, "empty user or item id");
    if (rec.timestamp < 0) throw ParseError(source_name, line_no, "negative timestamp");
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<RawRecord> binarize(std::vector<RawRecord> records, int threshold) {
  std::erase_if(records, [threshold](const RawRecord& r) {
    return r.rating.has_value() && *r.rating < threshold;
  });
  return records;
}

std::vector<RawRecord> deduplicate(std::vector<RawRecord> records) {
  using Key = std::tuple<std::string, std::string, int>;
  std::map<Key, std::size_t> first;
  std::vector<bool> keep(records.size(), true);
  for (std::size_t i = 0; i < records.size(); ++i) {
    Key key{records[i].user, records[i].item, records[i].domain};
    auto [it, inserted] = first.emplace(key, i);
    if (inserted) continue;
    if (records[i].timestamp < records[it->second].timestamp) {
      keep[it->second] = false;
      it->second = i;
    } else {
      keep[i] = false;
    }
  }
  std::vector<RawRecord> out;
  out.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i)
    if (keep[i]) out.push_back(std::move(records[i]));
  return out;
}

std::vector<RawRecord> k_core_filter(std::vector<RawRecord> records, int k) {
  if (records.empty()) return records;
  // Peeling: user and item vertices share one index space.
  std::unordered_map<std::string, std::size_t> user_index, item_index;
  std::vector<std::vector<std::size_t>> incident;
  std::vector<std::size_t> rec_user(records.size()), rec_item(records.size());
  auto vertex = [&](std::unordered_map<std::string, std::size_t>& index, const std::string& key) {
    auto [it, inserted] = index.emplace(key, incident.size());
    if (inserted) incident.emplace_back();
    return it->second;
  };
  for (std::size_t r = 0; r < records.size(); ++r) {
    rec_user[r] = vertex(user_index, records[r].user);
    rec_item[r] = vertex(item_index, records[r].item);
    incident[rec_user[r]].push_back(r);
    incident[rec_item[r]].push_back(r);
  }
  std::vector<std::size_t> degree(incident.size());
  std::vector<bool> queued(incident.size(), false), alive(records.size(), true);
  std::deque<std::size_t> queue;
  for (std::size_t v = 0; v < incident.size(); ++v) {
    degree[v] = incident[v].size();
    if (degree[v] < static_cast<std::size_t>(k)) {
      queued[v] = true;
      queue.push_back(v);
    }
  }
  while (!queue.empty()) {
    const std::size_t v = queue.front();
    queue.pop_front();
    for (std::size_t r : incident[v]) {
      if (!alive[r]) continue;
      alive[r] = false;
      const std::size_t other = rec_user[r] == v ? rec_item[r] : rec_user[r];
      --degree[other];
      --degree[v];
      if (!queued[other] && degree[other] < static_cast<std::size_t>(k)) {
        queued[other] = true;
        queue.push_back(other);
      }
    }
  }
  std::vector<RawRecord> out;
  for (std::size_t r = 0; r < records.size(); ++r)
    if (alive[r]) out.push_back(std::move(records[r]));
  return out;
}

bool Dataset::item_in_domain(ItemId item, int domain) const {
  if (domain < 0 || domain >= static_cast<int>(per_domain_items.size())) return false;
  const auto& items = per_domain_items[domain];
  return std::binary_search(items.begin(), items.end(), item);
}

void Dataset::validate() const {
  if (static_cast<int>(per_domain_items.size()) != domains)
    throw DataError("per_domain_items has " + std::to_string(per_domain_items.size()) +
                    " entries for " + std::to_string(domains) + " domains");
  std::set<std::tuple<UserId, ItemId, DomainId>> seen;
  for (const auto& r : records) {
    if (r.domain >= domains) throw DataError("record domain out of range");
    if (r.user >= user_count) throw DataError("record user out of range");
    if (r.item >= item_count) throw DataError("record item out of range");
    if (r.timestamp < 0) throw DataError("negative timestamp");
    if (!item_in_domain(r.item, r.domain))
      throw DataError("item " + std::to_string(r.item) + " not listed in domain " +
                      std::to_string(r.domain));
    if (!seen.emplace(r.user, r.item, r.domain).second)
      throw DataError("duplicate (user, item, domain) record");
  }
}

RemapResult remap_ids(const std::vector<RawRecord>& records, int domains) {
  if (records.empty()) throw DataError("cannot remap an empty record list");
  const auto deduped = deduplicate(records);
  RemapResult result;
  std::unordered_map<std::string, UserId> users;
  std::unordered_map<std::string, ItemId> items;
  int max_domain = 0;
  for (const auto& r : deduped) max_domain = std::max(max_domain, r.domain);
  Dataset& ds = result.dataset;
  ds.domains = domains > 0 ? domains : max_domain + 1;
  if (max_domain >= ds.domains) throw DataError("record domain exceeds the configured domain count");
  std::vector<std::set<ItemId>> domain_items(ds.domains);
  for (const auto& r : deduped) {
    auto [uit, unew] = users.emplace(r.user, static_cast<UserId>(users.size()));
    if (unew) result.mapping.users.push_back(r.user);
    auto [iit, inew] = items.emplace(r.item, static_cast<ItemId>(items.size()));
    if (inew) result.mapping.items.push_back(r.item);
    InteractionRecord rec;
    rec.user = uit->second;
    rec.item = iit->second;
    rec.domain = static_cast<DomainId>(r.domain);
    rec.timestamp = r.timestamp;
    rec.rating = r.rating;
    ds.records.push_back(rec);
    domain_items[r.domain].insert(rec.item);
  }
  ds.user_count = users.size();
  ds.item_count = items.size();
  for (auto& s : domain_items) ds.per_domain_items.emplace_back(s.begin(), s.end());
  return result;
}

SplitDataset leave_one_out_split(const Dataset& dataset) {
  // (user, domain) -> index of the latest record, plus group sizes.
  std::map<std::pair<UserId, DomainId>, std::pair<std::size_t, std::size_t>> groups;
  for (std::size_t i = 0; i < dataset.records.size(); ++i) {
    const auto& r = dataset.records[i];
    auto [it, inserted] = groups.try_emplace({r.user, r.domain}, i, 0);
    auto& [latest, count] = it->second;
    ++count;
    if (inserted) continue;
    const auto& cur = dataset.records[latest];
    if (r.timestamp > cur.timestamp || (r.timestamp == cur.timestamp && r.item > cur.item))
      latest = i;
  }
  std::vector<bool> held_out(dataset.records.size(), false);
  SplitDataset split;
  for (const auto& [key, value] : groups) {
    if (value.second < 2) continue;
    held_out[value.first] = true;
    split.test.push_back(dataset.records[value.first]);
  }
  split.train.domains = dataset.domains;
  split.train.user_count = dataset.user_count;
  split.train.item_count = dataset.item_count;
  split.train.per_domain_items = dataset.per_domain_items;
  for (std::size_t i = 0; i < dataset.records.size(); ++i)
    if (!held_out[i]) split.train.records.push_back(dataset.records[i]);
  return split;
}

IdMapping identity_mapping(const Dataset& dataset) {
  IdMapping m;
  m.users.reserve(dataset.user_count);
  for (std::size_t u = 0; u < dataset.user_count; ++u) m.users.push_back("u" + std::to_string(u));
  m.items.reserve(dataset.item_count);
  for (std::size_t i = 0; i < dataset.item_count; ++i) m.items.push_back("i" + std::to_string(i));
  return m;
}

}  // namespace h3t::ingest
