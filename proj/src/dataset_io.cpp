#include <fstream>
#include <map>
#include <sstream>

#include "h3trans/dataingest.hpp"
#include "h3trans/errors.hpp"

namespace h3t::ingest {

namespace fs = std::filesystem;

namespace {

std::ifstream open_in(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw DataError("cannot open " + p.string());
  return in;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw DataError("cannot write " + p.string());
  return out;
}

std::uint64_t to_u64(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const auto v = std::stoull(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError("bad " + what + " '" + s + "'");
  }
}

}  // namespace

void write_native(std::ostream& out, const std::vector<InteractionRecord>& records) {
  for (const auto& r : records) {
    out << r.user << '\t' << r.item << '\t' << r.domain << '\t' << r.timestamp;
    if (r.rating) out << '\t' << *r.rating;
    out << '\n';
  }
}

std::vector<InteractionRecord> read_native_dense(std::istream& in, const std::string& source_name) {
  const auto raw = parse_interactions(in, Format::Native, 0, source_name);
  std::vector<InteractionRecord> out;
  out.reserve(raw.size());
  for (const auto& r : raw) {
    InteractionRecord rec;
    rec.user = static_cast<UserId>(to_u64(r.user, "dense user id"));
    rec.item = static_cast<ItemId>(to_u64(r.item, "dense item id"));
    rec.domain = static_cast<DomainId>(r.domain);
    rec.timestamp = r.timestamp;
    rec.rating = r.rating;
    out.push_back(rec);
  }
  return out;
}

void write_mapping(std::ostream& out, const std::vector<std::string>& dense_to_original) {
  for (std::size_t i = 0; i < dense_to_original.size(); ++i)
    out << dense_to_original[i] << '\t' << i << '\n';
}

std::vector<std::string> read_mapping(std::istream& in, const std::string& source_name) {
  std::vector<std::string> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos) throw ParseError(source_name, line_no, "expected original_id<TAB>dense_id");
    const auto dense = to_u64(line.substr(tab + 1), "dense id");
    if (dense != out.size()) throw ParseError(source_name, line_no, "dense ids must be consecutive");
    out.push_back(line.substr(0, tab));
  }
  return out;
}

void write_split_dir(const fs::path& dir, const SplitDataset& split, const IdMapping& mapping, bool synthetic) {
  fs::create_directories(dir);
  const Dataset& train = split.train;
  {
    auto out = open_out(dir / "train.tsv");
    out << "# user\titem\tdomain\ttimestamp\n";
    write_native(out, train.records);
  }
  {
    auto out = open_out(dir / "test.tsv");
    out << "# user\titem\tdomain\ttimestamp\n";
    write_native(out, split.test);
  }
  {
    auto out = open_out(dir / "domain_items.tsv");
    for (int m = 0; m < train.domains; ++m)
      for (ItemId i : train.per_domain_items[m]) out << m << '\t' << i << '\n';
  }
  {
    auto out = open_out(dir / "users.map");
    write_mapping(out, mapping.users);
  }
  {
    auto out = open_out(dir / "items.map");
    write_mapping(out, mapping.items);
  }
  auto out = open_out(dir / "manifest.txt");
  out << "domains=" << train.domains << '\n'
      << "users=" << train.user_count << '\n'
      << "items=" << train.item_count << '\n'
      << "train_records=" << train.records.size() << '\n'
      << "test_records=" << split.test.size() << '\n'
      << "source=" << (synthetic ? "synthetic" : "prepared") << '\n';
}

namespace {

std::map<std::string, std::string> read_manifest(const fs::path& dir) {
  std::map<std::string, std::string> manifest;
  auto in = open_in(dir / "manifest.txt");
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) manifest[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return manifest;
}

}  // namespace

bool split_dir_is_synthetic(const fs::path& dir) {
  const auto manifest = read_manifest(dir);
  const auto it = manifest.find("source");
  return it != manifest.end() && it->second == "synthetic";
}

SplitDataset read_split_dir(const fs::path& dir) {
  const auto manifest = read_manifest(dir);
  auto need = [&](const std::string& key) {
    auto it = manifest.find(key);
    if (it == manifest.end()) throw DataError("manifest.txt lacks '" + key + "'");
    return to_u64(it->second, key);
  };
  SplitDataset split;
  Dataset& train = split.train;
  train.domains = static_cast<int>(need("domains"));
  train.user_count = need("users");
  train.item_count = need("items");
  train.per_domain_items.assign(train.domains, {});
  {
    auto in = open_in(dir / "domain_items.tsv");
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty() || line.front() == '#') continue;
      std::istringstream fields(line);
      std::uint64_t m = 0, i = 0;
      if (!(fields >> m >> i) || m >= static_cast<std::uint64_t>(train.domains))
        throw ParseError((dir / "domain_items.tsv").string(), line_no, "bad domain/item pair");
      train.per_domain_items[m].push_back(static_cast<ItemId>(i));
    }
  }
  for (auto& items : train.per_domain_items) std::sort(items.begin(), items.end());
  {
    auto in = open_in(dir / "train.tsv");
    train.records = read_native_dense(in, (dir / "train.tsv").string());
  }
  {
    auto in = open_in(dir / "test.tsv");
    split.test = read_native_dense(in, (dir / "test.tsv").string());
  }
  train.validate();
  return split;
}

}  // namespace h3t::ingest
