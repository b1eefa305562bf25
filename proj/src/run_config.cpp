#include "h3trans/run_config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "h3trans/errors.hpp"

namespace h3t {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::int64_t to_int(const std::string& v, const std::string& key) {
  std::int64_t x = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ConfigError("config key '" + key + "' expects an integer, got '" + v + "'");
  return x;
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      // synthetic generator
      {"T", "3", "number of domains generated"},
      {"users", "300", "users generated"},
      {"items_per_domain", "200", "items per generated domain"},
      {"overlap_fraction", "0.2", "share of items shared by consecutive domains"},
      {"interactions_per_user", "8", "mean interactions per user and domain"},
      {"latent_dim", "8", "latent factor width of the generator"},
      {"domain_correlation", "0.8", "weight of the shared user factor across domains"},
      {"seed", "1", "seed for generation, sampling and initialisation"},
      // preprocessing
      {"rating_threshold", "4", "ratings at or above this value are positive"},
      {"k_core", "5", "minimum interactions per user and item"},
      // model
      {"variant", "EHIplus", "Vanilla, HU, HUplus, PHI, EHI or EHIplus"},
      {"dims", "128,64", "layer widths; the embedding width equals the first"},
      {"heads", "4", "attention heads"},
      {"neighbors", "10", "neighbors sampled per node and layer during training"},
      {"temperature", "0.2", "InfoNCE temperature"},
      {"d_max", "6", "largest distinguished shortest-path distance"},
      {"score", "inner", "prediction function: inner or cosine"},
      {"linear", "false", "disable the between-layer nonlinearity"},
      {"slope", "0.01", "negative slope of the between-layer nonlinearity"},
      // retrieval
      {"k", "20", "similar items per hyperedge-i"},
      {"time_window", "604800", "half-width of the path-based click window, in seconds (generated data: 50 slots unless set)"},
      {"refresh_interval", "100", "steps between embedding-based hyperedge refreshes"},
      {"retrieval_similarity", "inner", "embedding retrieval similarity: inner or cosine"},
      // training
      {"batch_size", "512", "positives per step"},
      {"negatives", "64", "sampled negatives per positive"},
      {"epochs", "30", "training epochs when steps = 0"},
      {"steps", "0", "fixed step budget (0: use epochs)"},
      {"lr", "0.01", "Adam learning rate"},
      {"beta1", "0.9", "Adam first-moment decay"},
      {"beta2", "0.999", "Adam second-moment decay"},
      {"eps", "1e-8", "Adam epsilon"},
      {"log_every", "10", "steps per training log line"},
      {"checkpoint_every", "0", "steps between periodic checkpoints (0: off)"},
      // evaluation
      {"ks", "20,50", "cutoffs for HR and NDCG"},
      {"groups", "5", "activity groups"},
      // paths
      {"data", "", "dataset directory written by prepare or synth"},
      {"checkpoint", "", "checkpoint file for eval or resume"},
      {"resume", "", "checkpoint to resume training from"},
      // ablation
      {"variants", "Vanilla,HUplus,EHIplus", "variants trained by ablate"},
      {"seeds", "1,2,3", "seeds used by ablate"},
      {"domain_sweep", "false", "ablate also re-generates with 1..T domains"},
  };
  return keys;
}

RunConfig::RunConfig() {
  for (const auto& k : config_keys()) values_.emplace(std::string(k.name), std::string(k.default_value));
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse(in, path.string());
}

RunConfig RunConfig::parse(std::istream& in, const std::string& source_name) {
  RunConfig cfg;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(source_name + ":" + std::to_string(n) + ": expected key=value");
    try {
      cfg.set(trim(std::string_view(t).substr(0, eq)), trim(std::string_view(t).substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(source_name + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return cfg;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second = value;
  assigned_.insert(key);
}

void RunConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
  set(trim(std::string_view(assignment).substr(0, eq)), trim(std::string_view(assignment).substr(eq + 1)));
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

std::int64_t RunConfig::get_int(const std::string& key) const {
  return to_int(get(key), key);
}

double RunConfig::get_double(const std::string& key) const {
  const std::string& v = get(key);
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used == v.size()) return x;
  } catch (const std::exception&) {
  }
  throw ConfigError("config key '" + key + "' expects a number, got '" + v + "'");
}

bool RunConfig::get_bool(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config key '" + key + "' expects true or false, got '" + v + "'");
}

std::vector<std::string> RunConfig::get_list(const std::string& key) const {
  std::vector<std::string> out;
  std::istringstream in(get(key));
  std::string tok;
  while (std::getline(in, tok, ',')) {
    tok = trim(tok);
    if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

namespace {

std::size_t nonnegative(const RunConfig& c, const std::string& key) {
  const auto v = c.get_int(key);
  if (v < 0) throw ConfigError("config key '" + key + "' must be >= 0");
  return static_cast<std::size_t>(v);
}

retrieval::Similarity similarity(const RunConfig& c, const std::string& key) {
  const std::string& v = c.get(key);
  if (v == "inner") return retrieval::Similarity::InnerProduct;
  if (v == "cosine") return retrieval::Similarity::Cosine;
  throw ConfigError("config key '" + key + "' expects inner or cosine, got '" + v + "'");
}

}  // namespace

ingest::GenConfig RunConfig::gen_config() const {
  ingest::GenConfig g;
  g.domains = static_cast<int>(get_int("T"));
  g.users = static_cast<int>(get_int("users"));
  g.items_per_domain = static_cast<int>(get_int("items_per_domain"));
  g.overlap_fraction = get_double("overlap_fraction");
  g.interactions_per_user = static_cast<int>(get_int("interactions_per_user"));
  g.latent_dim = static_cast<int>(get_int("latent_dim"));
  g.domain_correlation = get_double("domain_correlation");
  g.seed = static_cast<std::uint64_t>(get_int("seed"));
  g.validate();
  return g;
}

model::ModelConfig RunConfig::model_config() const {
  model::ModelConfig m;
  m.variant = model::parse_variant(get("variant"));
  m.dims.clear();
  for (const auto& d : get_list("dims")) m.dims.push_back(static_cast<int>(to_int(d, "dims")));
  m.heads = static_cast<int>(get_int("heads"));
  m.neighbors = nonnegative(*this, "neighbors");
  m.temperature = get_double("temperature");
  m.d_max = static_cast<int>(get_int("d_max"));
  m.score = similarity(*this, "score");
  m.linear = get_bool("linear");
  m.slope = get_double("slope");
  m.retrieval.k = nonnegative(*this, "k");
  m.retrieval.time_window = get_int("time_window");
  m.retrieval.refresh_interval = nonnegative(*this, "refresh_interval");
  m.retrieval.similarity = similarity(*this, "retrieval_similarity");
  m.retrieval.method = model::retrieval_method(m.variant);
  m.validate();
  return m;
}

train::TrainConfig RunConfig::train_config() const {
  train::TrainConfig t;
  t.batch_size = nonnegative(*this, "batch_size");
  t.negatives = nonnegative(*this, "negatives");
  t.epochs = get_double("epochs");
  t.steps = nonnegative(*this, "steps");
  t.seed = static_cast<std::uint64_t>(get_int("seed"));
  t.log_every = nonnegative(*this, "log_every");
  t.checkpoint_every = nonnegative(*this, "checkpoint_every");
  t.adam.lr = get_double("lr");
  t.adam.beta1 = get_double("beta1");
  t.adam.beta2 = get_double("beta2");
  t.adam.eps = get_double("eps");
  t.validate();
  return t;
}

eval::EvalConfig RunConfig::eval_config() const {
  eval::EvalConfig e;
  e.ks.clear();
  for (const auto& k : get_list("ks")) {
    const auto v = to_int(k, "ks");
    if (v < 1) throw ConfigError("ks entries must be >= 1");
    e.ks.push_back(static_cast<std::size_t>(v));
  }
  if (e.ks.empty()) throw ConfigError("ks must list at least one cutoff");
  std::sort(e.ks.begin(), e.ks.end());
  e.groups = static_cast<int>(get_int("groups"));
  if (e.groups < 1) throw ConfigError("groups must be >= 1");
  return e;
}

void RunConfig::dump(std::ostream& out) const {
  for (const auto& k : config_keys()) out << k.name << '=' << get(std::string(k.name)) << '\n';
}

}  // namespace h3t
