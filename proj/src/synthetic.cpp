#include <algorithm>
#include <cmath>
#include <numeric>

#include "h3trans/dataingest.hpp"
#include "h3trans/errors.hpp"
#include "h3trans/rng.hpp"

namespace h3t::ingest {

namespace {

// Stream tags. Every random quantity has its own stream keyed by the entity
// it belongs to, so domain m's draws do not depend on how many domains exist.
enum : std::uint64_t { kItemStream = 1, kUserStream, kNoiseStream, kActivityStream,
                       kDomainActivityStream, kSampleStream };

constexpr double kParetoShape = 1.2;
constexpr double kDomainActivitySpread = 0.75;
constexpr int kMinPerDomain = 2;

std::vector<double> normal_vector(Rng& rng, int dim) {
  std::vector<double> v(dim);
  for (auto& x : v) x = normal(rng);
  return v;
}

// Largest-remainder allocation of `total` over `weights`, each share in
// [floor_count, cap].
std::vector<int> allocate(const std::vector<double>& weights, int total, int floor_count, int cap) {
  const std::size_t n = weights.size();
  std::vector<int> counts(n, floor_count);
  int remaining = total - floor_count * static_cast<int>(n);
  std::vector<bool> open(n, floor_count < cap);
  while (remaining > 0) {
    double wsum = 0;
    for (std::size_t u = 0; u < n; ++u)
      if (open[u]) wsum += weights[u];
    if (wsum <= 0) break;
    std::vector<std::pair<double, std::size_t>> frac;
    int assigned = 0;
    for (std::size_t u = 0; u < n; ++u) {
      if (!open[u]) continue;
      const double share = remaining * weights[u] / wsum;
      int whole = static_cast<int>(std::floor(share));
      whole = std::min(whole, cap - counts[u]);
      counts[u] += whole;
      assigned += whole;
      frac.emplace_back(share - std::floor(share), u);
    }
    remaining -= assigned;
    std::stable_sort(frac.begin(), frac.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (const auto& [f, u] : frac) {
      if (remaining == 0) break;
      if (counts[u] < cap) {
        ++counts[u];
        --remaining;
      }
    }
    for (std::size_t u = 0; u < n; ++u)
      if (counts[u] >= cap) open[u] = false;
  }
  return counts;
}

}  // namespace

void GenConfig::validate() const {
  if (domains < 1 || users < 1 || items_per_domain < 1 || interactions_per_user < 1 || latent_dim < 1)
    throw ConfigError("synthetic generator counts must all be >= 1");
  if (!(overlap_fraction >= 0.0 && overlap_fraction <= 1.0))
    throw ConfigError("overlap_fraction must lie in [0, 1]");
  if (!(domain_correlation >= 0.0 && domain_correlation <= 1.0))
    throw ConfigError("domain_correlation must lie in [0, 1]");
  if (interactions_per_user > items_per_domain)
    throw ConfigError("interactions_per_user (" + std::to_string(interactions_per_user) +
                      ") exceeds items_per_domain (" + std::to_string(items_per_domain) + ")");
}

SyntheticWorld generate_world(const GenConfig& cfg) {
  cfg.validate();
  const int T = cfg.domains;
  const int n = cfg.items_per_domain;
  const int overlap = std::clamp(static_cast<int>(std::lround(cfg.overlap_fraction * n)), 0, n);
  const double rho = cfg.domain_correlation;

  SyntheticWorld world;
  Dataset& ds = world.dataset;
  ds.domains = T;
  ds.user_count = cfg.users;

  // Domain m shares its first `overlap` items with the last `overlap` of m-1.
  ds.per_domain_items.resize(T);
  ItemId next = 0;
  for (int m = 0; m < T; ++m) {
    auto& items = ds.per_domain_items[m];
    if (m > 0) {
      const auto& prev = ds.per_domain_items[m - 1];
      items.assign(prev.end() - overlap, prev.end());
    }
    while (static_cast<int>(items.size()) < n) items.push_back(next++);
  }
  ds.item_count = next;

  world.item_factors.resize(ds.item_count);
  world.item_category.resize(ds.item_count);
  for (ItemId i = 0; i < ds.item_count; ++i) {
    Rng rng = stream(cfg.seed, {kItemStream, i});
    world.item_factors[i] = normal_vector(rng, cfg.latent_dim);
    const auto& f = world.item_factors[i];
    world.item_category[i] = static_cast<int>(std::max_element(f.begin(), f.end()) - f.begin());
  }

  world.user_factors.assign(T, std::vector<std::vector<double>>(cfg.users));
  world.activity.resize(cfg.users);
  for (int u = 0; u < cfg.users; ++u) {
    Rng urng = stream(cfg.seed, {kUserStream, static_cast<std::uint64_t>(u)});
    const auto shared = normal_vector(urng, cfg.latent_dim);
    Rng arng = stream(cfg.seed, {kActivityStream, static_cast<std::uint64_t>(u)});
    world.activity[u] = std::pow(1.0 - uniform01(arng), -1.0 / kParetoShape);
    for (int m = 0; m < T; ++m) {
      Rng nrng = stream(cfg.seed, {kNoiseStream, static_cast<std::uint64_t>(u),
                                   static_cast<std::uint64_t>(m)});
      const auto noise = normal_vector(nrng, cfg.latent_dim);
      auto& f = world.user_factors[m][u];
      f.resize(cfg.latent_dim);
      for (int d = 0; d < cfg.latent_dim; ++d) f[d] = rho * shared[d] + (1.0 - rho) * noise[d];
    }
  }

  const int floor_count = std::min(kMinPerDomain, cfg.interactions_per_user);
  const int total = cfg.users * cfg.interactions_per_user;
  std::vector<std::vector<int>> counts(T);
  for (int m = 0; m < T; ++m) {
    std::vector<double> weights(cfg.users);
    for (int u = 0; u < cfg.users; ++u) {
      Rng rng = stream(cfg.seed, {kDomainActivityStream, static_cast<std::uint64_t>(u),
                                  static_cast<std::uint64_t>(m)});
      weights[u] = world.activity[u] * std::exp(kDomainActivitySpread * normal(rng));
    }
    counts[m] = allocate(weights, total, floor_count, n);
  }

  const std::int64_t stride = std::max(10, T);
  for (int u = 0; u < cfg.users; ++u) {
    for (int m = 0; m < T; ++m) {
      const auto& items = ds.per_domain_items[m];
      const auto& pu = world.user_factors[m][u];
      Rng rng = stream(cfg.seed, {kSampleStream, static_cast<std::uint64_t>(u),
                                  static_cast<std::uint64_t>(m)});
      // Gumbel top-k: sampling without replacement from softmax(p . v).
      std::vector<std::pair<double, ItemId>> keys(items.size());
      for (std::size_t j = 0; j < items.size(); ++j) {
        const auto& v = world.item_factors[items[j]];
        double logit = 0;
        for (int d = 0; d < cfg.latent_dim; ++d) logit += pu[d] * v[d];
        double g = uniform01(rng);
        while (g <= 0.0) g = uniform01(rng);
        keys[j] = {logit - std::log(-std::log(g)), items[j]};
      }
      const int c = counts[m][u];
      std::partial_sort(keys.begin(), keys.begin() + c, keys.end(),
                        [](const auto& a, const auto& b) {
                          return a.first > b.first || (a.first == b.first && a.second < b.second);
                        });
      for (int k = 0; k < c; ++k) {
        InteractionRecord rec;
        rec.user = static_cast<UserId>(u);
        rec.item = keys[k].second;
        rec.domain = static_cast<DomainId>(m);
        // Domains interleaved round-robin, one slot per interaction.
        rec.timestamp = stride * static_cast<std::int64_t>(k) + m;
        ds.records.push_back(rec);
      }
    }
  }
  return world;
}

Dataset generate_synthetic(const GenConfig& config) { return generate_world(config).dataset; }

}  // namespace h3t::ingest
