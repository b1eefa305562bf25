#include "h3trans/ablation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <ostream>
#include <tuple>

#include "h3trans/errors.hpp"

namespace h3t::ablate {

AblationRun train_and_evaluate(const ingest::SplitDataset& split, const model::ModelConfig& model_cfg,
                               const train::TrainConfig& train_cfg, const eval::EvalConfig& eval_cfg,
                               std::ostream* log) {
  const auto start = std::chrono::steady_clock::now();
  train::Trainer trainer(split.train, model_cfg, train_cfg);
  trainer.initialize();
  trainer.run(log);
  trainer.prepare_evaluation();
  AblationRun run;
  run.variant = model_cfg.variant;
  run.domains = split.train.domains;
  run.seed = train_cfg.seed;
  run.metrics = eval::evaluate(trainer.model(), trainer.params(), split, eval_cfg);
  run.steps = trainer.current_step();
  run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return run;
}

AblationResult run_ablation(const AblationConfig& cfg, std::ostream* progress) {
  if (cfg.variants.empty()) throw ConfigError("ablate needs at least one variant");
  if (cfg.seeds.empty()) throw ConfigError("ablate needs at least one seed");
  if (cfg.data && cfg.domain_sweep) throw ConfigError("the domain sweep needs generated data, not a dataset directory");
  std::vector<int> domain_counts;
  if (cfg.domain_sweep)
    for (int t = 1; t <= cfg.gen.domains; ++t) domain_counts.push_back(t);
  else
    domain_counts.push_back(cfg.data ? 0 : cfg.gen.domains);

  std::optional<ingest::SplitDataset> fixed;
  if (cfg.data) fixed = ingest::read_split_dir(*cfg.data);

  AblationResult result;
  for (int t : domain_counts) {
    for (std::uint64_t seed : cfg.seeds) {
      ingest::SplitDataset split;
      if (fixed) {
        split = *fixed;
      } else {
        ingest::GenConfig gen = cfg.gen;
        gen.domains = t;
        gen.seed = seed;
        split = ingest::leave_one_out_split(ingest::generate_synthetic(gen));
      }
      for (model::Variant v : cfg.variants) {
        model::ModelConfig mc = cfg.model;
        mc.variant = v;
        mc.retrieval.method = model::retrieval_method(v);
        train::TrainConfig tc = cfg.train;
        tc.seed = seed;
        AblationRun run = train_and_evaluate(split, mc, tc, cfg.eval);
        if (progress) {
          const auto hr = run.metrics.find(0, "ALL", "HR", cfg.eval.ks.front());
          *progress << "ablate variant=" << model::variant_name(v) << " T=" << run.domains << " seed=" << seed
                    << " steps=" << run.steps << " seconds=" << run.seconds << " domain0_HR@" << cfg.eval.ks.front()
                    << '=' << (hr ? std::to_string(*hr) : "NA") << std::endl;
        }
        result.runs.push_back(std::move(run));
      }
    }
  }
  return result;
}

std::optional<SeedStat> AblationResult::stat(model::Variant variant, int domains, int domain,
                                             const std::string& group, const std::string& metric,
                                             std::size_t k) const {
  std::vector<double> xs;
  for (const auto& r : runs) {
    if (r.variant != variant || r.domains != domains) continue;
    if (auto v = r.metrics.find(domain, group, metric, k)) xs.push_back(*v);
  }
  if (xs.empty()) return std::nullopt;
  SeedStat s;
  s.seeds = xs.size();
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.stderr_mean = std::sqrt(ss / static_cast<double>(xs.size() - 1)) / std::sqrt(static_cast<double>(xs.size()));
  }
  return s;
}

void AblationResult::write_runs_tsv(std::ostream& out) const {
  out << "variant\tT\tseed\tdomain\tgroup\tmetric\tK\tvalue\tcount\n";
  out.precision(10);
  for (const auto& r : runs)
    for (const auto& row : r.metrics.rows) {
      out << model::variant_name(r.variant) << '\t' << r.domains << '\t' << r.seed << '\t' << row.domain << '\t'
          << row.group << '\t' << row.metric << '\t';
      if (row.k) out << row.k;
      else out << '-';
      out << '\t';
      if (row.value) out << *row.value;
      else out << "NA";
      out << '\t' << row.count << '\n';
    }
}

void AblationResult::write_summary_tsv(std::ostream& out) const {
  out << "variant\tT\tdomain\tgroup\tmetric\tK\tmean\tstderr\tseeds\n";
  out.precision(10);
  std::vector<std::tuple<model::Variant, int>> keys;
  for (const auto& r : runs)
    if (std::find(keys.begin(), keys.end(), std::make_tuple(r.variant, r.domains)) == keys.end())
      keys.emplace_back(r.variant, r.domains);
  for (const auto& [variant, domains] : keys) {
    const AblationRun* first = nullptr;
    for (const auto& r : runs)
      if (r.variant == variant && r.domains == domains) {
        first = &r;
        break;
      }
    for (const auto& row : first->metrics.rows) {
      const auto s = stat(variant, domains, row.domain, row.group, row.metric, row.k);
      out << model::variant_name(variant) << '\t' << domains << '\t' << row.domain << '\t' << row.group << '\t'
          << row.metric << '\t';
      if (row.k) out << row.k;
      else out << '-';
      out << '\t';
      if (s) out << s->mean << '\t' << s->stderr_mean << '\t' << s->seeds << '\n';
      else out << "NA\tNA\t0\n";
    }
  }
}

}  // namespace h3t::ablate
