#include "h3trans/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include "h3trans/ablation.hpp"
#include "h3trans/dataingest.hpp"
#include "h3trans/errors.hpp"
#include "h3trans/evaluator.hpp"
#include "h3trans/run_config.hpp"
#include "h3trans/trainer.hpp"

namespace fs = std::filesystem;

namespace h3t {

namespace {

struct CommonFlags {
  std::string config;
  std::vector<std::string> overrides;
  std::string out;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool out_required) {
  cmd->add_option("--config", f.config, "key=value configuration file");
  cmd->add_option("--set", f.overrides, "override one key (key=value), repeatable");
  auto* out = cmd->add_option("--out", f.out, "output directory");
  if (out_required) out->required();
  cmd->add_option("--seed", f.seed, "seed (overrides the seed key)");
}

RunConfig resolve(const CommonFlags& f) {
  RunConfig cfg = f.config.empty() ? RunConfig() : RunConfig::load(f.config);
  for (const auto& o : f.overrides) cfg.apply_override(o);
  if (f.seed) cfg.set("seed", std::to_string(*f.seed));
  return cfg;
}

// Generated timestamps are slot counts, so a window in seconds would admit every path.
void synthetic_time_window(RunConfig& cfg) {
  if (!cfg.assigned("time_window")) cfg.set("time_window", std::to_string(ingest::kSyntheticTimeWindow));
}

void echo(const RunConfig& cfg, std::ostream& out, const fs::path& dir) {
  out << "# resolved configuration\n";
  cfg.dump(out);
  if (!dir.empty()) {
    fs::create_directories(dir);
    std::ofstream f(dir / "config.resolved.txt");
    cfg.dump(f);
  }
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot write " + path.string());
  return f;
}

fs::path required_path(const RunConfig& cfg, const std::string& key) {
  const std::string& v = cfg.get(key);
  if (v.empty()) throw ConfigError("config key '" + key + "' must name a path");
  return v;
}

int cmd_prepare(const CommonFlags& f, const std::vector<std::string>& inputs, const std::string& format_tag,
                std::ostream& out) {
  const RunConfig cfg = resolve(f);
  const auto format = ingest::parse_format(format_tag);
  echo(cfg, out, f.out);
  std::vector<ingest::RawRecord> raw;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    std::ifstream in(inputs[k]);
    if (!in) throw DataError("cannot open input " + inputs[k]);
    auto part = ingest::parse_interactions(in, format, static_cast<int>(k), inputs[k]);
    raw.insert(raw.end(), part.begin(), part.end());
  }
  const int domains = format == ingest::Format::AmazonRatings ? static_cast<int>(inputs.size()) : 0;
  const std::size_t parsed = raw.size();
  raw = ingest::binarize(std::move(raw), static_cast<int>(cfg.get_int("rating_threshold")));
  raw = ingest::deduplicate(std::move(raw));
  raw = ingest::k_core_filter(std::move(raw), static_cast<int>(cfg.get_int("k_core")));
  if (raw.empty()) throw DataError("no interactions survive binarization and k-core filtering");
  auto remapped = ingest::remap_ids(raw, domains);
  const auto split = ingest::leave_one_out_split(remapped.dataset);
  ingest::write_split_dir(f.out, split, remapped.mapping);
  out << "prepare: parsed=" << parsed << " kept=" << raw.size() << " domains=" << split.train.domains
      << " users=" << split.train.user_count << " items=" << split.train.item_count
      << " train=" << split.train.records.size() << " test=" << split.test.size() << '\n';
  return 0;
}

int cmd_synth(const CommonFlags& f, std::ostream& out) {
  RunConfig cfg = resolve(f);
  synthetic_time_window(cfg);
  const auto gen = cfg.gen_config();
  echo(cfg, out, f.out);
  const auto data = ingest::generate_synthetic(gen);
  const auto split = ingest::leave_one_out_split(data);
  ingest::write_split_dir(f.out, split, ingest::identity_mapping(data), true);
  out << "synth: domains=" << data.domains << " users=" << data.user_count << " items=" << data.item_count
      << " records=" << data.records.size() << " train=" << split.train.records.size()
      << " test=" << split.test.size() << '\n';
  return 0;
}

int cmd_train(const CommonFlags& f, std::ostream& out) {
  RunConfig cfg = resolve(f);
  if (ingest::split_dir_is_synthetic(required_path(cfg, "data"))) synthetic_time_window(cfg);
  const auto mc = cfg.model_config();
  const auto tc = cfg.train_config();
  echo(cfg, out, f.out);
  const auto split = ingest::read_split_dir(required_path(cfg, "data"));
  train::Trainer trainer(split.train, mc, tc);
  if (!cfg.get("resume").empty()) trainer.resume(cfg.get("resume"));
  else trainer.initialize();
  const fs::path dir = f.out;
  auto log = open_out(dir / "train_log.jsonl");
  trainer.run(&log, 0, dir);
  trainer.save(dir / "model.ckpt");
  out << "train: variant=" << model::variant_name(mc.variant) << " steps=" << trainer.current_step()
      << " checkpoint=" << (dir / "model.ckpt").string() << '\n';
  return 0;
}

int cmd_eval(const CommonFlags& f, std::ostream& out) {
  RunConfig cfg = resolve(f);
  if (ingest::split_dir_is_synthetic(required_path(cfg, "data"))) synthetic_time_window(cfg);
  const auto mc = cfg.model_config();
  const auto tc = cfg.train_config();
  const auto ec = cfg.eval_config();
  echo(cfg, out, f.out);
  const auto split = ingest::read_split_dir(required_path(cfg, "data"));
  train::Trainer trainer(split.train, mc, tc);
  trainer.resume(required_path(cfg, "checkpoint"));
  trainer.prepare_evaluation();
  const auto table = eval::evaluate(trainer.model(), trainer.params(), split, ec);
  const fs::path dir = f.out;
  {
    auto tsv = open_out(dir / "metrics.tsv");
    table.write_tsv(tsv);
    auto jsonl = open_out(dir / "metrics.jsonl");
    table.write_jsonl(jsonl);
  }
  table.write_tsv(out);
  return 0;
}

int cmd_ablate(const CommonFlags& f, std::ostream& out) {
  RunConfig cfg = resolve(f);
  if (cfg.get("data").empty() || ingest::split_dir_is_synthetic(cfg.get("data"))) synthetic_time_window(cfg);
  ablate::AblationConfig ac;
  ac.variants.clear();
  for (const auto& v : cfg.get_list("variants")) ac.variants.push_back(model::parse_variant(v));
  ac.seeds.clear();
  for (const auto& s : cfg.get_list("seeds")) {
    if (s.find_first_not_of("0123456789") != std::string::npos)
      throw ConfigError("seeds entries must be nonnegative integers, got '" + s + "'");
    ac.seeds.push_back(std::stoull(s));
  }
  ac.domain_sweep = cfg.get_bool("domain_sweep");
  ac.model = cfg.model_config();
  ac.train = cfg.train_config();
  ac.eval = cfg.eval_config();
  if (!cfg.get("data").empty()) ac.data = fs::path(cfg.get("data"));
  else ac.gen = cfg.gen_config();
  echo(cfg, out, f.out);
  const auto result = ablate::run_ablation(ac, &out);
  const fs::path dir = f.out;
  auto runs = open_out(dir / "ablation_runs.tsv");
  result.write_runs_tsv(runs);
  auto summary = open_out(dir / "ablation_summary.tsv");
  result.write_summary_tsv(summary);
  out << "ablate: " << result.runs.size() << " runs, tables in " << dir.string() << '\n';
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cross-domain recommender: data prep, training, evaluation, ablations", "h3trans"};
  app.require_subcommand(1);
  CommonFlags prep_f, synth_f, train_f, eval_f, ablate_f;
  std::vector<std::string> inputs;
  std::string format = "native";

  auto* prepare = app.add_subcommand("prepare", "parse, binarize, k-core filter, remap and split raw data");
  add_common(prepare, prep_f, true);
  prepare->add_option("--in", inputs, "input file (repeatable; one domain per file for amazon_ratings)")->required();
  prepare->add_option("--format", format, "native or amazon_ratings");
  auto* synth = app.add_subcommand("synth", "generate and split a synthetic multi-domain dataset");
  add_common(synth, synth_f, true);
  auto* trainc = app.add_subcommand("train", "train a model on a prepared dataset");
  add_common(trainc, train_f, true);
  auto* evalc = app.add_subcommand("eval", "all-ranking evaluation of a checkpoint");
  add_common(evalc, eval_f, true);
  auto* ablatec = app.add_subcommand("ablate", "train and evaluate a set of variants over seeds");
  add_common(ablatec, ablate_f, true);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return 1;
  }

  try {
    if (prepare->parsed()) return cmd_prepare(prep_f, inputs, format, out);
    if (synth->parsed()) return cmd_synth(synth_f, out);
    if (trainc->parsed()) return cmd_train(train_f, out);
    if (evalc->parsed()) return cmd_eval(eval_f, out);
    if (ablatec->parsed()) return cmd_ablate(ablate_f, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 1;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return 2;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return 3;
  } catch (const DimensionError& e) {
    err << "numeric error: " << e.what() << '\n';
    return 3;
  }
  return 1;
}

}  // namespace h3t
