#include "h3trans/trainer.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>
#include <sstream>

#include "h3trans/errors.hpp"
#include "h3trans/numeric/ops.hpp"

namespace h3t::train {

namespace {

constexpr std::uint64_t kStepStream = 0x7472;
constexpr int kMaxRejections = 100;

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (negatives < 1) throw ConfigError("negatives must be >= 1");
  if (steps == 0 && !(epochs > 0)) throw ConfigError("either steps or epochs must be positive");
  if (log_every < 1) throw ConfigError("log_every must be >= 1");
  if (!(adam.lr > 0) || !(adam.beta1 >= 0 && adam.beta1 < 1) || !(adam.beta2 >= 0 && adam.beta2 < 1) ||
      !(adam.eps > 0))
    throw ConfigError("invalid optimizer settings");
}

std::size_t TrainConfig::total_steps(std::size_t train_records) const {
  if (steps > 0) return steps;
  const std::size_t per_epoch = (train_records + batch_size - 1) / batch_size;
  return static_cast<std::size_t>(std::ceil(epochs * static_cast<double>(per_epoch)));
}

std::vector<Sample> sample_batch(const ingest::Dataset& train, const InteractionIndex& observed,
                                 std::size_t batch_size, std::size_t negatives, Rng& rng) {
  if (train.records.empty()) throw DataError("sample_batch: empty training set");
  std::vector<Sample> batch(batch_size);
  for (auto& s : batch) {
    const auto& r = train.records[uniform_index(rng, train.records.size())];
    s.user = r.user;
    s.domain = r.domain;
    s.positive = r.item;
    const auto& pool = train.per_domain_items[r.domain];
    s.negatives.resize(negatives);
    for (auto& neg : s.negatives) {
      int rejections = 0;
      neg = pool[uniform_index(rng, pool.size())];
      while (observed.contains(s.user, s.domain, neg)) {
        if (++rejections > kMaxRejections) {
          s.collision = true;
          break;
        }
        neg = pool[uniform_index(rng, pool.size())];
      }
    }
  }
  return batch;
}

double infonce_loss(double positive, std::span<const double> negatives, double tau) {
  if (!(tau > 0)) throw ConfigError("temperature must be > 0");
  double mx = positive / tau;
  for (double s : negatives) mx = std::max(mx, s / tau);
  double sum = std::exp(positive / tau - mx);
  for (double s : negatives) sum += std::exp(s / tau - mx);
  return mx + std::log(sum) - positive / tau;
}

nc::Var infonce_loss(nc::Var scores, double tau) {
  if (!(tau > 0)) throw ConfigError("temperature must be > 0");
  nc::Var scaled = nc::scale(scores, 1.0 / tau);
  nc::Var diff = nc::sub(nc::logsumexp_rows(scaled), nc::slice_cols(scaled, 0, 1));
  return nc::scale(nc::sum_all(diff), 1.0 / static_cast<double>(scores.rows()));
}

Rng step_stream(std::uint64_t seed, std::uint64_t step) { return stream(seed, {kStepStream, step}); }

std::string serialize_hyperedges_i(const graph::MultiDomainGraph& graph) {
  std::ostringstream out;
  for (const auto& e : graph.hyperedges_i()) {
    out << e.owner << ' ' << e.target_domain << ' ';
    for (std::size_t k = 0; k < e.nodes.size(); ++k) out << (k ? "," : "") << e.nodes[k];
    out << '\n';
  }
  return out.str();
}

std::vector<graph::Hyperedge> parse_hyperedges_i(const std::string& text) {
  std::vector<graph::Hyperedge> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    graph::Hyperedge e;
    e.kind = graph::Hyperedge::Kind::HyperI;
    std::string nodes;
    if (!(ls >> e.owner >> e.target_domain >> nodes)) throw DataError("malformed hyperedge record in checkpoint");
    std::istringstream ns(nodes);
    std::string tok;
    while (std::getline(ns, tok, ',')) e.nodes.push_back(static_cast<graph::NodeIndex>(std::stoul(tok)));
    out.push_back(std::move(e));
  }
  return out;
}

Trainer::Trainer(const ingest::Dataset& train, model::ModelConfig model_cfg, TrainConfig train_cfg)
    : train_(&train), model_cfg_(std::move(model_cfg)), train_cfg_(train_cfg) {
  model_cfg_.validate();
  train_cfg_.validate();
  train.validate();
  if (train.records.empty()) throw DataError("training set is empty");
  graph_ = std::make_unique<graph::MultiDomainGraph>(graph::MultiDomainGraph::build(train));
  graph_->build_hyperedges_u();
  model_ = std::make_unique<model::Model>(*graph_, model_cfg_);
  observed_ = InteractionIndex(train);
  adam_.config = train_cfg_.adam;
}

std::string Trainer::header() const {
  std::ostringstream s;
  s << model_cfg_.describe() << " domains=" << graph_->domains() << " users=" << graph_->user_count()
    << " items=" << graph_->item_count();
  return s.str();
}

void Trainer::initialize() {
  params_ = nc::ParamStore();
  model::init_params(params_, model_cfg_, graph_->user_count(), graph_->item_count(), train_cfg_.seed);
  adam_ = nc::AdamState();
  adam_.config = train_cfg_.adam;
  step_ = 0;
  refreshed_at_.reset();
  const auto rc = model_cfg_.effective_retrieval();
  if (model::has_hyper_i(model_cfg_.variant) && rc.method == retrieval::Method::PathBased)
    model::refresh_hyperedges_i(*graph_, params_, model_cfg_, train_cfg_.seed);
  else
    graph_->set_hyperedges_i({});
}

void Trainer::resume(const std::filesystem::path& checkpoint) {
  const std::string expected = header();
  nc::Checkpoint c = nc::load_checkpoint(checkpoint, &expected);
  params_ = std::move(c.params);
  adam_ = std::move(c.adam);
  step_ = c.step;
  refreshed_at_.reset();
  auto it = c.extras.find("hyperedges_i");
  graph_->set_hyperedges_i(it == c.extras.end() ? std::vector<graph::Hyperedge>{} : parse_hyperedges_i(it->second));
}

nc::Checkpoint Trainer::checkpoint() const {
  nc::Checkpoint c;
  c.header = header();
  c.step = step_;
  c.params = params_;
  c.adam = adam_;
  c.extras["hyperedges_i"] = serialize_hyperedges_i(*graph_);
  c.extras["variant"] = std::string(model::variant_name(model_cfg_.variant));
  c.extras["seed"] = std::to_string(train_cfg_.seed);
  return c;
}

void Trainer::prepare_evaluation() {
  if (model::has_hyper_i(model_cfg_.variant) &&
      model_cfg_.effective_retrieval().method == retrieval::Method::EmbeddingBased)
    model::refresh_hyperedges_i(*graph_, params_, model_cfg_, train_cfg_.seed);
}

void Trainer::save(const std::filesystem::path& path) const { nc::save_checkpoint(path, checkpoint()); }

void Trainer::write(std::ostream* log, const LogLine& line) const {
  if (!log) return;
  nlohmann::ordered_json j;
  j["event"] = line.event;
  j["step"] = line.step;
  if (line.event == "step") {
    j["loss"] = line.loss;
    j["collisions"] = line.count;
  } else {
    j["count"] = line.count;
  }
  j["wall_ms"] = line.wall_ms;
  j["variant"] = model::variant_name(model_cfg_.variant);
  j["seed"] = train_cfg_.seed;
  *log << j.dump() << '\n';
}

void Trainer::refresh_if_due(std::ostream* log) {
  if (!model::has_hyper_i(model_cfg_.variant)) return;
  const auto rc = model_cfg_.effective_retrieval();
  if (!retrieval::refresh_due(rc, step_) || refreshed_at_ == step_) return;
  refreshed_at_ = step_;
  model::refresh_hyperedges_i(*graph_, params_, model_cfg_, train_cfg_.seed);
  write(log, {"refresh", step_, 0, 0, graph_->hyperedge_i_count()});
}

double Trainer::step() {
  refresh_if_due(nullptr);
  Rng rng = step_stream(train_cfg_.seed, step_);
  const auto batch = sample_batch(*train_, observed_, train_cfg_.batch_size, train_cfg_.negatives, rng);
  std::vector<model::Query> queries(batch.size());
  for (std::size_t r = 0; r < batch.size(); ++r) {
    queries[r].user = batch[r].user;
    queries[r].domain = batch[r].domain;
    queries[r].items.reserve(1 + batch[r].negatives.size());
    queries[r].items.push_back(batch[r].positive);
    queries[r].items.insert(queries[r].items.end(), batch[r].negatives.begin(), batch[r].negatives.end());
    pending_collisions_ += batch[r].collision ? 1 : 0;
  }
  nc::Tape tape;
  model::ParamBinder binder(tape, params_, true);
  const model::SamplingKey key{train_cfg_.seed, step_};
  nc::Var loss = infonce_loss(model_->forward(binder, queries, &key), model_cfg_.temperature);
  const double value = loss.value()(0, 0);
  if (!std::isfinite(value))
    throw NumericError("non-finite loss at step " + std::to_string(step_));
  nc::Gradients grads = tape.backward(loss, params_);
  for (const auto& [name, g] : grads)
    if (!g.allFinite()) throw NumericError("non-finite gradient for '" + name + "' at step " + std::to_string(step_));
  nc::adam_step(params_, grads, adam_);
  ++step_;
  return value;
}

void Trainer::run(std::ostream* log, std::size_t until, const std::filesystem::path& checkpoint_dir) {
  if (until == 0) until = budget();
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  };
  double loss_sum = 0;
  std::size_t loss_count = 0;
  while (step_ < until) {
    refresh_if_due(log);
    double loss;
    try {
      loss = step();
    } catch (const NumericError&) {
      if (!checkpoint_dir.empty()) {
        std::filesystem::create_directories(checkpoint_dir);
        save(checkpoint_dir / "diagnostic.ckpt");
      }
      throw;
    }
    loss_sum += loss;
    ++loss_count;
    if (step_ % train_cfg_.log_every == 0 || step_ == until) {
      write(log, {"step", step_, loss_sum / static_cast<double>(loss_count), elapsed(), pending_collisions_});
      loss_sum = 0;
      loss_count = 0;
      pending_collisions_ = 0;
    }
    if (train_cfg_.checkpoint_every > 0 && step_ % train_cfg_.checkpoint_every == 0 && !checkpoint_dir.empty()) {
      std::filesystem::create_directories(checkpoint_dir);
      save(checkpoint_dir / ("checkpoint-" + std::to_string(step_) + ".ckpt"));
    }
  }
}

}  // namespace h3t::train
