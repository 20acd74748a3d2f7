#include "evonet/population.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <system_error>
#include <thread>

#include "evonet/compiler.hpp"
#include "evonet/executor.hpp"
#include "evonet/flops.hpp"
#include "evonet/trainer.hpp"
#include "json.hpp"

namespace evonet {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

const char* to_string(IndividualState s) {
  switch (s) {
    case IndividualState::kTraining:
      return "training";
    case IndividualState::kAlive:
      return "alive";
    default:
      return "dead";
  }
}

std::string format_fitness_millis(double fitness) {
  const int millis =
      std::clamp(int(std::lround(fitness * 1000.0)), 0, 1000);
  char buf[8];
  std::snprintf(buf, sizeof(buf), "%04d", millis);
  return buf;
}

std::string individual_dir_name(IndividualState state, bool claimed,
                                std::optional<double> fitness,
                                const std::string& id) {
  std::string state_token =
      state == IndividualState::kTraining ? (claimed ? "claimed" : "training")
                                          : to_string(state);
  const std::string fit =
      fitness ? format_fitness_millis(*fitness) : std::string("xxxx");
  return state_token + "_" + fit + "_" + id;
}

std::optional<IndividualRecord> parse_dir_name(const std::string& name) {
  const size_t p1 = name.find('_');
  if (p1 == std::string::npos) return std::nullopt;
  const size_t p2 = name.find('_', p1 + 1);
  if (p2 == std::string::npos) return std::nullopt;
  const std::string state = name.substr(0, p1);
  const std::string fit = name.substr(p1 + 1, p2 - p1 - 1);
  IndividualRecord rec;
  rec.dir_name = name;
  rec.id = name.substr(p2 + 1);
  if (rec.id.empty() || fit.empty()) return std::nullopt;
  if (state == "training") {
    rec.state = IndividualState::kTraining;
  } else if (state == "claimed") {
    rec.state = IndividualState::kTraining;
    rec.claimed = true;
  } else if (state == "alive") {
    rec.state = IndividualState::kAlive;
  } else if (state == "dead") {
    rec.state = IndividualState::kDead;
  } else {
    return std::nullopt;
  }
  if (fit != "xxxx") {
    for (char c : fit)
      if (!std::isdigit((unsigned char)c)) return std::nullopt;
    rec.name_fitness = std::stoi(fit) / 1000.0;
  }
  return rec;
}

PopulationStore::PopulationStore(fs::path root) : root_(std::move(root)) {
  fs::create_directories(root_);
}

std::vector<IndividualRecord> PopulationStore::list() const {
  std::vector<IndividualRecord> records;
  for (const auto& entry : fs::directory_iterator(root_)) {
    if (!entry.is_directory()) continue;
    auto rec = parse_dir_name(entry.path().filename().string());
    if (rec) records.push_back(std::move(*rec));
  }
  std::sort(records.begin(), records.end(),
            [](const IndividualRecord& a, const IndividualRecord& b) {
              return a.id < b.id;
            });
  return records;
}

size_t PopulationStore::trained_count(
    const std::vector<IndividualRecord>& records) {
  size_t n = 0;
  for (const auto& r : records)
    if (r.name_fitness) ++n;
  return n;
}

size_t PopulationStore::population_count(
    const std::vector<IndividualRecord>& records) {
  size_t n = 0;
  for (const auto& r : records)
    if (r.state != IndividualState::kDead) ++n;
  return n;
}

std::string meta_to_json(const IndividualMeta& meta) {
  json j;
  j["id"] = meta.id;
  j["parent_id"] = meta.parent_id;
  j["mutation_kinds"] = meta.mutation_kinds;
  j["weight_action"] = meta.weight_action;
  j["created_at_ns"] = meta.created_at_ns;
  j["fitness"] = meta.fitness;
  j["learning_rate"] = meta.learning_rate;
  j["steps"] = meta.steps;
  j["final_loss"] = meta.final_loss;
  return j.dump();
}

IndividualMeta meta_from_json(const std::string& text) {
  const json j = json::parse(text);
  IndividualMeta meta;
  meta.id = j.at("id").get<std::string>();
  meta.parent_id = j.at("parent_id").get<std::string>();
  for (const auto& k : j.at("mutation_kinds"))
    meta.mutation_kinds.push_back(k.get<std::string>());
  meta.weight_action = j.at("weight_action").get<std::string>();
  meta.created_at_ns = j.at("created_at_ns").get<int64_t>();
  meta.fitness = j.at("fitness").get<double>();
  meta.learning_rate = j.at("learning_rate").get<double>();
  meta.steps = j.at("steps").get<int>();
  meta.final_loss = j.at("final_loss").get<double>();
  return meta;
}

namespace {

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f.write(text.data(), std::streamsize(text.size()));
}

std::optional<std::string> read_text_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) return std::nullopt;
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

IndividualRecord PopulationStore::create_individual(
    const Dna& dna, const IndividualMeta& meta) {
  const fs::path tmp = root_ / (".tmp_" + meta.id);
  fs::create_directories(tmp);
  write_text_file(tmp / "dna.json", serialize(dna));
  write_text_file(tmp / "meta.json", meta_to_json(meta));
  IndividualRecord rec;
  rec.id = meta.id;
  rec.state = IndividualState::kTraining;
  rec.claimed = false;
  rec.dir_name = individual_dir_name(IndividualState::kTraining, false,
                                     std::nullopt, meta.id);
  fs::rename(tmp, root_ / rec.dir_name);
  return rec;
}

namespace {

TransitionResult rename_dir(const fs::path& from, const fs::path& to) {
  std::error_code ec;
  fs::rename(from, to, ec);
  return ec ? TransitionResult::kConflict : TransitionResult::kOk;
}

}  // namespace

TransitionResult PopulationStore::claim(IndividualRecord& rec) {
  if (rec.state != IndividualState::kTraining || rec.claimed)
    return TransitionResult::kConflict;
  const std::string target = individual_dir_name(
      IndividualState::kTraining, true, rec.name_fitness, rec.id);
  if (rename_dir(root_ / rec.dir_name, root_ / target) ==
      TransitionResult::kConflict)
    return TransitionResult::kConflict;
  rec.claimed = true;
  rec.dir_name = target;
  return TransitionResult::kOk;
}

TransitionResult PopulationStore::complete_training(IndividualRecord& rec,
                                                    double fitness) {
  if (rec.state != IndividualState::kTraining || !rec.claimed)
    return TransitionResult::kConflict;
  const std::string target =
      individual_dir_name(IndividualState::kAlive, false, fitness, rec.id);
  if (rename_dir(root_ / rec.dir_name, root_ / target) ==
      TransitionResult::kConflict)
    return TransitionResult::kConflict;
  rec.state = IndividualState::kAlive;
  rec.claimed = false;
  rec.name_fitness = fitness;
  rec.dir_name = target;
  return TransitionResult::kOk;
}

TransitionResult PopulationStore::kill(IndividualRecord& rec) {
  if (rec.state == IndividualState::kDead) return TransitionResult::kConflict;
  const std::string target = individual_dir_name(
      IndividualState::kDead, false, rec.name_fitness, rec.id);
  if (rename_dir(root_ / rec.dir_name, root_ / target) ==
      TransitionResult::kConflict)
    return TransitionResult::kConflict;
  rec.state = IndividualState::kDead;
  rec.claimed = false;
  rec.dir_name = target;
  return TransitionResult::kOk;
}

fs::path PopulationStore::dir_of(const IndividualRecord& rec) const {
  return root_ / rec.dir_name;
}

std::optional<fs::path> PopulationStore::find_dir(const std::string& id) const {
  for (const auto& entry : fs::directory_iterator(root_)) {
    if (!entry.is_directory()) continue;
    const std::string name = entry.path().filename().string();
    if (name.size() > id.size() + 1 &&
        name.compare(name.size() - id.size(), id.size(), id) == 0 &&
        name[name.size() - id.size() - 1] == '_' && parse_dir_name(name))
      return entry.path();
  }
  return std::nullopt;
}

std::optional<Dna> PopulationStore::load_dna(const std::string& id) const {
  const auto dir = find_dir(id);
  if (!dir) return std::nullopt;
  const auto text = read_text_file(*dir / "dna.json");
  if (!text) return std::nullopt;
  try {
    return deserialize(*text);
  } catch (const MalformedDnaError&) {
    return std::nullopt;
  }
}

std::optional<IndividualMeta> PopulationStore::load_meta(
    const std::string& id) const {
  const auto dir = find_dir(id);
  if (!dir) return std::nullopt;
  const auto text = read_text_file(*dir / "meta.json");
  if (!text) return std::nullopt;
  try {
    return meta_from_json(*text);
  } catch (const json::exception&) {
    return std::nullopt;
  }
}

void PopulationStore::write_meta(const fs::path& dir,
                                 const IndividualMeta& meta) {
  const fs::path tmp = dir / ".meta.tmp";
  write_text_file(tmp, meta_to_json(meta));
  fs::rename(tmp, dir / "meta.json");
}

void PopulationStore::save_weights(const IndividualRecord& rec,
                                   const WeightBundle& weights) {
  save_weight_bundle(weights, dir_of(rec) / "weights.evow");
}

std::optional<WeightBundle> PopulationStore::load_weights(
    const std::string& id) const {
  const auto dir = find_dir(id);
  if (!dir) return std::nullopt;
  try {
    return load_weight_bundle(*dir / "weights.evow");
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

void PopulationStore::mark_weights_reset(const std::string& id) {
  const auto dir = find_dir(id);
  if (!dir) return;
  std::error_code ec;
  std::ofstream f(*dir / "weights_reset", std::ios::trunc);
}

bool PopulationStore::weights_reset_marked(const std::string& id) const {
  const auto dir = find_dir(id);
  if (!dir) return false;
  return fs::exists(*dir / "weights_reset");
}

bool PopulationStore::try_create_marker(const std::string& name) {
  // O_CREAT|O_EXCL through noreplace semantics: create_directory is atomic
  // and fails if present, which is all we need for one-shot election.
  std::error_code ec;
  return fs::create_directory(root_ / ("." + name), ec) && !ec;
}

std::chrono::system_clock::time_point PopulationStore::dir_mtime(
    const IndividualRecord& rec) const {
  std::error_code ec;
  const auto ft = fs::last_write_time(root_ / rec.dir_name, ec);
  if (ec) return std::chrono::system_clock::now();
  return std::chrono::time_point_cast<std::chrono::system_clock::duration>(
      ft - fs::file_time_type::clock::now() + std::chrono::system_clock::now());
}

size_t garbage_collect(PopulationStore& store, const GcPolicy& policy) {
  struct DeadEntry {
    int64_t created_at;
    fs::path weights;
  };
  std::vector<DeadEntry> entries;
  for (const auto& rec : store.list()) {
    if (rec.state != IndividualState::kDead) continue;
    const fs::path weights = store.root() / rec.dir_name / "weights.evow";
    std::error_code ec;
    if (!fs::exists(weights, ec)) continue;
    int64_t created = 0;
    if (auto meta = store.load_meta(rec.id)) created = meta->created_at_ns;
    entries.push_back({created, weights});
  }
  std::sort(entries.begin(), entries.end(),
            [](const DeadEntry& a, const DeadEntry& b) {
              return a.created_at > b.created_at;  // newest first
            });
  size_t reclaimed = 0;
  for (size_t i = policy.retention; i < entries.size(); ++i) {
    std::error_code ec;
    if (fs::remove(entries[i].weights, ec) && !ec) ++reclaimed;
  }
  return reclaimed;
}

// ---------------------------------------------------------------------------
// Worker loop

namespace {

int64_t now_ns() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

ResolvedShape input_shape_of(const DatasetSpec& spec) {
  int scale = 0;
  while ((1 << scale) < spec.height) ++scale;
  if ((1 << scale) != spec.height || spec.height != spec.width)
    throw std::invalid_argument("dataset spatial size must be a power of 2");
  return ResolvedShape{scale, spec.channels};
}

}  // namespace

Worker::Worker(PopulationStore& store, const Dataset& data,
               WorkerConfig config, int worker_index, uint64_t seed)
    : store_(store),
      data_(data),
      config_(std::move(config)),
      index_(worker_index),
      rng_(mix_seed(seed, uint64_t(worker_index))),
      started_(std::chrono::steady_clock::now()) {
  const fs::path events_path =
      store_.root() / ("events_" + std::to_string(index_) + ".csv");
  const bool fresh_events = !fs::exists(events_path);
  events_.open(events_path, std::ios::app);
  if (fresh_events) events_ << "t_ns,worker,action,individual,details\n";
  const fs::path ledger_path =
      store_.root() / ("flops_" + std::to_string(index_) + ".csv");
  const bool fresh_ledger = !fs::exists(ledger_path);
  ledger_.open(ledger_path, std::ios::app);
  if (fresh_ledger) ledger_ << ledger_csv_header() << "\n";
}

Worker::~Worker() = default;

void Worker::log_event(const std::string& action,
                       const std::string& individual,
                       const std::string& details) {
  events_ << now_ns() << "," << index_ << "," << action << "," << individual
          << "," << details << "\n";
  events_.flush();
}

void Worker::log_ledger_line(const std::string& line) {
  ledger_ << line << "\n";
  ledger_.flush();
}

int Worker::mutation_count_for(uint64_t trained) const {
  int count = 1;
  for (const auto& point : config_.mutation_schedule)
    if (trained >= point.from_trained) count = point.mutation_count;
  return count;
}

void Worker::maybe_run_resets(const std::vector<IndividualRecord>& records,
                              uint64_t trained) {
  for (size_t i = 0; i < config_.reset_at_trained.size(); ++i) {
    if (trained < config_.reset_at_trained[i]) continue;
    if (!store_.try_create_marker("reset_" + std::to_string(i) + ".done"))
      continue;
    // This worker won the election: mark every ALIVE individual.
    size_t marked = 0;
    for (const auto& rec : records) {
      if (rec.state != IndividualState::kAlive) continue;
      store_.mark_weights_reset(rec.id);
      ++marked;
    }
    log_event("reset", "",
              "threshold=" + std::to_string(config_.reset_at_trained[i]) +
                  ";marked=" + std::to_string(marked));
  }
}

void Worker::maybe_reap_orphans(const std::vector<IndividualRecord>& records) {
  double timeout = config_.orphan_timeout_s;
  if (timeout <= 0.0) {
    if (training_durations_s_.empty()) return;  // nothing observed yet
    std::vector<double> durations = training_durations_s_;
    std::nth_element(durations.begin(),
                     durations.begin() + long(durations.size() / 2),
                     durations.end());
    timeout = std::max(30.0, 10.0 * durations[durations.size() / 2]);
  }
  const auto now = std::chrono::system_clock::now();
  for (auto rec : records) {
    if (rec.state != IndividualState::kTraining || !rec.claimed) continue;
    const double age_s =
        std::chrono::duration<double>(now - store_.dir_mtime(rec)).count();
    if (age_s <= timeout) continue;
    if (store_.kill(rec) == TransitionResult::kOk)
      log_event("orphan_reap", rec.id,
                "age_s=" + std::to_string(age_s));
  }
}

double Worker::train_and_publish(IndividualRecord& rec, const Dna& dna,
                                 const WeightBundle* inherited) {
  const auto t0 = std::chrono::steady_clock::now();
  double fitness = 0.0;
  FlopsEstimate estimate;
  estimate.individual_id = rec.id;
  IndividualMeta meta;
  if (auto loaded = store_.load_meta(rec.id)) meta = *loaded;
  meta.learning_rate = dna.learning_rate;

  try {
    const CompiledModel model =
        compile(dna, input_shape_of(data_.spec()), data_.spec().num_classes,
                {config_.element_cap});
    TrainingConfig tc;
    tc.steps = config_.steps_per_individual;
    tc.batch_size = config_.batch_size;
    tc.eval_batch_size = config_.eval_batch_size;
    TrainResult result = train_individual(model, inherited, data_, tc,
                                          dna.learning_rate,
                                          dna.weight_decay_rate, rng_);
    fitness = result.fitness.validation_accuracy;
    estimate.f_t = model_flops(model, tc.batch_size, CostMode::kTrain);
    estimate.n_t = uint64_t(result.steps_run);
    estimate.f_v = model_flops(model, tc.eval_batch_size, CostMode::kValidate);
    estimate.n_v = result.numeric_failure
                       ? 0
                       : (data_.size(Split::kValidation) +
                          size_t(tc.eval_batch_size) - 1) /
                             size_t(tc.eval_batch_size);
    meta.steps = result.steps_run;
    meta.final_loss = result.final_loss;
    store_.save_weights(rec, result.weights);
  } catch (const CompileError& e) {
    // Untrainable architecture: keep it in the protocol with fitness 0.
    store_.save_weights(rec, WeightBundle{});
    meta.steps = 0;
    meta.final_loss = 0.0;
  }

  meta.fitness = fitness;
  store_.write_meta(store_.dir_of(rec), meta);
  log_ledger_line(to_csv_line(estimate));

  const double duration_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  training_durations_s_.push_back(duration_s);

  if (store_.complete_training(rec, fitness) == TransitionResult::kConflict) {
    log_event("conflict", rec.id, "op=complete_training");
    return fitness;
  }
  std::ostringstream details;
  details << "fitness=" << fitness << ";steps=" << meta.steps
          << ";duration_s=" << duration_s;
  log_event("train_done", rec.id, details.str());
  return fitness;
}

bool Worker::finish_training(IndividualRecord& rec) {
  const auto dna = store_.load_dna(rec.id);
  const auto meta = store_.load_meta(rec.id);
  if (!dna || !meta) {
    log_event("conflict", rec.id, "op=load_for_training");
    return false;
  }
  WeightBundle inherited;
  bool use_inherited = false;
  if (config_.inherit_weights_enabled && !meta->parent_id.empty() &&
      meta->weight_action != "INHERIT_NONE" &&
      !store_.weights_reset_marked(meta->parent_id)) {
    if (auto parent_weights = store_.load_weights(meta->parent_id)) {
      inherited = std::move(*parent_weights);
      use_inherited = true;
    }
  }
  train_and_publish(rec, *dna, use_inherited ? &inherited : nullptr);
  return true;
}

void Worker::create_and_train_initial() {
  IndividualMeta meta;
  Dna dna = new_initial_dna(data_.spec().num_classes, rng_);
  meta.id = rng_.hex_id();
  meta.parent_id = "";
  meta.weight_action = "INHERIT_NONE";
  meta.created_at_ns = now_ns();
  meta.learning_rate = dna.learning_rate;
  IndividualRecord rec = store_.create_individual(dna, meta);
  log_event("created", rec.id, "kind=initial");
  if (store_.claim(rec) == TransitionResult::kConflict) {
    log_event("conflict", rec.id, "op=claim_own");
    return;
  }
  log_event("claim", rec.id, "");
  train_and_publish(rec, dna, nullptr);
}

bool Worker::ensure_trained(PairMember& member) {
  if (member.record.state == IndividualState::kAlive) {
    const auto meta = store_.load_meta(member.record.id);
    if (!meta || meta->fitness < 0) {
      log_event("conflict", member.record.id, "op=read_fitness");
      return false;
    }
    member.fitness = meta->fitness;
    return true;
  }
  // A TRAINING member: claim it and finish the work ourselves.
  if (store_.claim(member.record) == TransitionResult::kConflict) {
    log_event("conflict", member.record.id, "op=claim_pair_member");
    return false;
  }
  log_event("claim", member.record.id, "adopted=1");
  if (!finish_training(member.record)) return false;
  const auto meta = store_.load_meta(member.record.id);
  if (!meta) return false;
  member.fitness = meta->fitness;
  return true;
}

void Worker::reproduce_from(const PairMember& parent, uint64_t trained) {
  const auto parent_dna = store_.load_dna(parent.record.id);
  if (!parent_dna) {
    log_event("conflict", parent.record.id, "op=load_parent_dna");
    return;
  }
  const int mutation_count = mutation_count_for(trained);
  ReproduceResult rep;
  try {
    rep = reproduce(*parent_dna, mutation_count, rng_);
  } catch (const RetriesExhausted&) {
    log_event("conflict", parent.record.id, "op=reproduce_retries");
    return;
  }

  IndividualMeta meta;
  meta.id = rng_.hex_id();
  meta.parent_id = parent.record.id;
  for (const auto kind : rep.kinds)
    meta.mutation_kinds.push_back(to_string(kind));
  meta.weight_action = to_string(rep.weight_action);
  meta.created_at_ns = now_ns();
  meta.learning_rate = rep.child.learning_rate;

  IndividualRecord rec = store_.create_individual(rep.child, meta);
  std::ostringstream details;
  details << "parent=" << parent.record.id
          << ";parent_fitness=" << parent.fitness << ";kinds=";
  for (size_t i = 0; i < rep.kinds.size(); ++i)
    details << (i ? "+" : "") << to_string(rep.kinds[i]);
  log_event("created", rec.id, details.str());

  if (store_.claim(rec) == TransitionResult::kConflict) {
    log_event("conflict", rec.id, "op=claim_own");
    return;
  }
  log_event("claim", rec.id, "");

  WeightBundle inherited;
  bool use_inherited = false;
  if (config_.inherit_weights_enabled &&
      rep.weight_action != WeightAction::kInheritNone &&
      !store_.weights_reset_marked(parent.record.id)) {
    if (auto parent_weights = store_.load_weights(parent.record.id)) {
      inherited = std::move(*parent_weights);
      use_inherited = true;
    }
  }
  train_and_publish(rec, rep.child, use_inherited ? &inherited : nullptr);
}

bool Worker::step() {
  ++iteration_;
  if (config_.budget_walltime_s > 0.0) {
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                      started_)
            .count();
    if (elapsed >= config_.budget_walltime_s) return false;
  }

  auto records = store_.list();
  const uint64_t trained = PopulationStore::trained_count(records);
  if (config_.budget_individuals > 0 && trained >= config_.budget_individuals)
    return false;

  maybe_run_resets(records, trained);
  maybe_reap_orphans(records);
  if (config_.gc_every > 0 && iteration_ % uint64_t(config_.gc_every) == 0) {
    const size_t reclaimed = garbage_collect(store_, config_.gc_policy);
    if (reclaimed > 0)
      log_event("gc", "", "reclaimed=" + std::to_string(reclaimed));
  }

  // Warm-up: fill the population with initial individuals.
  if (records.size() < size_t(config_.population_setpoint)) {
    create_and_train_initial();
    return true;
  }

  std::vector<IndividualRecord> valid;
  for (const auto& rec : records) {
    if (rec.state == IndividualState::kAlive ||
        (rec.state == IndividualState::kTraining && !rec.claimed))
      valid.push_back(rec);
  }
  if (valid.size() < 2) {
    // PopulationTooSmall: make a new individual instead.
    create_and_train_initial();
    return true;
  }

  // Two distinct individuals, uniformly without replacement.
  const size_t first = size_t(rng_.index(valid.size()));
  size_t second = size_t(rng_.index(valid.size() - 1));
  if (second >= first) ++second;
  PairMember a{valid[first], 0.0};
  PairMember b{valid[second], 0.0};

  if (!ensure_trained(a) || !ensure_trained(b)) return true;

  bool a_is_better;
  if (config_.selection == SelectionPolicy::kRandom) {
    a_is_better = rng_.coin();
  } else if (a.fitness != b.fitness) {
    a_is_better = a.fitness > b.fitness;
  } else {
    a_is_better = a.record.id > b.record.id;  // lower id loses ties
  }
  PairMember& better = a_is_better ? a : b;
  PairMember& worse = a_is_better ? b : a;

  records = store_.list();
  size_t population = PopulationStore::population_count(records);

  if (population >= size_t(config_.population_setpoint)) {
    if (store_.kill(worse.record) == TransitionResult::kConflict) {
      log_event("conflict", worse.record.id, "op=kill");
      return true;
    }
    std::ostringstream details;
    details << "fitness=" << worse.fitness << ";winner=" << better.record.id
            << ";winner_fitness=" << better.fitness;
    log_event("kill", worse.record.id, details.str());
    --population;
  }

  if (population < size_t(config_.population_setpoint)) {
    const uint64_t trained_now =
        PopulationStore::trained_count(store_.list());
    if (config_.budget_individuals > 0 &&
        trained_now >= config_.budget_individuals)
      return false;
    reproduce_from(better, trained_now);
  }
  return true;
}

void Worker::run() {
  while (step()) {
  }
  log_event("stop", "", "iterations=" + std::to_string(iteration_));
}

void run_workers(PopulationStore& store, const Dataset& data,
                 const WorkerConfig& config, int worker_count, uint64_t seed) {
  if (worker_count <= 1) {
    Worker worker(store, data, config, 0, seed);
    worker.run();
    return;
  }
  std::vector<std::thread> threads;
  threads.reserve(size_t(worker_count));
  for (int i = 0; i < worker_count; ++i) {
    threads.emplace_back([&store, &data, &config, i, seed] {
      Worker worker(store, data, config, i, seed);
      worker.run();
    });
  }
  for (auto& t : threads) t.join();
}

}  // namespace evonet
