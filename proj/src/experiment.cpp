#include "evonet/experiment.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "evonet/compiler.hpp"
#include "evonet/executor.hpp"
#include "evonet/trainer.hpp"
#include "json.hpp"

namespace evonet {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

const char* to_string(ExperimentMode mode) {
  switch (mode) {
    case ExperimentMode::kEvolution:
      return "evolution";
    case ExperimentMode::kRandomSearch:
      return "random_search";
    default:
      return "no_inheritance";
  }
}

namespace {

ExperimentMode mode_from_string(const std::string& s) {
  if (s == "evolution") return ExperimentMode::kEvolution;
  if (s == "random_search") return ExperimentMode::kRandomSearch;
  if (s == "no_inheritance") return ExperimentMode::kNoInheritance;
  throw std::invalid_argument("unknown mode " + s);
}

}  // namespace

std::string experiment_config_to_json(const ExperimentConfig& c) {
  json j;
  j["population_setpoint"] = c.population_setpoint;
  j["worker_count"] = c.worker_count;
  j["steps_per_individual"] = c.steps_per_individual;
  j["batch_size"] = c.batch_size;
  j["eval_batch_size"] = c.eval_batch_size;
  j["budget_individuals"] = c.budget_individuals;
  j["budget_walltime_s"] = c.budget_walltime_s;
  j["mode"] = to_string(c.mode);
  json schedule = json::array();
  for (const auto& p : c.mutation_schedule)
    schedule.push_back({{"from_trained", p.from_trained},
                        {"mutation_count", p.mutation_count}});
  j["mutation_schedule"] = std::move(schedule);
  j["reset_at"] = c.reset_at;
  j["seed"] = c.seed;
  j["dataset"] = {{"kind", c.dataset.kind},
                  {"data_dir", c.dataset.data_dir.string()},
                  {"train_subset", c.dataset.train_subset},
                  {"val_size", c.dataset.val_size},
                  {"synthetic_size", c.dataset.synthetic_size},
                  {"num_classes", c.dataset.num_classes},
                  {"synthetic_seed", c.dataset.synthetic_seed}};
  j["out_dir"] = c.out_dir.string();
  j["population_dir"] = c.population_dir.string();
  j["gc_every"] = c.gc_every;
  j["gc_retention"] = c.gc_retention;
  j["orphan_timeout_s"] = c.orphan_timeout_s;
  return j.dump(2);
}

ExperimentConfig experiment_config_from_json(const std::string& text) {
  const json j = json::parse(text);
  ExperimentConfig c;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("population_setpoint", c.population_setpoint);
  get("worker_count", c.worker_count);
  get("steps_per_individual", c.steps_per_individual);
  get("batch_size", c.batch_size);
  get("eval_batch_size", c.eval_batch_size);
  get("budget_individuals", c.budget_individuals);
  get("budget_walltime_s", c.budget_walltime_s);
  if (j.contains("mode")) c.mode = mode_from_string(j.at("mode"));
  if (j.contains("mutation_schedule"))
    for (const auto& p : j.at("mutation_schedule"))
      c.mutation_schedule.push_back(
          {p.at("from_trained").get<uint64_t>(),
           p.at("mutation_count").get<int>()});
  if (j.contains("reset_at"))
    c.reset_at = j.at("reset_at").get<std::vector<uint64_t>>();
  get("seed", c.seed);
  if (j.contains("dataset")) {
    const json& d = j.at("dataset");
    if (d.contains("kind")) c.dataset.kind = d.at("kind").get<std::string>();
    if (d.contains("data_dir"))
      c.dataset.data_dir = d.at("data_dir").get<std::string>();
    if (d.contains("train_subset"))
      c.dataset.train_subset = d.at("train_subset").get<size_t>();
    if (d.contains("val_size"))
      c.dataset.val_size = d.at("val_size").get<size_t>();
    if (d.contains("synthetic_size"))
      c.dataset.synthetic_size = d.at("synthetic_size").get<size_t>();
    if (d.contains("num_classes"))
      c.dataset.num_classes = d.at("num_classes").get<int>();
    if (d.contains("synthetic_seed"))
      c.dataset.synthetic_seed = d.at("synthetic_seed").get<uint64_t>();
  }
  if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
  if (j.contains("population_dir"))
    c.population_dir = j.at("population_dir").get<std::string>();
  get("gc_every", c.gc_every);
  get("gc_retention", c.gc_retention);
  get("orphan_timeout_s", c.orphan_timeout_s);
  return c;
}

std::shared_ptr<Dataset> open_dataset(const DatasetConfig& config) {
  if (config.kind == "cifar10" || config.kind == "cifar100") {
    CifarLoadOptions options;
    options.train_subset = config.train_subset;
    options.val_size = config.val_size;
    return load_cifar(config.data_dir,
                      config.kind == "cifar10" ? CifarVariant::kCifar10
                                               : CifarVariant::kCifar100,
                      options);
  }
  Rng rng(config.synthetic_seed);
  SyntheticOptions options;
  options.num_classes = config.num_classes;
  options.val_size = config.val_size;
  if (config.kind == "separable2")
    return synthetic_dataset(SyntheticKind::kSeparable2,
                             config.synthetic_size, rng, options);
  if (config.kind == "xor_grid")
    return synthetic_dataset(SyntheticKind::kXorGrid, config.synthetic_size,
                             rng, options);
  if (config.kind == "k_class_blobs")
    return synthetic_dataset(SyntheticKind::kKClassBlobs,
                             config.synthetic_size, rng, options);
  if (config.kind == "glyphs10")
    return synthetic_dataset(SyntheticKind::kGlyphs10, config.synthetic_size,
                             rng, options);
  throw DatasetError("unknown dataset kind: " + config.kind);
}

WorkerConfig make_worker_config(const ExperimentConfig& config) {
  WorkerConfig w;
  w.population_setpoint = config.population_setpoint;
  w.steps_per_individual = config.steps_per_individual;
  w.batch_size = config.batch_size;
  w.eval_batch_size = config.eval_batch_size;
  w.budget_individuals = config.budget_individuals;
  w.budget_walltime_s = config.budget_walltime_s;
  w.mutation_schedule = config.mutation_schedule;
  w.reset_at_trained = config.reset_at;
  w.gc_every = config.gc_every;
  w.gc_policy.retention = config.gc_retention;
  w.orphan_timeout_s = config.orphan_timeout_s;
  // The control modes differ from evolution by exactly one toggle each.
  w.selection = config.mode == ExperimentMode::kRandomSearch
                    ? SelectionPolicy::kRandom
                    : SelectionPolicy::kFitness;
  w.inherit_weights_enabled = config.mode != ExperimentMode::kNoInheritance;
  return w;
}

namespace {

struct EventRow {
  int64_t t_ns = 0;
  int worker = 0;
  std::string action;
  std::string individual;
  std::map<std::string, std::string> details;
};

std::vector<EventRow> read_events(const fs::path& root) {
  std::vector<EventRow> rows;
  for (const auto& entry : fs::directory_iterator(root)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("events_", 0) != 0) continue;
    std::ifstream f(entry.path());
    std::string line;
    std::getline(f, line);  // header
    while (std::getline(f, line)) {
      std::istringstream in(line);
      EventRow row;
      std::string field;
      if (!std::getline(in, field, ',')) continue;
      row.t_ns = std::stoll(field);
      if (!std::getline(in, field, ',')) continue;
      row.worker = std::stoi(field);
      if (!std::getline(in, row.action, ',')) continue;
      std::getline(in, row.individual, ',');
      std::string details;
      std::getline(in, details);
      std::istringstream din(details);
      std::string pair;
      while (std::getline(din, pair, ';')) {
        const size_t eq = pair.find('=');
        if (eq != std::string::npos)
          row.details[pair.substr(0, eq)] = pair.substr(eq + 1);
      }
      rows.push_back(std::move(row));
    }
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const EventRow& a, const EventRow& b) {
                     return a.t_ns < b.t_ns;
                   });
  return rows;
}

u128 total_ledger_flops(const fs::path& root) {
  u128 total = 0;
  for (const auto& entry : fs::directory_iterator(root)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("flops_", 0) != 0) continue;
    std::ifstream f(entry.path());
    std::string line;
    std::getline(f, line);  // header
    while (std::getline(f, line)) {
      if (line.empty()) continue;
      total += ledger_from_csv_line(line).individual_cost();
    }
  }
  return total;
}

double evaluate_test_of(PopulationStore& store, const Dataset& data,
                        const std::string& id, size_t element_cap) {
  const auto dna = store.load_dna(id);
  const auto weights = store.load_weights(id);
  if (!dna || !weights) return -1.0;
  try {
    int scale = 0;
    while ((1 << scale) < data.spec().height) ++scale;
    const CompiledModel model =
        compile(*dna, ResolvedShape{scale, data.spec().channels},
                data.spec().num_classes, {element_cap});
    return evaluate(model, *weights, data, Split::kTest);
  } catch (const CompileError&) {
    return -1.0;
  }
}

}  // namespace

RunReport build_report(const ExperimentConfig& config, PopulationStore& store,
                       const Dataset& data, const ReportOptions& options) {
  RunReport report;
  report.config = config;

  const auto events = read_events(store.root());
  int64_t t0 = 0;
  for (const auto& row : events) {
    if (t0 == 0 || row.t_ns < t0) t0 = row.t_ns;
  }

  const auto records = store.list();
  std::map<std::string, const IndividualRecord*> by_id;
  for (const auto& rec : records) by_id[rec.id] = &rec;

  // Walk training completions in time order; the best-so-far individual is
  // always chosen by validation accuracy.
  double best_val = -1.0;
  uint64_t event_index = 0;
  for (const auto& row : events) {
    if (row.action != "train_done") continue;
    ++event_index;
    const auto fit_it = row.details.find("fitness");
    if (fit_it == row.details.end()) continue;
    const double fitness = std::stod(fit_it->second);
    const double wall_s = double(row.t_ns - t0) / 1e9;

    IndividualPoint point;
    point.id = row.individual;
    point.wall_s = wall_s;
    point.validation_accuracy = fitness;
    if (auto it = by_id.find(row.individual); it != by_id.end())
      point.alive = it->second->state == IndividualState::kAlive;
    if (auto meta = store.load_meta(row.individual))
      point.parent_id = meta->parent_id;
    report.individuals.push_back(point);

    if (fitness > best_val) {
      best_val = fitness;
      SeriesPoint sp;
      sp.event_index = event_index;
      sp.wall_s = wall_s;
      sp.individual_id = row.individual;
      sp.validation_accuracy = fitness;
      report.best_curve.push_back(sp);
    }
  }
  report.trained_individuals = event_index;

  if (options.evaluate_test) {
    for (auto& sp : report.best_curve)
      sp.test_accuracy = evaluate_test_of(store, data, sp.individual_id,
                                          size_t(1) << 24);
  }
  if (options.evaluate_test_scatter) {
    for (auto& point : report.individuals)
      point.test_accuracy =
          evaluate_test_of(store, data, point.id, size_t(1) << 24);
  }
  if (!report.best_curve.empty()) {
    report.final_best = report.best_curve.back();
    // Lineage of the best individual, root first.
    std::vector<std::string> chain;
    std::string id = report.final_best->individual_id;
    while (!id.empty() && chain.size() <= event_index + 1) {
      chain.push_back(id);
      const auto meta = store.load_meta(id);
      if (!meta) break;
      id = meta->parent_id;
    }
    std::reverse(chain.begin(), chain.end());
    report.best_lineage_ids = chain;
    for (const auto& ancestor : chain) {
      const auto dna = store.load_dna(ancestor);
      if (!dna) {
        report.best_lineage_dumps.push_back(ancestor + ": dna unavailable\n");
        continue;
      }
      int scale = 0;
      while ((1 << scale) < data.spec().height) ++scale;
      try {
        const CompiledModel model =
            compile(*dna, ResolvedShape{scale, data.spec().channels},
                    data.spec().num_classes);
        report.best_lineage_dumps.push_back(ancestor.substr(0, 8) + ":\n" +
                                            describe(model));
      } catch (const CompileError& e) {
        report.best_lineage_dumps.push_back(ancestor + ": " + e.what() + "\n");
      }
    }
  }

  report.total_flops = total_ledger_flops(store.root());
  report.total_flops_sci = format_scientific(report.total_flops);
  return report;
}

namespace {

RunReport run_with_mode(ExperimentConfig config) {
  if (config.population_dir.empty())
    config.population_dir = config.out_dir / "population";
  fs::create_directories(config.out_dir);
  const auto data = open_dataset(config.dataset);
  PopulationStore store(config.population_dir);

  {
    std::ofstream f(store.root() / "run_meta.json", std::ios::app);
    f << experiment_config_to_json(config) << "\n";
  }

  run_workers(store, *data, make_worker_config(config),
              config.effective_workers(), config.seed);

  // Reporting discipline: nothing during evolution may have touched the
  // test split. Report-time test evaluations happen after this check.
  if (data->test_access_count() != 0)
    throw std::logic_error("test split was accessed during evolution");

  RunReport report = build_report(config, store, *data);
  emit_report(report, config.out_dir);
  return report;
}

}  // namespace

RunReport run_evolution(const ExperimentConfig& config) {
  ExperimentConfig c = config;
  c.mode = ExperimentMode::kEvolution;
  return run_with_mode(c);
}

RunReport run_random_search_control(const ExperimentConfig& config) {
  ExperimentConfig c = config;
  c.mode = ExperimentMode::kRandomSearch;
  return run_with_mode(c);
}

RunReport run_no_inheritance_control(const ExperimentConfig& config) {
  ExperimentConfig c = config;
  c.mode = ExperimentMode::kNoInheritance;
  return run_with_mode(c);
}

RunReport run_escape_procedures(const ExperimentConfig& config) {
  ExperimentConfig c = config;
  c.mode = ExperimentMode::kEvolution;
  return run_with_mode(c);
}

int majority_vote(const std::vector<int>& member_predictions,
                  const std::vector<double>& member_validation_accuracies,
                  int num_classes) {
  std::vector<int> votes(size_t(num_classes), 0);
  for (int p : member_predictions) ++votes[size_t(p)];
  const int top = *std::max_element(votes.begin(), votes.end());
  // Tie-break: the highest-validation member voting for a tied class wins.
  int best_member = -1;
  for (size_t m = 0; m < member_predictions.size(); ++m) {
    if (votes[size_t(member_predictions[m])] != top) continue;
    if (best_member < 0 || member_validation_accuracies[m] >
                               member_validation_accuracies[size_t(best_member)])
      best_member = int(m);
  }
  return member_predictions[size_t(best_member)];
}

double ensemble_accuracy(
    const std::vector<std::vector<int>>& member_predictions,
    const std::vector<double>& member_validation_accuracies,
    const std::vector<int>& labels, int num_classes) {
  if (member_predictions.empty()) throw std::invalid_argument("no members");
  size_t correct = 0;
  std::vector<int> votes(member_predictions.size());
  for (size_t i = 0; i < labels.size(); ++i) {
    for (size_t m = 0; m < member_predictions.size(); ++m)
      votes[m] = member_predictions[m][i];
    if (majority_vote(votes, member_validation_accuracies, num_classes) ==
        labels[i])
      ++correct;
  }
  return labels.empty() ? 0.0 : double(correct) / double(labels.size());
}

double ensemble_predict(PopulationStore& store, const Dataset& data,
                        int member_count, Split split) {
  struct Member {
    std::string id;
    double val;
  };
  std::vector<Member> candidates;
  for (const auto& rec : store.list()) {
    if (!rec.name_fitness) continue;
    const auto meta = store.load_meta(rec.id);
    if (!meta || meta->fitness < 0) continue;
    if (!store.load_weights(rec.id)) continue;
    candidates.push_back({rec.id, meta->fitness});
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const Member& a, const Member& b) { return a.val > b.val; });
  if (candidates.empty()) throw std::runtime_error("no trained individuals");
  candidates.resize(std::min(candidates.size(), size_t(member_count)));

  int scale = 0;
  while ((1 << scale) < data.spec().height) ++scale;
  std::vector<std::vector<int>> predictions;
  std::vector<double> val_accs;
  for (const auto& member : candidates) {
    const auto dna = store.load_dna(member.id);
    const auto weights = store.load_weights(member.id);
    const CompiledModel model =
        compile(*dna, ResolvedShape{scale, data.spec().channels},
                data.spec().num_classes);
    predictions.push_back(predict(model, *weights, data, split));
    val_accs.push_back(member.val);
  }

  std::vector<int> labels;
  labels.reserve(data.size(split));
  const size_t total = data.size(split);
  size_t done = 0;
  while (done < total) {
    const size_t n = std::min(size_t(256), total - done);
    std::vector<size_t> idx(n);
    for (size_t i = 0; i < n; ++i) idx[i] = done + i;
    const Batch batch = data.gather(split, idx);
    labels.insert(labels.end(), batch.labels.begin(), batch.labels.end());
    done += n;
  }
  return ensemble_accuracy(predictions, val_accs, labels,
                           data.spec().num_classes);
}

std::vector<SweepPoint> run_sweep(const ExperimentConfig& base,
                                  const std::vector<int>& populations,
                                  const std::vector<int>& steps, int repeats) {
  std::vector<SweepPoint> points;
  for (int population : populations) {
    for (int step_count : steps) {
      for (int r = 0; r < repeats; ++r) {
        ExperimentConfig config = base;
        config.population_setpoint = population;
        config.worker_count = base.worker_count;
        config.steps_per_individual = step_count;
        config.seed = base.seed + uint64_t(r);
        std::ostringstream sub;
        sub << "pop" << population << "_steps" << step_count << "_seed"
            << config.seed;
        config.out_dir = base.out_dir / sub.str();
        config.population_dir.clear();
        const RunReport report = run_evolution(config);
        SweepPoint point;
        point.population = population;
        point.steps = step_count;
        point.seed = config.seed;
        if (report.final_best) {
          point.final_validation = report.final_best->validation_accuracy;
          point.final_test = report.final_best->test_accuracy;
        }
        points.push_back(point);
      }
    }
  }
  return points;
}

}  // namespace evonet
