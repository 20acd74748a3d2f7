#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "evonet/data.hpp"
#include "evonet/flops.hpp"
#include "evonet/population.hpp"

namespace evonet {

enum class ExperimentMode { kEvolution, kRandomSearch, kNoInheritance };
const char* to_string(ExperimentMode mode);

struct DatasetConfig {
  // cifar10 | cifar100 | separable2 | xor_grid | k_class_blobs | glyphs10
  std::string kind = "cifar10";
  std::filesystem::path data_dir = "data";
  size_t train_subset = 0;  // 0 = full standard split
  size_t val_size = 5000;
  size_t synthetic_size = 4000;  // synthetic kinds only
  int num_classes = 10;          // k_class_blobs only
  uint64_t synthetic_seed = 7;
};

struct ExperimentConfig {
  int population_setpoint = 32;
  int worker_count = 0;  // 0 -> max(1, setpoint / 4)
  int steps_per_individual = 256;
  int batch_size = 50;
  int eval_batch_size = 100;
  uint64_t budget_individuals = 300;
  double budget_walltime_s = 0.0;
  ExperimentMode mode = ExperimentMode::kEvolution;
  std::vector<MutationSchedulePoint> mutation_schedule;
  std::vector<uint64_t> reset_at;
  uint64_t seed = 0;
  DatasetConfig dataset;
  std::filesystem::path out_dir = "run";
  std::filesystem::path population_dir;  // default: out_dir / "population"
  int gc_every = 0;
  size_t gc_retention = 16;
  double orphan_timeout_s = 0.0;

  int effective_workers() const {
    return worker_count > 0 ? worker_count
                            : std::max(1, population_setpoint / 4);
  }
};

std::string experiment_config_to_json(const ExperimentConfig& config);
ExperimentConfig experiment_config_from_json(const std::string& text);

struct SeriesPoint {
  uint64_t event_index = 0;  // trained-individual ordinal, 1-based
  double wall_s = 0.0;
  std::string individual_id;
  double validation_accuracy = 0.0;
  double test_accuracy = -1.0;  // filled at report time only
};

struct IndividualPoint {
  std::string id;
  std::string parent_id;
  double wall_s = 0.0;
  double validation_accuracy = 0.0;
  double test_accuracy = -1.0;
  bool alive = false;
};

/// The best individual is always chosen by validation accuracy; the test
/// accuracy is attached for reporting only.
struct RunReport {
  ExperimentConfig config;
  uint64_t trained_individuals = 0;
  std::vector<SeriesPoint> best_curve;
  std::optional<SeriesPoint> final_best;
  std::vector<IndividualPoint> individuals;
  std::vector<std::string> best_lineage_ids;  // root first
  std::vector<std::string> best_lineage_dumps;
  u128 total_flops = 0;
  std::string total_flops_sci = "0.0e0";
};

std::shared_ptr<Dataset> open_dataset(const DatasetConfig& config);

WorkerConfig make_worker_config(const ExperimentConfig& config);

struct ReportOptions {
  bool evaluate_test = true;           // test accuracy of best-curve points
  bool evaluate_test_scatter = false;  // test accuracy of every individual
};

/// Recomputes the report from the population directory and its logs; the
/// directory is the checkpoint.
RunReport build_report(const ExperimentConfig& config, PopulationStore& store,
                       const Dataset& data, const ReportOptions& options = {});

RunReport run_evolution(const ExperimentConfig& config);
RunReport run_random_search_control(const ExperimentConfig& config);
RunReport run_no_inheritance_control(const ExperimentConfig& config);
/// Evolution with the configured mutation-count schedule and weight-reset
/// event times.
RunReport run_escape_procedures(const ExperimentConfig& config);

/// Majority vote over member top-1 predictions; ties go to the member with
/// the highest validation accuracy among those voting for a tied class.
int majority_vote(const std::vector<int>& member_predictions,
                  const std::vector<double>& member_validation_accuracies,
                  int num_classes);
double ensemble_accuracy(
    const std::vector<std::vector<int>>& member_predictions,
    const std::vector<double>& member_validation_accuracies,
    const std::vector<int>& labels, int num_classes);
/// Selects the top `member_count` trained individuals by validation
/// accuracy and reports their majority-vote accuracy on the split.
double ensemble_predict(PopulationStore& store, const Dataset& data,
                        int member_count, Split split);

struct SweepPoint {
  int population = 0;
  int steps = 0;
  uint64_t seed = 0;
  double final_validation = 0.0;
  double final_test = -1.0;
};
/// Population-size x training-steps grid with repeats; one full evolution
/// run per point.
std::vector<SweepPoint> run_sweep(const ExperimentConfig& base,
                                  const std::vector<int>& populations,
                                  const std::vector<int>& steps,
                                  int repeats);

/// Writes series.csv, individuals.csv, best_curve.svg, scatter.svg,
/// lineage.txt, flops.txt and report.json under config.out_dir.
void emit_report(const RunReport& report, const std::filesystem::path& out_dir);

}  // namespace evonet
