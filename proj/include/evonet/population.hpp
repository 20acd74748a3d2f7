#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "evonet/backend.hpp"
#include "evonet/data.hpp"
#include "evonet/dna.hpp"
#include "evonet/mutation.hpp"
#include "evonet/rng.hpp"

namespace evonet {

// Shared-directory population protocol. Workers coordinate only through the
// population directory: every cross-worker visible action is one atomic
// rename (or a write-then-rename). A worker that loses a rename race simply
// abandons its current task and starts over.
//
// Directory name layout: <state>_<fitness-millis>_<individual-id>, where
// state is one of training | claimed | alive | dead and fitness-millis is a
// zero-padded integer (accuracy * 1000) or "xxxx" before evaluation. State
// and fitness are readable without opening any file. "claimed" marks a
// TRAINING individual some worker is actively training.

enum class IndividualState { kTraining, kAlive, kDead };
const char* to_string(IndividualState s);

struct IndividualRecord {
  std::string id;
  IndividualState state = IndividualState::kTraining;
  bool claimed = false;                 // meaningful while TRAINING
  std::optional<double> name_fitness;   // millis-resolution, from the name
  std::string dir_name;                 // current directory name
};

/// Sidecar metadata kept per individual (meta.json): lineage and exact
/// training outcome. Survives garbage collection.
struct IndividualMeta {
  std::string id;
  std::string parent_id;  // empty for initial individuals
  std::vector<std::string> mutation_kinds;
  std::string weight_action = "INHERIT_NONE";
  int64_t created_at_ns = 0;
  double fitness = -1.0;  // < 0 until trained
  double learning_rate = 0.0;
  int steps = 0;
  double final_loss = 0.0;
};

std::string format_fitness_millis(double fitness);
std::string individual_dir_name(IndividualState state, bool claimed,
                                std::optional<double> fitness,
                                const std::string& id);
std::optional<IndividualRecord> parse_dir_name(const std::string& name);

enum class TransitionResult { kOk, kConflict };

class PopulationStore {
 public:
  explicit PopulationStore(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }

  /// Name-only scan; deterministic (sorted by individual id).
  std::vector<IndividualRecord> list() const;

  /// Number of individuals that finished training (fitness in the name),
  /// dead or alive: the budget counter.
  static size_t trained_count(const std::vector<IndividualRecord>& records);
  /// TRAINING + claimed + ALIVE: the population-size counter.
  static size_t population_count(const std::vector<IndividualRecord>& records);

  /// Writes dna.json and meta.json into a temp directory, then publishes it
  /// atomically as training_xxxx_<id>.
  IndividualRecord create_individual(const Dna& dna, const IndividualMeta& meta);

  /// training -> claimed. Exactly one concurrent caller wins.
  TransitionResult claim(IndividualRecord& rec);
  /// claimed -> alive, carrying the fitness into the name.
  TransitionResult complete_training(IndividualRecord& rec, double fitness);
  /// {alive, training, claimed} -> dead.
  TransitionResult kill(IndividualRecord& rec);

  std::filesystem::path dir_of(const IndividualRecord& rec) const;
  /// Locates an individual's current directory by id, whatever its state.
  std::optional<std::filesystem::path> find_dir(const std::string& id) const;

  std::optional<Dna> load_dna(const std::string& id) const;
  std::optional<IndividualMeta> load_meta(const std::string& id) const;
  /// Atomic per-file update (write temp, rename over meta.json).
  void write_meta(const std::filesystem::path& dir, const IndividualMeta& meta);
  void save_weights(const IndividualRecord& rec, const WeightBundle& weights);
  std::optional<WeightBundle> load_weights(const std::string& id) const;

  /// Weight-reset escape marker: descendants of a marked individual start
  /// from fresh weights. Not a state transition.
  void mark_weights_reset(const std::string& id);
  bool weights_reset_marked(const std::string& id) const;

  /// Creates root/<name> exclusively; false if it already exists. Used to
  /// elect the worker that executes a scheduled reset event.
  bool try_create_marker(const std::string& name);

  std::chrono::system_clock::time_point dir_mtime(
      const IndividualRecord& rec) const;

 private:
  std::filesystem::path root_;
};

std::string meta_to_json(const IndividualMeta& meta);
IndividualMeta meta_from_json(const std::string& text);

struct GcPolicy {
  size_t retention = 16;  // dead weight files kept (most recent first)
};

/// Deletes weight files of DEAD individuals beyond the retention count.
/// dna.json and meta.json always survive. Idempotent; races with concurrent
/// deletion are benign.
size_t garbage_collect(PopulationStore& store, const GcPolicy& policy);

enum class SelectionPolicy { kFitness, kRandom };

struct MutationSchedulePoint {
  uint64_t from_trained = 0;
  int mutation_count = 1;
};

struct WorkerConfig {
  int population_setpoint = 32;
  int steps_per_individual = 256;
  int batch_size = 50;
  int eval_batch_size = 100;
  uint64_t budget_individuals = 300;
  double budget_walltime_s = 0.0;  // 0 = no wall-time budget
  SelectionPolicy selection = SelectionPolicy::kFitness;
  bool inherit_weights_enabled = true;
  std::vector<MutationSchedulePoint> mutation_schedule;  // sorted
  std::vector<uint64_t> reset_at_trained;                // sorted
  int gc_every = 0;  // worker iterations between sweeps; 0 = off
  GcPolicy gc_policy;
  double orphan_timeout_s = 0.0;  // 0 = 10x median observed training time
  size_t element_cap = size_t(1) << 24;
};

/// One asynchronous worker: loops select-pair / kill-worse /
/// reproduce-better against the shared directory.
class Worker {
 public:
  Worker(PopulationStore& store, const Dataset& data, WorkerConfig config,
         int worker_index, uint64_t seed);
  ~Worker();

  /// One iteration. Returns false once the budget stop condition holds.
  bool step();
  void run();

  int index() const { return index_; }

 private:
  struct PairMember {
    IndividualRecord record;
    double fitness = 0.0;
  };

  void log_event(const std::string& action, const std::string& individual,
                 const std::string& details);
  void log_ledger_line(const std::string& line);
  int mutation_count_for(uint64_t trained) const;
  void maybe_run_resets(const std::vector<IndividualRecord>& records,
                        uint64_t trained);
  void maybe_reap_orphans(const std::vector<IndividualRecord>& records);
  void create_and_train_initial();
  bool finish_training(IndividualRecord& rec);  // claim held by caller
  bool ensure_trained(PairMember& member);
  void reproduce_from(const PairMember& parent, uint64_t trained);
  double train_and_publish(IndividualRecord& rec, const Dna& dna,
                           const WeightBundle* inherited);

  PopulationStore& store_;
  const Dataset& data_;
  WorkerConfig config_;
  int index_;
  Rng rng_;
  std::ofstream events_;
  std::ofstream ledger_;
  std::chrono::steady_clock::time_point started_;
  std::vector<double> training_durations_s_;
  uint64_t iteration_ = 0;
};

/// Spawns `worker_count` worker threads over one population directory and
/// joins them when the stop condition is reached. With a single worker the
/// run is fully deterministic for a given seed.
void run_workers(PopulationStore& store, const Dataset& data,
                 const WorkerConfig& config, int worker_count, uint64_t seed);

}  // namespace evonet
