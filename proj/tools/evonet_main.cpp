#include <functional>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "evonet/experiment.hpp"
#include "evonet/kernels.hpp"

namespace fs = std::filesystem;
using namespace evonet;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 2;
constexpr int kExitDatasetError = 3;

std::vector<MutationSchedulePoint> parse_mutation_schedule(
    const std::string& text) {
  // "0:1,100:5,150:1" -> mutation_count 1 from event 0, 5 from 100, ...
  std::vector<MutationSchedulePoint> schedule;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const size_t colon = item.find(':');
    if (colon == std::string::npos)
      throw std::invalid_argument("bad schedule entry: " + item);
    schedule.push_back({std::stoull(item.substr(0, colon)),
                        std::stoi(item.substr(colon + 1))});
  }
  return schedule;
}

std::vector<uint64_t> parse_reset_at(const std::string& text) {
  std::vector<uint64_t> resets;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) resets.push_back(std::stoull(item));
  return resets;
}

struct CommonFlags {
  std::string config_file;
  std::string mutation_schedule;
  std::string reset_at;
  ExperimentConfig config;
  CLI::App* cmd = nullptr;
};

void add_run_flags(CLI::App* cmd, CommonFlags& flags) {
  flags.cmd = cmd;
  cmd->add_option("--config", flags.config_file,
                  "JSON config file; explicit flags override it");
  cmd->add_option("--population", flags.config.population_setpoint,
                  "population size set-point");
  cmd->add_option("--workers", flags.config.worker_count,
                  "worker count (default: population/4)");
  cmd->add_option("--steps", flags.config.steps_per_individual,
                  "training steps per individual");
  cmd->add_option("--batch-size", flags.config.batch_size, "SGD batch size");
  cmd->add_option("--budget-individuals", flags.config.budget_individuals,
                  "stop after this many trained individuals");
  cmd->add_option("--budget-walltime", flags.config.budget_walltime_s,
                  "stop after this many seconds");
  cmd->add_option("--dataset", flags.config.dataset.kind,
                  "cifar10|cifar100|separable2|xor_grid|k_class_blobs|glyphs10");
  cmd->add_option("--data-dir", flags.config.dataset.data_dir,
                  "directory with the CIFAR binary files");
  cmd->add_option("--train-subset", flags.config.dataset.train_subset,
                  "training subset size (0 = full)");
  cmd->add_option("--val-size", flags.config.dataset.val_size,
                  "validation holdout size");
  cmd->add_option("--synthetic-size", flags.config.dataset.synthetic_size,
                  "synthetic dataset train size");
  cmd->add_option("--seed", flags.config.seed, "experiment seed");
  cmd->add_option("--mutation-schedule", flags.mutation_schedule,
                  "mutation-count schedule, e.g. 0:1,100:5,150:1");
  cmd->add_option("--reset-at", flags.reset_at,
                  "weight-reset event times, e.g. 120,180");
  cmd->add_option("--out-dir", flags.config.out_dir, "output directory");
  cmd->add_option("--population-dir", flags.config.population_dir,
                  "population directory (default: out-dir/population)");
  cmd->add_option("--gc-every", flags.config.gc_every,
                  "garbage-collect every N worker iterations (0 = off)");
  cmd->add_option("--gc-retention", flags.config.gc_retention,
                  "dead weight files to retain");
}

ExperimentConfig resolve_config(CommonFlags& flags) {
  ExperimentConfig config = flags.config;
  if (!flags.config_file.empty()) {
    std::ifstream f(flags.config_file);
    if (!f) throw std::invalid_argument("cannot open " + flags.config_file);
    std::ostringstream ss;
    ss << f.rdbuf();
    config = experiment_config_from_json(ss.str());
    // Explicitly passed flags take precedence over the file.
    const ExperimentConfig& cli = flags.config;
    auto given = [&](const std::string& name) {
      return flags.cmd->count(name) > 0;
    };
    if (given("--population")) config.population_setpoint = cli.population_setpoint;
    if (given("--workers")) config.worker_count = cli.worker_count;
    if (given("--steps")) config.steps_per_individual = cli.steps_per_individual;
    if (given("--batch-size")) config.batch_size = cli.batch_size;
    if (given("--budget-individuals"))
      config.budget_individuals = cli.budget_individuals;
    if (given("--budget-walltime"))
      config.budget_walltime_s = cli.budget_walltime_s;
    if (given("--dataset")) config.dataset.kind = cli.dataset.kind;
    if (given("--data-dir")) config.dataset.data_dir = cli.dataset.data_dir;
    if (given("--train-subset"))
      config.dataset.train_subset = cli.dataset.train_subset;
    if (given("--val-size")) config.dataset.val_size = cli.dataset.val_size;
    if (given("--synthetic-size"))
      config.dataset.synthetic_size = cli.dataset.synthetic_size;
    if (given("--seed")) config.seed = cli.seed;
    if (given("--out-dir")) config.out_dir = cli.out_dir;
    if (given("--population-dir"))
      config.population_dir = cli.population_dir;
    if (given("--gc-every")) config.gc_every = cli.gc_every;
    if (given("--gc-retention")) config.gc_retention = cli.gc_retention;
  }
  if (!flags.mutation_schedule.empty())
    config.mutation_schedule = parse_mutation_schedule(flags.mutation_schedule);
  if (!flags.reset_at.empty()) config.reset_at = parse_reset_at(flags.reset_at);
  return config;
}

void print_summary(const RunReport& report) {
  std::cout << "trained individuals: " << report.trained_individuals << "\n";
  if (report.final_best) {
    std::cout << "best by validation: " << report.final_best->individual_id
              << " validation " << report.final_best->validation_accuracy
              << " test " << report.final_best->test_accuracy << "\n";
  }
  std::cout << "total FLOPs: " << report.total_flops_sci << " ("
            << u128_to_string(report.total_flops) << ")\n";
  std::cout << "report written to " << report.config.out_dir.string() << "\n";
}

int run_command(const std::function<int(CommonFlags&)>& runner,
                CommonFlags& flags) {
  try {
    return runner(flags);
  } catch (const DatasetError& e) {
    std::cerr << "dataset error: " << e.what() << "\n";
    return kExitDatasetError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

int fetch_data(const std::string& out_dir, const std::string& variant,
               bool synthesize, size_t synth_train, size_t synth_test) {
  fs::create_directories(out_dir);
  if (synthesize) {
    synthesize_cifar_format_glyphs(out_dir, synth_train, synth_test, 1);
    std::cout << "synthesized glyphs10 stand-in in CIFAR-10 binary format at "
              << out_dir << "\n";
    return kExitOk;
  }
  const bool c100 = variant == "cifar100";
  const std::string url =
      c100 ? "https://www.cs.toronto.edu/~kriz/cifar-100-binary.tar.gz"
           : "https://www.cs.toronto.edu/~kriz/cifar-10-binary.tar.gz";
  // md5 checksums as published on the dataset page.
  const std::string md5 = c100 ? "03b5dce01913d631647c71ecec9e9cb8"
                               : "c32a1d4ab5d03f1284b67883e8d87530";
  const std::string tarball =
      out_dir + (c100 ? "/cifar-100-binary.tar.gz" : "/cifar-10-binary.tar.gz");
  {
    std::ostringstream cmd;
    cmd << "curl -fL --retry 3 -o '" << tarball << "' '" << url << "'";
    std::cout << cmd.str() << "\n";
    if (std::system(cmd.str().c_str()) != 0) {
      std::cerr << "download failed\n";
      return kExitDatasetError;
    }
  }
  {
    std::ostringstream cmd;
    cmd << "echo '" << md5 << "  " << tarball << "' | md5sum -c -";
    if (std::system(cmd.str().c_str()) != 0) {
      std::cerr << "checksum mismatch\n";
      return kExitDatasetError;
    }
  }
  {
    std::ostringstream cmd;
    cmd << "tar xzf '" << tarball << "' -C '" << out_dir
        << "' --strip-components=1";
    if (std::system(cmd.str().c_str()) != 0) {
      std::cerr << "extraction failed\n";
      return kExitDatasetError;
    }
  }
  std::cout << "dataset ready in " << out_dir << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"evonet: asynchronous neuroevolution of image classifiers"};
  app.require_subcommand(1);

  CommonFlags evolve_flags, random_flags, noinherit_flags, escape_flags,
      sweep_flags;
  add_run_flags(app.add_subcommand("evolve", "run an evolution experiment"),
                evolve_flags);
  add_run_flags(app.add_subcommand(
                    "control-random",
                    "random-search control: pair winners chosen at random"),
                random_flags);
  add_run_flags(app.add_subcommand("control-no-inherit",
                                   "control with weight inheritance disabled"),
                noinherit_flags);
  add_run_flags(
      app.add_subcommand("escape",
                         "evolution with mutation-rate schedule and/or "
                         "weight-reset events"),
      escape_flags);

  std::string sweep_populations = "2,8,32";
  std::string sweep_steps = "64";
  int sweep_repeats = 5;
  {
    CLI::App* cmd = app.add_subcommand(
        "sweep", "population-size x training-steps grid of experiments");
    add_run_flags(cmd, sweep_flags);
    cmd->add_option("--populations", sweep_populations,
                    "comma-separated population sizes");
    cmd->add_option("--steps-grid", sweep_steps,
                    "comma-separated steps-per-individual values");
    cmd->add_option("--repeats", sweep_repeats, "runs per grid point");
  }

  CommonFlags ensemble_flags;
  int ensemble_top = 2;
  {
    CLI::App* cmd = app.add_subcommand(
        "ensemble", "majority-vote ensemble of the validation-top models");
    add_run_flags(cmd, ensemble_flags);
    cmd->add_option("--top", ensemble_top, "ensemble size");
  }

  CommonFlags report_flags;
  bool report_scatter_test = false;
  {
    CLI::App* cmd = app.add_subcommand(
        "report", "recompute report files from a population directory");
    add_run_flags(cmd, report_flags);
    cmd->add_flag("--scatter-test", report_scatter_test,
                  "evaluate test accuracy for every individual");
  }

  std::string fetch_out = "data";
  std::string fetch_variant = "cifar10";
  bool fetch_synthesize = false;
  size_t fetch_synth_train = 50000, fetch_synth_test = 10000;
  {
    CLI::App* cmd = app.add_subcommand(
        "fetch-data", "download and checksum-verify the CIFAR binaries");
    cmd->add_option("--out", fetch_out, "output directory");
    cmd->add_option("--variant", fetch_variant, "cifar10|cifar100");
    cmd->add_flag("--synthesize", fetch_synthesize,
                  "write a glyphs10 stand-in in CIFAR binary format instead");
    cmd->add_option("--synth-train", fetch_synth_train,
                    "stand-in training records");
    cmd->add_option("--synth-test", fetch_synth_test,
                    "stand-in test records");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfigError;
  }

  // Worker threads own their training runs; intra-op threading would only
  // oversubscribe the cores.
  auto configure_threads = [](const ExperimentConfig& c) {
    kernels::set_parallel(c.effective_workers() <= 1);
  };

  if (app.got_subcommand("evolve")) {
    return run_command(
        [](CommonFlags& f) {
          ExperimentConfig config = resolve_config(f);
          kernels::set_parallel(config.effective_workers() <= 1);
          print_summary(run_evolution(config));
          return kExitOk;
        },
        evolve_flags);
  }
  if (app.got_subcommand("control-random")) {
    return run_command(
        [](CommonFlags& f) {
          ExperimentConfig config = resolve_config(f);
          kernels::set_parallel(config.effective_workers() <= 1);
          print_summary(run_random_search_control(config));
          return kExitOk;
        },
        random_flags);
  }
  if (app.got_subcommand("control-no-inherit")) {
    return run_command(
        [](CommonFlags& f) {
          ExperimentConfig config = resolve_config(f);
          kernels::set_parallel(config.effective_workers() <= 1);
          print_summary(run_no_inheritance_control(config));
          return kExitOk;
        },
        noinherit_flags);
  }
  if (app.got_subcommand("escape")) {
    return run_command(
        [](CommonFlags& f) {
          ExperimentConfig config = resolve_config(f);
          kernels::set_parallel(config.effective_workers() <= 1);
          print_summary(run_escape_procedures(config));
          return kExitOk;
        },
        escape_flags);
  }
  if (app.got_subcommand("sweep")) {
    return run_command(
        [&](CommonFlags& f) -> int {
          ExperimentConfig config = resolve_config(f);
          configure_threads(config);
          auto parse_ints = [](const std::string& text) {
            std::vector<int> values;
            std::istringstream in(text);
            std::string item;
            while (std::getline(in, item, ',')) values.push_back(std::stoi(item));
            return values;
          };
          const auto points =
              run_sweep(config, parse_ints(sweep_populations),
                        parse_ints(sweep_steps), sweep_repeats);
          fs::create_directories(config.out_dir);
          std::ofstream csv(config.out_dir / "sweep.csv");
          csv << "population,steps,seed,final_validation,final_test\n";
          for (const auto& p : points)
            csv << p.population << "," << p.steps << "," << p.seed << ","
                << p.final_validation << "," << p.final_test << "\n";
          std::cout << "sweep written to "
                    << (config.out_dir / "sweep.csv").string() << "\n";
          return kExitOk;
        },
        sweep_flags);
  }
  if (app.got_subcommand("ensemble")) {
    return run_command(
        [&](CommonFlags& f) -> int {
          ExperimentConfig config = resolve_config(f);
          kernels::set_parallel(true);
          if (config.population_dir.empty())
            config.population_dir = config.out_dir / "population";
          auto data = open_dataset(config.dataset);
          PopulationStore store(config.population_dir);
          const double acc =
              ensemble_predict(store, *data, ensemble_top, Split::kTest);
          std::cout << "ensemble of top " << ensemble_top
                    << " by validation: test accuracy " << acc << "\n";
          return kExitOk;
        },
        ensemble_flags);
  }
  if (app.got_subcommand("report")) {
    return run_command(
        [&](CommonFlags& f) -> int {
          ExperimentConfig config = resolve_config(f);
          kernels::set_parallel(true);
          if (config.population_dir.empty())
            config.population_dir = config.out_dir / "population";
          auto data = open_dataset(config.dataset);
          PopulationStore store(config.population_dir);
          ReportOptions options;
          options.evaluate_test_scatter = report_scatter_test;
          const RunReport report =
              build_report(config, store, *data, options);
          emit_report(report, config.out_dir);
          print_summary(report);
          return kExitOk;
        },
        report_flags);
  }
  if (app.got_subcommand("fetch-data")) {
    return fetch_data(fetch_out, fetch_variant, fetch_synthesize,
                      fetch_synth_train, fetch_synth_test);
  }
  return kExitConfigError;
}
