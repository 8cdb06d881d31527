#include "simile/commands.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> n_int, n_sim, workers, n_burn, n_keep;
  std::optional<std::string> output_dir, likelihood, data;

  void attach(CLI::App* app) {
    app->add_option("--seed", seed, "root seed");
    app->add_option("--n-int", n_int, "target number of data-range intervals");
    app->add_option("--n-sim", n_sim, "simulated draws per likelihood evaluation");
    app->add_option("--workers", workers, "simulation threads (results do not depend on it)");
    app->add_option("--n-burn", n_burn, "burnin iterations");
    app->add_option("--n-keep", n_keep, "kept iterations");
    app->add_option("--output-dir", output_dir, "output directory");
    app->add_option("--likelihood", likelihood, "simile | exact | emulated | flowgraph-mixed");
    app->add_option("--data", data, "observed-data CSV");
  }

  simile::RunConfig apply(simile::RunConfig c) const {
    if (seed) c.seed = c.chain.seed = *seed;
    if (n_int) c.n_int = *n_int;
    if (n_sim) c.n_sim = *n_sim;
    if (workers) c.workers = std::max<std::size_t>(1, *workers);
    if (n_burn) c.chain.n_burn = *n_burn;
    if (n_keep) c.chain.n_keep = *n_keep;
    if (output_dir) c.output_dir = *output_dir;
    if (likelihood) c.likelihood = simile::likelihood_mode_from_string(*likelihood);
    if (data) c.data = *data;
    if (c.n_int == 0 || c.n_sim == 0 || c.chain.n_keep == 0) {
      throw simile::ConfigError("n-int, n-sim and n-keep must be positive");
    }
    return c;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SimILE: Bayesian inference with simulated interval-censored likelihoods"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "simile 0.1.0");

  std::string config_path;
  Overrides ov;
  auto with_config = [&](CLI::App* sub) {
    sub->add_option("config", config_path, "JSON config file")->required();
    ov.attach(sub);
  };

  auto* gen = app.add_subcommand("generate", "write synthetic observed data");
  with_config(gen);
  auto* run = app.add_subcommand("run", "run a chain and write summaries");
  with_config(run);
  auto* tune = app.add_subcommand("tune", "nInt x nSim tuning study");
  with_config(tune);
  auto* emulate = app.add_subcommand("emulate", "Gaussian-process emulator");
  emulate->require_subcommand(1);
  auto* em_train = emulate->add_subcommand("train", "train and save an emulator");
  with_config(em_train);
  auto* em_run = emulate->add_subcommand("run", "run a chain on the emulated likelihood");
  with_config(em_run);

  auto* fig = app.add_subcommand("figure-data", "plot-ready CSVs from a run directory");
  std::string run_dir;
  std::vector<double> theta;
  std::size_t bins = 50;
  fig->add_option("run_dir", run_dir, "output directory of a finished run")->required();
  fig->add_option("--theta", theta, "parameters for the frequency plot (default: posterior mean)");
  fig->add_option("--bins", bins, "posterior histogram bins");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*fig) {
      simile::cmd_figure_data(run_dir, theta.empty() ? std::nullopt : std::optional(theta), bins);
      return 0;
    }
    const auto config = ov.apply(simile::load_config(config_path));
    if (*gen) {
      simile::cmd_generate(config);
    } else if (*run) {
      const auto r = simile::cmd_run(config);
      std::cout << simile::format_summary_table(r.summary, simile::method_label(config.likelihood));
      std::cerr << "acceptance " << r.draws.acceptance_rate << ", -inf rejections " << r.draws.neg_inf_rejections
                << ", " << r.wall_seconds << " s\n";
    } else if (*tune) {
      std::cout << simile::format_tune_table(simile::cmd_tune(config));
    } else if (*em_train) {
      simile::cmd_emulate_train(config);
    } else if (*em_run) {
      const auto r = simile::cmd_emulate_run(config);
      std::cout << simile::format_summary_table(r.summary, "Emulated");
    }
  } catch (const simile::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
