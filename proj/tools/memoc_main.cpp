#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>

#include "memoc/experiments.hpp"

int main(int argc, char** argv) {
  CLI::App app{"memoc - optimal control with memory: experiment runner"};
  app.require_subcommand(1);

  std::string config_path;
  memoc::RunOptions opts;
  std::uint64_t seed = 0;
  bool seed_set = false;

  auto* run = app.add_subcommand("run", "run the experiment in a config file");
  run->add_option("config", config_path, "JSON experiment config")->required();
  run->add_option("--output-dir", opts.output_dir, "artifact directory");
  run->add_option("--seed", seed, "seed for sampled-property experiments")
      ->each([&](const std::string&) { seed_set = true; });
  run->add_flag("--verbose", opts.verbose, "progress notes on stderr");

  auto* list = app.add_subcommand("list", "describe the experiment kinds");

  CLI11_PARSE(app, argc, argv);

  if (list->parsed()) {
    std::cout << memoc::list_experiments();
    return 0;
  }
  if (seed_set) opts.seed = seed;
  return memoc::run_experiment_file(config_path, opts, std::cout, std::cerr);
}
