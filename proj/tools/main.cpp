// Command-line front end: realloc {run,verify,sweep} --config FILE [options].

#include <CLI11.hpp>
#include <fmt/format.h>

#include <fstream>
#include <iostream>
#include <thread>

#include "scenario.hpp"

int main(int argc, char** argv) {
  using namespace reallocation::cli;

  CLI::App app{"Mechanisms for reallocating goods: run, verify and sweep scenarios"};
  app.require_subcommand(1, 1);

  std::string config;
  std::string out_path;
  std::uint64_t seed = 0;
  std::uint64_t budget = 0;
  unsigned jobs = std::max(1u, std::thread::hardware_concurrency());

  for (const char* name : {"run", "verify", "sweep"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config, "scenario file (YAML)")->required();
    sub->add_option("--out", out_path, "CSV output path (run, sweep)");
    sub->add_option("--seed", seed, "override the scenario seed");
    sub->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--oracle-budget", budget, "override the enumeration budget");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfigError;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  const auto* sub = app.get_subcommands().front();
  RunOptions opt;
  opt.jobs = jobs;
  if (sub->count("--seed")) opt.seed = seed;
  if (sub->count("--oracle-budget")) opt.oracle_budget = budget;

  std::string error;
  const CommandResult res = execute(command, config, opt, error);
  if (!error.empty()) {
    std::cerr << error << '\n';
    return res.exit_code;
  }
  std::cout << res.summary;
  if (!res.csv.empty()) {
    if (out_path.empty()) {
      std::cout << '\n' << res.csv;
    } else {
      std::ofstream out(out_path, std::ios::binary);
      if (!out) {
        std::cerr << "cannot write '" << out_path << "'\n";
        return kExitConfigError;
      }
      out << res.csv;
    }
  }
  return res.exit_code;
}
