#include <cstdlib>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "mcfusion/experiment.hpp"

namespace {

// --threads wins over MCFUSION_THREADS; 0 means one worker per hardware
// thread.
int thread_count(int flag_value, bool flag_given) {
  if (flag_given) return flag_value;
  if (const char* env = std::getenv("MCFUSION_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n >= 0) return n;
    } catch (const std::exception&) {
    }
    std::cerr << "warning: ignoring MCFUSION_THREADS=" << env << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Detection performance of molecular-communication sensor networks"};
  app.set_version_flag("--version", std::string(mcfusion::kToolVersion));
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run an experiment config (or re-run a manifest)");
  std::string config_path;
  std::string output_dir = ".";
  int threads = 0;
  bool quiet = false;
  run->add_option("config", config_path, "Experiment config or run manifest (JSON)")->required();
  run->add_option("--output-dir,-o", output_dir, "Directory for the CSV and manifest");
  auto* threads_opt =
      run->add_option("--threads,-j", threads, "Worker threads (0 = all cores; overrides MCFUSION_THREADS)")
          ->check(CLI::NonNegativeNumber);
  run->add_flag("--quiet,-q", quiet, "Only print errors");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  mcfusion::RunOptions options;
  options.output_dir = output_dir;
  options.threads = thread_count(threads, threads_opt->count() > 0);
  options.quiet = quiet;
  return mcfusion::run_config_file(config_path, options);
}
