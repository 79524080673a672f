// Experiment runner. Exit status: 0 when every check passed, 1 when at least
// one failed, 2 on usage/config errors.

#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"
#include "condlab/experiments.hpp"

int main(int argc, char** argv) {
  namespace ex = condlab::experiments;

  CLI::App app{"condlab — numerical experiments for autoregressive condition "
               "refinement in diffusion sampling"};
  std::string experiment, config_path, out_dir = "out";
  long long seed = -1;
  bool list = false;
  app.add_option("--experiment", experiment, "registered experiment name");
  app.add_option("--config", config_path, "key = value config file");
  app.add_option("--seed", seed, "RNG seed (overrides the config's seed)");
  app.add_option("--out", out_dir, "output directory");
  app.add_flag("--list", list, "list registered experiments and exit");
  CLI11_PARSE(app, argc, argv);

  if (list) {
    for (const ex::ExperimentInfo& info : ex::list_experiments()) {
      std::printf("%-22s %s [%s]\n", info.name.c_str(),
                  info.description.c_str(), info.anchor.c_str());
    }
    return 0;
  }
  if (experiment.empty()) {
    std::fprintf(stderr, "error: --experiment is required (or use --list)\n");
    return 2;
  }

  ex::ExperimentSpec spec;
  spec.name = experiment;
  if (!config_path.empty()) spec.config_path = config_path;
  if (seed >= 0) spec.seed = static_cast<std::uint64_t>(seed);
  spec.out_dir = out_dir.empty() ? std::string(".") : out_dir;

  try {
    const ex::RunManifest manifest = ex::run_experiment(spec);
    for (const ex::CheckResult& c : manifest.checks) {
      std::printf("[%s] %s\n", c.passed ? "PASS" : "FAIL", c.name.c_str());
    }
    std::printf("%s: %s (manifest: %s/manifest.json)\n",
                manifest.experiment.c_str(),
                manifest.all_passed() ? "all checks passed" : "CHECKS FAILED",
                spec.out_dir.c_str());
    return manifest.all_passed() ? 0 : 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
