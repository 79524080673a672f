// Acceptance suite: one test case per criterion, each printing a single
// [PASS]/[FAIL] line with the measured values. Criteria 1-10 drive the
// registered experiments at their default (full-size) configurations;
// criterion 11 re-runs every experiment twice at reduced size and compares
// CSV bytes.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include "doctest.h"

#include "condlab/experiments.hpp"

namespace ex = condlab::experiments;
namespace fs = std::filesystem;

namespace {

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
  }
};

fs::path accept_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / "condlab_acceptance" / tag;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

fs::path write_config(const fs::path& dir,
                      const std::map<std::string, std::string>& kv) {
  const fs::path p = dir / "override.cfg";
  std::ofstream out(p);
  for (const auto& [k, v] : kv) out << k << " = " << v << "\n";
  return p;
}

ex::RunManifest run(const std::string& name, const std::string& tag,
                    const std::map<std::string, std::string>& overrides = {},
                    std::uint64_t seed = 42) {
  const fs::path dir = accept_dir(tag);
  ex::ExperimentSpec spec;
  spec.name = name;
  spec.out_dir = dir.string();
  spec.seed = seed;
  if (!overrides.empty()) {
    spec.config_path = write_config(dir, overrides).string();
  }
  return ex::run_experiment(spec);
}

const ex::CheckResult& find_check(const ex::RunManifest& m,
                                  const std::string& name) {
  for (const auto& c : m.checks) {
    if (c.name == name) return c;
  }
  static ex::CheckResult missing;
  missing.name = "MISSING:" + name;
  missing.passed = false;
  return missing;
}

void report(int criterion, const std::string& label, bool passed,
            const std::string& detail, double secs) {
  std::printf("[%s] criterion %02d %s: %s (%.1fs)\n",
              passed ? "PASS" : "FAIL", criterion, label.c_str(),
              detail.c_str(), secs);
  std::fflush(stdout);
}

std::string g(double v) {
  char b[40];
  std::snprintf(b, sizeof(b), "%.4g", v);
  return b;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("criterion 1: score-matching upper bound on randomized instances") {
  Timer t;
  const auto m = run("thm1-upper-bound", "c1");
  const auto& c = find_check(m, "all_instances_hold");
  const bool ok = c.passed;
  report(1, "upper bound inequality", ok,
         g(c.values.at("n_cases")) + " cases, " +
             g(c.values.at("n_failed")) + " failed",
         t.seconds());
  CHECK(ok);
}

TEST_CASE("criterion 2: control-term identity within 3 pooled SE") {
  Timer t;
  const auto m = run("lemma2-control-term", "c2");
  const bool ok = m.all_passed();
  const auto& c = find_check(m, "identity_within_3se");
  report(2, "control-term identity", ok,
         "worst z-score " + g(c.values.at("worst_z_score")) +
             ", both conventions reported",
         t.seconds());
  CHECK(ok);
}

TEST_CASE("criterion 3: conditional score vs finite differences on the grid") {
  Timer t;
  const auto m = run("prop1-gaussian-decay", "c3");
  const auto& fd = find_check(m, "fd_grid_max_error");
  const auto& vi = find_check(m, "conditional_variance_invariant");
  const bool ok = fd.passed && vi.passed;
  report(3, "closed-form conditional score", ok,
         "max |fd - closed form| = " + g(fd.values.at("max_abs_error")),
         t.seconds());
  CHECK(ok);
}

TEST_CASE("criterion 4: gradient-norm decay rate tracks the AR coefficient") {
  Timer t;
  const auto m = run("thm2-gradient-decay", "c4");
  const bool ok = m.all_passed();
  std::string detail;
  for (const auto& c : m.checks) {
    detail += c.name + " beta=" + g(c.values.at("beta")) +
              " r2=" + g(c.values.at("r2")) + "; ";
  }
  report(4, "geometric score-norm decay", ok, detail, t.seconds());
  CHECK(ok);
}

TEST_CASE("criterion 5: geometric ergodicity in total variation") {
  Timer t;
  const auto m = run("ergodicity", "c5");
  const auto& c = find_check(m, "tv_rate_below_threshold");
  const bool ok = m.all_passed();
  report(5, "TV mixing rate", ok,
         "fitted rate " + g(c.values.at("rate")) + " (<= 0.6)", t.seconds());
  CHECK(ok);
}

TEST_CASE("criterion 6: entropic solver feasibility, oracles, error decay") {
  Timer t;
  const auto mv = run("sinkhorn-validate", "c6a");
  const auto md = run("sinkhorn-error-decay", "c6b");
  const bool ok = mv.all_passed() && md.all_passed();
  const auto& marg = find_check(mv, "marginal_feasibility");
  report(6, "entropic transport correctness", ok,
         "worst marginal L1 " + g(marg.values.at("worst_l1_error")) +
             ", oracle + decay checks " + (ok ? "clean" : "violated"),
         t.seconds());
  CHECK(ok);
}

TEST_CASE("criterion 7: particle-flow contraction") {
  Timer t;
  const auto m = run("thm3-contraction", "c7");
  const auto& fit = find_check(m, "contraction_fit");
  const auto& sp = find_check(m, "single_particle_closed_form");
  const bool ok = fit.passed && sp.passed;
  report(7, "flow contraction", ok,
         "rho_hat " + g(fit.values.at("rho_hat")) + ", r2 " +
             g(fit.values.at("r2")) + ", single-particle dev " +
             g(sp.values.at("worst_ratio_deviation")),
         t.seconds());
  CHECK(ok);
}

TEST_CASE("criterion 8: JKO energy monotonicity on the acceptance flow") {
  Timer t;
  const auto m = run("thm3-contraction", "c8");
  const auto& c = find_check(m, "energy_monotone_90pct");
  report(8, "energy monotonicity", c.passed,
         "non-increasing fraction " + g(c.values.at("fraction_nonincreasing")),
         t.seconds());
  CHECK(c.passed);
}

TEST_CASE("criterion 9: end-to-end condition refinement toy") {
  Timer t;
  const auto m = run("aco-full", "c9");
  const bool ok = m.all_passed();
  const auto& mean = find_check(m, "final_mean_within_0.5");
  const auto& clip = find_check(m, "postclip_norms_within_tau");
  report(9, "refinement loop", ok,
         "final mean " + g(mean.values.at("final_mean")) +
             ", worst post-clip " + g(clip.values.at("worst_postclip")),
         t.seconds());
  CHECK(ok);
}

TEST_CASE("criterion 10: SNR / noise-intensity ordering") {
  Timer t;
  const auto m = run("snr-curves", "c10");
  const bool ok = m.all_passed();
  const auto& c = find_check(m, "refined_terminal_snr_geq_unrefined");
  report(10, "SNR curves", ok,
         "terminal SNR refined " + g(c.values.at("snr_refined")) +
             " vs unrefined " + g(c.values.at("snr_unrefined")),
         t.seconds());
  CHECK(ok);
}

TEST_CASE("criterion 11: byte-identical CSV artifacts on rerun") {
  Timer t;
  // Reduced-size overrides keep the double pass over all experiments fast.
  const std::map<std::string, std::map<std::string, std::string>> tiny = {
      {"thm1-upper-bound", {{"n_joints", "4"}, {"n_samples", "2000"}}},
      {"lemma2-control-term", {{"n_samples", "20000"}}},
      {"prop1-gaussian-decay", {{"grid_n", "15"}}},
      {"thm2-gradient-decay", {{"n_iters", "12"}, {"n_paths", "60"}}},
      {"ergodicity", {{"n_steps", "8"}, {"n_paths", "1000"}}},
      {"inconsistency-energy", {{"n_samples", "100"}, {"n_particles", "80"}}},
      {"sinkhorn-validate", {{"n_instances", "5"}, {"max_iters", "800"}}},
      {"sinkhorn-error-decay", {{"k_max", "6"}, {"eps_list", "0.1,0.5"}}},
      {"thm3-contraction", {{"n_particles", "30"}, {"n_iters", "10"}}},
      {"aco-full",
       {{"n_particles", "30"}, {"K", "8"}, {"T", "20"}, {"K_sink", "200"}}},
      {"snr-curves", {{"T", "60"}, {"dim", "8"}}},
  };
  bool all_identical = true;
  std::string offending;
  for (const auto& [name, overrides] : tiny) {
    const auto m1 = run(name, "c11_" + name + "_a", overrides, 1234);
    const auto m2 = run(name, "c11_" + name + "_b", overrides, 1234);
    const fs::path d1 = fs::temp_directory_path() / "condlab_acceptance" /
                        ("c11_" + name + "_a");
    const fs::path d2 = fs::temp_directory_path() / "condlab_acceptance" /
                        ("c11_" + name + "_b");
    for (const std::string& artifact : m1.artifacts) {
      if (artifact.size() < 4 ||
          artifact.substr(artifact.size() - 4) != ".csv") {
        continue;
      }
      if (slurp(d1 / artifact) != slurp(d2 / artifact)) {
        all_identical = false;
        offending += name + "/" + artifact + " ";
      }
    }
  }
  report(11, "determinism", all_identical,
         all_identical ? "all CSV artifacts byte-identical"
                       : "differs: " + offending,
         t.seconds());
  CHECK(all_identical);
}
