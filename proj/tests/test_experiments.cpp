#include "condlab/experiments.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"

namespace ex = condlab::experiments;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

fs::path temp_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("condlab_test_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("registry: exactly 11 experiments, sorted, with anchors") {
  const auto infos = ex::list_experiments();
  REQUIRE(infos.size() == 11);
  for (std::size_t i = 0; i + 1 < infos.size(); ++i) {
    CHECK(infos[i].name < infos[i + 1].name);
  }
  for (const auto& info : infos) {
    CHECK(!info.description.empty());
    CHECK(!info.anchor.empty());
  }
  const std::vector<std::string> expected = {
      "aco-full",          "ergodicity",         "inconsistency-energy",
      "lemma2-control-term", "prop1-gaussian-decay", "sinkhorn-error-decay",
      "sinkhorn-validate", "snr-curves",         "thm1-upper-bound",
      "thm2-gradient-decay", "thm3-contraction"};
  for (std::size_t i = 0; i < expected.size(); ++i) {
    CHECK(infos[i].name == expected[i]);
  }
}

TEST_CASE("unknown experiment name lists the registry") {
  ex::ExperimentSpec spec;
  spec.name = "no-such-thing";
  spec.out_dir = temp_dir("unknown").string();
  try {
    ex::run_experiment(spec);
    FAIL("expected an exception");
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    CHECK(msg.find("thm1-upper-bound") != std::string::npos);
    CHECK(msg.find("aco-full") != std::string::npos);
  }
}

TEST_CASE("config parsing and field-path errors") {
  const fs::path dir = temp_dir("config");
  {
    std::ofstream out(dir / "good.cfg");
    out << "# comment\n"
        << "grid_n = 15\n"
        << "grid_range=2.0   # trailing comment\n";
  }
  ex::ExperimentSpec spec;
  spec.name = "prop1-gaussian-decay";
  spec.config_path = (dir / "good.cfg").string();
  spec.out_dir = (dir / "out").string();
  const auto manifest = ex::run_experiment(spec);
  CHECK(manifest.all_passed());

  {
    std::ofstream out(dir / "badkey.cfg");
    out << "not_a_real_key = 3\n";
  }
  spec.config_path = (dir / "badkey.cfg").string();
  try {
    ex::run_experiment(spec);
    FAIL("expected ConfigError");
  } catch (const ex::ConfigError& e) {
    CHECK(std::string(e.what()).find("not_a_real_key") != std::string::npos);
  }

  {
    std::ofstream out(dir / "badval.cfg");
    out << "grid_n = banana\n";
  }
  spec.config_path = (dir / "badval.cfg").string();
  try {
    ex::run_experiment(spec);
    FAIL("expected ConfigError");
  } catch (const ex::ConfigError& e) {
    CHECK(std::string(e.what()).find("grid_n") != std::string::npos);
  }
}

TEST_CASE("manifest structure: every check has explicit status") {
  const fs::path dir = temp_dir("manifest");
  ex::ExperimentSpec spec;
  spec.name = "prop1-gaussian-decay";
  spec.out_dir = dir.string();
  spec.seed = 7;
  const auto manifest = ex::run_experiment(spec);
  CHECK(manifest.experiment == "prop1-gaussian-decay");
  CHECK(manifest.seed == 7);
  CHECK(!manifest.checks.empty());

  const auto js = nlohmann::json::parse(slurp(dir / "manifest.json"));
  CHECK(js["tool_version"] == ex::kToolVersion);
  CHECK(js["generator"] == "splitmix64-polar");
  std::set<std::string> names;
  for (const auto& c : js["checks"]) {
    CHECK((c["status"] == "pass" || c["status"] == "fail"));
    names.insert(c["name"].get<std::string>());
  }
  CHECK(names.size() == js["checks"].size());  // each check exactly once
  for (const auto& a : js["artifacts"]) {
    CHECK(fs::exists(dir / a.get<std::string>()));
  }
}

TEST_CASE("rerun with identical config + seed is byte-identical on CSV") {
  const fs::path d1 = temp_dir("rerun1");
  const fs::path d2 = temp_dir("rerun2");
  ex::ExperimentSpec s1{"lemma2-control-term", std::nullopt, 11, d1.string()};
  ex::ExperimentSpec s2{"lemma2-control-term", std::nullopt, 11, d2.string()};

  // Shrink the sample budget through a config file shared by both runs.
  const fs::path cfgp = d1 / "tiny.cfg";
  {
    std::ofstream out(cfgp);
    out << "n_samples = 5000\n";
  }
  s1.config_path = cfgp.string();
  s2.config_path = cfgp.string();
  const auto m1 = ex::run_experiment(s1);
  const auto m2 = ex::run_experiment(s2);
  CHECK(m1.config_hash == m2.config_hash);
  CHECK(slurp(d1 / "lemma2-control-term.csv") ==
        slurp(d2 / "lemma2-control-term.csv"));
}

TEST_CASE("seed changes the sampled artifacts") {
  const fs::path d1 = temp_dir("seed1");
  const fs::path d2 = temp_dir("seed2");
  const fs::path cfgp = d1 / "tiny.cfg";
  {
    std::ofstream out(cfgp);
    out << "n_samples = 5000\n";
  }
  const auto m1 = ex::run_experiment(
      {"lemma2-control-term", cfgp.string(), 1, d1.string()});
  const auto m2 = ex::run_experiment(
      {"lemma2-control-term", cfgp.string(), 2, d2.string()});
  CHECK(slurp(d1 / "lemma2-control-term.csv") !=
        slurp(d2 / "lemma2-control-term.csv"));
}

TEST_CASE("all_passed drives the aggregate status") {
  ex::RunManifest m;
  m.checks.push_back({"a", true, {}});
  m.checks.push_back({"b", true, {}});
  CHECK(m.all_passed());
  m.checks.push_back({"c", false, {}});
  CHECK(!m.all_passed());
  const auto js = m.to_json();
  CHECK(js["all_passed"] == false);
}

TEST_CASE("experiment_defaults exposes the documented keys") {
  const auto d = ex::experiment_defaults("aco-full");
  CHECK(d.count("K") == 1);
  CHECK(d.count("eps_min") == 1);
  CHECK(d.count("seed") == 1);
  CHECK_THROWS_AS(ex::experiment_defaults("nope"), std::invalid_argument);
}
