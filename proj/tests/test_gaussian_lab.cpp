#include "condlab/gaussian_lab.hpp"

#include <cmath>

#include "doctest.h"

using namespace condlab;
namespace lab = condlab::gaussian_lab;

namespace {

// Finite-difference oracle on the conditional log-density.
double fd_conditional_score(const GaussianJoint& j, double x, double c,
                            double h = 1e-6) {
  auto logp = [&](double xx) {
    const double m = j.conditional_mean(c);
    const double v = j.conditional_variance();
    return -0.5 * std::log(2.0 * M_PI * v) - (xx - m) * (xx - m) / (2.0 * v);
  };
  return (logp(x + h) - logp(x - h)) / (2.0 * h);
}

}  // namespace

TEST_CASE("conditional_score closed form and finite differences") {
  const GaussianJoint j(0, 0, 1, 1, 0.5);
  CHECK(lab::conditional_score(GaussianJoint(0, 0, 1, 1, 0), 0.0, 3.7) == 0.0);
  CHECK(lab::conditional_score(j, 1.0, 0.0) ==
        doctest::Approx(-4.0 / 3.0).epsilon(1e-14));
  CHECK(fd_conditional_score(j, 1.0, 0.0) ==
        doctest::Approx(-4.0 / 3.0).epsilon(1e-8));
  // Conditional mean equals x: zero score.
  CHECK(lab::conditional_score(j, 1.0, 2.0) == doctest::Approx(0.0));
  CHECK(std::abs(fd_conditional_score(j, 1.0, 2.0)) < 1e-8);

  // Grid agreement at the spec tolerance.
  double max_err = 0.0;
  for (double x = -3.0; x <= 3.0; x += 0.1) {
    for (double c = -3.0; c <= 3.0; c += 0.1) {
      max_err = std::max(max_err, std::abs(fd_conditional_score(j, x, c) -
                                           lab::conditional_score(j, x, c)));
    }
  }
  CHECK(max_err <= 1e-6);
}

TEST_CASE("marginal_score closed form") {
  CHECK(lab::marginal_score(GaussianJoint(0, 0, 1, 1, 0.5), 0.0) == 0.0);
  CHECK(lab::marginal_score(GaussianJoint(0, 0, 2, 1, 0.5), 2.0) ==
        doctest::Approx(-1.0));
}

TEST_CASE("posterior sampling consistency: E_{c|x}[cond score] = marginal score") {
  const GaussianJoint j(0.2, -0.1, 1.3, 0.8, 0.45);
  const double x = 0.7;
  RngStream rng(11, 0);
  const long n = 1000000;
  double acc = 0.0, acc2 = 0.0;
  for (long i = 0; i < n; ++i) {
    const double c = j.posterior_mean_c(x) +
                     std::sqrt(j.posterior_variance_c()) * rng.normal();
    const double s = lab::conditional_score(j, x, c);
    acc += s;
    acc2 += s * s;
  }
  const double mean = acc / n;
  const double se = std::sqrt((acc2 / n - mean * mean) / n);
  CHECK(std::abs(mean - lab::marginal_score(j, x)) <= 4.0 * se);
}

TEST_CASE("tower identity across x draws") {
  const GaussianJoint j(0, 0, 1, 1, 0.6);
  RngStream rng(13, 0);
  const long n = 400000;
  double acc = 0, acc2 = 0;
  for (long i = 0; i < n; ++i) {
    const double x = std::sqrt(j.sigma_xx()) * rng.normal();
    const double c = j.posterior_mean_c(x) +
                     std::sqrt(j.posterior_variance_c()) * rng.normal();
    const double d = lab::conditional_score(j, x, c) - lab::marginal_score(j, x);
    acc += d;
    acc2 += d * d;
  }
  const double mean = acc / n;
  const double se = std::sqrt((acc2 / n - mean * mean) / n);
  CHECK(std::abs(mean) <= 4.0 * se);
}

TEST_CASE("score_matching_loss: perfect model and zero model") {
  const GaussianJoint j(0, 0, 1, 1, 0.5);
  RngStream rng(17, 0);
  const auto perfect = lab::score_matching_loss(
      j, lab::ScoreModel::true_marginal(j), false, 200000, rng);
  CHECK(std::abs(perfect.total) <= 3.0 * std::max(perfect.std_error, 1e-12));

  // Zero model: loss equals the marginal Fisher information 1/sigma_xx = 1.
  RngStream rng2(18, 0);
  const auto zero =
      lab::score_matching_loss(j, lab::ScoreModel::zero(), false, 400000, rng2);
  CHECK(zero.total == doctest::Approx(1.0).epsilon(0.02));

  // Breakdown identity from shared samples.
  const double recon =
      zero.true_score_norm + zero.learned_score_norm - 2.0 * zero.cross_term;
  CHECK(zero.total == doctest::Approx(recon).epsilon(1e-12));
}

TEST_CASE("score_matching_loss conditional gap vs brute-force oracle") {
  const GaussianJoint j(0, 0, 1, 1, 0.5);
  RngStream rng(19, 0);
  const auto cond = lab::score_matching_loss(
      j, lab::ScoreModel::true_marginal(j), true, 500000, rng);

  // Independent brute-force double Monte Carlo with its own sampling code:
  // E_{c,x}||cond_score - marg_score||^2, the Jensen gap of the marginal
  // model under the conditional target.
  RngStream oracle_rng(20231108, 99);
  const long n = 500000;
  double acc = 0.0;
  for (long i = 0; i < n; ++i) {
    const double c = oracle_rng.normal() * std::sqrt(j.sigma_cc()) + j.mu_c();
    const double x = j.conditional_mean(c) +
                     std::sqrt(j.conditional_variance()) * oracle_rng.normal();
    const double diff =
        lab::conditional_score(j, x, c) - lab::marginal_score(j, x);
    acc += diff * diff;
  }
  const double oracle = acc / n;
  CHECK(cond.total > 0.0);
  CHECK(cond.total == doctest::Approx(oracle).epsilon(0.02));
}

TEST_CASE("epsilon_c analytic value and independence case") {
  // sigma_xc = 0: conditional equals marginal.
  RngStream rng(23, 0);
  const auto ind = lab::epsilon_c(GaussianJoint(0, 0, 1, 1, 0), 200000, rng);
  CHECK(std::abs(ind.estimate) <= 3.0 * std::max(ind.std_error, 1e-12));

  // Analytic: 1/(sxx - sxc^2/scc) - 1/sxx = 4/3 - 1 = 1/3.
  RngStream rng2(24, 0);
  const auto e = lab::epsilon_c(GaussianJoint(0, 0, 1, 1, 0.5), 1000000, rng2);
  CHECK(e.estimate == doctest::Approx(1.0 / 3.0).epsilon(0.01));
}

TEST_CASE("epsilon_c equals conditional-minus-unconditional loss for a fixed model") {
  const GaussianJoint j(0, 0, 1, 1, 0.5);
  const lab::ScoreModel s = lab::ScoreModel::affine(0.1, -0.6);
  const long n = 400000;
  RngStream r1(31, 0), r2(31, 0), r3(32, 0);
  const auto cond = lab::score_matching_loss(j, s, true, n, r1);
  const auto uncond = lab::score_matching_loss(j, s, false, n, r2);
  const auto eps = lab::epsilon_c(j, n, r3);
  const double gap = cond.total - uncond.total;
  const double pooled = std::sqrt(cond.std_error * cond.std_error +
                                  uncond.std_error * uncond.std_error +
                                  eps.std_error * eps.std_error);
  CHECK(std::abs(gap - eps.estimate) <= 3.0 * pooled);
}

TEST_CASE("epsilon_bar_c analytic values and decomposition") {
  RngStream rng(37, 0);
  const auto ind = lab::epsilon_bar_c(GaussianJoint(0, 0, 1, 1, 0), 200000, rng);
  CHECK(ind.estimate == doctest::Approx(1.0).epsilon(0.02));

  RngStream rng2(38, 0);
  const GaussianJoint j(0, 0, 1, 1, 0.5);
  const auto bar = lab::epsilon_bar_c(j, 1000000, rng2);
  CHECK(bar.estimate == doctest::Approx(1.0 / 0.75).epsilon(0.01));

  // Three-estimate consistency: bar = eps_c + marginal Fisher information.
  RngStream rng3(39, 0);
  const auto eps = lab::epsilon_c(j, 1000000, rng3);
  const double fisher = 1.0 / j.sigma_xx();
  const double pooled =
      std::sqrt(bar.std_error * bar.std_error + eps.std_error * eps.std_error);
  CHECK(std::abs(bar.estimate - eps.estimate - fisher) <= 3.0 * pooled);
}

TEST_CASE("verify_upper_bound: equality, strict, and analytic cases") {
  // Independence: equality within noise, holds.
  RngStream r1(41, 0);
  const auto ind = lab::verify_upper_bound(
      GaussianJoint(0, 0, 1, 1, 0), lab::ScoreModel::affine(0.2, -0.3), 100000,
      r1);
  CHECK(ind.holds);
  CHECK(std::abs(ind.lhs - ind.rhs) <= 3.0 * std::max(ind.diff_se, 1e-12));

  // Zero model on a correlated joint.
  RngStream r2(42, 0);
  const GaussianJoint j(0, 0, 1, 1, 0.5);
  const auto z = lab::verify_upper_bound(j, lab::ScoreModel::zero(), 100000, r2);
  CHECK(z.holds);

  // Marginal-score model on a strongly correlated joint: lhs ~ 0, rhs equals
  // the conditional Fisher gap 1/(1 - 0.81) - 1.
  RngStream r3(43, 0);
  const GaussianJoint j9(0, 0, 1, 1, 0.9);
  const auto m =
      lab::verify_upper_bound(j9, lab::ScoreModel::true_marginal(j9), 200000, r3);
  CHECK(m.holds);
  CHECK(m.lhs == doctest::Approx(0.0));
  const double gap = 1.0 / j9.conditional_variance() - 1.0 / j9.sigma_xx();
  CHECK(m.rhs == doctest::Approx(gap).epsilon(0.03));
}

TEST_CASE("verify_upper_bound holds on 100 randomized instances") {
  RngStream rng(4242, 0);
  for (int i = 0; i < 100; ++i) {
    RngStream jr = rng.split(i);
    const double sxx = 0.3 + 2.0 * jr.uniform();
    const double scc = 0.3 + 2.0 * jr.uniform();
    const double rho = -0.95 + 1.9 * jr.uniform();
    const GaussianJoint j(-1 + 2 * jr.uniform(), -1 + 2 * jr.uniform(), sxx,
                          scc, rho * std::sqrt(sxx * scc));
    const lab::ScoreModel s = lab::ScoreModel::affine(
        -0.5 + jr.uniform(), -1.0 + 2.0 * jr.uniform());
    RngStream mc = jr.split(7);
    const auto r = lab::verify_upper_bound(j, s, 20000, mc);
    REQUIRE(r.holds);
  }
}

TEST_CASE("control_term_identity") {
  // Independence: both sides vanish.
  RngStream r0(51, 0);
  const auto ind =
      lab::control_term_identity(GaussianJoint(0, 0, 1, 1, 0), 1.0, 100000, r0);
  CHECK(std::abs(ind.lhs) <= 3.0 * std::max(ind.lhs_se, 1e-12));
  CHECK(std::abs(ind.rhs) <= 3.0 * std::max(ind.rhs_se, 1e-12));

  // Identity at sigma_t = 1 with the analytic oracle
  // lhs = rhs = sxc^2 / (sxx (sxx scc - sxc^2)).
  const GaussianJoint j(0, 0, 1, 1, 0.5);
  RngStream r1(52, 0);
  const auto a = lab::control_term_identity(j, 1.0, 1000000, r1);
  CHECK(std::abs(a.lhs - a.rhs) <= 3.0 * a.diff_se);
  const double analytic = 0.25 / (1.0 * (1.0 - 0.25));
  CHECK(a.lhs == doctest::Approx(analytic).epsilon(0.02));
  CHECK(a.rhs_scaled == a.rhs);  // sigma_t = 1

  // Scaling convention: keeping sigma_t^2 inside the norm scales by 16 at
  // sigma_t = 2.
  RngStream r2(53, 0), r3(53, 0);
  const auto s1 = lab::control_term_identity(j, 1.0, 50000, r2);
  const auto s2 = lab::control_term_identity(j, 2.0, 50000, r3);
  CHECK(s2.rhs_scaled == doctest::Approx(16.0 * s1.rhs_scaled).epsilon(1e-12));
}

TEST_CASE("LossBreakdown identity holds on conditional draws") {
  const GaussianJoint j(0.4, -0.3, 1.2, 0.7, -0.4);
  RngStream rng(61, 0);
  const auto b = lab::score_matching_loss(j, lab::ScoreModel::affine(0.5, 0.25),
                                          true, 50000, rng);
  const double recon =
      b.true_score_norm + b.learned_score_norm - 2.0 * b.cross_term;
  CHECK(std::abs(b.total - recon) <=
        1e-9 * std::max({std::abs(b.total), std::abs(recon), 1.0}));
}
