#pragma once

// Closed-form conditional scores on the bivariate Gaussian, Monte-Carlo
// score-matching losses, the conditioning error terms, and the numerical
// checks of the score upper bound and the control-term identity.
//
// Everything here is a single-time-slice statement (T = 1); multi-step
// behaviour lives in the diffusion module.

#include <functional>
#include <string>

#include "condlab/measures.hpp"

namespace condlab::gaussian_lab {

/// Analytic/parametric score model s(x, t). Evaluation is deterministic for
/// fixed inputs; the descriptor names the family for experiment records.
struct ScoreModel {
  std::string descriptor;
  std::function<double(double x, double t)> eval;

  static ScoreModel true_marginal(const GaussianJoint& j);
  static ScoreModel true_conditional(const GaussianJoint& j, double c_fixed);
  static ScoreModel zero();
  static ScoreModel affine(double intercept, double slope);
};

/// Expanded score-matching loss: total = true + learned - 2*cross, with all
/// three terms estimated from the same samples so the identity is exact.
struct LossBreakdown {
  double true_score_norm = 0.0;
  double learned_score_norm = 0.0;
  double cross_term = 0.0;
  double total = 0.0;
  double std_error = 0.0;  // standard error of the mean of per-sample losses
  long n_samples = 0;
};

struct MonteCarloEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  long n_samples = 0;
};

/// grad_x log p(x|c) = -(x - conditional_mean(c)) / conditional_variance.
double conditional_score(const GaussianJoint& j, double x, double c);

/// Score of the x-marginal N(mu_x, sigma_xx): -(x - mu_x)/sigma_xx.
double marginal_score(const GaussianJoint& j, double x);

/// grad_x log p(c|x); enters the guidance term and the control identity.
double posterior_score_c_given_x(const GaussianJoint& j, double x, double c);

/// Monte-Carlo estimate of E||true_score - s||^2. Unconditional draws
/// x ~ p(x); conditional draws (c, x) ~ p(c)p(x|c) with the conditional score
/// as target.
LossBreakdown score_matching_loss(const GaussianJoint& j, const ScoreModel& s,
                                  bool conditional, long n_samples,
                                  RngStream& rng);

/// E_x[E_{c|x}||grad log p(x|c)||^2 - ||grad log p(x)||^2]; the
/// conditioning-induced increase in expected squared score norm.
MonteCarloEstimate epsilon_c(const GaussianJoint& j, long n_samples,
                             RngStream& rng);

/// E_{c,x}||grad log p(x|c)||^2; equals epsilon_c + marginal Fisher
/// information by the law of total variance.
MonteCarloEstimate epsilon_bar_c(const GaussianJoint& j, long n_samples,
                                 RngStream& rng);

/// Paired comparison of the unconditional loss (lhs) against the conditional
/// loss (rhs). Both sides are estimated from the same joint draws, so the
/// tolerance is the standard error of the per-sample difference.
struct UpperBoundReport {
  double lhs = 0.0;
  double rhs = 0.0;
  double lhs_se = 0.0;
  double rhs_se = 0.0;
  double diff_se = 0.0;  // SE of the paired per-sample difference rhs - lhs
  bool holds = false;    // lhs <= rhs + 3 * diff_se
  long n_samples = 0;
};

UpperBoundReport verify_upper_bound(const GaussianJoint& j,
                                    const ScoreModel& s, long n_samples,
                                    RngStream& rng);

/// Both sides of the control-term identity
///   E||grad log p(x|c)||^2 - E||grad log p(x)||^2 = E||grad_x log p(c|x)||^2,
/// sampled from the same joint draws. rhs_scaled keeps the sigma_t^2 factor
/// inside the norm (scaling the bare value by sigma_t^4); both conventions
/// are reported because they coincide only at sigma_t = 1.
struct ControlTermReport {
  double lhs = 0.0;
  double rhs = 0.0;         // bare convention, sigma_t outside
  double rhs_scaled = 0.0;  // sigma_t^4 * rhs
  double lhs_se = 0.0;
  double rhs_se = 0.0;
  double diff_se = 0.0;  // SE of per-sample (lhs_i - rhs_i)
  double sigma_t = 1.0;
  long n_samples = 0;
};

ControlTermReport control_term_identity(const GaussianJoint& j, double sigma_t,
                                        long n_samples, RngStream& rng);

}  // namespace condlab::gaussian_lab
