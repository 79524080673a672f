#include "condlab/gaussian_lab.hpp"

#include <cmath>
#include <stdexcept>

namespace condlab::gaussian_lab {

ScoreModel ScoreModel::true_marginal(const GaussianJoint& j) {
  return {"true_marginal",
          [j](double x, double) { return marginal_score(j, x); }};
}

ScoreModel ScoreModel::true_conditional(const GaussianJoint& j,
                                        double c_fixed) {
  return {"true_conditional(c=" + std::to_string(c_fixed) + ")",
          [j, c_fixed](double x, double) {
            return conditional_score(j, x, c_fixed);
          }};
}

ScoreModel ScoreModel::zero() {
  return {"zero", [](double, double) { return 0.0; }};
}

ScoreModel ScoreModel::affine(double intercept, double slope) {
  return {"affine(" + std::to_string(intercept) + "," +
              std::to_string(slope) + ")",
          [intercept, slope](double x, double) {
            return intercept + slope * x;
          }};
}

double conditional_score(const GaussianJoint& j, double x, double c) {
  const double v = j.conditional_variance();
  if (!(v > 0.0)) {
    throw std::invalid_argument("conditional_score: degenerate variance");
  }
  return -(x - j.conditional_mean(c)) / v;
}

double marginal_score(const GaussianJoint& j, double x) {
  return -(x - j.mu_x()) / j.sigma_xx();
}

double posterior_score_c_given_x(const GaussianJoint& j, double x, double c) {
  // p(c|x) = N(mu_{c|x}(x), v); d/dx log p(c|x) = (c - mu_{c|x}) * slope / v
  // with slope = d mu_{c|x} / dx = sigma_xc / sigma_xx.
  const double slope = j.sigma_xc() / j.sigma_xx();
  const double v = j.posterior_variance_c();
  return (c - j.posterior_mean_c(x)) * slope / v;
}

namespace {

struct JointDraw {
  double x;
  double c;
};

JointDraw draw_joint(const GaussianJoint& j, RngStream& rng) {
  const double c =
      j.mu_c() + std::sqrt(j.sigma_cc()) * rng.normal();
  const double x = j.conditional_mean(c) +
                   std::sqrt(j.conditional_variance()) * rng.normal();
  return {x, c};
}

}  // namespace

LossBreakdown score_matching_loss(const GaussianJoint& j, const ScoreModel& s,
                                  bool conditional, long n_samples,
                                  RngStream& rng) {
  if (n_samples < 1) {
    throw std::invalid_argument("score_matching_loss: n_samples >= 1");
  }
  double sum_true = 0, sum_learned = 0, sum_cross = 0;
  double sum_loss = 0, sum_loss2 = 0;
  for (long i = 0; i < n_samples; ++i) {
    double x, truth;
    if (conditional) {
      const JointDraw d = draw_joint(j, rng);
      x = d.x;
      truth = conditional_score(j, d.x, d.c);
    } else {
      x = j.mu_x() + std::sqrt(j.sigma_xx()) * rng.normal();
      truth = marginal_score(j, x);
    }
    const double model = s.eval(x, 1.0);
    const double loss = (truth - model) * (truth - model);
    sum_true += truth * truth;
    sum_learned += model * model;
    sum_cross += model * truth;
    sum_loss += loss;
    sum_loss2 += loss * loss;
  }
  const double n = static_cast<double>(n_samples);
  LossBreakdown out;
  out.true_score_norm = sum_true / n;
  out.learned_score_norm = sum_learned / n;
  out.cross_term = sum_cross / n;
  out.total = out.true_score_norm + out.learned_score_norm - 2 * out.cross_term;
  const double var = std::max(0.0, sum_loss2 / n - (sum_loss / n) * (sum_loss / n));
  out.std_error = std::sqrt(var / n);
  out.n_samples = n_samples;
  return out;
}

MonteCarloEstimate epsilon_c(const GaussianJoint& j, long n_samples,
                             RngStream& rng) {
  if (n_samples < 1) throw std::invalid_argument("epsilon_c: n_samples >= 1");
  // x ~ p(x), then c ~ p(c|x); the integrand is the per-x score energy gap.
  double sum = 0, sum2 = 0;
  for (long i = 0; i < n_samples; ++i) {
    const double x = j.mu_x() + std::sqrt(j.sigma_xx()) * rng.normal();
    const double c = j.posterior_mean_c(x) +
                     std::sqrt(j.posterior_variance_c()) * rng.normal();
    const double cs = conditional_score(j, x, c);
    const double ms = marginal_score(j, x);
    const double g = cs * cs - ms * ms;
    sum += g;
    sum2 += g * g;
  }
  const double n = static_cast<double>(n_samples);
  const double mean = sum / n;
  const double var = std::max(0.0, sum2 / n - mean * mean);
  return {mean, std::sqrt(var / n), n_samples};
}

MonteCarloEstimate epsilon_bar_c(const GaussianJoint& j, long n_samples,
                                 RngStream& rng) {
  if (n_samples < 1) {
    throw std::invalid_argument("epsilon_bar_c: n_samples >= 1");
  }
  double sum = 0, sum2 = 0;
  for (long i = 0; i < n_samples; ++i) {
    const JointDraw d = draw_joint(j, rng);
    const double cs = conditional_score(j, d.x, d.c);
    const double g = cs * cs;
    sum += g;
    sum2 += g * g;
  }
  const double n = static_cast<double>(n_samples);
  const double mean = sum / n;
  const double var = std::max(0.0, sum2 / n - mean * mean);
  return {mean, std::sqrt(var / n), n_samples};
}

UpperBoundReport verify_upper_bound(const GaussianJoint& j,
                                    const ScoreModel& s, long n_samples,
                                    RngStream& rng) {
  if (n_samples < 1) {
    throw std::invalid_argument("verify_upper_bound: n_samples >= 1");
  }
  // One joint draw feeds both sides: x alone is a valid marginal sample, so
  // the per-sample difference d_i has mean rhs - lhs and its SE is the honest
  // pooled tolerance for the comparison.
  double sum_l = 0, sum_l2 = 0, sum_r = 0, sum_r2 = 0, sum_d = 0, sum_d2 = 0;
  for (long i = 0; i < n_samples; ++i) {
    const JointDraw d = draw_joint(j, rng);
    const double model = s.eval(d.x, 1.0);
    const double lm = marginal_score(j, d.x) - model;
    const double lc = conditional_score(j, d.x, d.c) - model;
    const double lhs_i = lm * lm;
    const double rhs_i = lc * lc;
    sum_l += lhs_i;
    sum_l2 += lhs_i * lhs_i;
    sum_r += rhs_i;
    sum_r2 += rhs_i * rhs_i;
    const double di = rhs_i - lhs_i;
    sum_d += di;
    sum_d2 += di * di;
  }
  const double n = static_cast<double>(n_samples);
  UpperBoundReport out;
  out.lhs = sum_l / n;
  out.rhs = sum_r / n;
  out.lhs_se =
      std::sqrt(std::max(0.0, sum_l2 / n - out.lhs * out.lhs) / n);
  out.rhs_se =
      std::sqrt(std::max(0.0, sum_r2 / n - out.rhs * out.rhs) / n);
  const double dmean = sum_d / n;
  out.diff_se =
      std::sqrt(std::max(0.0, sum_d2 / n - dmean * dmean) / n);
  out.holds = out.lhs <= out.rhs + 3.0 * out.diff_se;
  out.n_samples = n_samples;
  return out;
}

ControlTermReport control_term_identity(const GaussianJoint& j, double sigma_t,
                                        long n_samples, RngStream& rng) {
  if (!(sigma_t > 0.0)) {
    throw std::invalid_argument("control_term_identity: sigma_t > 0");
  }
  if (n_samples < 1) {
    throw std::invalid_argument("control_term_identity: n_samples >= 1");
  }
  double sum_l = 0, sum_l2 = 0, sum_r = 0, sum_r2 = 0, sum_d = 0, sum_d2 = 0;
  for (long i = 0; i < n_samples; ++i) {
    const JointDraw d = draw_joint(j, rng);
    const double cs = conditional_score(j, d.x, d.c);
    const double ms = marginal_score(j, d.x);
    const double g = posterior_score_c_given_x(j, d.x, d.c);
    const double lhs_i = cs * cs - ms * ms;
    const double rhs_i = g * g;
    sum_l += lhs_i;
    sum_l2 += lhs_i * lhs_i;
    sum_r += rhs_i;
    sum_r2 += rhs_i * rhs_i;
    const double di = lhs_i - rhs_i;
    sum_d += di;
    sum_d2 += di * di;
  }
  const double n = static_cast<double>(n_samples);
  ControlTermReport out;
  out.sigma_t = sigma_t;
  out.n_samples = n_samples;
  out.lhs = sum_l / n;
  out.rhs = sum_r / n;
  const double s4 = sigma_t * sigma_t * sigma_t * sigma_t;
  out.rhs_scaled = s4 * out.rhs;
  out.lhs_se =
      std::sqrt(std::max(0.0, sum_l2 / n - out.lhs * out.lhs) / n);
  out.rhs_se =
      std::sqrt(std::max(0.0, sum_r2 / n - out.rhs * out.rhs) / n);
  const double dmean = sum_d / n;
  out.diff_se =
      std::sqrt(std::max(0.0, sum_d2 / n - dmean * dmean) / n);
  return out;
}

}  // namespace condlab::gaussian_lab
