#include "condlab/diffusion.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace condlab::diffusion {

NoiseSchedule NoiseSchedule::from_betas(std::vector<double> betas) {
  if (betas.size() < 2) {
    throw std::invalid_argument("NoiseSchedule: need T >= 2");
  }
  NoiseSchedule s;
  s.betas_ = std::move(betas);
  s.alpha_bars_.resize(s.betas_.size() + 1);
  s.alpha_bars_[0] = 1.0;
  for (std::size_t t = 1; t <= s.betas_.size(); ++t) {
    const double b = s.betas_[t - 1];
    if (!(b > 0.0) || !(b < 1.0)) {
      throw std::invalid_argument("NoiseSchedule: beta_t must lie in (0, 1)");
    }
    s.alpha_bars_[t] = s.alpha_bars_[t - 1] * (1.0 - b);
    if (!(s.alpha_bars_[t] < s.alpha_bars_[t - 1])) {
      throw std::invalid_argument(
          "NoiseSchedule: alpha_bar must strictly decrease");
    }
  }
  return s;
}

double NoiseSchedule::beta(int t) const {
  if (t < 1 || t > T()) throw std::out_of_range("NoiseSchedule::beta");
  return betas_[t - 1];
}

double NoiseSchedule::alpha_bar(int t) const {
  if (t < 0 || t > T()) throw std::out_of_range("NoiseSchedule::alpha_bar");
  return alpha_bars_[t];
}

double NoiseSchedule::posterior_variance(int t) const {
  const double ab_t = alpha_bar(t);
  const double ab_prev = alpha_bar(t - 1);
  return beta(t) * (1.0 - ab_prev) / (1.0 - ab_t);
}

NoiseSchedule cosine_schedule(int T) {
  if (T < 2) throw std::invalid_argument("cosine_schedule: T >= 2");
  const double s = 0.008;
  auto f = [s, T](int t) {
    const double arg =
        (static_cast<double>(t) / T + s) / (1.0 + s) * (M_PI / 2.0);
    const double c = std::cos(arg);
    return c * c;
  };
  const double f0 = f(0);
  std::vector<double> betas(T);
  double prev = 1.0;
  for (int t = 1; t <= T; ++t) {
    const double ab = f(t) / f0;
    double beta = 1.0 - ab / prev;
    beta = std::min(beta, 0.999);
    beta = std::max(beta, 1e-12);
    betas[t - 1] = beta;
    prev *= 1.0 - beta;
  }
  return NoiseSchedule::from_betas(std::move(betas));
}

StepDiagnostics snr_and_noise(const Vec& z_t, const Vec& z0_ref) {
  if (z_t.size() != z0_ref.size()) {
    throw std::invalid_argument("snr_and_noise: dimension mismatch");
  }
  const double resid = (z_t - z0_ref).norm();
  StepDiagnostics d;
  d.noise_intensity = resid / std::sqrt(static_cast<double>(z_t.size()));
  if (resid < 1e-15) {
    d.snr = std::numeric_limits<double>::infinity();
  } else {
    d.snr = z0_ref.squaredNorm() / (resid * resid);
  }
  return d;
}

std::string Trajectory::diagnostics_csv() const {
  std::string out = "t,snr,noise_intensity\n";
  char buf[128];
  const int T = static_cast<int>(diagnostics.size());
  for (int i = 0; i < T; ++i) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g\n", T - i,
                  diagnostics[i].snr, diagnostics[i].noise_intensity);
    out += buf;
  }
  return out;
}

nlohmann::json Trajectory::states_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const Vec& s : states) {
    nlohmann::json row = nlohmann::json::array();
    for (int k = 0; k < s.size(); ++k) row.push_back(s[k]);
    arr.push_back(std::move(row));
  }
  return arr;
}

Vec forward_sample(const NoiseSchedule& sched, const Vec& x0, int t,
                   RngStream& rng) {
  if (t < 1 || t > sched.T()) {
    throw std::out_of_range("forward_sample: t must lie in [1, T]");
  }
  const double ab = sched.alpha_bar(t);
  return std::sqrt(ab) * x0 +
         std::sqrt(1.0 - ab) * rng.normal_vec(static_cast<int>(x0.size()));
}

Vec forward_step(const NoiseSchedule& sched, const Vec& x_prev, int t,
                 RngStream& rng) {
  if (t < 1 || t > sched.T()) {
    throw std::out_of_range("forward_step: t must lie in [1, T]");
  }
  const double b = sched.beta(t);
  return std::sqrt(1.0 - b) * x_prev +
         std::sqrt(b) * rng.normal_vec(static_cast<int>(x_prev.size()));
}

double guided_reverse_step(const NoiseSchedule& sched, const GaussianJoint& j,
                           double x_t, double c, int t, RngStream& rng,
                           const ReverseStepOptions& opts) {
  if (t < 1 || t > sched.T()) {
    throw std::out_of_range("guided_reverse_step: t must lie in [1, T]");
  }
  const double ab_t = sched.alpha_bar(t);
  const double ab_prev = sched.alpha_bar(t - 1);
  const double beta_t = sched.beta(t);
  const double alpha_t = 1.0 - beta_t;

  // Marginal of x_t when x0 ~ N(mu_x, sigma_xx).
  const double mean_xt = std::sqrt(ab_t) * j.mu_x();
  const double var_xt = ab_t * j.sigma_xx() + (1.0 - ab_t);

  // MMSE clean estimate, then the standard posterior mean mu(x_t).
  const double x0_hat =
      j.mu_x() +
      (std::sqrt(ab_t) * j.sigma_xx() / var_xt) * (x_t - mean_xt);
  const double mu =
      (std::sqrt(ab_prev) * beta_t / (1.0 - ab_t)) * x0_hat +
      (std::sqrt(alpha_t) * (1.0 - ab_prev) / (1.0 - ab_t)) * x_t;

  const double sigma2 =
      opts.fixed_sigma2 ? *opts.fixed_sigma2 : sched.posterior_variance(t);

  double guidance = 0.0;
  if (opts.guided) {
    // (x_t, c) is jointly Gaussian with cov sqrt(ab_t) * sigma_xc, so
    // grad_{x_t} log p(c|x_t) is available in closed form.
    const double cov_tc = std::sqrt(ab_t) * j.sigma_xc();
    const double mean_c_given_xt =
        j.mu_c() + (cov_tc / var_xt) * (x_t - mean_xt);
    const double var_c_given_xt = j.sigma_cc() - cov_tc * cov_tc / var_xt;
    guidance = (c - mean_c_given_xt) * (cov_tc / var_xt) / var_c_given_xt;
  }

  // The noise draw is consumed even when sigma2 == 0 so that paired guided /
  // unguided runs stay in lockstep on a shared stream.
  const double eps = rng.normal();
  return mu + sigma2 * guidance + std::sqrt(sigma2) * eps;
}

Trajectory ddim_trajectory(const NoiseSchedule& sched, const Denoiser& denoiser,
                           const Vec& c, const Vec& z_T) {
  Trajectory traj;
  traj.states.reserve(sched.T() + 1);
  traj.states.push_back(z_T);
  Vec z = z_T;
  for (int t = sched.T(); t >= 1; --t) {
    z = denoiser(z, c, t);
    if (!z.allFinite()) {
      throw std::runtime_error("ddim_trajectory: non-finite state at t=" +
                               std::to_string(t));
    }
    traj.states.push_back(z);
  }
  const Vec& z0 = traj.states.back();
  traj.diagnostics.reserve(sched.T());
  for (int i = 0; i < sched.T(); ++i) {
    traj.diagnostics.push_back(snr_and_noise(traj.states[i], z0));
  }
  return traj;
}

Denoiser gaussian_posterior_denoiser(const GaussianJoint& j,
                                     const NoiseSchedule& sched) {
  return [j, sched](const Vec& z, const Vec& c, int t) -> Vec {
    const double ab_t = sched.alpha_bar(t);
    const double ab_prev = sched.alpha_bar(t - 1);
    const double v = j.conditional_variance();
    Vec out(z.size());
    for (int i = 0; i < z.size(); ++i) {
      const double ci = c.size() == z.size() ? c[i] : c[0];
      const double m = j.conditional_mean(ci);
      // Conjugate update of x0 ~ N(m, v) against z_t = sqrt(ab_t) x0 + noise.
      const double precision = 1.0 / v + ab_t / (1.0 - ab_t);
      const double x0_hat =
          (m / v + std::sqrt(ab_t) * z[i] / (1.0 - ab_t)) / precision;
      const double eps_hat =
          (z[i] - std::sqrt(ab_t) * x0_hat) / std::sqrt(1.0 - ab_t);
      out[i] = std::sqrt(ab_prev) * x0_hat +
               std::sqrt(1.0 - ab_prev) * eps_hat;
    }
    return out;
  };
}

}  // namespace condlab::diffusion
