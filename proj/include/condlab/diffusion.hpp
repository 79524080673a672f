#pragma once

// Noise schedules, forward corruption, the guided reverse step on the
// Gaussian toy, and deterministic DDIM-style trajectories with SNR /
// noise-intensity instrumentation.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "condlab/measures.hpp"
#include "json.hpp"

namespace condlab::diffusion {

/// Variance schedule beta_1..beta_T with cumulative products
/// alpha_bar_t = prod_{s<=t}(1 - beta_s), alpha_bar_0 = 1. Every beta_t must
/// lie in (0, 1) and alpha_bar must be strictly decreasing; monotone betas
/// are not required (cosine schedules violate that).
class NoiseSchedule {
 public:
  static NoiseSchedule from_betas(std::vector<double> betas);

  int T() const { return static_cast<int>(betas_.size()); }
  double beta(int t) const;       // t in [1, T]
  double alpha_bar(int t) const;  // t in [0, T]
  const std::vector<double>& betas() const { return betas_; }
  const std::vector<double>& alpha_bars() const { return alpha_bars_; }

  /// beta_t (1 - alpha_bar_{t-1}) / (1 - alpha_bar_t), the reverse posterior
  /// variance; zero at t = 1.
  double posterior_variance(int t) const;

 private:
  NoiseSchedule() = default;
  std::vector<double> betas_;
  std::vector<double> alpha_bars_;  // size T+1, index 0 holds 1
};

/// Cosine alpha_bar shape with offset s = 0.008 and betas clipped to 0.999;
/// alpha_bar is rebuilt from the clipped betas so the invariants hold.
NoiseSchedule cosine_schedule(int T);

struct StepDiagnostics {
  double snr = 0.0;
  double noise_intensity = 0.0;
};

/// snr = ||z0_ref||^2 / ||z_t - z0_ref||^2, noise = ||z_t - z0_ref|| / sqrt(d).
/// Both formulas are fixed artifact conventions. snr is +inf when the
/// residual norm drops below 1e-15.
StepDiagnostics snr_and_noise(const Vec& z_t, const Vec& z0_ref);

/// States indexed t = T..0 (length T+1) plus per-step diagnostics measured at
/// the pre-step states t = T..1 against the trajectory's own final state.
struct Trajectory {
  std::vector<Vec> states;
  std::vector<StepDiagnostics> diagnostics;

  int T() const { return static_cast<int>(diagnostics.size()); }
  const Vec& initial() const { return states.front(); }
  const Vec& final_state() const { return states.back(); }

  /// CSV columns t, snr, noise_intensity (17 significant digits).
  std::string diagnostics_csv() const;
  nlohmann::json states_json() const;
};

/// Closed-form forward draw x_t = sqrt(ab_t) x0 + sqrt(1 - ab_t) eps.
Vec forward_sample(const NoiseSchedule& sched, const Vec& x0, int t,
                   RngStream& rng);

/// Single forward kernel application q(x_t | x_{t-1}).
Vec forward_step(const NoiseSchedule& sched, const Vec& x_prev, int t,
                 RngStream& rng);

struct ReverseStepOptions {
  /// Override the posterior variance with a constant sigma^2 (the
  /// small-variance idealization); nullopt keeps the schedule's value.
  std::optional<double> fixed_sigma2{};
  bool guided = true;
};

/// One stochastic reverse step on the scalar Gaussian toy:
///   x_{t-1} = mu(x_t) + sigma_t^2 * grad_x log p(c | x_t) + sigma_t * eps.
/// mu(x_t) is the unconditional posterior mean (analytic because x0 is
/// Gaussian); with guided = false the additive term is dropped and the same
/// noise draw is consumed, so paired runs differ by exactly the guidance.
double guided_reverse_step(const NoiseSchedule& sched, const GaussianJoint& j,
                           double x_t, double c, int t, RngStream& rng,
                           const ReverseStepOptions& opts = {});

/// Per-step denoiser z_{t-1} = D_t(z_t, c). The condition vector is paired
/// elementwise with z when sizes match, else c[0] broadcasts.
using Denoiser = std::function<Vec(const Vec& z, const Vec& c, int t)>;

/// Deterministic trajectory z_T -> z_0 under the given denoiser; records SNR
/// and noise intensity per step. Bit-identical across reruns with equal
/// inputs.
Trajectory ddim_trajectory(const NoiseSchedule& sched, const Denoiser& denoiser,
                           const Vec& c, const Vec& z_T);

/// DDIM (eta = 0) update family with the exact Gaussian posterior mean
/// E[x0 | z_t, c] of the joint as the x0 estimate, applied elementwise.
Denoiser gaussian_posterior_denoiser(const GaussianJoint& j,
                                     const NoiseSchedule& sched);

}  // namespace condlab::diffusion
