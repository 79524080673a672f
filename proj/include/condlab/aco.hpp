#pragma once

// End-to-end autoregressive condition optimization: per outer iteration a
// deterministic denoising trajectory, inverse-process alignment, a composite
// cost entropic OT solve, per-particle gradient assembly with clipping, and
// the condition update. Includes the EMA latent target buffer and the
// warmup learning-rate schedule.

#include <deque>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "condlab/diffusion.hpp"
#include "condlab/measures.hpp"

namespace condlab::aco {

struct AcoConfig {
  int K = 50;               // outer iterations
  int T = 40;               // diffusion steps
  double lambda_cost = 1.0;  // condition-consistency weight in the cost
  double alpha = 0.0;        // Jacobian penalty weight in the alignment value
  double eps_min = 0.05;
  double eps_max = 0.5;
  int K_sink = 200;
  double eta0 = 0.2;
  int k_warm = 100;
  double clip_tau = 10.0;
  double nu = 0.1;       // EMA mixing rate
  int buffer_B = 2048;   // EMA ring capacity
  double sinkhorn_tol = 1e-6;

  void validate() const;
};

/// eta_k = eta0 * min(1, sqrt(k_warm / k)); k = 0 maps to eta0.
double lr_schedule(int k, double eta0, int k_warm);

struct Alignment {
  double value = 0.0;
  Vec grad_c;
};

/// phi(c) = ||c - t_inv(z0)||^2 + alpha ||A||_F^2 for the affine inverse map
/// (the Jacobian term is constant in c); grad_c = 2 (c - t_inv(z0)).
Alignment inverse_alignment(const Vec& c, const Vec& z0, const LinearMap& t_inv,
                            double alpha);

/// Ring buffer of generated latents with an exponentially mixed empirical
/// target: after each update, target = (1 - nu) * old + nu * uniform(buffer),
/// with weights below 1e-12 compacted away.
struct EmaBuffer {
  int capacity = 0;
  double nu = 0.1;
  std::deque<Vec> buffer;
  std::optional<EmpiricalMeasure> target;

  EmaBuffer(int capacity, double nu);
};

EmaBuffer ema_update(EmaBuffer buf, const std::vector<Vec>& new_latents);

struct IterationDiagnostics {
  int k = 0;
  double epsilon = 0.0;
  double eta = 0.0;
  double ot_loss = 0.0;   // <gamma, C> of the composite-cost plan
  double reg_loss = 0.0;  // particle-mean alignment value
  double grad_norm_preclip = 0.0;   // max over particles
  double grad_norm_postclip = 0.0;  // max over particles
  double w2_c_to_target = 0.0;      // conditions vs pulled-back target
  double w2_z_to_target = 0.0;      // generated latents vs target
  bool sinkhorn_converged = true;
};

struct AcoState {
  EmpiricalMeasure conditions;          // c^(K)
  diffusion::Trajectory latent_trajectory;  // final outer iteration
  std::vector<IterationDiagnostics> diagnostics;
  std::vector<std::string> warnings;

  /// CSV with one row per outer iteration (17 significant digits).
  std::string diagnostics_csv() const;
};

using TargetSource = std::variant<EmpiricalMeasure, EmaBuffer>;

/// Runs K outer iterations from c0. Conditions and latents are paired
/// one-to-one by particle index; the initial latent noise is drawn once and
/// reused across outer iterations. Sinkhorn non-convergence is recorded as a
/// warning, never fatal; non-finite state aborts.
AcoState aco_run(const AcoConfig& cfg, const EmpiricalMeasure& c0,
                 const diffusion::Denoiser& denoiser, const LinearMap& t_inv,
                 TargetSource target_source, RngStream& rng);

struct LyapunovReport {
  std::vector<std::pair<int, double>> values;  // (k, V_k)
  int increases = 0;  // count of V_{k+1} > V_k + 1e-9 + slack
  double slack = 0.0;
};

/// V_k = W2(P_z^(k), P_z*) + lambda_reg * mean alignment value, from the
/// recorded diagnostics. The slack term sqrt(eps_k) absorbs the entropic bias
/// scale on the W2 axis.
LyapunovReport lyapunov_trace(const AcoState& state, double lambda_reg);

}  // namespace condlab::aco
