#pragma once

// Entropic optimal transport: cost matrices (plain squared-Euclidean or the
// composite latent-matching + condition-consistency form), log-domain
// Sinkhorn, the debiased Sinkhorn divergence, an exact 1-D Wasserstein
// oracle, and the iteration-error decay measurement.

#include <string>
#include <vector>

#include "condlab/fitting.hpp"
#include "condlab/measures.hpp"
#include "json.hpp"

namespace condlab::ot {

struct CostMatrix {
  Mat entries;
  std::string provenance;  // "sq_euclidean" or "composite(lambda=...)"
};

/// C_mn = ||z_m - z*_n||^2, plus lambda ||c_m - t_inv(z*_n)||^2 when a
/// condition cloud is supplied (z and c must then have equal particle
/// counts).
CostMatrix cost_matrix(const EmpiricalMeasure& z,
                       const EmpiricalMeasure& z_star,
                       const EmpiricalMeasure* c = nullptr,
                       const LinearMap* t_inv = nullptr, double lambda = 0.0);

/// Coupling gamma = diag(u) K_eps diag(v) with its scaling vectors and dual
/// potentials (f, g referenced against a (x) b, so gamma_mn =
/// a_m b_n exp((f_m + g_n - C_mn)/eps)). Row sums match a exactly because the
/// final half-iteration updates f; column error is whatever the stopping rule
/// left.
struct TransportPlan {
  Mat gamma;
  Vec u, v;
  Vec f, g;
  double epsilon = 0.0;
  int iterations_used = 0;
  double row_error = 0.0;  // L1
  double col_error = 0.0;  // L1
  bool converged = false;

  /// <gamma, C>: the unregularized transport cost of the plan.
  double transport_cost(const CostMatrix& cost) const;
  /// <gamma, C> + eps * KL(gamma | a (x) b): the entropic objective value.
  double entropic_cost(const CostMatrix& cost) const;

  /// {gamma row-major, epsilon, iterations_used, marginal_errors}; throws
  /// std::length_error past 4e6 entries.
  nlohmann::json to_json() const;
};

inline constexpr int kDefaultSinkhornIters = 200;
inline constexpr double kDefaultSinkhornTol = 1e-6;

/// Log-domain Sinkhorn. Stops when the column-marginal L1 error falls below
/// tol or after max_iters full sweeps; a non-converged plan is still returned
/// with converged = false. Single-support inputs shortcut to the unique
/// feasible plan without iterating.
TransportPlan sinkhorn(const CostMatrix& cost, const Vec& a, const Vec& b,
                       double epsilon, int max_iters = kDefaultSinkhornIters,
                       double tol = kDefaultSinkhornTol);

/// Epsilon-annealed solve for sharp regularization: runs a cascade of plain
/// Sinkhorn stages from a large epsilon down to eps_target (halving each
/// stage), warm-starting the dual potentials. Far cheaper than a cold solve
/// when eps_target is small against the cost scale. iterations_used counts
/// all inner sweeps; converged reflects the final stage.
TransportPlan sinkhorn_annealed(const CostMatrix& cost, const Vec& a,
                                const Vec& b, double eps_target,
                                int stage_iters = 150, double tol = 1e-9);

/// eps^(k) = eps_max - (eps_max - eps_min) * k / K, indexed by the outer
/// refinement iteration k in [0, K].
double adaptive_epsilon(int k, int K, double eps_min, double eps_max);

/// Debiased divergence S(p, q) = OT_eps(p,q) - OT_eps(p,p)/2 - OT_eps(q,q)/2
/// with OT_eps the entropic objective value; non-negative, zero at p = q, and
/// exactly symmetric (arguments are canonically ordered before solving).
double sinkhorn_divergence(const EmpiricalMeasure& p, const EmpiricalMeasure& q,
                           double epsilon, int max_iters = 20000,
                           double tol = 1e-9);

/// Exact 2-Wasserstein distance between 1-D measures via the sorted quantile
/// coupling. Rejects d > 1.
double w2_exact_1d(const EmpiricalMeasure& p, const EmpiricalMeasure& q);

struct ErrorDecayPoint {
  int k = 0;
  double frobenius_error = 0.0;
};

struct ErrorDecayReport {
  std::vector<ErrorDecayPoint> points;
  LogLinearFit fit;  // fitted per-iteration rate; expected < 1
};

/// ||gamma^(k) - gamma*||_F per k, with gamma* computed at 10x the largest
/// requested iteration count. The log-linear fit skips the numerical plateau
/// below 1e-13.
ErrorDecayReport sinkhorn_error_decay(const CostMatrix& cost, const Vec& a,
                                      const Vec& b, double epsilon,
                                      const std::vector<int>& k_list);

}  // namespace condlab::ot
