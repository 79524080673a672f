#pragma once

// The autoregressive condition process c_{i+1} = sum_j a_j c_{i-j} + eps, its
// companion-matrix state space, empirical geometric ergodicity in total
// variation, the gradient-norm decay measurement, and the orthogonal
// decomposition of conditions into ideal and extraneous components.

#include <functional>
#include <vector>

#include "condlab/fitting.hpp"
#include "condlab/measures.hpp"

namespace condlab::ar_chain {

/// Order-p autoregression with i.i.d. N(0, sigma^2) innovations. Requires
/// max|a_i| < 1 and companion spectral radius < 1; sigma = 0 is allowed for
/// the deterministic limit.
struct ArModel {
  std::vector<double> coeffs;
  double noise_std = 1.0;

  ArModel(std::vector<double> coeffs, double noise_std);
  int order() const { return static_cast<int>(coeffs.size()); }
};

/// First row holds the coefficients, the subdiagonal is 1, everything else 0.
struct CompanionMatrix {
  Mat A;
  double spectral_radius = 0.0;
};

CompanionMatrix companion(const ArModel& model);

/// Trajectory of length n+1; c0 is the initial state (most recent value
/// first, length = order).
std::vector<double> simulate(const ArModel& model, const std::vector<double>& c0,
                             long n, RngStream& rng);

/// Gaussian (or, with stddev = 0, point-mass) initial law for the chain.
struct GaussianInit {
  double mean = 0.0;
  double stddev = 0.0;
};

struct TvRecord {
  int step = 0;
  double tv_hist = 0.0;   // 64-bin histogram estimate from the two ensembles
  double tv_exact = 0.0;  // exact Gaussian-law value (order-1 models only)
};

struct ErgodicityReport {
  std::vector<TvRecord> records;
  LogLinearFit hist_fit;
  LogLinearFit exact_fit;
  bool exact_available = false;
};

/// Exact total variation between two 1-D Gaussians (point masses allowed via
/// zero variance).
double tv_gaussian_1d(double m1, double v1, double m2, double v2);

/// Evolves two particle ensembles from the two initial laws and records the
/// histogram TV per step; for AR(1) both laws stay Gaussian, so the exact TV
/// is reported alongside and fitted. Fits skip the saturated head (tv > 0.9)
/// and the noise floor.
ErgodicityReport ergodicity_check(const ArModel& model, GaussianInit mu1,
                                  GaussianInit mu2, int n_steps, int n_paths,
                                  RngStream& rng);

/// Decay fit of the path-averaged sup-over-grid conditional score norm
/// against iteration, y_i ~ M beta^i + m.
struct DecayReport {
  GeometricFit fit;
  std::vector<double> mean_norms;  // per iteration, averaged over paths
  std::vector<double> max_norms;   // per iteration, max over paths
  std::vector<double> path_std;    // per iteration ensemble std
};

/// Couples the AR chain to the Gaussian joint by letting c_i shift the
/// conditioning value while the covariance structure stays fixed. c0 is the
/// shared initial state of every path.
DecayReport gradient_norm_decay(const ArModel& model, const GaussianJoint& joint,
                                const std::vector<double>& x_grid,
                                const std::vector<double>& c0, int n_iters,
                                int n_paths, RngStream& rng);

/// Orthonormal basis v_1..v_K spanning the ideal-information subspace inside
/// R^d; orthonormality is validated to 1e-10.
struct SubspaceSpec {
  std::vector<Vec> basis;
  int ambient_dim = 0;

  SubspaceSpec(std::vector<Vec> basis, int ambient_dim);
  int K() const { return static_cast<int>(basis.size()); }
};

struct Projection {
  Vec ideal;
  Vec eta;
};

/// ideal = sum_k <c, v_k> v_k, eta = c - ideal; the two parts are orthogonal.
Projection project_extraneous(const Vec& c, const SubspaceSpec& sub);

/// E||eta||^2 decomposition: the propagated term E||(I - pi) Phi(c_prev)||^2
/// plus the noise trace. total_as_written adds the full tr(Cov) as the
/// formula states; total_projected restricts the trace to the orthogonal
/// complement, flagged separately because only that part is extraneous.
struct ExtraneousEnergy {
  double propagated = 0.0;
  double noise_trace_full = 0.0;
  double noise_trace_outside = 0.0;
  double total_as_written = 0.0;
  double total_projected = 0.0;
};

ExtraneousEnergy extraneous_energy(
    const std::function<Vec(const Vec&)>& transition, const Mat& noise_cov,
    const SubspaceSpec& sub, const std::vector<Vec>& c_prev_samples);

}  // namespace condlab::ar_chain
