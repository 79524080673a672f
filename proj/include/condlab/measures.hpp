#pragma once

// Foundational value types shared by every module: weighted particle clouds,
// the bivariate Gaussian joint, affine maps, and a splittable deterministic
// RNG stream. All types except RngStream are immutable after construction and
// safe to share across threads.

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace condlab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Deterministic counter-style stream built on the splitmix64 mixer.
/// Equal (seed, stream_id) reproduces byte-identical draw sequences; use
/// split() instead of sharing a stream across consumers.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0);

  std::uint64_t next_u64();
  /// Uniform draw in [0, 1), 53-bit resolution.
  double uniform();
  /// Standard normal via the Marsaglia polar method (rejection; the pair
  /// partner is discarded so the state stays a pure function of draw count).
  double normal();
  Vec normal_vec(int d);

  /// Derive an independent child stream; deterministic in (parent, child_index).
  RngStream split(std::uint64_t child_index) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  /// Generator identity recorded in experiment manifests.
  static const char* generator_id() { return "splitmix64-polar"; }

 private:
  std::uint64_t state_;
  std::uint64_t seed_;
  std::uint64_t stream_id_;
};

/// Weighted particle cloud in R^d. Weights are non-negative and sum to 1
/// within 1e-12; every point shares the same dimension d >= 1.
class EmpiricalMeasure {
 public:
  /// Default: the Dirac at 0 in R^1 (a valid placeholder for aggregate
  /// members that are assigned before use).
  EmpiricalMeasure();
  EmpiricalMeasure(std::vector<Vec> points, std::vector<double> weights);

  /// Uniform weights 1/k, exact to the last bit of the reciprocal.
  static EmpiricalMeasure uniform(std::vector<Vec> points);
  /// Convenience for 1-D clouds.
  static EmpiricalMeasure uniform_1d(const std::vector<double>& values);
  static EmpiricalMeasure dirac(Vec point);

  int dim() const { return dim_; }
  std::size_t size() const { return points_.size(); }
  const std::vector<Vec>& points() const { return points_; }
  const std::vector<double>& weights() const { return weights_; }
  const Vec& point(std::size_t i) const { return points_[i]; }
  double weight(std::size_t i) const { return weights_[i]; }

  Vec mean() const;

  nlohmann::json to_json() const;
  static EmpiricalMeasure from_json(const nlohmann::json& j);

 private:
  std::vector<Vec> points_;
  std::vector<double> weights_;
  int dim_;
};

/// Sum_i w_i ||p_i||^2 — the second moment that must stay finite for the
/// measure to live in P_2.
double second_moment(const EmpiricalMeasure& m);

/// Bivariate Gaussian over (x, c). The covariance matrix must be positive
/// definite; the determinant check uses tolerance 1e-12 because downstream
/// code divides by the conditional variance.
class GaussianJoint {
 public:
  GaussianJoint(double mu_x, double mu_c, double sigma_xx, double sigma_cc,
                double sigma_xc);

  double mu_x() const { return mu_x_; }
  double mu_c() const { return mu_c_; }
  double sigma_xx() const { return sigma_xx_; }
  double sigma_cc() const { return sigma_cc_; }
  double sigma_xc() const { return sigma_xc_; }

  /// mu_x + (sigma_xc/sigma_cc)(c - mu_c)
  double conditional_mean(double c) const;
  /// sigma_xx - sigma_xc^2/sigma_cc; does not depend on c.
  double conditional_variance() const;
  /// E[c|x] and Var[c|x] for the reversed conditioning.
  double posterior_mean_c(double x) const;
  double posterior_variance_c() const;

 private:
  double mu_x_, mu_c_, sigma_xx_, sigma_cc_, sigma_xc_;
};

struct ConditionalGaussian {
  double mean;
  double variance;
};

/// Closed-form p(x|c) parameters of the joint.
ConditionalGaussian gaussian_conditional(const GaussianJoint& j, double c);

/// Affine map x -> A x + b. Used as the configurable inverse process; its
/// Jacobian is the constant matrix A, so the Frobenius penalty is a constant.
struct LinearMap {
  Mat A;
  Vec b;

  Vec operator()(const Vec& x) const;
  double frobenius_norm() const { return A.norm(); }
  static LinearMap identity(int d);
};

}  // namespace condlab
