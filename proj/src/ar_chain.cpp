#include "condlab/ar_chain.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>

#include "condlab/gaussian_lab.hpp"

namespace condlab::ar_chain {

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

Mat companion_matrix_of(const std::vector<double>& coeffs) {
  const int p = static_cast<int>(coeffs.size());
  Mat A = Mat::Zero(p, p);
  for (int j = 0; j < p; ++j) A(0, j) = coeffs[j];
  for (int i = 1; i < p; ++i) A(i, i - 1) = 1.0;
  return A;
}

double spectral_radius_of(const Mat& A) {
  // The companion block is tiny (order p), so the exact eigensolver is both
  // cheaper and more reliable than iterating; complex-pair dominant roots are
  // common for p >= 2.
  Eigen::EigenSolver<Mat> es(A, /*computeEigenvectors=*/false);
  double rho = 0.0;
  for (int i = 0; i < A.rows(); ++i) {
    rho = std::max(rho, std::abs(es.eigenvalues()[i]));
  }
  return rho;
}

}  // namespace

ArModel::ArModel(std::vector<double> coeffs_in, double noise_std_in)
    : coeffs(std::move(coeffs_in)), noise_std(noise_std_in) {
  if (coeffs.empty()) {
    throw std::invalid_argument("ArModel: need at least one coefficient");
  }
  for (double a : coeffs) {
    if (!(std::abs(a) < 1.0)) {
      throw std::invalid_argument("ArModel: require max|a_i| < 1");
    }
  }
  if (!(noise_std >= 0.0)) {
    throw std::invalid_argument("ArModel: noise_std must be >= 0");
  }
  const double rho = spectral_radius_of(companion_matrix_of(coeffs));
  if (!(rho < 1.0)) {
    throw std::invalid_argument("ArModel: companion spectral radius >= 1");
  }
}

CompanionMatrix companion(const ArModel& model) {
  CompanionMatrix cm;
  cm.A = companion_matrix_of(model.coeffs);
  cm.spectral_radius = spectral_radius_of(cm.A);
  return cm;
}

std::vector<double> simulate(const ArModel& model,
                             const std::vector<double>& c0, long n,
                             RngStream& rng) {
  if (n < 1) throw std::invalid_argument("simulate: n >= 1");
  const int p = model.order();
  if (static_cast<int>(c0.size()) != p) {
    throw std::invalid_argument("simulate: initial state must have length p");
  }
  std::deque<double> state(c0.begin(), c0.end());  // most recent first
  std::vector<double> out;
  out.reserve(n + 1);
  out.push_back(state.front());
  for (long i = 0; i < n; ++i) {
    double next = 0.0;
    for (int j = 0; j < p; ++j) next += model.coeffs[j] * state[j];
    next += model.noise_std * rng.normal();
    state.push_front(next);
    state.pop_back();
    out.push_back(next);
  }
  return out;
}

double tv_gaussian_1d(double m1, double v1, double m2, double v2) {
  constexpr double kTinyVar = 1e-300;
  if (v1 <= kTinyVar && v2 <= kTinyVar) {
    return m1 == m2 ? 0.0 : 1.0;
  }
  if (v1 <= kTinyVar || v2 <= kTinyVar) {
    return 1.0;  // a point mass is singular w.r.t. any continuous law
  }
  const double s1 = std::sqrt(v1);
  const double s2 = std::sqrt(v2);
  auto F1 = [&](double x) { return normal_cdf((x - m1) / s1); };
  auto F2 = [&](double x) { return normal_cdf((x - m2) / s2); };
  // Density crossings solve A x^2 + B x + C = 0.
  const double A = 0.5 * (1.0 / v2 - 1.0 / v1);
  const double B = m1 / v1 - m2 / v2;
  const double C =
      m2 * m2 / (2.0 * v2) - m1 * m1 / (2.0 * v1) - 0.5 * std::log(v1 / v2);
  std::vector<double> roots;
  if (std::abs(A) < 1e-14) {
    if (std::abs(B) < 1e-14) return 0.0;  // identical laws
    roots.push_back(-C / B);
  } else {
    const double disc = B * B - 4.0 * A * C;
    if (disc <= 0.0) {
      // One density dominates everywhere except a tangency point.
      return 0.0;
    }
    const double sq = std::sqrt(disc);
    roots.push_back((-B - sq) / (2.0 * A));
    roots.push_back((-B + sq) / (2.0 * A));
    std::sort(roots.begin(), roots.end());
  }
  // Between crossings the sign of p1 - p2 is constant, so TV is half the sum
  // of absolute CDF-difference increments over the segments.
  double tv = 0.0;
  double prev1 = 0.0, prev2 = 0.0;
  for (double r : roots) {
    const double c1 = F1(r), c2 = F2(r);
    tv += std::abs((c1 - prev1) - (c2 - prev2));
    prev1 = c1;
    prev2 = c2;
  }
  tv += std::abs((1.0 - prev1) - (1.0 - prev2));
  return 0.5 * tv;
}

namespace {

double histogram_tv(const std::vector<double>& xs, const std::vector<double>& ys,
                    int bins) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (double v : xs) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  for (double v : ys) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (!(hi > lo)) return 0.0;
  const double width = (hi - lo) / bins;
  std::vector<double> px(bins, 0.0), py(bins, 0.0);
  auto bin_of = [&](double v) {
    int b = static_cast<int>((v - lo) / width);
    return std::clamp(b, 0, bins - 1);
  };
  for (double v : xs) px[bin_of(v)] += 1.0 / xs.size();
  for (double v : ys) py[bin_of(v)] += 1.0 / ys.size();
  double tv = 0.0;
  for (int b = 0; b < bins; ++b) tv += std::abs(px[b] - py[b]);
  return 0.5 * tv;
}

}  // namespace

ErgodicityReport ergodicity_check(const ArModel& model, GaussianInit mu1,
                                  GaussianInit mu2, int n_steps, int n_paths,
                                  RngStream& rng) {
  if (n_paths < 1000) {
    throw std::invalid_argument("ergodicity_check: n_paths >= 1000");
  }
  if (n_steps < 1) throw std::invalid_argument("ergodicity_check: n_steps >= 1");
  const int p = model.order();

  // ensembles[e][r] is the state (most recent first) of path r of ensemble e.
  std::vector<std::vector<std::deque<double>>> ensembles(2);
  const GaussianInit inits[2] = {mu1, mu2};
  for (int e = 0; e < 2; ++e) {
    ensembles[e].reserve(n_paths);
    for (int r = 0; r < n_paths; ++r) {
      const double c = inits[e].mean + inits[e].stddev * rng.normal();
      ensembles[e].emplace_back(p, c);
    }
  }

  const bool exact = p == 1;
  double em[2] = {mu1.mean, mu2.mean};
  double ev[2] = {mu1.stddev * mu1.stddev, mu2.stddev * mu2.stddev};
  const double a = model.coeffs[0];
  const double s2 = model.noise_std * model.noise_std;

  ErgodicityReport report;
  report.exact_available = exact;
  std::vector<double> cur[2];
  cur[0].resize(n_paths);
  cur[1].resize(n_paths);
  for (int step = 0; step <= n_steps; ++step) {
    for (int e = 0; e < 2; ++e) {
      for (int r = 0; r < n_paths; ++r) cur[e][r] = ensembles[e][r].front();
    }
    TvRecord rec;
    rec.step = step;
    rec.tv_hist = histogram_tv(cur[0], cur[1], 64);
    rec.tv_exact = exact ? tv_gaussian_1d(em[0], ev[0], em[1], ev[1])
                         : std::numeric_limits<double>::quiet_NaN();
    report.records.push_back(rec);
    if (step == n_steps) break;
    for (int e = 0; e < 2; ++e) {
      for (int r = 0; r < n_paths; ++r) {
        auto& st = ensembles[e][r];
        double next = 0.0;
        for (int j = 0; j < p; ++j) next += model.coeffs[j] * st[j];
        next += model.noise_std * rng.normal();
        st.push_front(next);
        st.pop_back();
      }
      if (exact) {
        em[e] = a * em[e];
        ev[e] = a * a * ev[e] + s2;
      }
    }
  }

  std::vector<double> steps, hist, ex;
  for (const TvRecord& r : report.records) {
    steps.push_back(static_cast<double>(r.step));
    hist.push_back(r.tv_hist);
    ex.push_back(r.tv_exact);
  }
  // Skip the saturated head (TV near 1 carries no rate information) and the
  // floor: histogram noise for the empirical curve, 1e-12 for the exact one.
  report.hist_fit = fit_log_linear(steps, hist, 0.1, 0.9);
  if (exact) report.exact_fit = fit_log_linear(steps, ex, 1e-12, 0.9);
  return report;
}

DecayReport gradient_norm_decay(const ArModel& model, const GaussianJoint& joint,
                                const std::vector<double>& x_grid,
                                const std::vector<double>& c0, int n_iters,
                                int n_paths, RngStream& rng) {
  if (x_grid.empty()) {
    throw std::invalid_argument("gradient_norm_decay: empty x_grid");
  }
  if (n_iters < 2 || n_paths < 1) {
    throw std::invalid_argument("gradient_norm_decay: need n_iters >= 2, n_paths >= 1");
  }
  const int m = n_iters + 1;
  std::vector<double> sum(m, 0.0), sum2(m, 0.0), mx(m, 0.0);
  for (int r = 0; r < n_paths; ++r) {
    RngStream path_rng = rng.split(static_cast<std::uint64_t>(r));
    const std::vector<double> chain = simulate(model, c0, n_iters, path_rng);
    for (int i = 0; i < m; ++i) {
      double sup = 0.0;
      for (double x : x_grid) {
        sup = std::max(
            sup, std::abs(gaussian_lab::conditional_score(joint, x, chain[i])));
      }
      sum[i] += sup;
      sum2[i] += sup * sup;
      mx[i] = std::max(mx[i], sup);
    }
  }
  DecayReport report;
  report.mean_norms.resize(m);
  report.max_norms = mx;
  report.path_std.resize(m);
  for (int i = 0; i < m; ++i) {
    const double mean = sum[i] / n_paths;
    report.mean_norms[i] = mean;
    report.path_std[i] =
        std::sqrt(std::max(0.0, sum2[i] / n_paths - mean * mean));
  }
  report.fit = fit_geometric(report.mean_norms);
  return report;
}

SubspaceSpec::SubspaceSpec(std::vector<Vec> basis_in, int ambient_dim_in)
    : basis(std::move(basis_in)), ambient_dim(ambient_dim_in) {
  if (ambient_dim < 1) {
    throw std::invalid_argument("SubspaceSpec: ambient dimension >= 1");
  }
  if (static_cast<int>(basis.size()) > ambient_dim) {
    throw std::invalid_argument("SubspaceSpec: K must be <= d");
  }
  for (std::size_t i = 0; i < basis.size(); ++i) {
    if (basis[i].size() != ambient_dim) {
      throw std::invalid_argument("SubspaceSpec: basis dimension mismatch");
    }
    for (std::size_t j = 0; j <= i; ++j) {
      const double dot = basis[i].dot(basis[j]);
      const double want = i == j ? 1.0 : 0.0;
      if (std::abs(dot - want) > 1e-10) {
        throw std::invalid_argument("SubspaceSpec: basis not orthonormal");
      }
    }
  }
}

Projection project_extraneous(const Vec& c, const SubspaceSpec& sub) {
  if (c.size() != sub.ambient_dim) {
    throw std::invalid_argument("project_extraneous: dimension mismatch");
  }
  Vec ideal = Vec::Zero(sub.ambient_dim);
  for (const Vec& v : sub.basis) ideal += c.dot(v) * v;
  return {ideal, c - ideal};
}

ExtraneousEnergy extraneous_energy(
    const std::function<Vec(const Vec&)>& transition, const Mat& noise_cov,
    const SubspaceSpec& sub, const std::vector<Vec>& c_prev_samples) {
  if (c_prev_samples.empty()) {
    throw std::invalid_argument("extraneous_energy: empty sample list");
  }
  if (noise_cov.rows() != sub.ambient_dim ||
      noise_cov.cols() != sub.ambient_dim) {
    throw std::invalid_argument("extraneous_energy: covariance dimension");
  }
  ExtraneousEnergy out;
  for (const Vec& c : c_prev_samples) {
    const Vec phi = transition(c);
    out.propagated += project_extraneous(phi, sub).eta.squaredNorm();
  }
  out.propagated /= static_cast<double>(c_prev_samples.size());
  out.noise_trace_full = noise_cov.trace();
  // tr((I - pi) Cov) = tr(Cov) - sum_k v_k' Cov v_k.
  double inside = 0.0;
  for (const Vec& v : sub.basis) inside += v.dot(noise_cov * v);
  out.noise_trace_outside = out.noise_trace_full - inside;
  out.total_as_written = out.propagated + out.noise_trace_full;
  out.total_projected = out.propagated + out.noise_trace_outside;
  return out;
}

}  // namespace condlab::ar_chain
