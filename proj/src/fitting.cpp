#include "condlab/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace condlab {

LogLinearFit fit_log_linear(const std::vector<double>& x,
                            const std::vector<double>& y, double floor,
                            double cap) {
  if (x.size() != y.size()) {
    throw std::invalid_argument("fit_log_linear: size mismatch");
  }
  std::vector<double> xs, ls;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] > floor && y[i] <= cap && std::isfinite(y[i])) {
      xs.push_back(x[i]);
      ls.push_back(std::log(y[i]));
    }
  }
  LogLinearFit fit;
  fit.points_used = xs.size();
  if (xs.size() < 3) return fit;

  const double n = static_cast<double>(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ls[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ls[i];
    syy += ls[i] * ls[i];
  }
  const double denom = n * sxx - sx * sx;
  if (denom <= 0.0) return fit;
  const double slope = (n * sxy - sx * sy) / denom;
  const double icept = (sy - slope * sx) / n;
  double ss_res = 0, ss_tot = 0;
  const double mean_l = sy / n;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double pred = icept + slope * xs[i];
    ss_res += (ls[i] - pred) * (ls[i] - pred);
    ss_tot += (ls[i] - mean_l) * (ls[i] - mean_l);
  }
  fit.rate = std::exp(slope);
  fit.intercept = std::exp(icept);
  fit.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  fit.ok = true;
  return fit;
}

double GeometricFit::eval(double i) const {
  return M * std::pow(beta, i) + m;
}

namespace {

// For fixed beta, solve the 2x2 normal equations for (M, m) and return SSE.
double sse_for_beta(const std::vector<double>& y, double beta, double* M_out,
                    double* m_out) {
  const std::size_t n = y.size();
  double s_bb = 0, s_b1 = 0, s_by = 0, s_y = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double b = std::pow(beta, static_cast<double>(i));
    s_bb += b * b;
    s_b1 += b;
    s_by += b * y[i];
    s_y += y[i];
  }
  const double nn = static_cast<double>(n);
  const double det = s_bb * nn - s_b1 * s_b1;
  double M, m;
  if (std::abs(det) < 1e-300) {
    M = 0.0;
    m = s_y / nn;
  } else {
    M = (s_by * nn - s_b1 * s_y) / det;
    m = (s_y * s_bb - s_b1 * s_by) / det;
  }
  double sse = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (M * std::pow(beta, static_cast<double>(i)) + m);
    sse += r * r;
  }
  *M_out = M;
  *m_out = m;
  return sse;
}

}  // namespace

GeometricFit fit_geometric(const std::vector<double>& y) {
  if (y.size() < 3) {
    throw std::invalid_argument("fit_geometric: need at least 3 points");
  }
  constexpr double kBetaLo = 1e-3;
  constexpr double kBetaHi = 0.999;

  double best_beta = 0.5;
  double best_sse = std::numeric_limits<double>::infinity();
  double M = 0, m = 0;
  for (int g = 1; g <= 9; ++g) {
    const double beta = 0.1 * g;
    double Mg, mg;
    const double sse = sse_for_beta(y, beta, &Mg, &mg);
    if (sse < best_sse - 1e-15 ||
        (std::abs(sse - best_sse) <= 1e-15 && beta < best_beta)) {
      best_sse = sse;
      best_beta = beta;
    }
  }
  // Ternary refinement inside the bracketing grid cell.
  double lo = std::max(kBetaLo, best_beta - 0.1);
  double hi = std::min(kBetaHi, best_beta + 0.1);
  for (int it = 0; it < 80; ++it) {
    const double b1 = lo + (hi - lo) / 3.0;
    const double b2 = hi - (hi - lo) / 3.0;
    double M1, m1, M2, m2;
    const double s1 = sse_for_beta(y, b1, &M1, &m1);
    const double s2 = sse_for_beta(y, b2, &M2, &m2);
    if (s1 <= s2) {
      hi = b2;
    } else {
      lo = b1;
    }
  }
  best_beta = 0.5 * (lo + hi);
  best_sse = sse_for_beta(y, best_beta, &M, &m);

  GeometricFit fit;
  fit.M = M;
  fit.beta = best_beta;
  fit.m = m;
  double mean = 0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double ss_tot = 0;
  for (double v : y) ss_tot += (v - mean) * (v - mean);
  fit.r2 = ss_tot > 0.0 ? 1.0 - best_sse / ss_tot : 1.0;
  fit.rmse = std::sqrt(best_sse / static_cast<double>(y.size()));
  fit.ok = fit.r2 >= 0.9 && fit.beta > 0.0 && fit.beta < 1.0;
  return fit;
}

}  // namespace condlab
