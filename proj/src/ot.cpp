#include "condlab/ot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace condlab::ot {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Vec log_weights(const Vec& w) {
  Vec lw(w.size());
  for (int i = 0; i < w.size(); ++i) {
    lw[i] = w[i] > 0.0 ? std::log(w[i]) : kNegInf;
  }
  return lw;
}

// log sum_i exp(x_i), tolerating -inf entries.
double log_sum_exp(const Vec& x) {
  double mx = kNegInf;
  for (int i = 0; i < x.size(); ++i) mx = std::max(mx, x[i]);
  if (mx == kNegInf) return kNegInf;
  double s = 0.0;
  for (int i = 0; i < x.size(); ++i) {
    if (x[i] != kNegInf) s += std::exp(x[i] - mx);
  }
  return mx + std::log(s);
}

void validate_weights(const Vec& w, const char* name) {
  double total = 0.0;
  for (int i = 0; i < w.size(); ++i) {
    if (!(w[i] >= 0.0) || !std::isfinite(w[i])) {
      throw std::invalid_argument(std::string("sinkhorn: negative weight in ") +
                                  name);
    }
    total += w[i];
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw std::invalid_argument(std::string("sinkhorn: ") + name +
                                " must sum to 1");
  }
}

}  // namespace

CostMatrix cost_matrix(const EmpiricalMeasure& z,
                       const EmpiricalMeasure& z_star,
                       const EmpiricalMeasure* c, const LinearMap* t_inv,
                       double lambda) {
  if (z.dim() != z_star.dim()) {
    throw std::invalid_argument("cost_matrix: latent dimension mismatch");
  }
  const std::size_t m = z.size();
  const std::size_t n = z_star.size();
  CostMatrix out;
  out.entries.resize(m, n);
  if (c != nullptr) {
    if (t_inv == nullptr) {
      throw std::invalid_argument(
          "cost_matrix: condition term requires the inverse map");
    }
    if (lambda < 0.0) {
      throw std::invalid_argument("cost_matrix: lambda must be >= 0");
    }
    if (c->size() != m) {
      throw std::invalid_argument(
          "cost_matrix: condition and latent particle counts differ");
    }
    std::vector<Vec> pulled(n);
    for (std::size_t j = 0; j < n; ++j) pulled[j] = (*t_inv)(z_star.point(j));
    if (!pulled.empty() && pulled[0].size() != c->dim()) {
      throw std::invalid_argument(
          "cost_matrix: t_inv output dimension does not match conditions");
    }
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        out.entries(i, j) =
            (z.point(i) - z_star.point(j)).squaredNorm() +
            lambda * (c->point(i) - pulled[j]).squaredNorm();
      }
    }
    out.provenance = "composite(lambda=" + std::to_string(lambda) + ")";
  } else {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        out.entries(i, j) = (z.point(i) - z_star.point(j)).squaredNorm();
      }
    }
    out.provenance = "sq_euclidean";
  }
  return out;
}

double TransportPlan::transport_cost(const CostMatrix& cost) const {
  return gamma.cwiseProduct(cost.entries).sum();
}

double TransportPlan::entropic_cost(const CostMatrix& cost) const {
  // KL(gamma | a (x) b) = sum gamma_mn (f_m + g_n - C_mn) / eps.
  double kl = 0.0;
  for (int i = 0; i < gamma.rows(); ++i) {
    for (int j = 0; j < gamma.cols(); ++j) {
      if (gamma(i, j) > 0.0) {
        kl += gamma(i, j) * (f[i] + g[j] - cost.entries(i, j));
      }
    }
  }
  return transport_cost(cost) + kl;
}

nlohmann::json TransportPlan::to_json() const {
  if (gamma.size() > 4'000'000) {
    throw std::length_error("TransportPlan::to_json: plan exceeds 4e6 entries");
  }
  nlohmann::json j;
  j["rows"] = gamma.rows();
  j["cols"] = gamma.cols();
  nlohmann::json entries = nlohmann::json::array();
  for (int r = 0; r < gamma.rows(); ++r) {
    for (int c = 0; c < gamma.cols(); ++c) {
      entries.push_back(gamma(r, c));
    }
  }
  j["gamma"] = std::move(entries);
  j["epsilon"] = epsilon;
  j["iterations_used"] = iterations_used;
  j["marginal_errors"] = {row_error, col_error};
  return j;
}

namespace {

struct SweepOutcome {
  int iterations = 0;
  bool converged = false;
};

// Alternating dual sweeps at fixed epsilon; ends on the f-update so row sums
// are exact. Potentials are updated in place (warm-startable).
SweepOutcome sweep(const Mat& C, const Vec& log_a, const Vec& log_b,
                   const Vec& b, double epsilon, int max_iters, double tol,
                   Vec* f, Vec* g) {
  const int m = static_cast<int>(C.rows());
  const int n = static_cast<int>(C.cols());
  Vec buf_m(m), buf_n(n);
  SweepOutcome out;
  while (out.iterations < max_iters) {
    ++out.iterations;
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < m; ++i) {
        buf_m[i] = log_a[i] + ((*f)[i] - C(i, j)) / epsilon;
      }
      (*g)[j] = -epsilon * log_sum_exp(buf_m);
    }
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) {
        buf_n[j] = log_b[j] + ((*g)[j] - C(i, j)) / epsilon;
      }
      (*f)[i] = -epsilon * log_sum_exp(buf_n);
    }
    // Column-marginal L1 error in the log domain.
    double col_err = 0.0;
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < m; ++i) {
        buf_m[i] =
            log_a[i] + log_b[j] + ((*f)[i] + (*g)[j] - C(i, j)) / epsilon;
      }
      const double cs = log_sum_exp(buf_m);
      col_err += std::abs((cs == kNegInf ? 0.0 : std::exp(cs)) - b[j]);
    }
    if (col_err < tol) {
      out.converged = true;
      break;
    }
  }
  return out;
}

void validate_inputs(const CostMatrix& cost, const Vec& a, const Vec& b,
                     double epsilon) {
  if (!(epsilon > 0.0)) {
    throw std::invalid_argument("sinkhorn: epsilon must be positive");
  }
  if (a.size() != cost.entries.rows() || b.size() != cost.entries.cols()) {
    throw std::invalid_argument("sinkhorn: weight/cost size mismatch");
  }
  if (!cost.entries.allFinite() || cost.entries.minCoeff() < 0.0) {
    throw std::invalid_argument("sinkhorn: cost entries must be finite and >= 0");
  }
  validate_weights(a, "a");
  validate_weights(b, "b");
}

// Assembles the plan, marginal errors, and scaling vectors from potentials.
TransportPlan finish_plan(const CostMatrix& cost, const Vec& a, const Vec& b,
                          const Vec& log_a, const Vec& log_b, double epsilon,
                          Vec f, Vec g, int iterations, bool converged) {
  const int m = static_cast<int>(cost.entries.rows());
  const int n = static_cast<int>(cost.entries.cols());
  TransportPlan plan;
  plan.epsilon = epsilon;
  plan.iterations_used = iterations;
  plan.converged = converged;
  plan.gamma.resize(m, n);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      const double lg =
          log_a[i] + log_b[j] + (f[i] + g[j] - cost.entries(i, j)) / epsilon;
      plan.gamma(i, j) = lg == kNegInf ? 0.0 : std::exp(lg);
    }
  }
  plan.f = std::move(f);
  plan.g = std::move(g);
  for (int i = 0; i < m; ++i) {
    plan.row_error += std::abs(plan.gamma.row(i).sum() - a[i]);
  }
  for (int j = 0; j < n; ++j) {
    plan.col_error += std::abs(plan.gamma.col(j).sum() - b[j]);
  }
  plan.u.resize(m);
  plan.v.resize(n);
  for (int i = 0; i < m; ++i) {
    plan.u[i] = a[i] > 0.0 ? a[i] * std::exp(plan.f[i] / epsilon) : 0.0;
  }
  for (int j = 0; j < n; ++j) {
    plan.v[j] = b[j] > 0.0 ? b[j] * std::exp(plan.g[j] / epsilon) : 0.0;
  }
  return plan;
}

// Single-support measures admit exactly one coupling; potentials are chosen
// so the Gibbs factorization stays exact.
bool trivial_plan(const CostMatrix& cost, const Vec& a, const Vec& b,
                  double epsilon, TransportPlan* plan) {
  const int m = static_cast<int>(cost.entries.rows());
  const int n = static_cast<int>(cost.entries.cols());
  if (m != 1 && n != 1) return false;
  plan->epsilon = epsilon;
  plan->gamma = a * b.transpose();
  plan->f = Vec::Zero(m);
  plan->g = Vec::Zero(n);
  if (m == 1) {
    plan->g = cost.entries.row(0).transpose();
  } else {
    plan->f = cost.entries.col(0);
  }
  plan->converged = true;
  plan->iterations_used = 0;
  plan->u.resize(m);
  plan->v.resize(n);
  for (int i = 0; i < m; ++i) plan->u[i] = a[i] * std::exp(plan->f[i] / epsilon);
  for (int j = 0; j < n; ++j) plan->v[j] = b[j] * std::exp(plan->g[j] / epsilon);
  return true;
}

}  // namespace

TransportPlan sinkhorn(const CostMatrix& cost, const Vec& a, const Vec& b,
                       double epsilon, int max_iters, double tol) {
  validate_inputs(cost, a, b, epsilon);
  TransportPlan shortcut;
  if (trivial_plan(cost, a, b, epsilon, &shortcut)) return shortcut;

  const Vec log_a = log_weights(a);
  const Vec log_b = log_weights(b);
  Vec f = Vec::Zero(a.size());
  Vec g = Vec::Zero(b.size());
  const SweepOutcome out =
      sweep(cost.entries, log_a, log_b, b, epsilon, max_iters, tol, &f, &g);
  return finish_plan(cost, a, b, log_a, log_b, epsilon, std::move(f),
                     std::move(g), out.iterations, out.converged);
}

TransportPlan sinkhorn_annealed(const CostMatrix& cost, const Vec& a,
                                const Vec& b, double eps_target,
                                int stage_iters, double tol) {
  validate_inputs(cost, a, b, eps_target);
  TransportPlan shortcut;
  if (trivial_plan(cost, a, b, eps_target, &shortcut)) return shortcut;

  const Vec log_a = log_weights(a);
  const Vec log_b = log_weights(b);
  Vec f = Vec::Zero(a.size());
  Vec g = Vec::Zero(b.size());
  double eps = std::max(cost.entries.maxCoeff(), eps_target);
  int total = 0;
  SweepOutcome out;
  const double stage_tol = std::max(tol, 1e-7);
  for (;;) {
    const bool last = eps <= eps_target;
    out = sweep(cost.entries, log_a, log_b, b, eps, stage_iters,
                last ? tol : stage_tol, &f, &g);
    total += out.iterations;
    if (last) break;
    eps = std::max(0.5 * eps, eps_target);
  }
  return finish_plan(cost, a, b, log_a, log_b, eps_target, std::move(f),
                     std::move(g), total, out.converged);
}

double adaptive_epsilon(int k, int K, double eps_min, double eps_max) {
  if (K < 1) throw std::invalid_argument("adaptive_epsilon: K >= 1");
  if (k < 0 || k > K) {
    throw std::invalid_argument("adaptive_epsilon: k must lie in [0, K]");
  }
  if (!(eps_min > 0.0) || eps_min > eps_max) {
    throw std::invalid_argument(
        "adaptive_epsilon: require 0 < eps_min <= eps_max");
  }
  // Endpoints returned directly so they are bitwise exact.
  if (k == 0) return eps_max;
  if (k == K) return eps_min;
  return eps_max - (eps_max - eps_min) * static_cast<double>(k) /
                       static_cast<double>(K);
}

namespace {

double entropic_value(const EmpiricalMeasure& p, const EmpiricalMeasure& q,
                      double epsilon, int max_iters, double tol) {
  const CostMatrix c = cost_matrix(p, q);
  const Vec a = Eigen::Map<const Vec>(p.weights().data(),
                                      static_cast<int>(p.weights().size()));
  const Vec b = Eigen::Map<const Vec>(q.weights().data(),
                                      static_cast<int>(q.weights().size()));
  const TransportPlan plan = sinkhorn(c, a, b, epsilon, max_iters, tol);
  if (!plan.converged) {
    throw std::runtime_error("sinkhorn_divergence: inner solve did not converge");
  }
  return plan.entropic_cost(c);
}

}  // namespace

namespace {

// Deterministic ordering so the divergence is exactly symmetric in (p, q).
bool measure_less(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
  if (a.size() != b.size()) return a.size() < b.size();
  if (a.dim() != b.dim()) return a.dim() < b.dim();
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (int k = 0; k < a.dim(); ++k) {
      if (a.point(i)[k] != b.point(i)[k]) return a.point(i)[k] < b.point(i)[k];
    }
    if (a.weight(i) != b.weight(i)) return a.weight(i) < b.weight(i);
  }
  return false;
}

}  // namespace

double sinkhorn_divergence(const EmpiricalMeasure& p, const EmpiricalMeasure& q,
                           double epsilon, int max_iters, double tol) {
  const EmpiricalMeasure& lo = measure_less(q, p) ? q : p;
  const EmpiricalMeasure& hi = measure_less(q, p) ? p : q;
  const double pq = entropic_value(lo, hi, epsilon, max_iters, tol);
  const double pp = entropic_value(lo, lo, epsilon, max_iters, tol);
  const double qq = entropic_value(hi, hi, epsilon, max_iters, tol);
  return pq - 0.5 * pp - 0.5 * qq;
}

double w2_exact_1d(const EmpiricalMeasure& p, const EmpiricalMeasure& q) {
  if (p.dim() != 1 || q.dim() != 1) {
    throw std::invalid_argument("w2_exact_1d: requires 1-D measures");
  }
  auto sorted = [](const EmpiricalMeasure& m) {
    std::vector<std::pair<double, double>> s;  // (position, weight)
    s.reserve(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) {
      s.emplace_back(m.point(i)[0], m.weight(i));
    }
    std::sort(s.begin(), s.end());
    return s;
  };
  auto ps = sorted(p);
  auto qs = sorted(q);
  // Walk the merged quantile breakpoints of the two CDFs.
  std::size_t i = 0, j = 0;
  double ri = ps[0].second, rj = qs[0].second;
  double acc = 0.0;
  while (i < ps.size() && j < qs.size()) {
    const double step = std::min(ri, rj);
    const double d = ps[i].first - qs[j].first;
    acc += step * d * d;
    ri -= step;
    rj -= step;
    if (ri <= 1e-16 && i + 1 <= ps.size()) {
      ++i;
      ri = i < ps.size() ? ps[i].second : 0.0;
    }
    if (rj <= 1e-16 && j + 1 <= qs.size()) {
      ++j;
      rj = j < qs.size() ? qs[j].second : 0.0;
    }
  }
  return std::sqrt(std::max(0.0, acc));
}

ErrorDecayReport sinkhorn_error_decay(const CostMatrix& cost, const Vec& a,
                                      const Vec& b, double epsilon,
                                      const std::vector<int>& k_list) {
  if (k_list.empty()) {
    throw std::invalid_argument("sinkhorn_error_decay: empty k_list");
  }
  const int k_max = *std::max_element(k_list.begin(), k_list.end());
  // tol = 0 disables early stopping so iteration counts are exact.
  const TransportPlan ref = sinkhorn(cost, a, b, epsilon, 10 * k_max, 0.0);
  ErrorDecayReport report;
  std::vector<double> xs, ys;
  for (int k : k_list) {
    const TransportPlan pk = sinkhorn(cost, a, b, epsilon, k, 0.0);
    const double err = (pk.gamma - ref.gamma).norm();
    report.points.push_back({k, err});
    xs.push_back(static_cast<double>(k));
    ys.push_back(err);
  }
  report.fit = fit_log_linear(xs, ys, 1e-13);
  return report;
}

}  // namespace condlab::ot
