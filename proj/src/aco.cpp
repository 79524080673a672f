#include "condlab/aco.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "condlab/ot.hpp"

namespace condlab::aco {

void AcoConfig::validate() const {
  if (K < 0) throw std::invalid_argument("AcoConfig: K >= 0");
  if (T < 2) throw std::invalid_argument("AcoConfig: T >= 2");
  if (lambda_cost < 0.0) throw std::invalid_argument("AcoConfig: lambda_cost >= 0");
  if (alpha < 0.0) throw std::invalid_argument("AcoConfig: alpha >= 0");
  if (!(eps_min > 0.0) || eps_min > eps_max) {
    throw std::invalid_argument("AcoConfig: require 0 < eps_min <= eps_max");
  }
  if (K_sink < 1) throw std::invalid_argument("AcoConfig: K_sink >= 1");
  if (!(eta0 > 0.0)) throw std::invalid_argument("AcoConfig: eta0 > 0");
  if (k_warm < 1) throw std::invalid_argument("AcoConfig: k_warm >= 1");
  if (!(clip_tau > 0.0)) throw std::invalid_argument("AcoConfig: clip_tau > 0");
  if (!(nu > 0.0) || nu > 1.0) throw std::invalid_argument("AcoConfig: nu in (0, 1]");
  if (buffer_B < 1) throw std::invalid_argument("AcoConfig: buffer_B >= 1");
  if (!(sinkhorn_tol >= 0.0)) {
    throw std::invalid_argument("AcoConfig: sinkhorn_tol >= 0");
  }
}

double lr_schedule(int k, double eta0, int k_warm) {
  if (k < 0) throw std::invalid_argument("lr_schedule: k >= 0");
  if (k_warm < 1) throw std::invalid_argument("lr_schedule: k_warm >= 1");
  if (k == 0) return eta0;
  return eta0 * std::min(1.0, std::sqrt(static_cast<double>(k_warm) /
                                        static_cast<double>(k)));
}

Alignment inverse_alignment(const Vec& c, const Vec& z0, const LinearMap& t_inv,
                            double alpha) {
  const Vec pulled = t_inv(z0);
  if (pulled.size() != c.size()) {
    throw std::invalid_argument("inverse_alignment: dimension mismatch");
  }
  Alignment a;
  const Vec diff = c - pulled;
  const double fro = t_inv.frobenius_norm();
  a.value = diff.squaredNorm() + alpha * fro * fro;
  a.grad_c = 2.0 * diff;
  return a;
}

EmaBuffer::EmaBuffer(int capacity_in, double nu_in)
    : capacity(capacity_in), nu(nu_in) {
  if (capacity < 1) throw std::invalid_argument("EmaBuffer: capacity >= 1");
  if (!(nu > 0.0) || nu > 1.0) throw std::invalid_argument("EmaBuffer: nu in (0, 1]");
}

EmaBuffer ema_update(EmaBuffer buf, const std::vector<Vec>& new_latents) {
  for (const Vec& z : new_latents) {
    buf.buffer.push_back(z);
    if (static_cast<int>(buf.buffer.size()) > buf.capacity) {
      buf.buffer.pop_front();
    }
  }
  if (buf.buffer.empty()) return buf;
  const double w_new = 1.0 / static_cast<double>(buf.buffer.size());

  std::vector<Vec> points;
  std::vector<double> weights;
  if (buf.target.has_value() && buf.nu < 1.0) {
    for (std::size_t i = 0; i < buf.target->size(); ++i) {
      points.push_back(buf.target->point(i));
      weights.push_back((1.0 - buf.nu) * buf.target->weight(i));
    }
  }
  const double mix = buf.target.has_value() ? buf.nu : 1.0;
  for (const Vec& z : buf.buffer) {
    points.push_back(z);
    weights.push_back(mix * w_new);
  }
  // Compact vanishing history so the support stays bounded.
  std::vector<Vec> kept_p;
  std::vector<double> kept_w;
  double total = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (weights[i] >= 1e-12) {
      kept_p.push_back(points[i]);
      kept_w.push_back(weights[i]);
      total += weights[i];
    }
  }
  for (double& w : kept_w) w /= total;
  buf.target = EmpiricalMeasure(std::move(kept_p), std::move(kept_w));
  return buf;
}

std::string AcoState::diagnostics_csv() const {
  std::string out =
      "k,epsilon,eta,ot_loss,reg_loss,grad_norm_preclip,grad_norm_postclip,"
      "w2_c_to_target,w2_z_to_target,sinkhorn_converged\n";
  char buf[400];
  for (const IterationDiagnostics& d : diagnostics) {
    std::snprintf(buf, sizeof(buf),
                  "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d\n",
                  d.k, d.epsilon, d.eta, d.ot_loss, d.reg_loss,
                  d.grad_norm_preclip, d.grad_norm_postclip, d.w2_c_to_target,
                  d.w2_z_to_target, d.sinkhorn_converged ? 1 : 0);
    out += buf;
  }
  return out;
}

namespace {

Vec weights_vec(const EmpiricalMeasure& m) {
  return Eigen::Map<const Vec>(m.weights().data(),
                               static_cast<int>(m.weights().size()));
}

Vec flatten(const std::vector<Vec>& pts) {
  if (pts.empty()) return Vec();
  const int d = static_cast<int>(pts[0].size());
  Vec out(static_cast<int>(pts.size()) * d);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    out.segment(static_cast<int>(i) * d, d) = pts[i];
  }
  return out;
}

std::vector<Vec> unflatten(const Vec& flat, std::size_t n, int d) {
  std::vector<Vec> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = flat.segment(static_cast<int>(i) * d, d);
  }
  return out;
}

// Weighted sampling without replacement (Efraimidis-Spirakis keys). Taking
// the whole support returns it in original order without consuming draws.
EmpiricalMeasure sample_batch(const EmpiricalMeasure& target, std::size_t size,
                              RngStream& rng) {
  if (size >= target.size()) {
    std::vector<Vec> pts(target.points());
    return EmpiricalMeasure::uniform(std::move(pts));
  }
  std::vector<std::pair<double, std::size_t>> keys;
  keys.reserve(target.size());
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double w = target.weight(i);
    const double u = rng.uniform();
    const double key = w > 0.0 ? std::pow(u, 1.0 / w) : -1.0;
    keys.emplace_back(key, i);
  }
  std::partial_sort(keys.begin(), keys.begin() + size, keys.end(),
                    [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<Vec> pts;
  pts.reserve(size);
  for (std::size_t i = 0; i < size; ++i) {
    pts.push_back(target.point(keys[i].second));
  }
  return EmpiricalMeasure::uniform(std::move(pts));
}

EmpiricalMeasure pull_back(const EmpiricalMeasure& m, const LinearMap& t_inv) {
  std::vector<Vec> pts;
  pts.reserve(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) pts.push_back(t_inv(m.point(i)));
  return EmpiricalMeasure(std::move(pts), m.weights());
}

double w2_between(const EmpiricalMeasure& a, const EmpiricalMeasure& b,
                  double epsilon) {
  if (a.dim() == 1 && b.dim() == 1) return ot::w2_exact_1d(a, b);
  const ot::CostMatrix c = ot::cost_matrix(a, b);
  const ot::TransportPlan plan =
      ot::sinkhorn(c, weights_vec(a), weights_vec(b), epsilon, 2000, 1e-9);
  return std::sqrt(std::max(0.0, plan.transport_cost(c)));
}

}  // namespace

AcoState aco_run(const AcoConfig& cfg, const EmpiricalMeasure& c0,
                 const diffusion::Denoiser& denoiser, const LinearMap& t_inv,
                 TargetSource target_source, RngStream& rng) {
  cfg.validate();
  const std::size_t n = c0.size();
  const int d = c0.dim();

  const diffusion::NoiseSchedule sched = diffusion::cosine_schedule(cfg.T);
  EmpiricalMeasure conditions = c0;
  const Vec z_init = rng.normal_vec(static_cast<int>(n) * d);

  AcoState state{conditions, {}, {}, {}};
  for (int k = 0; k < cfg.K; ++k) {
    const Vec c_flat = flatten(conditions.points());
    diffusion::Trajectory traj =
        diffusion::ddim_trajectory(sched, denoiser, c_flat, z_init);
    const std::vector<Vec> z0_pts = unflatten(traj.final_state(), n, d);
    const EmpiricalMeasure z0_measure(std::vector<Vec>(z0_pts),
                                      conditions.weights());

    if (std::holds_alternative<EmaBuffer>(target_source)) {
      target_source = ema_update(std::move(std::get<EmaBuffer>(target_source)),
                                 z0_pts);
    }
    const EmpiricalMeasure& target =
        std::holds_alternative<EmaBuffer>(target_source)
            ? *std::get<EmaBuffer>(target_source).target
            : std::get<EmpiricalMeasure>(target_source);

    const EmpiricalMeasure batch =
        sample_batch(target, std::min(target.size(), n), rng);
    const double eps_k =
        ot::adaptive_epsilon(k, cfg.K, cfg.eps_min, cfg.eps_max);
    const double eta_k = lr_schedule(k, cfg.eta0, cfg.k_warm);

    const ot::CostMatrix cost =
        ot::cost_matrix(z0_measure, batch, &conditions, &t_inv,
                        cfg.lambda_cost);
    const ot::TransportPlan plan =
        ot::sinkhorn(cost, weights_vec(conditions), weights_vec(batch), eps_k,
                     cfg.K_sink, cfg.sinkhorn_tol);

    IterationDiagnostics diag;
    diag.k = k;
    diag.epsilon = eps_k;
    diag.eta = eta_k;
    diag.sinkhorn_converged = plan.converged;
    if (!plan.converged) {
      state.warnings.push_back("sinkhorn did not converge at outer step " +
                               std::to_string(k));
    }
    diag.ot_loss = plan.transport_cost(cost);

    std::vector<Vec> pulled(batch.size());
    for (std::size_t j = 0; j < batch.size(); ++j) {
      pulled[j] = t_inv(batch.point(j));
    }

    std::vector<Vec> moved(n);
    double reg_sum = 0.0;
    for (std::size_t m = 0; m < n; ++m) {
      const Vec& c_m = conditions.point(m);
      // Row-reduced OT gradient: dC_mn/dc_m = 2 lambda (c_m - t_inv(z*_n)).
      Vec g_ot = Vec::Zero(d);
      if (cfg.lambda_cost > 0.0) {
        for (std::size_t j = 0; j < batch.size(); ++j) {
          g_ot += plan.gamma(static_cast<int>(m), static_cast<int>(j)) *
                  2.0 * cfg.lambda_cost * (c_m - pulled[j]);
        }
      }
      const Alignment align = inverse_alignment(c_m, z0_pts[m], t_inv, cfg.alpha);
      reg_sum += align.value;
      Vec g = g_ot + align.grad_c;
      const double pre = g.norm();
      diag.grad_norm_preclip = std::max(diag.grad_norm_preclip, pre);
      if (pre > cfg.clip_tau) {
        g *= cfg.clip_tau / pre;
        const double again = g.norm();
        if (again > cfg.clip_tau) g *= cfg.clip_tau / again;
      }
      diag.grad_norm_postclip = std::max(diag.grad_norm_postclip, g.norm());
      moved[m] = c_m - eta_k * g;
      if (!moved[m].allFinite()) {
        throw std::runtime_error("aco_run: non-finite condition at step " +
                                 std::to_string(k));
      }
    }
    diag.reg_loss = reg_sum / static_cast<double>(n);
    diag.w2_c_to_target =
        w2_between(conditions, pull_back(target, t_inv), eps_k);
    diag.w2_z_to_target = w2_between(z0_measure, target, eps_k);

    conditions = EmpiricalMeasure(std::move(moved), conditions.weights());
    state.diagnostics.push_back(diag);
    state.latent_trajectory = std::move(traj);
  }
  state.conditions = std::move(conditions);
  return state;
}

LyapunovReport lyapunov_trace(const AcoState& state, double lambda_reg) {
  if (state.diagnostics.empty()) {
    throw std::invalid_argument("lyapunov_trace: state has no iterations");
  }
  LyapunovReport report;
  for (const IterationDiagnostics& d : state.diagnostics) {
    report.values.emplace_back(d.k,
                               d.w2_z_to_target + lambda_reg * d.reg_loss);
  }
  for (std::size_t i = 0; i + 1 < report.values.size(); ++i) {
    const double slack =
        1e-9 + std::sqrt(state.diagnostics[i + 1].epsilon);
    report.slack = slack;
    if (report.values[i + 1].second > report.values[i].second + slack) {
      ++report.increases;
    }
  }
  return report;
}

}  // namespace condlab::aco
