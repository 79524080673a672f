#include "condlab/wgf.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "condlab/ot.hpp"

namespace condlab::wgf {

namespace {

Vec weights_vec(const EmpiricalMeasure& m) {
  return Eigen::Map<const Vec>(m.weights().data(),
                               static_cast<int>(m.weights().size()));
}

double median_of(const Mat& entries) {
  std::vector<double> v(entries.data(), entries.data() + entries.size());
  std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
  return v[v.size() / 2];
}

}  // namespace

EpsilonPolicy EpsilonPolicy::fixed(double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("EpsilonPolicy: eps > 0");
  return {Kind::kFixed, eps};
}

EpsilonPolicy EpsilonPolicy::median_scale(double factor) {
  if (!(factor > 0.0)) throw std::invalid_argument("EpsilonPolicy: factor > 0");
  return {Kind::kMedianScale, factor};
}

EpsilonPolicy EpsilonPolicy::w2_scale(double factor) {
  if (!(factor > 0.0)) throw std::invalid_argument("EpsilonPolicy: factor > 0");
  return {Kind::kW2Scale, factor};
}

double EpsilonPolicy::resolve(const Mat& cost_entries, double w2_to_target) const {
  switch (kind) {
    case Kind::kFixed:
      return value;
    case Kind::kMedianScale:
      // Keep the scaled epsilon usable when the clouds have (nearly) merged.
      return std::max(value * median_of(cost_entries), 1e-12);
    case Kind::kW2Scale:
      if (w2_to_target < 0.0) {
        throw std::invalid_argument(
            "EpsilonPolicy: W2-scaled policy needs the current W2 (1-D only)");
      }
      return std::max(value * w2_to_target * w2_to_target, 1e-12);
  }
  throw std::logic_error("EpsilonPolicy: unknown kind");
}

double energy(const EnergyFunctional& F, const EmpiricalMeasure& P,
              double epsilon) {
  double w2_sq;
  if (P.dim() == 1 && F.target.dim() == 1) {
    const double w = ot::w2_exact_1d(P, F.target);
    w2_sq = w * w;
  } else {
    if (!(epsilon > 0.0)) {
      throw std::invalid_argument("energy: epsilon > 0 required for d > 1");
    }
    const ot::CostMatrix c = ot::cost_matrix(P, F.target);
    const ot::TransportPlan plan =
        ot::sinkhorn(c, weights_vec(P), weights_vec(F.target), epsilon, 2000,
                     1e-9);
    if (!plan.converged) {
      throw std::runtime_error("energy: entropic W2 solve did not converge");
    }
    w2_sq = plan.transport_cost(c);
  }
  double reg = 0.0;
  if (F.lambda_reg != 0.0) {
    if (!F.phi) throw std::invalid_argument("energy: lambda_reg set without phi");
    for (std::size_t i = 0; i < P.size(); ++i) {
      reg += P.weight(i) * F.phi(P.point(i));
    }
  }
  return 0.5 * w2_sq + F.lambda_reg * reg;
}

std::vector<Vec> barycentric_projection(const EnergyFunctional& F,
                                        const EmpiricalMeasure& P,
                                        double epsilon) {
  const ot::CostMatrix c = ot::cost_matrix(P, F.target);
  const ot::TransportPlan plan = ot::sinkhorn(
      c, weights_vec(P), weights_vec(F.target), epsilon, 2000, 1e-9);
  std::vector<Vec> b(P.size());
  for (std::size_t i = 0; i < P.size(); ++i) {
    Vec acc = Vec::Zero(F.target.dim());
    double mass = 0.0;
    for (std::size_t j = 0; j < F.target.size(); ++j) {
      acc += plan.gamma(static_cast<int>(i), static_cast<int>(j)) *
             F.target.point(j);
      mass += plan.gamma(static_cast<int>(i), static_cast<int>(j));
    }
    if (mass <= 0.0) {
      // Zero-weight particle: nothing to transport; hold position.
      b[i] = P.point(i);
    } else {
      b[i] = acc / mass;
    }
  }
  return b;
}

EmpiricalMeasure jko_step(const EnergyFunctional& F, const EmpiricalMeasure& P,
                          double eta, double epsilon) {
  if (!(eta > 0.0)) throw std::invalid_argument("jko_step: eta > 0");
  if (P.dim() != F.target.dim()) {
    throw std::invalid_argument("jko_step: dimension mismatch with target");
  }
  const std::vector<Vec> b = barycentric_projection(F, P, epsilon);
  std::vector<Vec> moved(P.size());
  for (std::size_t i = 0; i < P.size(); ++i) {
    Vec grad = 2.0 * (P.point(i) - b[i]);
    if (F.lambda_reg != 0.0) {
      if (!F.phi_grad) {
        throw std::invalid_argument("jko_step: lambda_reg set without phi_grad");
      }
      grad += F.lambda_reg * F.phi_grad(P.point(i));
    }
    moved[i] = P.point(i) - eta * grad;
  }
  return EmpiricalMeasure(std::move(moved), P.weights());
}

std::string FlowResult::trace_csv() const {
  std::string out = "k,w2,energy,eta\n";
  char buf[160];
  for (const FlowRecord& r : trace) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g\n", r.k,
                  r.w2_to_target, r.energy, r.eta);
    out += buf;
  }
  return out;
}

FlowResult run_flow(const EnergyFunctional& F, const EmpiricalMeasure& P0,
                    const std::vector<double>& etas,
                    const EpsilonPolicy& policy) {
  if (etas.empty()) throw std::invalid_argument("run_flow: empty schedule");
  EmpiricalMeasure P = P0;
  std::vector<FlowRecord> trace;
  trace.reserve(etas.size() + 1);
  auto record = [&](int k, double eta) {
    const ot::CostMatrix c = ot::cost_matrix(P, F.target);
    const double w2_exact =
        P.dim() == 1 ? ot::w2_exact_1d(P, F.target) : -1.0;
    const double eps = policy.resolve(c.entries, w2_exact);
    FlowRecord rec;
    rec.k = k;
    rec.eta = eta;
    rec.epsilon = eps;
    if (P.dim() == 1) {
      rec.w2_to_target = w2_exact;
    } else {
      const ot::TransportPlan plan = ot::sinkhorn(
          c, weights_vec(P), weights_vec(F.target), eps, 2000, 1e-9);
      rec.w2_to_target = std::sqrt(std::max(0.0, plan.transport_cost(c)));
    }
    rec.energy = energy(F, P, eps);
    trace.push_back(rec);
    return eps;
  };
  for (std::size_t k = 0; k < etas.size(); ++k) {
    const double eps = record(static_cast<int>(k), etas[k]);
    P = jko_step(F, P, etas[k], eps);
  }
  record(static_cast<int>(etas.size()), 0.0);

  std::vector<double> ks, w2s;
  for (const FlowRecord& r : trace) {
    ks.push_back(static_cast<double>(r.k));
    w2s.push_back(r.w2_to_target);
  }
  FlowResult result{std::move(trace), fit_log_linear(ks, w2s, 1e-13),
                    std::move(P)};
  return result;
}

}  // namespace condlab::wgf
