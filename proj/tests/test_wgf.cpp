#include "condlab/wgf.hpp"

#include <cmath>

#include "doctest.h"
#include "condlab/ot.hpp"

using namespace condlab;
namespace wgf = condlab::wgf;

namespace {

wgf::EnergyFunctional toward(EmpiricalMeasure target, double lambda = 0.0) {
  wgf::EnergyFunctional F;
  F.target = std::move(target);
  F.lambda_reg = lambda;
  return F;
}

}  // namespace

TEST_CASE("energy closed forms") {
  // P = target, no regularizer.
  const EmpiricalMeasure t = EmpiricalMeasure::uniform_1d({-1.0, 0.5, 2.0});
  CHECK(wgf::energy(toward(t), t, 0.1) == doctest::Approx(0.0).epsilon(1e-12));

  // Half squared distance between Diracs.
  const EmpiricalMeasure d0 = EmpiricalMeasure::uniform_1d({0.0});
  const EmpiricalMeasure d2 = EmpiricalMeasure::uniform_1d({2.0});
  CHECK(wgf::energy(toward(d2), d0, 0.1) == doctest::Approx(2.0));

  // Plus the phi term.
  wgf::EnergyFunctional F = toward(d2, 1.0);
  F.phi = [](const Vec& c) { return (c - Vec::Constant(1, 1.0)).squaredNorm(); };
  F.phi_grad = [](const Vec& c) -> Vec { return 2.0 * (c - Vec::Constant(1, 1.0)); };
  CHECK(wgf::energy(F, d0, 0.1) == doctest::Approx(3.0));
}

TEST_CASE("jko_step single-particle hand value") {
  const EmpiricalMeasure d0 = EmpiricalMeasure::uniform_1d({0.0});
  const EmpiricalMeasure d2 = EmpiricalMeasure::uniform_1d({2.0});
  const EmpiricalMeasure next = wgf::jko_step(toward(d2), d0, 0.25, 0.1);
  CHECK(next.point(0)[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("jko_step near-fixed point at the target") {
  RngStream rng(301, 0);
  std::vector<double> pts(50);
  for (auto& x : pts) x = rng.normal();
  const EmpiricalMeasure t = EmpiricalMeasure::uniform_1d(pts);
  const ot::CostMatrix c = ot::cost_matrix(t, t);
  std::vector<double> flat(c.entries.data(), c.entries.data() + c.entries.size());
  std::nth_element(flat.begin(), flat.begin() + flat.size() / 2, flat.end());
  const double eps = 0.01 * flat[flat.size() / 2];
  const EmpiricalMeasure stepped = wgf::jko_step(toward(t), t, 0.2, eps);
  // Entropic smearing only: displacements stay within an O(eps-bias) budget.
  for (std::size_t i = 0; i < t.size(); ++i) {
    CHECK((stepped.point(i) - t.point(i)).norm() <= 0.2);
  }
  CHECK(ot::w2_exact_1d(stepped, t) <= 0.05);
}

TEST_CASE("jko_step displacement matches finite differences of the energy") {
  // 5-particle 1-D system, lambda = 0. The applied displacement is
  // -eta * 2 (c_i - b_i); the Euclidean gradient of energy() carries the
  // particle weight and the 1/2 convention, so displacement ~
  // -eta * (2 / w_i) * d energy / d c_i.
  const EmpiricalMeasure P =
      EmpiricalMeasure::uniform_1d({-1.2, -0.3, 0.4, 1.1, 2.2});
  const EmpiricalMeasure T =
      EmpiricalMeasure::uniform_1d({-2.0, -0.5, 0.0, 0.9, 1.4});
  const ot::CostMatrix c = ot::cost_matrix(P, T);
  std::vector<double> flat(c.entries.data(), c.entries.data() + c.entries.size());
  std::nth_element(flat.begin(), flat.begin() + flat.size() / 2, flat.end());
  const double eps = 0.01 * flat[flat.size() / 2];
  const double eta = 0.1;
  const wgf::EnergyFunctional F = toward(T);
  const EmpiricalMeasure stepped = wgf::jko_step(F, P, eta, eps);

  const double h = 1e-5;
  for (std::size_t i = 0; i < P.size(); ++i) {
    auto perturbed = [&](double delta) {
      std::vector<Vec> pts(P.points());
      pts[i][0] += delta;
      return EmpiricalMeasure(pts, P.weights());
    };
    // Exact 1-D energy path: no epsilon dependence in the value.
    const double fd =
        (wgf::energy(F, perturbed(h), eps) - wgf::energy(F, perturbed(-h), eps)) /
        (2.0 * h);
    const double displacement = stepped.point(i)[0] - P.point(i)[0];
    const double predicted = -eta * (2.0 / P.weight(i)) * fd;
    CHECK(displacement == doctest::Approx(predicted).epsilon(1e-3));
  }
}

TEST_CASE("barycentric projections stay in the target convex hull") {
  RngStream rng(302, 0);
  std::vector<double> pp(20), tt(15);
  for (auto& x : pp) x = 4.0 + rng.normal();
  for (auto& x : tt) x = rng.normal();
  const EmpiricalMeasure P = EmpiricalMeasure::uniform_1d(pp);
  const EmpiricalMeasure T = EmpiricalMeasure::uniform_1d(tt);
  const auto b = wgf::barycentric_projection(toward(T), P, 0.5);
  const double lo = *std::min_element(tt.begin(), tt.end());
  const double hi = *std::max_element(tt.begin(), tt.end());
  for (const Vec& v : b) {
    CHECK(v[0] >= lo - 1e-12);
    CHECK(v[0] <= hi + 1e-12);
  }
}

TEST_CASE("run_flow: trace bookkeeping and flat start at the target") {
  const EmpiricalMeasure t = EmpiricalMeasure::uniform_1d({-0.5, 0.0, 1.0});
  const wgf::FlowResult r =
      wgf::run_flow(toward(t), t, {0.1, 0.1, 0.1}, wgf::EpsilonPolicy::fixed(0.05));
  REQUIRE(r.trace.size() == 4);
  CHECK(r.trace.front().k == 0);
  CHECK(r.trace.back().eta == 0.0);
  for (const auto& rec : r.trace) {
    CHECK(rec.w2_to_target <= 0.2);  // entropic-bias floor only
  }
}

TEST_CASE("run_flow contraction on the 100-particle acceptance configuration") {
  RngStream rng(303, 0);
  RngStream tr = rng.split(1), pr = rng.split(2);
  std::vector<double> tt(100), pp(100);
  for (auto& x : tt) x = tr.normal();
  for (auto& x : pp) x = 5.0 + pr.normal();
  const EmpiricalMeasure target = EmpiricalMeasure::uniform_1d(tt);
  const EmpiricalMeasure P0 = EmpiricalMeasure::uniform_1d(pp);
  const std::vector<double> etas(30, 0.2);
  const wgf::FlowResult r = wgf::run_flow(toward(target), P0, etas,
                                          wgf::EpsilonPolicy::w2_scale(0.01));
  REQUIRE(r.contraction.ok);
  CHECK(r.contraction.rate > 0.0);
  CHECK(r.contraction.rate < 1.0);
  CHECK(r.contraction.r2 >= 0.95);

  // Energy is non-increasing (up to the epsilon slack) along the flow.
  int violations = 0;
  for (std::size_t k = 0; k + 1 < r.trace.size(); ++k) {
    if (r.trace[k + 1].energy > r.trace[k].energy + 1e-9 + r.trace[k].epsilon) {
      ++violations;
    }
  }
  CHECK(static_cast<double>(violations) <= 0.1 * (r.trace.size() - 1));

  // Regularizer centered at the target mean must not slow the contraction.
  wgf::EnergyFunctional Freg = toward(target, 0.5);
  const double tmean = target.mean()[0];
  Freg.phi = [tmean](const Vec& c) {
    return (c - Vec::Constant(1, tmean)).squaredNorm();
  };
  Freg.phi_grad = [tmean](const Vec& c) -> Vec {
    return 2.0 * (c - Vec::Constant(1, tmean));
  };
  const wgf::FlowResult rreg =
      wgf::run_flow(Freg, P0, etas, wgf::EpsilonPolicy::w2_scale(0.01));
  REQUIRE(rreg.contraction.ok);
  CHECK(rreg.contraction.rate <= r.contraction.rate + 1e-6);
}

TEST_CASE("single-particle contraction factor |1 - 2 eta| is exact") {
  for (double eta : {0.1, 0.2, 0.45, 0.7, 0.9}) {
    const EmpiricalMeasure target = EmpiricalMeasure::uniform_1d({0.0});
    EmpiricalMeasure p = EmpiricalMeasure::uniform_1d({3.0});
    double w_prev = ot::w2_exact_1d(p, target);
    for (int k = 0; k < 4; ++k) {
      p = wgf::jko_step(toward(target), p, eta, 0.3);
      const double w = ot::w2_exact_1d(p, target);
      if (w_prev > 1e-12) {
        CHECK(w / w_prev == doctest::Approx(std::abs(1.0 - 2.0 * eta)).epsilon(1e-9));
      }
      w_prev = w;
    }
  }
}

TEST_CASE("run_flow is deterministic") {
  RngStream rng(304, 0);
  std::vector<double> tt(30), pp(30);
  for (auto& x : tt) x = rng.normal();
  for (auto& x : pp) x = 3.0 + rng.normal();
  const EmpiricalMeasure target = EmpiricalMeasure::uniform_1d(tt);
  const EmpiricalMeasure P0 = EmpiricalMeasure::uniform_1d(pp);
  const std::vector<double> etas(10, 0.15);
  const wgf::FlowResult a =
      wgf::run_flow(toward(target), P0, etas, wgf::EpsilonPolicy::median_scale(0.01));
  const wgf::FlowResult b =
      wgf::run_flow(toward(target), P0, etas, wgf::EpsilonPolicy::median_scale(0.01));
  CHECK(a.trace_csv() == b.trace_csv());
}

TEST_CASE("epsilon policy validation") {
  CHECK_THROWS_AS(wgf::EpsilonPolicy::fixed(0.0), std::invalid_argument);
  CHECK_THROWS_AS(wgf::EpsilonPolicy::median_scale(-1.0), std::invalid_argument);
  const wgf::EpsilonPolicy p = wgf::EpsilonPolicy::w2_scale(0.5);
  CHECK_THROWS_AS(p.resolve(Mat::Zero(2, 2)), std::invalid_argument);
  CHECK(p.resolve(Mat::Zero(2, 2), 2.0) == doctest::Approx(2.0));
}
