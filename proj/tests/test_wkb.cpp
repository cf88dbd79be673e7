#include <random>

#include <gtest/gtest.h>
#include <unsupported/Eigen/MatrixFunctions>

#include "hitchin/example_fields.hpp"
#include "hitchin/wkb.hpp"

using namespace hitchin;
using examples::mat2;

namespace {

CMatrix random_matrix(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> nd;
  CMatrix m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = Complex(nd(rng), nd(rng));
  return m;
}

const MetricField& semisimple_metric() {
  static const MetricField h = [] {
    SolverConfig cfg;
    cfg.tolerance = 1e-12;
    HitchinSolver s(examples::semisimple(), Grid(1.2, 33), cfg);
    s.solve(2.0);
    return s.metric();
  }();
  return h;
}

}  // namespace

TEST(Exterior, CompoundIsMultiplicative) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const CMatrix a = random_matrix(rng, 4), b = random_matrix(rng, 4);
    for (int k = 1; k <= 4; ++k) {
      const CMatrix lhs = compound(a * b, k), rhs = compound(a, k) * compound(b, k);
      EXPECT_LT((lhs - rhs).norm(), 1e-10 * (1.0 + lhs.norm()));
    }
    EXPECT_LT(std::abs(compound(a, 4)(0, 0) - a.determinant()), 1e-10 * (1.0 + std::abs(a.determinant())));
    EXPECT_LT((compound(a, 1) - a).norm(), 1e-15);
  }
}

TEST(Exterior, DerivationDifferentiatesCompound) {
  std::mt19937_64 rng(11);
  const CMatrix a = 0.5 * random_matrix(rng, 3);
  const double eps = 1e-5;
  const CMatrix plus = (eps * a).exp(), minus = (-eps * a).exp();
  for (int k = 1; k <= 3; ++k) {
    const CMatrix fd = (compound(plus, k) - compound(minus, k)) / (2.0 * eps);
    EXPECT_LT((fd - exterior_derivation(a, k)).norm(), 1e-8) << k;
  }
}

TEST(Transport, ZeroConnectionIsIdentity) {
  const MetricField h(Grid(1.2, 17), 2);
  const CMatrix p = transport(h, examples::diagonal(), 0.0, PathSpec::segment(Complex(-0.5, 0.2), Complex(0.4, -0.3)));
  EXPECT_LT((p - CMatrix::Identity(2, 2)).norm(), 1e-14);
}

TEST(Transport, DiagonalClosedForm) {
  const MetricField h(Grid(1.2, 33), 2);
  for (double R : {0.5, 2.0, 5.0}) {
    const CMatrix p = transport(h, examples::diagonal(), R, PathSpec::segment(0.0, 1.0));
    const CMatrix exact = mat2(std::exp(-2.0 * R), 0.0, 0.0, std::exp(2.0 * R));
    EXPECT_LT((p - exact).norm() / exact.norm(), 1e-8) << R;
  }
}

TEST(Transport, ReversalInverts) {
  const MetricField& h = semisimple_metric();
  const PathSpec g = PathSpec::segment(Complex(-0.3, 0.1), Complex(0.35, -0.2));
  const CMatrix p = transport(h, examples::semisimple(), 2.0, g);
  const CMatrix q = transport(h, examples::semisimple(), 2.0, g.reversed());
  EXPECT_LT((q * p - CMatrix::Identity(2, 2)).norm(), 1e-8);
}

TEST(Transport, ConcatenationComposes) {
  const MetricField& h = semisimple_metric();
  const PathSpec a = PathSpec::segment(Complex(-0.3, 0.0), Complex(0.0, 0.25));
  const PathSpec b = PathSpec::segment(Complex(0.0, 0.25), Complex(0.3, -0.1));
  const PathSpec ab = PathSpec::concatenate(a, b);
  // The interpolated coefficient has kinks at cell edges, so refine well past the default step.
  const CMatrix pa = transport(h, examples::semisimple(), 2.0, a, 4000), pb = transport(h, examples::semisimple(), 2.0, b, 4000);
  const CMatrix pab = transport(h, examples::semisimple(), 2.0, ab, 8000);
  EXPECT_LT((pab - pb * pa).norm() / pab.norm(), 1e-8);
}

TEST(Transport, PathMustAvoidBoundaryCells) {
  const MetricField h(Grid(1.2, 17), 2);
  EXPECT_THROW(transport(h, examples::diagonal(), 1.0, PathSpec::segment(0.0, 1.15)), DomainError);
}

TEST(Wedge, NormsMatchDeterminantAndDirectComputation) {
  const MetricField& h = semisimple_metric();
  const PathSpec g = PathSpec::segment(-0.3, 0.3);
  const auto powers = transport_exterior(h, examples::semisimple(), 2.0, g, 0);
  const HermitianForm h0(h.interpolate(g.at(0.0))), h1(h.interpolate(g.at(1.0)));
  const auto w = wedge_log_norms(powers, h0, h1);
  const CMatrix pi = powers[0].value();
  const auto direct = wedge_log_norms(pi, h0, h1);
  for (int k = 0; k < 2; ++k) EXPECT_NEAR(w[k], direct[k], 1e-8);
  // Top power: |det Pi| scaled by the metric determinants.
  const double top = std::log(std::abs(pi.determinant())) +
                     0.5 * (std::log(std::abs(h1.gram().determinant())) - std::log(std::abs(h0.gram().determinant())));
  EXPECT_NEAR(w[1], top, 1e-8);
}

TEST(Wkb, ExactOnDiagonalField) {
  const MetricField h(Grid(1.2, 33), 2);
  for (double R : {1.0, 8.0, 64.0}) {
    const TransportReport r = wkb_report(examples::diagonal(), h, R, PathSpec::segment(0.0, 1.0));
    EXPECT_LE(r.discrepancy, 1e-8) << R;
    EXPECT_NEAR(r.beta[0], 2.0 * R, 1e-8 * R);
    EXPECT_NEAR(r.alpha[0], 1.0, 1e-13);
    EXPECT_LT(r.step_halving, 1e-9);
  }
}

TEST(Wkb, ZeroCouplingDiscrepancyIsTwiceAlpha) {
  const TransportReport r = wkb_report(examples::diagonal(), MetricField(Grid(1.2, 33), 2), 0.0, PathSpec::segment(0.0, 1.0));
  EXPECT_NEAR(r.discrepancy, 2.0, 1e-12);
}

TEST(Wkb, SolvedMetricReportIsSelfConsistent) {
  const TransportReport r = wkb_report(examples::semisimple(), semisimple_metric(), 2.0, PathSpec::segment(-0.3, 0.3));
  EXPECT_LT(r.crosscheck, 1e-6);
  EXPECT_LT(r.integrator_error, 1e-9);
  EXPECT_GE(r.beta[0], r.beta[1]);
  EXPECT_NEAR(r.beta[0] + r.beta[1], r.wedge_lognorms[1], 1e-12);
}

TEST(Wkb, CriticalPathRejected) {
  const MetricField h(Grid(1.2, 17), 2);
  EXPECT_THROW(wkb_report(examples::diagonal(), h, 1.0, PathSpec::segment(0.0, Complex(0.0, 0.5))),
               NonCriticalPathViolation);
}
