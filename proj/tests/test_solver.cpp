#include <sstream>

#include <gtest/gtest.h>

#include "hitchin/example_fields.hpp"
#include "hitchin/grid.hpp"
#include "hitchin/hitchin_solver.hpp"
#include "hitchin/selftest.hpp"

using namespace hitchin;
using examples::mat2;

namespace {

SolverConfig tight() {
  SolverConfig c;
  c.tolerance = 1e-12;
  return c;
}

double max_interior(const Grid& g, const std::vector<CMatrix>& v, const std::function<double(int, const CMatrix&)>& f) {
  double out = 0.0;
  for (int idx = 0; idx < g.size(); ++idx)
    if (!g.on_boundary(idx)) out = std::max(out, f(idx, v[idx]));
  return out;
}

}  // namespace

TEST(Grid, IndexingAndDisk) {
  const Grid g(1.2, 5);
  EXPECT_DOUBLE_EQ(g.spacing(), 0.6);
  EXPECT_EQ(g.index(2, 3), 17);
  EXPECT_EQ(g.col(17), 2);
  EXPECT_EQ(g.row(17), 3);
  EXPECT_EQ(g.point(2, 2), Complex(0.0, 0.0));
  EXPECT_EQ(g.disk_nodes(0.6).size(), 5u);
  EXPECT_THROW(Grid(1.2, 4), ContractViolation);
  EXPECT_THROW(Grid(0.8, 5), ContractViolation);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  SolverConfig cfg = tight();
  HitchinSolver s(examples::semisimple(), Grid(1.2, 17), cfg);
  s.solve(1.5);
  const MetricField h = s.metric();
  std::stringstream ss;
  write_checkpoint(ss, h);
  const MetricField back = read_checkpoint(ss);
  ASSERT_EQ(back.grid(), h.grid());
  for (int idx = 0; idx < h.grid().size(); ++idx) {
    EXPECT_EQ((back.gram(idx) - h.gram(idx)).norm(), 0.0);
  }
}

TEST(Checkpoint, RejectsGarbage) {
  std::stringstream ss("not a checkpoint\n");
  EXPECT_ANY_THROW(read_checkpoint(ss));
}

TEST(Residual, DiagonalFieldAtIdentity) {
  const Grid g(1.2, 17);
  const auto r = hitchin_residual(MetricField(g, 2), examples::diagonal(), 3.0);
  EXPECT_EQ(max_interior(g, r, [](int, const CMatrix& m) { return m.norm(); }), 0.0);
}

TEST(Residual, NilpotentFieldAtIdentity) {
  const Grid g(1.2, 17);
  const auto r = hitchin_residual(MetricField(g, 2), examples::nilpotent(), 1.0);
  EXPECT_LT(max_interior(g, r, [](int, const CMatrix& m) { return (m + mat2(1, 0, 0, -1)).norm(); }), 1e-15);
}

TEST(Residual, ZeroCouplingIsCurvature) {
  const Grid g(1.2, 17);
  std::vector<CMatrix> logs, grams;
  for (int idx = 0; idx < g.size(); ++idx) {
    const double v = 0.3 * std::sin(g.point(idx).real()) * g.point(idx).imag();
    logs.push_back(mat2(v, 0, 0, -v));
    grams.push_back(mat2(std::exp(v), 0, 0, std::exp(-v)));
  }
  const MetricField h(g, logs, grams);
  const auto r = hitchin_residual(h, examples::semisimple(), 0.0);
  const auto f = curvature(h);
  EXPECT_LT(max_interior(g, r, [&](int idx, const CMatrix& m) { return (m - f[idx]).norm(); }), 1e-15);
  EXPECT_GT(max_interior(g, f, [](int, const CMatrix& m) { return m.norm(); }), 1e-3);
}

TEST(Connection, ManufacturedDiagonalMetric) {
  for (int n : {33, 65}) {
    const Grid g(1.2, n);
    std::vector<CMatrix> logs, grams;
    for (int idx = 0; idx < g.size(); ++idx) {
      const Complex z = g.point(idx);
      const double q = z.real() * z.real() * z.imag();
      logs.push_back(mat2(q, 0, 0, -q));
      grams.push_back(mat2(std::exp(q), 0, 0, std::exp(-q)));
    }
    const auto conn = chern_connection(MetricField(g, logs, grams));
    double err = 0.0;
    for (int idx = 0; idx < g.size(); ++idx) {
      const Complex z = g.point(idx);
      const Complex qz = 0.5 * Complex(2.0 * z.real() * z.imag(), -z.real() * z.real());
      err = std::max(err, (conn[idx] - mat2(qz, 0, 0, -qz)).norm());
    }
    EXPECT_LT(err, 3.0 * g.spacing() * g.spacing()) << n;
  }
}

TEST(Connection, UnitaryGaugeCovariance) {
  const Grid g(1.2, 17);
  std::vector<CMatrix> logs, grams, logs2, grams2;
  const CMatrix A = mat2(0.4, Complex(0.1, 0.3), Complex(0.1, -0.3), -0.4);
  const CMatrix u = mat2(std::cos(0.4), kI * std::sin(0.4), kI * std::sin(0.4), std::cos(0.4));
  for (int idx = 0; idx < g.size(); ++idx) {
    const Complex z = g.point(idx);
    const CMatrix s = z.real() * A + z.imag() * z.imag() * mat2(0.2, 0, 0, -0.2);
    logs.push_back(s);
    grams.push_back(hermitian_exp(s));
    logs2.push_back(u.adjoint() * s * u);
    grams2.push_back(u.adjoint() * grams.back() * u);
  }
  const auto a = chern_connection(MetricField(g, logs, grams)), b = chern_connection(MetricField(g, logs2, grams2));
  for (int idx = 0; idx < g.size(); ++idx) EXPECT_LT((b[idx] - u.adjoint() * a[idx] * u).norm(), 1e-12);
}

TEST(Solver, DiagonalFieldIsExact) {
  HitchinSolver s(examples::diagonal(), Grid(1.2, 33), tight());
  const SolveReport r = s.solve(8.0);
  EXPECT_EQ(r.newton_iterations, 0);
  EXPECT_TRUE(r.converged);
  const MetricField h = s.metric();
  for (const auto& g : h.grams()) EXPECT_EQ((g - CMatrix::Identity(2, 2)).norm(), 0.0);
}

TEST(Solver, RadialOracleAgreementCoarse) {
  // Second order: the error at N = 65 stays within 4x the N = 129 target.
  EXPECT_LT(radial_oracle_error(1.0, 65, 1e-12), 2e-3);
  EXPECT_LT(radial_oracle_error(4.0, 65, 1e-12), 2e-3);
}

TEST(Solver, DeterminantStaysOne) {
  HitchinSolver s(examples::semisimple(), Grid(1.2, 33), tight());
  const SolveReport r = s.solve(2.0);
  EXPECT_TRUE(r.converged);
  EXPECT_LE(r.residual_sup, r.tolerance);
  const MetricField h = s.metric();
  for (const auto& g : h.grams()) EXPECT_NEAR(std::abs(g.determinant() - 1.0), 0.0, 1e-6);
}

TEST(Solver, CurvatureBalanceAndTrace) {
  const double R = 2.0;
  HitchinSolver s(examples::nilpotent(), Grid(1.2, 33), tight());
  const SolveReport rep = s.solve(R);
  const MetricField h = s.metric();
  const auto F = curvature(h);
  const Grid& g = h.grid();
  for (int idx = 0; idx < g.size(); ++idx) {
    if (g.on_boundary(idx)) continue;
    const HermitianForm form(h.gram(idx));
    const CMatrix f = R * examples::nilpotent().evaluate(g.point(idx));
    EXPECT_LE(hs_norm(F[idx] - commutator(f, adjoint(f, form)), form), 10.0 * rep.tolerance);
    EXPECT_LE(std::abs(F[idx].trace()), 10.0 * rep.tolerance);
  }
}

TEST(Solver, ContinuationIsPathIndependent) {
  // Solving straight to R and via intermediate stops lands on the same metric.
  HitchinSolver a(examples::semisimple(), Grid(1.2, 17), tight()), b(examples::semisimple(), Grid(1.2, 17), tight());
  a.solve(3.0);
  b.solve(1.0);
  b.solve(5.0);
  b.solve(3.0);
  const MetricField ha = a.metric(), hb = b.metric();
  for (int idx = 0; idx < ha.grid().size(); ++idx) EXPECT_LT((ha.gram(idx) - hb.gram(idx)).norm(), 1e-9);
}

TEST(Solver, NonConvergenceCarriesReport) {
  SolverConfig cfg = tight();
  cfg.max_newton = 1;
  cfg.max_halvings = 0;
  HitchinSolver s(examples::semisimple(), Grid(1.2, 17), cfg);
  try {
    s.solve(16.0);
    FAIL() << "expected NonConvergence";
  } catch (const NonConvergence& e) {
    EXPECT_FALSE(e.report.converged);
    EXPECT_GT(e.report.residual_sup, e.report.tolerance);
  }
}

TEST(Solver, ManufacturedSolutionSecondOrder) {
  const double e1 = manufactured_error(17, 0.5), e2 = manufactured_error(33, 0.5), e3 = manufactured_error(65, 0.5);
  EXPECT_GE(std::log2(e1 / e2), 1.8);
  EXPECT_GE(std::log2(e2 / e3), 1.8);
}

TEST(RadialOracle, LimitsSignAndMonotonicity) {
  const RadialProfile tiny = radial_oracle(1e-4, 2.4);
  for (double r = 0.0; r <= 2.4; r += 0.1) EXPECT_NEAR(tiny(r), 0.0, 1e-6);
  for (double R : {0.5, 2.0, 8.0}) {
    const RadialProfile p = radial_oracle(R, 2.4);
    for (double r = 0.0; r <= 2.4; r += 0.05) EXPECT_LE(p(r), 1e-12);
    for (double r = 0.05; r <= 2.4; r += 0.05) EXPECT_LE(p(r - 0.05), p(r) + 1e-12);
    EXPECT_LT(radial_oracle(2.0 * R, 2.4).center_value(), p.center_value());
  }
  EXPECT_THROW(radial_oracle(0.0, 2.4), ContractViolation);
}

TEST(RadialOracle, SatisfiesTheOde) {
  const double R = 3.0;
  const RadialProfile p = radial_oracle(R, 2.4);
  const double d = 1e-3;
  for (double r = 0.2; r < 2.3; r += 0.3) {
    const double upp = (p(r + d) - 2.0 * p(r) + p(r - d)) / (d * d);
    const double up = (p(r + d) - p(r - d)) / (2.0 * d);
    EXPECT_NEAR(0.25 * (upp + up / r), R * R * std::exp(2.0 * p(r)), 1e-4 * (1.0 + R * R));
  }
}
