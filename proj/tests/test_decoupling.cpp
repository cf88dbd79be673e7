#include <cmath>

#include <gtest/gtest.h>

#include "hitchin/decoupling.hpp"
#include "hitchin/example_fields.hpp"
#include "hitchin/selftest.hpp"

using namespace hitchin;

namespace {

std::vector<double> zeros(std::size_t n) { return std::vector<double>(n, 0.0); }

const Chain& semisimple_chain() {
  static const Chain c = [] {
    SolverConfig cfg;
    cfg.tolerance = 1e-12;
    return solve_chain(examples::semisimple(), Grid(1.2, 33), cfg, sqrt2_schedule(1.0, 8.0));
  }();
  return c;
}

}  // namespace

TEST(Fit, RecoversExponentialAndReciprocalLaws) {
  std::vector<double> R, a, b;
  for (double r = 1.0; r <= 12.0; r += 1.0) {
    R.push_back(r);
    a.push_back(0.7 * std::exp(-1.3 * r));
    b.push_back(2.5 / r);
  }
  const DecayFit e = fit_decay(R, a, zeros(R.size()));
  EXPECT_EQ(e.model, DecayModel::exponential);
  EXPECT_NEAR(e.C, 0.7, 1e-9);
  EXPECT_NEAR(e.c, 1.3, 1e-9);
  EXPECT_LT(e.residual, 1e-9);
  EXPECT_TRUE(e.confirmed_decay());
  const DecayFit r = fit_decay(R, b, zeros(R.size()));
  EXPECT_EQ(r.model, DecayModel::reciprocal);
  EXPECT_NEAR(r.C, 2.5, 1e-9);
  EXPECT_FALSE(r.confirmed_decay());
}

TEST(Fit, CensorsPointsAtTheFloor) {
  DecaySweep s;
  for (int k = 0; k < 10; ++k) {
    s.R.push_back(1.0 + k);
    s.values.push_back(k < 6 ? std::exp(-2.0 * (1.0 + k)) : 1e-9);
    s.floors.push_back(1e-8);
  }
  fit_sweep(s);
  ASSERT_TRUE(s.fit.has_value());
  EXPECT_EQ(s.fit->used, std::vector<int>({0, 1, 2, 3, 4, 5}));
  EXPECT_NEAR(s.fit->c, 2.0, 1e-9);
  for (int k = 0; k < 10; ++k) EXPECT_EQ(static_cast<bool>(s.censored[k]), k >= 6);
}

TEST(Fit, TooFewPointsIsReported) {
  DecaySweep s;
  s.R = {1, 2, 3, 4, 5};
  s.values = {1.0, 0.1, 0.01, 0.0, 0.0};
  s.floors = zeros(5);
  fit_sweep(s);
  EXPECT_FALSE(s.fit.has_value());
  EXPECT_FALSE(s.fit_error.empty());
  EXPECT_THROW(fit_decay(s.R, s.values, s.floors), InsufficientData);
  EXPECT_THROW(fit_decay({1, 2}, {1}, {0, 0}), DimensionMismatch);
}

TEST(Fit, DecreasingSuffixSkipsCensored) {
  EXPECT_EQ(decreasing_suffix({5, 4, 6, 3, 2, 1}, {false, false, false, false, false, false}), 4);
  EXPECT_EQ(decreasing_suffix({5, 4, 3, 9}, {false, false, false, true}), 3);
  EXPECT_EQ(decreasing_suffix({}, {}), 0);
}

TEST(Bounded, UpperHalfVariation) {
  EXPECT_TRUE(bounded_sweep({0.2, 0.5, 0.8, 0.9, 0.92, 0.95}));
  EXPECT_FALSE(bounded_sweep({1, 2, 3, 4, 5, 6}));
  EXPECT_TRUE(bounded_sweep({}));
}

TEST(Measure, DiagonalFieldVanishesOnTheFlatMetric) {
  const Grid g(1.2, 17);
  const RegionMeasurement m = measure_region(examples::diagonal(), MetricField(g, 2), 4.0);
  EXPECT_EQ(m.orthogonality, 0.0);
  EXPECT_EQ(m.parallelity, 0.0);
  EXPECT_EQ(m.nilpotent, 0.0);
  EXPECT_EQ(m.comm_semisimple, 0.0);
  EXPECT_LE(m.remainder_total, 1e-15);
  EXPECT_GT(m.nodes, 0);
}

TEST(Measure, FlatMetricDefectOfTheSemisimpleField) {
  // Eigenlines span(1, 0) and span(1, -2): |pi - pi'| = 1/2 for the flat metric.
  const RegionMeasurement m = measure_region(examples::semisimple(), MetricField(Grid(1.2, 17), 2), 0.0);
  EXPECT_NEAR(m.orthogonality, 0.5, 1e-12);
}

TEST(Measure, NilpotentNormOnFlatMetric) {
  EXPECT_NEAR(measure_nilpotent_norm(examples::nilpotent(), MetricField(Grid(1.2, 17), 2), 3.0), 3.0, 1e-12);
}

TEST(Measure, CertificateRequired) {
  const MetricField h(Grid(1.2, 17), 2);
  EXPECT_THROW(measure_orthogonality(examples::square_root(), h, 1.0), NotCertifiable);
  EXPECT_THROW(measure_region(examples::mixed(), h, 1.0), DimensionMismatch);
}

TEST(Sweep, SemisimpleOrthogonalityDecreases) {
  const Chain& c = semisimple_chain();
  double prev = 1e300;
  for (std::size_t k = 0; k < c.R.size(); ++k) {
    const double v = measure_orthogonality(examples::semisimple(), c.metrics[k], c.R[k]);
    EXPECT_LT(v, prev) << "R = " << c.R[k];
    prev = v;
  }
}

TEST(Sweep, SecondFundamentalFormBoundedByDerivative) {
  const Chain& c = semisimple_chain();
  for (std::size_t k = 0; k < c.R.size(); ++k) {
    const ParallelityMeasurement p = measure_parallelity(examples::semisimple(), c.metrics[k], c.R[k]);
    EXPECT_LE(p.second_fundamental, p.parallelity * (1.0 + 1e-12));
  }
}

TEST(Sweep, RemainderCrosscheckAgrees) {
  const Chain& c = semisimple_chain();
  const RemainderMeasurement r = connection_remainder(examples::semisimple(), c.metrics.back(), c.R.back());
  EXPECT_LT(r.crosscheck, 1e-8 + 1e-6 * r.connection);
  EXPECT_LE(r.total, r.connection + r.semisimple + r.nilpotent + 1e-15);
}

TEST(Sweep, NilpotentFieldHasNoSemisimpleCommutators) {
  SolverConfig cfg;
  cfg.tolerance = 1e-12;
  HitchinSolver s(examples::nilpotent(), Grid(1.2, 33), cfg);
  s.solve(2.0);
  const CommutatorMeasurement m = measure_commutators(examples::nilpotent(), s.metric(), 2.0);
  EXPECT_LT(m.semisimple + m.nil_semi + m.semi_nil, 1e-12);
  const DecoupledResiduals d = decoupled_residuals(examples::nilpotent(), s.metric(), 2.0);
  EXPECT_NEAR(d.curvature, m.curvature_balance, 1e-15);
}
