#include <random>

#include <gtest/gtest.h>

#include "hitchin/example_fields.hpp"
#include "hitchin/higgs_algebra.hpp"
#include "hitchin/polynomial.hpp"

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

HermitianForm random_form(std::mt19937_64& rng, int n) {
  const CMatrix b = random_matrix(rng, n);
  return HermitianForm(b.adjoint() * b + 0.3 * CMatrix::Identity(n, n));
}

// h-orthogonal projection onto range(p), written out independently.
CMatrix orthogonal_onto(const CMatrix& v, const CMatrix& G) {
  return v * (v.adjoint() * G * v).inverse() * v.adjoint() * G;
}

}  // namespace

TEST(Adjoint, IdentityGramIsConjugateTranspose) {
  std::mt19937_64 rng(3);
  const CMatrix f = random_matrix(rng, 4);
  EXPECT_LT((adjoint(f, HermitianForm::identity(4)) - f.adjoint()).norm(), 1e-14);
}

TEST(Adjoint, ElementaryMatrixWithDiagonalGram) {
  CMatrix G = CMatrix::Zero(2, 2);
  G(0, 0) = 4.0;
  G(1, 1) = 1.0;
  EXPECT_LT((adjoint(mat2(0, 1, 0, 0), HermitianForm(G)) - mat2(0, 0, 4, 0)).norm(), 1e-14);
}

TEST(Adjoint, DefiningPropertyOnRandomData) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 50; ++t) {
    const int n = 2 + t % 3;
    const HermitianForm h = random_form(rng, n);
    const CMatrix f = random_matrix(rng, n);
    const CVector u = random_matrix(rng, n).col(0), v = random_matrix(rng, n).col(1);
    const CMatrix fs = adjoint(f, h);
    EXPECT_LT(std::abs(h.inner(f * u, v) - h.inner(u, fs * v)), 1e-9 * (1.0 + f.norm() * u.norm() * v.norm() * h.gram().norm()));
    EXPECT_LT((adjoint(fs, h) - f).norm(), 1e-9 * (1.0 + f.norm()) * h.condition_number());
  }
}

TEST(Adjoint, IllConditionedGramRejected) {
  CMatrix G = CMatrix::Identity(2, 2);
  G(1, 1) = 1e-14;
  EXPECT_THROW(adjoint(mat2(1, 2, 3, 4), HermitianForm(G)), ConditioningError);
}

TEST(HermitianForm, RejectsNonHermitianAndIndefinite) {
  EXPECT_THROW(HermitianForm(mat2(1, 2, 0, 1)), ContractViolation);
  EXPECT_THROW(HermitianForm(mat2(1, 0, 0, -1)), ContractViolation);
}

TEST(HsNorm, MatchesTraceFormula) {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 20; ++t) {
    const HermitianForm h = random_form(rng, 3);
    const CMatrix f = random_matrix(rng, 3);
    const CMatrix fs = h.gram().inverse() * f.adjoint() * h.gram();
    EXPECT_NEAR(hs_norm_squared(f, h), (f * fs).trace().real(), 1e-8 * (1.0 + (f * fs).trace().real()));
  }
}

TEST(Schur, UpperTriangularWithIdentity) {
  CMatrix f(3, 3);
  f << 1.0, 2.0, Complex(0, 1), 0.0, -2.0, 3.0, 0.0, 0.0, Complex(0.5, 1);
  const HermitianForm h = HermitianForm::identity(3);
  const SchurParts s = schur_decompose(f, h);
  const CMatrix d = f.diagonal().asDiagonal();
  EXPECT_NEAR(hs_norm_squared(s.diag_part, h), d.squaredNorm(), 1e-12);
  EXPECT_NEAR(hs_norm_squared(s.upper_part, h), (f - d).squaredNorm(), 1e-12);
}

TEST(Schur, HandComputedTwoByTwo) {
  const HermitianForm h = HermitianForm::identity(2);
  const SchurParts s = schur_decompose(mat2(1, 1, 0, 0), h);
  EXPECT_NEAR(hs_norm_squared(s.diag_part, h), 1.0, 1e-12);
  EXPECT_NEAR(hs_norm_squared(s.upper_part, h), 1.0, 1e-12);
}

TEST(Schur, NormalMatrixHasNoUpperPart) {
  CMatrix G(2, 2);
  G << 2.0, 0.5, 0.5, 1.0;
  const HermitianForm h(G);
  const CMatrix half = hermitian_function(hermitian_log(G), [](double x) { return std::exp(0.5 * x); });
  const CMatrix f = half.inverse() * mat2(1.0, Complex(0, 2), Complex(0, 2), 1.0) * half;
  EXPECT_LT(schur_decompose(f, h).upper_part.norm(), 1e-12);
}

TEST(Schur, PythagorasAndEigenvaluesOnRandomData) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 100; ++t) {
    const int n = 2 + t % 3;
    const HermitianForm h = random_form(rng, n);
    const CMatrix f = random_matrix(rng, n);
    const SchurParts s = schur_decompose(f, h);
    EXPECT_LT((s.diag_part + s.upper_part - f).norm(), 1e-9 * f.norm());
    const double total = hs_norm_squared(f, h);
    EXPECT_NEAR(hs_norm_squared(s.diag_part, h) + hs_norm_squared(s.upper_part, h), total, 1e-8 * total);
    Eigen::ComplexEigenSolver<CMatrix> es(f);
    EXPECT_NEAR(hs_norm_squared(s.diag_part, h), es.eigenvalues().squaredNorm(), 1e-8 * total);
  }
}

TEST(Schur, AmbiguousClusteringThrows) {
  // Below the tolerance the pair merges, well above it they separate, in between it is ambiguous.
  const double tol = cluster_tolerance(CMatrix::Identity(2, 2), 1.0);
  const HermitianForm h = HermitianForm::identity(2);
  EXPECT_NO_THROW(schur_decompose(mat2(1.0, 0, 0, 1.0 + 0.1 * tol), h));
  EXPECT_THROW(schur_decompose(mat2(1.0, 0, 0, 1.0 + 10.0 * tol), h), ClusteringError);
  EXPECT_NO_THROW(schur_decompose(mat2(1.0, 0, 0, 1.0 + 1e3 * tol), h));
}

TEST(JordanChevalley, CompanionMatrixAtTwo) {
  CMatrix f = CMatrix::Zero(3, 3);
  f(0, 1) = f(1, 2) = 1.0;
  f(2, 2) = 2.0;
  const JordanChevalleyParts jc = jordan_chevalley(f);
  CMatrix fs = CMatrix::Zero(3, 3), fn = CMatrix::Zero(3, 3);
  fs(0, 2) = 0.5;
  fs(1, 2) = 1.0;
  fs(2, 2) = 2.0;
  fn(0, 1) = 1.0;
  fn(0, 2) = -0.5;
  EXPECT_LT((jc.semisimple - fs).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((jc.nilpotent - fn).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(JordanChevalley, NilpotentInput) {
  CMatrix f = CMatrix::Zero(3, 3);
  f(0, 1) = 2.0;
  f(1, 2) = -1.0;
  const JordanChevalleyParts jc = jordan_chevalley(f);
  EXPECT_LT(jc.semisimple.norm(), 1e-12);
  EXPECT_LT((jc.nilpotent - f).norm(), 1e-12);
}

TEST(JordanChevalley, ProjectionsOfTwoByTwo) {
  const JordanChevalleyParts jc = jordan_chevalley(mat2(1, 1, 0, 2));
  ASSERT_EQ(jc.projections.size(), 2u);
  EXPECT_LT((jc.projections[0] - mat2(1, -1, 0, 0)).norm(), 1e-12);
  EXPECT_LT((jc.projections[1] - mat2(0, 1, 0, 1)).norm(), 1e-12);
  EXPECT_LT(jc.nilpotent.norm(), 1e-12);
}

TEST(JordanChevalley, StructureOnRandomBlockMatrices) {
  std::mt19937_64 rng(13);
  for (int t = 0; t < 30; ++t) {
    // Similarity transform of a Jordan-type matrix with a repeated eigenvalue.
    CMatrix j = CMatrix::Zero(4, 4);
    j(0, 0) = j(1, 1) = 1.5;
    j(0, 1) = 1.0;
    j(2, 2) = -1.0;
    j(3, 3) = Complex(0.2, 1.0);
    const CMatrix p = random_matrix(rng, 4) + 3.0 * CMatrix::Identity(4, 4);
    const CMatrix f = p * j * p.inverse();
    const JordanChevalleyParts jc = jordan_chevalley(f);
    const double s = f.norm();
    EXPECT_LT(commutator(jc.semisimple, jc.nilpotent).norm(), 1e-7 * s * s);
    EXPECT_LT((jc.nilpotent * jc.nilpotent).norm(), 1e-7 * s * s);
    CMatrix sum = CMatrix::Zero(4, 4);
    for (const auto& q : jc.projections) sum += q;
    EXPECT_LT((sum - CMatrix::Identity(4, 4)).norm(), 1e-8 * p.norm() * p.inverse().norm());
    EXPECT_EQ(jc.projections.size(), 3u);
  }
}

TEST(OrthogonalityDefect, OrthogonalProjectionVanishes) {
  CMatrix G(2, 2);
  G << 2.0, Complex(0.5, 0.5), Complex(0.5, -0.5), 1.0;
  CMatrix v(2, 1);
  v << 1.0, Complex(0.3, -1);
  const CMatrix p = orthogonal_onto(v, G);
  EXPECT_LT(orthogonality_defect({p}, HermitianForm(G)).defect[0], 1e-12);
}

TEST(OrthogonalityDefect, ObliqueProjectionHandValue) {
  for (double d : {0.01, 0.3, 1.0, 4.0}) {
    // Onto span(d, 1) along span(1, 0).
    EXPECT_NEAR(orthogonality_defect({mat2(0.0, d, 0.0, 1.0)}, HermitianForm::identity(2)).defect[0], d, 1e-12);
  }
}

TEST(OrthogonalityDefect, BothFormulasAgreeOnRandomIdempotents) {
  std::mt19937_64 rng(17);
  double worst_upper = 0.0, worst_adjoint = 0.0;
  for (int t = 0; t < 10000; ++t) {
    const int n = 2 + static_cast<int>(rng() % 3);
    const HermitianForm h = random_form(rng, n);
    const CMatrix b = random_matrix(rng, n);
    const int k = 1 + static_cast<int>(rng() % (n - 1));
    const CMatrix p = b.leftCols(k) * b.inverse().topRows(k);
    const CMatrix po = orthogonal_onto(b.leftCols(k), h.gram());
    const CMatrix ps = h.gram().inverse() * p.adjoint() * h.gram();
    const double lhs = hs_norm(p - po, h);
    const double scale = 1.0 + hs_norm(p, h);
    worst_upper = std::max(worst_upper, std::abs(lhs - hs_norm(schur_decompose(p, h).upper_part, h)) / scale);
    worst_adjoint = std::max(worst_adjoint, std::abs(lhs - hs_norm(p - ps, h) / std::sqrt(2.0)) / scale);
    const auto od = orthogonality_defect({p}, h);
    EXPECT_NEAR(od.adjoint_gap[0], lhs, 1e-8 * scale);
  }
  EXPECT_LT(worst_upper, 1e-9);
  EXPECT_LT(worst_adjoint, 1e-9);
}

TEST(OrthogonalityDefect, RejectsNonIdempotent) {
  EXPECT_THROW(orthogonality_defect({mat2(1, 1, 0, 0.5)}, HermitianForm::identity(2)), ContractViolation);
}

TEST(VectorDistance, EqualMetricsAndClosedForm) {
  CMatrix G(2, 2);
  G << 2.0, Complex(0, 1), Complex(0, -1), 3.0;
  for (double k : vector_distance(HermitianForm(G), HermitianForm(G)).kappas) EXPECT_NEAR(k, 0.0, 1e-12);
  CMatrix D = CMatrix::Zero(2, 2);
  D(0, 0) = std::exp(2.0);
  D(1, 1) = std::exp(-2.0);
  const auto k = vector_distance(HermitianForm::identity(2), HermitianForm(D)).kappas;
  EXPECT_NEAR(k[0], 1.0, 1e-12);
  EXPECT_NEAR(k[1], -1.0, 1e-12);
}

TEST(VectorDistance, Antisymmetry) {
  std::mt19937_64 rng(19);
  for (int t = 0; t < 20; ++t) {
    const HermitianForm a = random_form(rng, 3), b = random_form(rng, 3);
    const auto x = vector_distance(a, b).kappas, y = vector_distance(b, a).kappas;
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(x[i], -y[2 - i], 1e-9);
  }
}

TEST(Commutators, Examples) {
  const HermitianForm h = HermitianForm::identity(2);
  const CommutatorNorms d = commutator_norms(mat2(2, 0, 0, -1), h);
  EXPECT_LT(d.semisimple + d.nil_semi + d.semi_nil, 1e-14);
  const CommutatorNorms n = commutator_norms(mat2(0, 3, 0, 0), h);
  EXPECT_LT(n.nil_semi + n.semi_nil, 1e-14);
  // [f, f^dagger] for f = [[1,1],[0,-1]] is [[1, -2], [-2, -1]].
  const CommutatorNorms s = commutator_norms(mat2(1, 1, 0, -1), h);
  EXPECT_NEAR(s.semisimple, std::sqrt(10.0), 1e-12);
}

TEST(Polynomial, EvaluationDerivativeRoots) {
  const Polynomial p(std::vector<Complex>{-6.0, 11.0, -6.0, 1.0});  // (z-1)(z-2)(z-3)
  EXPECT_LT(std::abs(p(4.0) - 6.0), 1e-12);
  EXPECT_LT(std::abs(p.derivative()(0.0) - 11.0), 1e-12);
  auto r = p.roots();
  std::sort(r.begin(), r.end(), [](Complex a, Complex b) { return a.real() < b.real(); });
  ASSERT_EQ(r.size(), 3u);
  for (int i = 0; i < 3; ++i) EXPECT_LT(std::abs(r[i] - double(i + 1)), 1e-10);
}

TEST(Polynomial, DiscriminantOfQuadratic) {
  // z^2 + b z + c has discriminant b^2 - 4c.
  EXPECT_LT(std::abs(discriminant({2.0, 3.0, 1.0}) - 1.0), 1e-10);
}
