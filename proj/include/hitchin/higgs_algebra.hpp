#ifndef HITCHIN_HIGGS_ALGEBRA_HPP
#define HITCHIN_HIGGS_ALGEBRA_HPP

// Pointwise linear algebra on a Hermitian vector space (V, h).
//
// A Hermitian form is stored through its Gram matrix G, with
// h(u, v) = v^dagger G u. Adjoints, Hilbert-Schmidt norms, Schur and
// Jordan-Chevalley decompositions are all taken with respect to h.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "hitchin/core.hpp"

namespace hitchin {

class HermitianForm {
public:
  explicit HermitianForm(CMatrix gram) : gram_(std::move(gram)) {
    if (gram_.rows() != gram_.cols() || gram_.rows() == 0)
      throw DimensionMismatch("HermitianForm: gram must be a non-empty square matrix");
    const double scale = std::max(1.0, gram_.norm());
    if ((gram_ - gram_.adjoint()).norm() > 1e-12 * scale)
      throw ContractViolation("HermitianForm: gram is not Hermitian");
    gram_ = 0.5 * (gram_ + gram_.adjoint());
    llt_.compute(gram_);
    if (llt_.info() != Eigen::Success)
      throw ContractViolation("HermitianForm: gram is not positive definite");
  }

  static HermitianForm identity(int n) { return HermitianForm(CMatrix::Identity(n, n)); }

  int dim() const { return static_cast<int>(gram_.rows()); }
  const CMatrix& gram() const { return gram_; }
  /// Lower-triangular L with gram = L L^dagger.
  CMatrix cholesky() const { return llt_.matrixL(); }

  Complex inner(const CVector& u, const CVector& v) const { return v.dot(gram_ * u); }
  double norm(const CVector& v) const { return std::sqrt(std::max(0.0, inner(v, v).real())); }

  double condition_number() const {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(gram_, Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    return ev(ev.size() - 1) / ev(0);
  }

  /// Solves gram * x = b.
  CMatrix solve(const CMatrix& b) const { return llt_.solve(b); }

private:
  CMatrix gram_;
  Eigen::LLT<CMatrix> llt_;
};

/// f^{*h} = G^{-1} f^dagger G.
inline CMatrix adjoint(const CMatrix& f, const HermitianForm& h) {
  if (f.rows() != h.dim() || f.cols() != h.dim())
    throw DimensionMismatch("adjoint: matrix and form dimensions differ");
  if (h.condition_number() > 1e12)
    throw ConditioningError("adjoint: gram condition number exceeds 1e12");
  return h.solve(f.adjoint() * h.gram());
}

/// Hilbert-Schmidt norm |f|_h = sqrt(tr(f f^{*h})), evaluated in an
/// h-orthonormal frame so that no inverse of G is formed.
inline double hs_norm(const CMatrix& f, const HermitianForm& h) {
  const CMatrix L = h.cholesky();
  const CMatrix g = L.adjoint() * f;
  const CMatrix w = L.adjoint().triangularView<Eigen::Upper>().solve<Eigen::OnTheRight>(g);
  return w.norm();
}

inline double hs_norm_squared(const CMatrix& f, const HermitianForm& h) {
  const double n = hs_norm(f, h);
  return n * n;
}

// ---------------------------------------------------------------------------
// Hermitian matrix functions

inline CMatrix hermitian_function(const CMatrix& s, double (*fn)(double)) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(s);
  RVector d = es.eigenvalues().unaryExpr(fn);
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().adjoint();
}

inline CMatrix hermitian_exp(const CMatrix& s) {
  return hermitian_function(s, [](double x) { return std::exp(x); });
}

inline CMatrix hermitian_log(const CMatrix& p) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(p);
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw ContractViolation("hermitian_log: matrix is not positive definite");
  RVector d = es.eigenvalues().array().log();
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().adjoint();
}

// ---------------------------------------------------------------------------
// Eigenvalue clusters

struct EigenCluster {
  Complex value;
  int multiplicity = 0;
};

struct ClusterResult {
  std::vector<EigenCluster> clusters;  // canonical order: by real part, then imaginary part
  double tolerance = 0.0;
  double min_gap = std::numeric_limits<double>::infinity();  // between distinct clusters
  double second_gap = std::numeric_limits<double>::infinity();
  double max_abs = 0.0;
};

/// Tolerance under which two computed eigenvalues count as one generalized
/// eigenspace. The floor 1e-8 (1 + max|lambda|) is raised to the accuracy a
/// backward-stable eigensolver can deliver on a Jordan block of size n.
inline double cluster_tolerance(const CMatrix& f, double max_abs) {
  const double eps = std::numeric_limits<double>::epsilon();
  const int n = static_cast<int>(f.rows());
  const double defective = n > 1 ? 10.0 * std::pow(eps * (1.0 + f.norm()), 1.0 / n) : 0.0;
  return std::max(1e-8 * (1.0 + max_abs), defective);
}

inline ClusterResult cluster_eigenvalues(const CVector& eig, double tol) {
  const int n = static_cast<int>(eig.size());
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b)
      if (std::abs(eig(a) - eig(b)) <= tol) parent[find(a)] = find(b);

  std::vector<int> root_slot(n, -1);
  ClusterResult out;
  out.tolerance = tol;
  std::vector<Complex> sums;
  for (int a = 0; a < n; ++a) {
    const int r = find(a);
    if (root_slot[r] < 0) {
      root_slot[r] = static_cast<int>(out.clusters.size());
      out.clusters.push_back({0.0, 0});
      sums.push_back(0.0);
    }
    sums[root_slot[r]] += eig(a);
    out.clusters[root_slot[r]].multiplicity += 1;
    out.max_abs = std::max(out.max_abs, std::abs(eig(a)));
  }
  for (std::size_t c = 0; c < out.clusters.size(); ++c)
    out.clusters[c].value = sums[c] / double(out.clusters[c].multiplicity);

  std::sort(out.clusters.begin(), out.clusters.end(), [tol](const EigenCluster& x, const EigenCluster& y) {
    if (std::abs(x.value.real() - y.value.real()) > tol) return x.value.real() < y.value.real();
    return x.value.imag() < y.value.imag();
  });

  std::vector<double> gaps;
  for (std::size_t a = 0; a < out.clusters.size(); ++a)
    for (std::size_t b = a + 1; b < out.clusters.size(); ++b)
      gaps.push_back(std::abs(out.clusters[a].value - out.clusters[b].value));
  std::sort(gaps.begin(), gaps.end());
  if (!gaps.empty()) out.min_gap = gaps[0];
  if (gaps.size() > 1) out.second_gap = gaps[1];
  return out;
}

inline ClusterResult cluster_eigenvalues(const CMatrix& f) {
  Eigen::ComplexEigenSolver<CMatrix> es(f, false);
  const CVector& ev = es.eigenvalues();
  double max_abs = 0.0;
  for (int i = 0; i < ev.size(); ++i) max_abs = std::max(max_abs, std::abs(ev(i)));
  return cluster_eigenvalues(ev, cluster_tolerance(f, max_abs));
}

/// Basis (columns) of ker (f - lambda)^m where m is the cluster multiplicity.
inline CMatrix generalized_eigenspace(const CMatrix& f, const EigenCluster& c) {
  const int n = static_cast<int>(f.rows());
  CMatrix shifted = f - c.value * CMatrix::Identity(n, n);
  CMatrix power = CMatrix::Identity(n, n);
  for (int k = 0; k < c.multiplicity; ++k) power = power * shifted;
  Eigen::JacobiSVD<CMatrix> svd(power, Eigen::ComputeFullV);
  return svd.matrixV().rightCols(c.multiplicity);
}

// ---------------------------------------------------------------------------
// Jordan-Chevalley decomposition

struct JordanChevalleyParts {
  CMatrix semisimple;
  CMatrix nilpotent;
  std::vector<CMatrix> projections;
  std::vector<Complex> eigenvalues;
  std::vector<int> multiplicities;
  bool near_critical = false;
  double min_gap = std::numeric_limits<double>::infinity();
};

/// Clusters closer than this multiple of the clustering tolerance are flagged.
constexpr double kAmbiguityFactor = 100.0;

inline JordanChevalleyParts jordan_chevalley(const CMatrix& f, const ClusterResult& cr) {
  const int n = static_cast<int>(f.rows());
  const int m = static_cast<int>(cr.clusters.size());
  JordanChevalleyParts out;
  out.min_gap = cr.min_gap;
  out.near_critical = m > 1 && cr.min_gap < kAmbiguityFactor * cr.tolerance;

  CMatrix basis(n, n);
  int col = 0;
  for (const auto& c : cr.clusters) {
    basis.middleCols(col, c.multiplicity) = generalized_eigenspace(f, c);
    col += c.multiplicity;
  }
  Eigen::FullPivLU<CMatrix> lu(basis);
  const CMatrix inv = lu.inverse();

  out.semisimple = CMatrix::Zero(n, n);
  col = 0;
  for (const auto& c : cr.clusters) {
    CMatrix p = basis.middleCols(col, c.multiplicity) * inv.middleRows(col, c.multiplicity);
    const Complex lambda = (f * p).trace() / double(c.multiplicity);
    out.semisimple += lambda * p;
    out.projections.push_back(std::move(p));
    out.eigenvalues.push_back(lambda);
    out.multiplicities.push_back(c.multiplicity);
    col += c.multiplicity;
  }
  out.nilpotent = f - out.semisimple;
  (void)m;
  return out;
}

inline JordanChevalleyParts jordan_chevalley(const CMatrix& f) {
  if (f.rows() != f.cols()) throw DimensionMismatch("jordan_chevalley: matrix must be square");
  return jordan_chevalley(f, cluster_eigenvalues(f));
}

// ---------------------------------------------------------------------------
// Schur decomposition with respect to h

struct SchurParts {
  CMatrix diag_part;   // f_a
  CMatrix upper_part;  // f_u
  CMatrix basis;       // h-orthonormal columns
  std::vector<int> ordering;
};

/// h-orthonormalizes the columns of v in order (modified Gram-Schmidt, two passes).
inline CMatrix gram_schmidt(const CMatrix& v, const HermitianForm& h) {
  CMatrix q = v;
  for (int j = 0; j < q.cols(); ++j) {
    for (int pass = 0; pass < 2; ++pass)
      for (int i = 0; i < j; ++i) q.col(j) -= h.inner(q.col(j), q.col(i)) * q.col(i);
    const double nrm = h.norm(q.col(j));
    if (nrm == 0.0) throw ConditioningError("gram_schmidt: dependent columns");
    q.col(j) /= nrm;
  }
  return q;
}

/// `ordering[k]` is the canonical cluster index placed k-th in the flag.
/// An empty ordering means canonical order.
inline SchurParts schur_decompose(const CMatrix& f, const HermitianForm& h, std::vector<int> ordering = {}) {
  if (f.rows() != h.dim() || f.cols() != h.dim())
    throw DimensionMismatch("schur_decompose: matrix and form dimensions differ");
  const int n = h.dim();
  const ClusterResult cr = cluster_eigenvalues(f);
  const int m = static_cast<int>(cr.clusters.size());
  if (m > 1 && cr.min_gap < kAmbiguityFactor * cr.tolerance) {
    std::ostringstream msg;
    msg << "schur_decompose: ambiguous eigenvalue clustering, nearest gaps " << cr.min_gap << ", "
        << cr.second_gap;
    throw ClusteringError(msg.str(), cr.min_gap, cr.second_gap);
  }
  if (ordering.empty()) {
    ordering.resize(m);
    std::iota(ordering.begin(), ordering.end(), 0);
  }
  {
    std::vector<int> sorted = ordering;
    std::sort(sorted.begin(), sorted.end());
    for (int k = 0; k < static_cast<int>(sorted.size()); ++k)
      if (static_cast<int>(sorted.size()) != m || sorted[k] != k)
        throw ContractViolation("schur_decompose: ordering is not a permutation of the clusters");
  }

  CMatrix v(n, n);
  std::vector<int> offsets, sizes;
  int col = 0;
  for (int k : ordering) {
    const auto& c = cr.clusters[k];
    v.middleCols(col, c.multiplicity) = generalized_eigenspace(f, c);
    offsets.push_back(col);
    sizes.push_back(c.multiplicity);
    col += c.multiplicity;
  }
  CMatrix q = gram_schmidt(v, h);
  // In an h-orthonormal basis the inverse is Q^dagger G.
  CMatrix t = q.adjoint() * h.gram() * f * q;
  CMatrix u = CMatrix::Identity(n, n);
  for (std::size_t b = 0; b < offsets.size(); ++b) {
    if (sizes[b] == 1) continue;
    Eigen::ComplexSchur<CMatrix> cs(t.block(offsets[b], offsets[b], sizes[b], sizes[b]));
    u.block(offsets[b], offsets[b], sizes[b], sizes[b]) = cs.matrixU();
  }
  q = q * u;
  t = u.adjoint() * t * u;

  CMatrix d = t.diagonal().asDiagonal();
  CMatrix up = t.triangularView<Eigen::StrictlyUpper>();
  const CMatrix qinv = q.adjoint() * h.gram();
  return {q * d * qinv, q * up * qinv, q, ordering};
}

// ---------------------------------------------------------------------------
// Almost orthogonality

/// h-orthogonal projection onto the column span of `range`.
inline CMatrix orthogonal_projection(const CMatrix& range, const HermitianForm& h) {
  const CMatrix g = range.adjoint() * h.gram() * range;
  return range * g.ldlt().solve(range.adjoint() * h.gram());
}

/// Range basis of an idempotent via its column space.
inline CMatrix projection_range(const CMatrix& p) {
  const int rank = static_cast<int>(std::lround(p.trace().real()));
  Eigen::JacobiSVD<CMatrix> svd(p, Eigen::ComputeFullU);
  return svd.matrixU().leftCols(rank);
}

struct OrthogonalityDefect {
  std::vector<double> defect;       // |pi - pi'|_h via sqrt(|pi|_h^2 - tr pi)
  std::vector<double> adjoint_gap;  // (1/sqrt 2) |pi - pi^{*h}|_h
};

inline OrthogonalityDefect orthogonality_defect(const std::vector<CMatrix>& projections, const HermitianForm& h) {
  OrthogonalityDefect out;
  for (const auto& p : projections) {
    const double pn2 = hs_norm_squared(p, h);
    if ((p * p - p).norm() > 1e-8 * (1.0 + pn2))
      throw ContractViolation("orthogonality_defect: projection is not idempotent");
    const double d2 = pn2 - p.trace().real();
    const double via_trace = std::sqrt(std::max(0.0, d2));
    const CMatrix pstar = h.solve(p.adjoint() * h.gram());
    const double via_adjoint = hs_norm(p - pstar, h) / std::sqrt(2.0);
    // The trace route loses digits as sqrt(eps * |pi|^2) when the defect is tiny.
    const double slack = 1e-8 * (1.0 + pn2) + std::sqrt(1e-14 * (1.0 + pn2));
    if (std::abs(via_trace - via_adjoint) > slack)
      throw InternalInconsistency("orthogonality_defect: trace and adjoint forms disagree");
    out.defect.push_back(via_adjoint < 1e-6 ? via_adjoint : via_trace);
    out.adjoint_gap.push_back(via_adjoint);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Vector (Weyl chamber) distance

struct VectorDistance {
  std::vector<double> kappas;  // descending
};

/// kappa_i = log|e_i|_{h1} - log|e_i|_{h2} over a basis orthogonal for both.
inline VectorDistance vector_distance(const HermitianForm& h1, const HermitianForm& h2) {
  if (h1.dim() != h2.dim()) throw DimensionMismatch("vector_distance: dimension mismatch");
  const CMatrix L = h1.cholesky();
  const CMatrix linv = L.triangularView<Eigen::Lower>().solve(CMatrix::Identity(h1.dim(), h1.dim()));
  CMatrix m = linv * h2.gram() * linv.adjoint();
  m = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> es(m, Eigen::EigenvaluesOnly);
  VectorDistance out;
  for (int i = 0; i < es.eigenvalues().size(); ++i) out.kappas.push_back(-0.5 * std::log(es.eigenvalues()(i)));
  std::sort(out.kappas.begin(), out.kappas.end(), std::greater<>());
  return out;
}

// ---------------------------------------------------------------------------

struct CommutatorNorms {
  double semisimple = 0.0;  // |[f_s, f_s^*]|_h
  double nil_semi = 0.0;    // |[f_n, f_s^*]|_h
  double semi_nil = 0.0;    // |[f_s, f_n^*]|_h
  double full = 0.0;        // |[f, f^*]|_h
};

inline CommutatorNorms commutator_norms(const JordanChevalleyParts& jc, const CMatrix& f, const HermitianForm& h) {
  const CMatrix fs_star = adjoint(jc.semisimple, h);
  const CMatrix fn_star = adjoint(jc.nilpotent, h);
  CommutatorNorms out;
  out.semisimple = hs_norm(commutator(jc.semisimple, fs_star), h);
  out.nil_semi = hs_norm(commutator(jc.nilpotent, fs_star), h);
  out.semi_nil = hs_norm(commutator(jc.semisimple, fn_star), h);
  out.full = hs_norm(commutator(f, adjoint(f, h)), h);
  return out;
}

inline CommutatorNorms commutator_norms(const CMatrix& f, const HermitianForm& h) {
  return commutator_norms(jordan_chevalley(f), f, h);
}

}  // namespace hitchin

#endif  // HITCHIN_HIGGS_ALGEBRA_HPP
