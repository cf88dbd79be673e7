#ifndef HITCHIN_WKB_HPP
#define HITCHIN_WKB_HPP

// Parallel transport of the flat connection D = d + H^{-1} dH + R Phi + R Phi^{*h}
// along paths, its exterior powers, and the vector distance between the
// endpoint metric and the pulled-back one.

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "hitchin/core.hpp"
#include "hitchin/grid.hpp"
#include "hitchin/higgs_algebra.hpp"
#include "hitchin/higgs_field.hpp"
#include "hitchin/hitchin_solver.hpp"

namespace hitchin {

/// exp(log_scale) * matrix; the scale keeps large-R propagators finite.
struct Propagator {
  CMatrix matrix;
  double log_scale = 0.0;

  CMatrix value() const { return std::exp(log_scale) * matrix; }
};

// ---------------------------------------------------------------------------
// Exterior powers

namespace detail {

inline std::vector<std::vector<int>> subsets(int n, int k) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur(k);
  for (int i = 0; i < k; ++i) cur[i] = i;
  if (k == 0 || k > n) return k == 0 ? std::vector<std::vector<int>>{{}} : out;
  while (true) {
    out.push_back(cur);
    int p = k - 1;
    while (p >= 0 && cur[p] == n - k + p) --p;
    if (p < 0) break;
    ++cur[p];
    for (int q = p + 1; q < k; ++q) cur[q] = cur[q - 1] + 1;
  }
  return out;
}

inline int subset_index(const std::vector<std::vector<int>>& all, const std::vector<int>& s) {
  const auto it = std::lower_bound(all.begin(), all.end(), s);
  return (it != all.end() && *it == s) ? static_cast<int>(it - all.begin()) : -1;
}

}  // namespace detail

/// k-th compound matrix: the k x k minors of m, rows and columns in lexicographic order.
inline CMatrix compound(const CMatrix& m, int k) {
  const auto rs = detail::subsets(static_cast<int>(m.rows()), k);
  const auto cs = detail::subsets(static_cast<int>(m.cols()), k);
  CMatrix out(rs.size(), cs.size());
  CMatrix sub(k, k);
  for (std::size_t a = 0; a < rs.size(); ++a)
    for (std::size_t b = 0; b < cs.size(); ++b) {
      for (int p = 0; p < k; ++p)
        for (int q = 0; q < k; ++q) sub(p, q) = m(rs[a][p], cs[b][q]);
      out(a, b) = k == 0 ? Complex(1.0) : sub.determinant();
    }
  return out;
}

/// Action of a on the k-th exterior power as a derivation.
inline CMatrix exterior_derivation(const CMatrix& a, int k) {
  const int n = static_cast<int>(a.rows());
  const auto all = detail::subsets(n, k);
  CMatrix out = CMatrix::Zero(all.size(), all.size());
  for (std::size_t col = 0; col < all.size(); ++col) {
    const auto& J = all[col];
    for (int p = 0; p < k; ++p)
      for (int i = 0; i < n; ++i) {
        if (a(i, J[p]) == Complex(0.0)) continue;
        std::vector<int> I = J;
        I[p] = i;
        bool repeated = false;
        for (int q = 0; q < k; ++q)
          if (q != p && I[q] == i) repeated = true;
        if (repeated) continue;
        int sign = 1;
        for (int x = 0; x < k; ++x)
          for (int y = x + 1; y < k; ++y)
            if (I[x] > I[y]) sign = -sign;
        std::sort(I.begin(), I.end());
        out(detail::subset_index(all, I), col) += double(sign) * a(i, J[p]);
      }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Transport

namespace detail {

/// Samples A(s) = (H^{-1} d_z H + R Phi) gamma' + R Phi^{*h} conj(gamma') from the grid.
class TransportCoefficient {
public:
  TransportCoefficient(const MetricField& h, const HiggsField& phi, double R)
      : h_(h), phi_(phi), R_(R), conn_(chern_connection(h)) {
    if (phi.rank() != h.dim()) throw DimensionMismatch("transport: rank and metric dimension differ");
    const Grid& g = h.grid();
    safe_ = g.half_width - 2.0 * g.spacing();
  }

  CMatrix operator()(Complex z, Complex dz) const {
    if (std::abs(z.real()) > safe_ + 1e-12 || std::abs(z.imag()) > safe_ + 1e-12)
      throw DomainError("transport: path enters the two boundary cells of the grid");
    const CMatrix conn = MetricField::interpolate_field(h_.grid(), conn_, z);
    CMatrix gram = MetricField::interpolate_field(h_.grid(), h_.grams(), z);
    gram = 0.5 * (gram + gram.adjoint());
    const CMatrix f = R_ * phi_.evaluate(z);
    const CMatrix fstar = gram.llt().solve(f.adjoint() * gram);
    return (conn + f) * dz + fstar * std::conj(dz);
  }

private:
  const MetricField& h_;
  const HiggsField& phi_;
  double R_;
  std::vector<CMatrix> conn_;
  double safe_ = 0.0;
};

inline double max_spectral_radius(const HiggsField& phi, const PathSpec& gamma) {
  double out = 0.0;
  for (double s : gamma.parameters()) {
    Eigen::ComplexEigenSolver<CMatrix> es(phi.evaluate(gamma.at(s)), false);
    out = std::max(out, es.eigenvalues().cwiseAbs().maxCoeff());
  }
  return out;
}

}  // namespace detail

/// Steps per unit of R max|lambda| length; RK4 error per unit is then about 1e-11.
inline constexpr double kStepsPerUnit = 160.0;

/// Step count of the fixed-step integrator, never below 40 per unit of R max|lambda| length.
inline int transport_steps(const HiggsField& phi, double R, const PathSpec& gamma, int steps) {
  const double stiff = kStepsPerUnit * R * detail::max_spectral_radius(phi, gamma) * gamma.length();
  return std::max({steps, static_cast<int>(std::ceil(stiff)), 1});
}

/// Classical RK4 for v' = -A(s) v on every exterior power k = 1..n at once,
/// renormalizing every 50 steps. Returns the propagators of the powers in order.
inline std::vector<Propagator> transport_exterior(const MetricField& h, const HiggsField& phi, double R,
                                                  const PathSpec& gamma, int steps) {
  const detail::TransportCoefficient coeff(h, phi, R);
  const int n = phi.rank();
  const int count = transport_steps(phi, R, gamma, steps);
  const double ds = 1.0 / count;
  std::vector<Propagator> out(n);
  for (int k = 1; k <= n; ++k) {
    const int m = static_cast<int>(detail::subsets(n, k).size());
    out[k - 1].matrix = CMatrix::Identity(m, m);
  }
  auto sample = [&](double s) { return coeff(gamma.at(s), gamma.derivative(s)); };
  CMatrix a0 = sample(0.0);
  for (int step = 0; step < count; ++step) {
    const double s = step * ds;
    const CMatrix a1 = sample(s + 0.5 * ds);
    const CMatrix a2 = sample(s + ds);
    for (int k = 1; k <= n; ++k) {
      const CMatrix d0 = k == 1 ? a0 : exterior_derivation(a0, k);
      const CMatrix d1 = k == 1 ? a1 : exterior_derivation(a1, k);
      const CMatrix d2 = k == 1 ? a2 : exterior_derivation(a2, k);
      CMatrix& y = out[k - 1].matrix;
      const CMatrix k1 = -d0 * y;
      const CMatrix k2 = -d1 * (y + 0.5 * ds * k1);
      const CMatrix k3 = -d1 * (y + 0.5 * ds * k2);
      const CMatrix k4 = -d2 * (y + ds * k3);
      y += ds / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      if ((step + 1) % 50 == 0 || step + 1 == count) {
        const double nrm = y.norm();
        if (!(nrm > 0.0) || !std::isfinite(nrm)) throw InternalInconsistency("transport: propagator degenerated");
        y /= nrm;
        out[k - 1].log_scale += std::log(nrm);
      }
    }
    a0 = a2;
  }
  return out;
}

inline Propagator transport_propagator(const MetricField& h, const HiggsField& phi, double R, const PathSpec& gamma,
                                       int steps = 0) {
  // Only the first power is needed; avoid the exterior work for the common call.
  const detail::TransportCoefficient coeff(h, phi, R);
  const int count = transport_steps(phi, R, gamma, steps);
  const double ds = 1.0 / count;
  Propagator out{CMatrix::Identity(phi.rank(), phi.rank()), 0.0};
  auto sample = [&](double s) { return coeff(gamma.at(s), gamma.derivative(s)); };
  CMatrix a0 = sample(0.0);
  for (int step = 0; step < count; ++step) {
    const double s = step * ds;
    const CMatrix a1 = sample(s + 0.5 * ds), a2 = sample(s + ds);
    CMatrix& y = out.matrix;
    const CMatrix k1 = -a0 * y;
    const CMatrix k2 = -a1 * (y + 0.5 * ds * k1);
    const CMatrix k3 = -a1 * (y + 0.5 * ds * k2);
    const CMatrix k4 = -a2 * (y + ds * k3);
    y += ds / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if ((step + 1) % 50 == 0 || step + 1 == count) {
      const double nrm = y.norm();
      if (!(nrm > 0.0) || !std::isfinite(nrm)) throw InternalInconsistency("transport: propagator degenerated");
      y /= nrm;
      out.log_scale += std::log(nrm);
    }
    a0 = a2;
  }
  return out;
}

/// Pi mapping the fibre at gamma(0) to the fibre at gamma(1).
inline CMatrix transport(const MetricField& h, const HiggsField& phi, double R, const PathSpec& gamma, int steps = 0) {
  return transport_propagator(h, phi, R, gamma, steps).value();
}

// ---------------------------------------------------------------------------
// Norms between metrics

/// log |wedge^k Pi|_op for k = 1..n, from h_start to h_end.
inline std::vector<double> wedge_log_norms(const CMatrix& pi, const HermitianForm& h_start, const HermitianForm& h_end) {
  if (pi.rows() != h_end.dim() || pi.cols() != h_start.dim())
    throw DimensionMismatch("wedge_log_norms: dimensions disagree");
  const CMatrix l0 = h_start.cholesky(), l1 = h_end.cholesky();
  const CMatrix right = l0.adjoint().triangularView<Eigen::Upper>().solve<Eigen::OnTheRight>(
      CMatrix::Identity(pi.cols(), pi.cols()));
  const CMatrix w = l1.adjoint() * pi * right;
  Eigen::JacobiSVD<CMatrix> svd(w);
  std::vector<double> out;
  double acc = 0.0;
  for (int i = 0; i < svd.singularValues().size(); ++i) {
    acc += std::log(svd.singularValues()(i));
    out.push_back(acc);
  }
  return out;
}

/// Same from the transported exterior powers, accurate for every k.
inline std::vector<double> wedge_log_norms(const std::vector<Propagator>& powers, const HermitianForm& h_start,
                                           const HermitianForm& h_end) {
  const int n = h_start.dim();
  const CMatrix l0 = h_start.cholesky(), l1 = h_end.cholesky();
  const CMatrix linv0 = l0.adjoint().triangularView<Eigen::Upper>().solve(CMatrix::Identity(n, n));
  std::vector<double> out;
  for (int k = 1; k <= static_cast<int>(powers.size()); ++k) {
    const CMatrix w = compound(l1.adjoint(), k) * powers[k - 1].matrix * compound(linv0, k);
    Eigen::JacobiSVD<CMatrix> svd(w);
    out.push_back(std::log(svd.singularValues()(0)) + powers[k - 1].log_scale);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Report

struct TransportReport {
  double R = 0.0;
  CMatrix Pi;                  // normalized; the propagator is exp(pi_log_scale) * Pi
  double pi_log_scale = 0.0;
  std::vector<double> beta;    // descending
  std::vector<double> alpha;   // descending
  std::vector<double> entry_discrepancy;  // |beta_i / R - 2 alpha_i|
  double discrepancy = 0.0;
  std::vector<double> wedge_lognorms;
  double crosscheck = 0.0;     // largest |beta_i - direct_i| over resolvable components
  int steps = 0;
  double integrator_error = 0.0;  // max_i |beta_i(steps) - beta_i(2 steps)| / R
  double step_halving = 0.0;      // max_k |wedge_k(steps) - wedge_k(2 steps)| / (1 + |wedge_k|)
};

/// beta = d(Pi^* h_end, h_start); components from the exterior powers, with the
/// singular values of Pi itself as a cross-check where they are resolvable.
inline TransportReport wkb_report(const HiggsField& phi, const MetricField& h, double R, const PathSpec& gamma,
                                  int steps = 0) {
  const BranchTracks tracks = branch_continuation(phi, gamma);
  if (!tracks.non_critical) throw NonCriticalPathViolation("wkb_report: path is critical");
  TransportReport rep;
  rep.R = R;
  rep.alpha = alpha_integrals(tracks, gamma);
  rep.steps = transport_steps(phi, R, gamma, steps);
  const auto powers = transport_exterior(h, phi, R, gamma, steps);
  rep.Pi = powers[0].matrix;
  rep.pi_log_scale = powers[0].log_scale;

  const HermitianForm h0(h.interpolate(gamma.at(0.0)));
  const HermitianForm h1(h.interpolate(gamma.at(1.0)));
  rep.wedge_lognorms = wedge_log_norms(powers, h0, h1);
  const int n = phi.rank();
  for (int k = 0; k < n; ++k) rep.beta.push_back(rep.wedge_lognorms[k] - (k ? rep.wedge_lognorms[k - 1] : 0.0));

  // Direct singular values of the normalized Pi lose components far below the top one.
  std::vector<double> direct = wedge_log_norms(rep.Pi, h0, h1);
  for (int k = n - 1; k > 0; --k) direct[k] -= direct[k - 1];
  for (int k = 0; k < n; ++k) {
    direct[k] += rep.pi_log_scale;
    if (rep.beta[0] - rep.beta[k] > 18.0) continue;
    const double gap = std::abs(direct[k] - rep.beta[k]);
    rep.crosscheck = std::max(rep.crosscheck, gap);
    if (gap > 1e-6 * (1.0 + std::abs(rep.beta[k])))
      throw InternalInconsistency("wkb_report: exterior-power and direct vector distances disagree");
  }

  const auto fine = wedge_log_norms(transport_exterior(h, phi, R, gamma, 2 * rep.steps), h0, h1);
  for (int k = 0; k < n; ++k) {
    const double bf = fine[k] - (k ? fine[k - 1] : 0.0);
    if (R > 0.0) rep.integrator_error = std::max(rep.integrator_error, std::abs(bf - rep.beta[k]) / R);
    rep.step_halving =
        std::max(rep.step_halving, std::abs(fine[k] - rep.wedge_lognorms[k]) / (1.0 + std::abs(rep.wedge_lognorms[k])));
  }

  for (int k = 0; k < n; ++k) {
    const double e = R > 0.0 ? std::abs(rep.beta[k] / R - 2.0 * rep.alpha[k]) : 2.0 * std::abs(rep.alpha[k]);
    rep.entry_discrepancy.push_back(e);
    rep.discrepancy = std::max(rep.discrepancy, e);
  }
  return rep;
}

}  // namespace hitchin

#endif  // HITCHIN_WKB_HPP
