#ifndef HITCHIN_ENERGY_HPP
#define HITCHIN_ENERGY_HPP

// Pullback tensors of the harmonic map of (R phi, h_R) and of the toral map
// for SL(n, C), with the trace form on the Lie algebra and the flat metric
// |dz|^2 on the domain. Tensors are stored as coefficients of |dz|^2 (mixed)
// and dz^2 (holomorphic).

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "hitchin/core.hpp"
#include "hitchin/decoupling.hpp"
#include "hitchin/grid.hpp"
#include "hitchin/higgs_algebra.hpp"
#include "hitchin/higgs_field.hpp"
#include "hitchin/hitchin_solver.hpp"

namespace hitchin {

struct PullbackTensors {
  Grid grid;
  double R = 0.0;
  std::vector<double> g_mixed;       // R^2 |f|_h^2
  std::vector<Complex> g_holo;       // R^2 tr f^2
  std::vector<double> toral_mixed;   // sum |lambda_i|^2
  std::vector<Complex> toral_holo;   // sum lambda_i^2
  std::vector<double> diag_part;     // |f_a|_h^2 in a Schur frame
  std::vector<double> upper_part;    // |f_u|_h^2 in a Schur frame

  double gap(int idx) const { return g_mixed[idx] - R * R * toral_mixed[idx]; }
};

namespace detail {

/// |f_a|^2 and |f_u|^2 from the triangular form of f in an h-orthonormal frame.
inline std::pair<double, double> schur_split(const CMatrix& f, const HermitianForm& h) {
  const CMatrix L = h.cholesky();
  const CMatrix w = L.adjoint().triangularView<Eigen::Upper>().solve<Eigen::OnTheRight>(CMatrix(L.adjoint() * f));
  Eigen::ComplexSchur<CMatrix> cs(w);
  const CMatrix& t = cs.matrixT();
  double a = 0.0, u = 0.0;
  for (int i = 0; i < t.rows(); ++i) {
    a += std::norm(t(i, i));
    for (int j = i + 1; j < t.cols(); ++j) u += std::norm(t(i, j));
  }
  return {a, u};
}

}  // namespace detail

inline PullbackTensors pullback_tensors(const HiggsField& phi, const MetricField& h, double R) {
  if (phi.rank() != h.dim()) throw DimensionMismatch("pullback_tensors: rank and metric dimension differ");
  PullbackTensors t;
  t.grid = h.grid();
  t.R = R;
  const int nodes = t.grid.size();
  t.g_mixed.resize(nodes);
  t.g_holo.resize(nodes);
  t.toral_mixed.resize(nodes);
  t.toral_holo.resize(nodes);
  t.diag_part.resize(nodes);
  t.upper_part.resize(nodes);
  for (int idx = 0; idx < nodes; ++idx) {
    const CMatrix f = phi.evaluate_unchecked(t.grid.point(idx));
    const HermitianForm form(h.gram(idx));
    t.g_mixed[idx] = R * R * hs_norm_squared(f, form);
    t.g_holo[idx] = R * R * (f * f).trace();
    double tm = 0.0;
    Complex th = 0.0;
    for (const Complex& l : detail::clustered_eigenvalues(f)) {
      tm += std::norm(l);
      th += l * l;
    }
    t.toral_mixed[idx] = tm;
    t.toral_holo[idx] = th;
    const auto [a, u] = detail::schur_split(f, form);
    t.diag_part[idx] = a;
    t.upper_part[idx] = u;
  }
  return t;
}

/// Coefficient of dx dy in e dA for the reference metric sigma = scale (dx^2 + dy^2),
/// with e = 1/2 tr_sigma g and g = g_mixed |dz|^2 + 2 Re(g_holo dz^2).
inline std::vector<double> energy_form(const PullbackTensors& t, double sigma_scale) {
  if (!(sigma_scale > 0.0)) throw ContractViolation("energy_form: reference metric scale must be positive");
  std::vector<double> out(t.g_mixed.size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    const double gxx = t.g_mixed[k] + 2.0 * t.g_holo[k].real();
    const double gyy = t.g_mixed[k] - 2.0 * t.g_holo[k].real();
    const double e = 0.5 * (gxx + gyy) / sigma_scale;
    out[k] = e * sigma_scale;
  }
  return out;
}

struct EnergyPoint {
  double R = 0.0;
  double gap_max = 0.0;           // max over the region of g_mixed - R^2 toral_mixed
  double lower_margin = 0.0;      // min over the region of (g_mixed - R^2 toral_mixed) / R^2
  double split_error = 0.0;       // max |gap - R^2 |f_u|^2|
  double holo_error = 0.0;        // max |g_holo - R^2 toral_holo|
  double residual = 0.0;          // solver residual at this R
};

struct EnergyComparison {
  DecaySweep sweep;
  std::vector<EnergyPoint> points;
};

inline EnergyPoint energy_point(const PullbackTensors& t, const std::vector<int>& region) {
  EnergyPoint p;
  p.R = t.R;
  p.lower_margin = std::numeric_limits<double>::infinity();
  const double r2 = t.R * t.R;
  for (int idx : region) {
    const double gap = t.gap(idx);
    p.gap_max = std::max(p.gap_max, gap);
    if (r2 > 0.0) p.lower_margin = std::min(p.lower_margin, gap / r2);
    p.split_error = std::max(p.split_error, std::abs(gap - r2 * t.upper_part[idx]));
    p.holo_error = std::max(p.holo_error, std::abs(t.g_holo[idx] - r2 * t.toral_holo[idx]));
  }
  if (!(r2 > 0.0)) p.lower_margin = 0.0;
  return p;
}

/// Gap sweep along one continuation chain; floors are 10x the solver residual.
inline EnergyComparison energy_comparison_sweep(const HiggsField& phi, const std::vector<double>& R_list,
                                                double region_radius, const Grid& grid, const SolverConfig& cfg) {
  if (region_radius > 0.5 + 1e-12) throw ContractViolation("energy_comparison_sweep: region must lie in D(1/2)");
  EnergyComparison out;
  out.sweep.quantity = "energy_gap";
  HitchinSolver solver(phi, grid, cfg);
  const std::vector<int> region = grid.disk_nodes(region_radius);
  for (double R : R_list) {
    const SolveReport rep = solver.solve(R);
    EnergyPoint p = energy_point(pullback_tensors(phi, solver.metric(), R), region);
    p.residual = rep.residual_sup;
    out.points.push_back(p);
    out.sweep.R.push_back(R);
    out.sweep.values.push_back(std::max(0.0, p.gap_max));
    out.sweep.floors.push_back(10.0 * rep.residual_sup);
  }
  fit_sweep(out.sweep);
  return out;
}

}  // namespace hitchin

#endif  // HITCHIN_ENERGY_HPP
