#ifndef HITCHIN_DECOUPLING_HPP
#define HITCHIN_DECOUPLING_HPP

// Asymptotic decoupling measurements on a disk region for a solved metric
// h_R of R phi, and decay-law fits across R sweeps.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "hitchin/core.hpp"
#include "hitchin/grid.hpp"
#include "hitchin/higgs_algebra.hpp"
#include "hitchin/higgs_field.hpp"
#include "hitchin/hitchin_solver.hpp"

namespace hitchin {

/// Maxima over the region of the pointwise quantities (R-scaled parts).
struct RegionMeasurement {
  int nodes = 0;
  double orthogonality = 0.0;       // max_i |pi_i - pi_i'|_h
  double adjoint_gap = 0.0;         // max_i |pi_i - pi_i^{*h}|_h / sqrt 2
  double nilpotent = 0.0;           // |R f_n|_h
  double parallelity = 0.0;         // max_i |d_h pi_i|_h
  double second_fundamental = 0.0;  // max_i |B_i|_h
  double comm_semisimple = 0.0;     // |[R f_s, (R f_s)^*]|_h
  double comm_nil_semi = 0.0;       // |[R f_n, (R f_s)^*]|_h
  double comm_semi_nil = 0.0;       // |[R f_s, (R f_n)^*]|_h
  double curvature_balance = 0.0;   // |F(h) - [R f_n, (R f_n)^*]|_h, dzbar^dz coefficient
  double remainder_connection = 0.0;   // |H^{-1} dH - H_+^{-1} dH_+|_h
  double remainder_semisimple = 0.0;   // |R (f_s^{*h} - f_s^{*h_+})|_h
  double remainder_nilpotent = 0.0;    // |R (f_n^{*h} - f_n^{*h_+})|_h
  double remainder_total = 0.0;        // |a|_h
  double remainder_crosscheck = 0.0;   // connection term against sum_i (1 - pi_i') d_h pi_i pi_i
  double hitchin_residual = 0.0;       // |K|_h
  double higgs_norm = 0.0;             // |R f|_h
  double flag_max = 0.0;               // max |R f_a|_h over the region
  bool near_critical = false;
};

namespace detail {

/// Reorders `candidate` projections to match `reference` by nearest Frobenius distance.
inline std::vector<CMatrix> align_projections(const std::vector<CMatrix>& reference, const std::vector<CMatrix>& candidate) {
  if (reference.size() != candidate.size())
    throw ClusteringError("align_projections: eigenspace count changes between neighbouring nodes", 0.0, 0.0);
  const std::size_t m = reference.size();
  std::vector<CMatrix> out(m);
  std::vector<bool> used(m, false);
  for (std::size_t i = 0; i < m; ++i) {
    double best = std::numeric_limits<double>::infinity(), second = best;
    std::size_t arg = 0;
    for (std::size_t j = 0; j < m; ++j) {
      const double d = (reference[i] - candidate[j]).norm();
      if (d < best) {
        second = best;
        best = d;
        arg = j;
      } else if (d < second) {
        second = d;
      }
    }
    if (used[arg] || (m > 1 && !(best < 0.5 * second)))
      throw ClusteringError("align_projections: ambiguous eigenprojection labels", best, second);
    used[arg] = true;
    out[i] = candidate[arg];
  }
  return out;
}

inline CMatrix block_metric(const CMatrix& gram, const std::vector<CMatrix>& projections) {
  CMatrix out = CMatrix::Zero(gram.rows(), gram.cols());
  for (const auto& p : projections) out += p.adjoint() * gram * p;
  return 0.5 * (out + out.adjoint());
}

}  // namespace detail

inline RegionMeasurement measure_region(const HiggsField& phi, const MetricField& h, double R, double radius = 0.5) {
  if (phi.rank() != h.dim()) throw DimensionMismatch("measure_region: rank and metric dimension differ");
  const Grid& g = h.grid();
  const double sp = g.spacing();
  const int np = g.points;
  RegionMeasurement out;
  for (int idx : g.disk_nodes(radius)) {
    const int i = g.col(idx), j = g.row(idx);
    if (i < 1 || j < 1 || i > np - 2 || j > np - 2) throw DomainError("measure_region: region touches the grid boundary");
    ++out.nodes;
    const CMatrix f = phi.evaluate(g.point(idx));
    const JordanChevalleyParts jc = jordan_chevalley(f);
    out.near_critical = out.near_critical || jc.near_critical;
    const HermitianForm form(h.gram(idx));
    const int m = static_cast<int>(jc.projections.size());

    const auto od = orthogonality_defect(jc.projections, form);
    for (int k = 0; k < m; ++k) {
      out.orthogonality = std::max(out.orthogonality, od.defect[k]);
      out.adjoint_gap = std::max(out.adjoint_gap, od.adjoint_gap[k]);
    }
    out.nilpotent = std::max(out.nilpotent, R * hs_norm(jc.nilpotent, form));
    out.higgs_norm = std::max(out.higgs_norm, R * hs_norm(f, form));
    double fa2 = 0.0;
    for (int k = 0; k < m; ++k) fa2 += jc.multiplicities[k] * std::norm(jc.eigenvalues[k]);
    out.flag_max = std::max(out.flag_max, R * std::sqrt(fa2));

    const CommutatorNorms cn = commutator_norms(jc, f, form);
    out.comm_semisimple = std::max(out.comm_semisimple, R * R * cn.semisimple);
    out.comm_nil_semi = std::max(out.comm_nil_semi, R * R * cn.nil_semi);
    out.comm_semi_nil = std::max(out.comm_semi_nil, R * R * cn.semi_nil);

    const CMatrix conn = connection_at(g, h.grams(), i, j);
    const CMatrix curv = curvature_at(g, h.grams(), idx);
    const CMatrix fn_star = adjoint(jc.nilpotent, form);
    out.curvature_balance =
        std::max(out.curvature_balance, hs_norm(curv - R * R * commutator(jc.nilpotent, fn_star), form));
    out.hitchin_residual =
        std::max(out.hitchin_residual, hs_norm(curv - R * R * commutator(f, adjoint(f, form)), form));

    // Neighbour projections, relabelled to the centre, for d_z pi_i and d_z H_+.
    const int nbr[4] = {idx + 1, idx - 1, idx + np, idx - np};
    std::vector<std::vector<CMatrix>> nproj(4);
    for (int q = 0; q < 4; ++q) {
      const JordanChevalleyParts jq = jordan_chevalley(phi.evaluate(g.point(nbr[q])));
      nproj[q] = detail::align_projections(jc.projections, jq.projections);
    }
    CMatrix crosscheck = CMatrix::Zero(h.dim(), h.dim());
    for (int k = 0; k < m; ++k) {
      const CMatrix dx = (nproj[0][k] - nproj[1][k]) / (2.0 * sp);
      const CMatrix dy = (nproj[2][k] - nproj[3][k]) / (2.0 * sp);
      const CMatrix dpi = 0.5 * (dx - kI * dy) + commutator(conn, jc.projections[k]);
      const CMatrix po = orthogonal_projection(projection_range(jc.projections[k]), form);
      const CMatrix comp = CMatrix::Identity(h.dim(), h.dim()) - po;
      out.parallelity = std::max(out.parallelity, hs_norm(dpi, form));
      out.second_fundamental = std::max(out.second_fundamental, hs_norm(comp * dpi * po, form));
      crosscheck += comp * dpi * jc.projections[k];
    }

    // Block metric h_+ = sum_i pi_i^dagger H pi_i and its Chern connection.
    const CMatrix hp = detail::block_metric(h.gram(idx), jc.projections);
    const auto [hp_half, hp_whiten] = detail::sqrt_pair(hp);
    CMatrix mp[4];
    for (int q = 0; q < 4; ++q)
      mp[q] = detail::hermitian_log_t<CMatrix>(hp_whiten * detail::block_metric(h.gram(nbr[q]), nproj[q]) * hp_whiten);
    const CMatrix mpx = (mp[0] - mp[1]) / (2.0 * sp), mpy = (mp[2] - mp[3]) / (2.0 * sp);
    const CMatrix conn_plus = hp_whiten * (0.5 * (mpx - kI * mpy)) * hp_half;
    const CMatrix a_z = conn - conn_plus;
    const HermitianForm plus(hp);
    CMatrix fs_plus = CMatrix::Zero(h.dim(), h.dim());
    for (int k = 0; k < m; ++k) fs_plus += std::conj(jc.eigenvalues[k]) * jc.projections[k];
    const CMatrix semi = R * (adjoint(jc.semisimple, form) - fs_plus);
    const CMatrix nil = R * (fn_star - adjoint(jc.nilpotent, plus));
    const double az = hs_norm(a_z, form);
    const double azb = hs_norm(semi + nil, form);
    out.remainder_connection = std::max(out.remainder_connection, az);
    out.remainder_semisimple = std::max(out.remainder_semisimple, hs_norm(semi, form));
    out.remainder_nilpotent = std::max(out.remainder_nilpotent, hs_norm(nil, form));
    out.remainder_total = std::max(out.remainder_total, std::sqrt(az * az + azb * azb));
    out.remainder_crosscheck = std::max(out.remainder_crosscheck, hs_norm(a_z - crosscheck, form));
  }
  if (out.nodes == 0) throw DomainError("measure_region: region contains no grid nodes");
  return out;
}

namespace detail {

inline void require_certified(const HiggsField& phi) {
  const SpectralCertificate c = critical_set(phi);
  for (const auto& p : c.critical_points)
    if (std::abs(p) <= 1.0 + 1e-9) throw NotCertifiable("measurement: critical point inside the closed unit disk");
  if (c.m > 1 && c.d <= 0.0) throw NotCertifiable("measurement: eigenvalue gap vanishes on the unit disk");
}

}  // namespace detail

inline double measure_orthogonality(const HiggsField& phi, const MetricField& h, double R, double radius = 0.5) {
  detail::require_certified(phi);
  return measure_region(phi, h, R, radius).orthogonality;
}

inline double measure_nilpotent_norm(const HiggsField& phi, const MetricField& h, double R, double radius = 0.5) {
  return measure_region(phi, h, R, radius).nilpotent;
}

struct ParallelityMeasurement {
  double parallelity = 0.0;
  double second_fundamental = 0.0;
};

inline ParallelityMeasurement measure_parallelity(const HiggsField& phi, const MetricField& h, double R, double radius = 0.5) {
  detail::require_certified(phi);
  const auto m = measure_region(phi, h, R, radius);
  return {m.parallelity, m.second_fundamental};
}

struct CommutatorMeasurement {
  double semisimple = 0.0, nil_semi = 0.0, semi_nil = 0.0, curvature_balance = 0.0;
};

inline CommutatorMeasurement measure_commutators(const HiggsField& phi, const MetricField& h, double R, double radius = 0.5) {
  detail::require_certified(phi);
  const auto m = measure_region(phi, h, R, radius);
  return {m.comm_semisimple, m.comm_nil_semi, m.comm_semi_nil, m.curvature_balance};
}

struct RemainderMeasurement {
  double connection = 0.0, semisimple = 0.0, nilpotent = 0.0, total = 0.0, crosscheck = 0.0;
};

inline RemainderMeasurement connection_remainder(const HiggsField& phi, const MetricField& h, double R, double radius = 0.5) {
  detail::require_certified(phi);
  const auto m = measure_region(phi, h, R, radius);
  return {m.remainder_connection, m.remainder_semisimple, m.remainder_nilpotent, m.remainder_total, m.remainder_crosscheck};
}

struct DecoupledResiduals {
  double curvature = 0.0;   // |F(h) + [psi, psi^*]|
  double semisimple = 0.0;  // |[phi_s, phi_s^*]|
  double mixed = 0.0;       // |[phi_s, psi^*]|
};

inline DecoupledResiduals decoupled_residuals(const HiggsField& phi, const MetricField& h, double R, double radius = 0.5) {
  const auto m = measure_region(phi, h, R, radius);
  return {m.curvature_balance, m.comm_semisimple, m.comm_semi_nil};
}

// ---------------------------------------------------------------------------
// Decay fits

enum class DecayModel { exponential, reciprocal };

inline const char* to_string(DecayModel m) { return m == DecayModel::exponential ? "exponential" : "reciprocal"; }

struct DecayFit {
  DecayModel model = DecayModel::exponential;
  double C = 0.0;
  double c = 0.0;
  double residual = 0.0;  // RMS misfit in log space of the selected model
  double exp_C = 0.0, exp_c = 0.0, exp_residual = 0.0;
  double rec_C = 0.0, rec_residual = 0.0;
  std::vector<int> used;  // indices of the fitted points

  /// Exponential law with positive rate and log-space residual at most 0.2.
  bool confirmed_decay() const { return model == DecayModel::exponential && c > 0.0 && residual <= 0.2; }
};

struct DecaySweep {
  std::string quantity;
  std::vector<double> R;
  std::vector<double> values;
  std::vector<double> floors;
  std::vector<bool> censored;
  std::optional<DecayFit> fit;
  std::string fit_error;
};

/// Points at or below their floor are censored; the longest run of
/// consecutive uncensored points (the latest on ties) is fitted.
inline DecayFit fit_decay(const std::vector<double>& R, const std::vector<double>& y, const std::vector<double>& floors) {
  if (R.size() != y.size() || R.size() != floors.size()) throw DimensionMismatch("fit_decay: length mismatch");
  int best_start = 0, best_len = 0;
  for (int k = 0; k < static_cast<int>(y.size());) {
    if (!(y[k] > floors[k]) || !(y[k] > 0.0)) {
      ++k;
      continue;
    }
    int e = k;
    while (e < static_cast<int>(y.size()) && y[e] > floors[e] && y[e] > 0.0) ++e;
    if (e - k >= best_len) {
      best_len = e - k;
      best_start = k;
    }
    k = e;
  }
  if (best_len < 4) throw InsufficientData("fit_decay: fewer than 4 uncensored points");

  DecayFit fit;
  double sr = 0, sl = 0, srr = 0, srl = 0, slr = 0;
  for (int k = best_start; k < best_start + best_len; ++k) {
    fit.used.push_back(k);
    const double l = std::log(y[k]);
    sr += R[k];
    sl += l;
    srr += R[k] * R[k];
    srl += R[k] * l;
    slr += l + std::log(R[k]);
  }
  const double n = best_len;
  const double slope = (n * srl - sr * sl) / (n * srr - sr * sr);
  const double icpt = (sl - slope * sr) / n;
  fit.exp_c = -slope;
  fit.exp_C = std::exp(icpt);
  const double log_rc = slr / n;
  fit.rec_C = std::exp(log_rc);
  double e1 = 0, e2 = 0;
  for (int k : fit.used) {
    const double l = std::log(y[k]);
    e1 += std::pow(l - (icpt + slope * R[k]), 2);
    e2 += std::pow(l - (log_rc - std::log(R[k])), 2);
  }
  fit.exp_residual = std::sqrt(e1 / n);
  fit.rec_residual = std::sqrt(e2 / n);
  if (fit.rec_residual < fit.exp_residual) {
    fit.model = DecayModel::reciprocal;
    fit.C = fit.rec_C;
    fit.c = 0.0;
    fit.residual = fit.rec_residual;
  } else {
    fit.model = DecayModel::exponential;
    fit.C = fit.exp_C;
    fit.c = fit.exp_c;
    fit.residual = fit.exp_residual;
  }
  return fit;
}

inline void fit_sweep(DecaySweep& s) {
  s.censored.clear();
  for (std::size_t k = 0; k < s.values.size(); ++k) s.censored.push_back(!(s.values[k] > s.floors[k]));
  try {
    s.fit = fit_decay(s.R, s.values, s.floors);
    s.fit_error.clear();
  } catch (const InsufficientData& e) {
    s.fit.reset();
    s.fit_error = e.what();
  }
}

/// Length of the longest strictly decreasing tail of the uncensored values.
inline int decreasing_suffix(const std::vector<double>& values, const std::vector<bool>& censored) {
  std::vector<double> v;
  for (std::size_t k = 0; k < values.size(); ++k)
    if (!censored[k]) v.push_back(values[k]);
  if (v.empty()) return 0;
  int len = 1;
  for (int k = static_cast<int>(v.size()) - 1; k > 0 && v[k] < v[k - 1]; --k) ++len;
  return len;
}

}  // namespace hitchin

#endif  // HITCHIN_DECOUPLING_HPP
