#ifndef HITCHIN_SELFTEST_HPP
#define HITCHIN_SELFTEST_HPP

// Example checks with closed-form or independently computed expectations,
// plus the solver sweeps they depend on. Run by `hitchin_lab selftest`.

#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hitchin/decoupling.hpp"
#include "hitchin/energy.hpp"
#include "hitchin/example_fields.hpp"
#include "hitchin/experiment.hpp"
#include "hitchin/higgs_algebra.hpp"
#include "hitchin/higgs_field.hpp"
#include "hitchin/hitchin_solver.hpp"
#include "hitchin/wkb.hpp"

namespace hitchin {

struct CheckResult {
  std::string name;
  bool pass = true;
  std::string detail;
  double seconds = 0.0;
};

/// Accumulates failed expectations of one check.
class Expect {
public:
  void operator()(bool ok, const std::string& what) {
    if (!ok) {
      pass_ = false;
      note_ += (note_.empty() ? "" : "; ") + what;
    }
  }
  void near(double got, double want, double tol, const std::string& what) {
    std::ostringstream s;
    s << what << ": got " << std::setprecision(6) << got << ", want " << want << " +- " << tol;
    (*this)(std::abs(got - want) <= tol, s.str());
  }
  void below(double got, double limit, const std::string& what) {
    std::ostringstream s;
    s << what << ": " << std::setprecision(6) << got << " > " << limit;
    (*this)(got <= limit, s.str());
  }
  void info(const std::string& s) { info_ += (info_.empty() ? "" : "; ") + s; }
  bool pass() const { return pass_; }
  std::string detail() const {
    return info_.empty() ? note_ : note_ + (note_.empty() ? "" : " | ") + info_;
  }

private:
  bool pass_ = true;
  std::string note_, info_;
};

inline CheckResult run_check(const std::string& name, const std::function<void(Expect&)>& body) {
  CheckResult r;
  r.name = name;
  const auto t0 = std::chrono::steady_clock::now();
  Expect e;
  try {
    body(e);
    r.pass = e.pass();
    r.detail = e.detail();
  } catch (const std::exception& ex) {
    r.pass = false;
    r.detail = std::string("exception: ") + ex.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

/// Metrics and reports along one continuation chain.
struct Chain {
  std::vector<double> R;
  std::vector<MetricField> metrics;
  std::vector<SolveReport> reports;

  /// Index of the scheduled value closest to r (relative 1e-9).
  int find(double r) const {
    for (std::size_t k = 0; k < R.size(); ++k)
      if (std::abs(R[k] - r) <= 1e-9 * std::max(1.0, r)) return static_cast<int>(k);
    throw ContractViolation("Chain::find: R not in the schedule");
  }
};

inline std::vector<double> sqrt2_schedule(double start, double stop) {
  std::vector<double> out;
  for (int k = 0;; ++k) {
    // Even steps are exact powers of two.
    const double r = start * std::pow(2.0, k / 2) * (k % 2 ? std::sqrt(2.0) : 1.0);
    if (r > stop * (1.0 + 1e-12)) break;
    out.push_back(r);
  }
  return out;
}

inline Chain solve_chain(const HiggsField& phi, const Grid& grid, const SolverConfig& cfg, const std::vector<double>& R) {
  Chain c;
  HitchinSolver s(phi, grid, cfg);
  for (double r : R) {
    c.reports.push_back(s.solve(r));
    c.metrics.push_back(s.metric());
    c.R.push_back(r);
  }
  return c;
}

/// Region measurements of a chain at the given scheduled values.
inline std::vector<RegionMeasurement> measure_chain(const HiggsField& phi, const Chain& c, const std::vector<double>& R,
                                                    double radius, int jobs) {
  return parallel_map<RegionMeasurement>(static_cast<int>(R.size()), jobs, [&](int k) {
    const int i = c.find(R[k]);
    return measure_region(phi, c.metrics[i], R[k], radius);
  });
}

inline DecaySweep make_sweep(const std::string& name, const Chain& c, const std::vector<double>& R,
                             const std::vector<double>& values, double floor_factor) {
  DecaySweep s;
  s.quantity = name;
  s.R = R;
  s.values = values;
  for (double r : R) s.floors.push_back(floor_factor * c.reports[c.find(r)].residual_sup);
  fit_sweep(s);
  return s;
}

inline std::string describe(const DecaySweep& s) {
  std::ostringstream o;
  o << s.quantity << " [" << std::setprecision(3);
  for (std::size_t k = 0; k < s.values.size(); ++k) o << (k ? " " : "") << s.values[k] << (s.censored[k] ? "*" : "");
  o << "]";
  if (s.fit) o << " " << to_string(s.fit->model) << " C=" << s.fit->C << " c=" << s.fit->c << " res=" << s.fit->residual;
  else o << " no fit: " << s.fit_error;
  return o.str();
}

inline bool exponential_decay(const DecaySweep& s) { return s.fit && s.fit->model == DecayModel::exponential && s.fit->c > 0.0; }

/// Manufactured solution H = exp(g A) with a source making it exact; returns
/// the sup error of log H on the grid against the exact log. Continuation
/// starts at R = 0 with the source held fixed, so keep R and the amplitude
/// small enough that the intermediate problems stay solvable.
inline double manufactured_error(int points, double R, double amplitude = 0.2) {
  CMatrix A(2, 2);
  A << 0.5, Complex(0.3, 0.2), Complex(0.3, -0.2), -0.5;
  auto g = [=](Complex z) {
    return amplitude * (0.5 * std::exp(z.real()) * std::cos(2.0 * z.imag()) + z.real() * z.real() * z.imag());
  };
  auto lap = [=](Complex z) { return amplitude * (-1.5 * std::exp(z.real()) * std::cos(2.0 * z.imag()) + 2.0 * z.imag()); };
  const HiggsField phi =
      HiggsField::from_matrices({examples::mat2(1.0, 0.0, 0.0, -1.0), examples::mat2(0.0, 1.0, 0.0, 0.0)}, 1.2, true);
  SolverConfig cfg;
  cfg.tolerance = 1e-12;
  cfg.boundary_log = [=](Complex z) { return CMatrix(g(z) * A); };
  cfg.source = [=](Complex z) {
    const CMatrix H = hermitian_exp(g(z) * A);
    const CMatrix f = R * phi.evaluate_unchecked(z);
    const CMatrix fstar = H.llt().solve(f.adjoint() * H);
    return CMatrix(H * (0.25 * lap(z) * A - commutator(f, fstar)));
  };
  const Grid grid(1.2, points);
  HitchinSolver s(phi, grid, cfg);
  s.solve(R);
  const MetricField h = s.metric();
  double err = 0.0;
  for (int idx = 0; idx < grid.size(); ++idx)
    err = std::max(err, (hermitian_log(h.gram(idx)) - g(grid.point(idx)) * A).norm());
  return err;
}

/// Random idempotents: a random basis split into ranges of random sizes.
inline std::vector<CMatrix> random_idempotents(std::mt19937_64& rng, int n, int count) {
  std::normal_distribution<double> nd;
  std::vector<CMatrix> out;
  while (static_cast<int>(out.size()) < count) {
    CMatrix b(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) b(i, j) = Complex(nd(rng), nd(rng));
    Eigen::FullPivLU<CMatrix> lu(b);
    if (lu.rank() < n) continue;
    const int k = 1 + static_cast<int>(rng() % (n - 1));
    const CMatrix inv = lu.inverse();
    out.push_back(b.leftCols(k) * inv.topRows(k));
  }
  return out;
}

inline HermitianForm random_form(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> nd;
  CMatrix b(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) b(i, j) = Complex(nd(rng), nd(rng));
  return HermitianForm(b.adjoint() * b + 0.5 * CMatrix::Identity(n, n));
}

/// max_{D(1/2)} |R f|_h / (R max_{D(1)} |f_a| + 1), with |f_a|^2 the sum of |lambda|^2.
inline double higgs_bound_ratio(const HiggsField& phi, const MetricField& h, double R) {
  const Grid& g = h.grid();
  double top = 0.0, fa = 0.0;
  for (int idx : g.disk_nodes(1.0)) {
    const CMatrix f = phi.evaluate_unchecked(g.point(idx));
    fa = std::max(fa, std::sqrt(Eigen::ComplexEigenSolver<CMatrix>(f, false).eigenvalues().squaredNorm()));
    if (std::abs(g.point(idx)) <= 0.5 + 1e-12) top = std::max(top, R * hs_norm(f, HermitianForm(h.gram(idx))));
  }
  return top / (R * fa + 1.0);
}

/// max over D(rho) of |R f_n|_h (rho^2 - |z|^2) / rho^2.
inline double weighted_nilpotent_max(const HiggsField& phi, const MetricField& h, double R, double rho) {
  const Grid& g = h.grid();
  double out = 0.0;
  for (int idx : g.disk_nodes(rho)) {
    const Complex z = g.point(idx);
    const CMatrix fn = jordan_chevalley(phi.evaluate_unchecked(z)).nilpotent;
    out = std::max(out, R * hs_norm(fn, HermitianForm(h.gram(idx))) * (rho * rho - std::norm(z)) / (rho * rho));
  }
  return out;
}

/// Nilpotent solve with boundary data from the radial profile (rho = 2.4);
/// sup over D(0.9) of |H - H_oracle| / |H_oracle|.
inline double radial_oracle_error(double R, int points, double tolerance) {
  const RadialProfile prof = radial_oracle(R, 2.4);
  SolverConfig cfg;
  cfg.tolerance = tolerance;
  cfg.boundary_log = [prof](Complex z) {
    const double u = prof(std::abs(z));
    return examples::mat2(u, 0.0, 0.0, -u);
  };
  const Grid grid(1.2, points);
  HitchinSolver s(examples::nilpotent(), grid, cfg);
  s.solve(R);
  const MetricField h = s.metric();
  double err = 0.0;
  for (int idx : grid.disk_nodes(0.9)) {
    const double u = prof(std::abs(grid.point(idx)));
    const CMatrix ho = examples::mat2(std::exp(u), 0.0, 0.0, std::exp(-u));
    err = std::max(err, (h.gram(idx) - ho).norm() / ho.norm());
  }
  return err;
}

/// Worst relative errors of |pi - pi'| = |pi_u| and |pi - pi'| = |pi - pi^*| / sqrt 2
/// over random idempotents and metrics in dimensions 2..4.
inline std::pair<double, double> projection_identity_errors(std::uint64_t seed, int count) {
  std::mt19937_64 rng(seed);
  double worst1 = 0.0, worst2 = 0.0;
  for (int t = 0; t < count; ++t) {
    const int n = 2 + static_cast<int>(rng() % 3);
    const HermitianForm h = random_form(rng, n);
    const CMatrix p = random_idempotents(rng, n, 1)[0];
    const CMatrix po = orthogonal_projection(projection_range(p), h);
    const double lhs = hs_norm(p - po, h);
    const double scale = 1.0 + hs_norm(p, h);
    const SchurParts s = schur_decompose(p, h);
    worst1 = std::max(worst1, std::abs(lhs - hs_norm(s.upper_part, h)) / scale);
    worst2 = std::max(worst2, std::abs(lhs - hs_norm(p - adjoint(p, h), h) / std::sqrt(2.0)) / scale);
  }
  return {worst1, worst2};
}

struct SelftestOptions {
  Grid grid{1.2, 65};
  double rmax = 64.0;
  double solver_tolerance = 1e-12;
  double fit_floor = 10.0;
  double transport_tolerance = 1e-6;
  std::uint64_t seed = 1;
  int jobs = 1;
  std::ostream* log = &std::cerr;
};

/// Algebra, field, oracle and transport examples that need no sweep.
inline std::vector<std::pair<std::string, std::function<void(Expect&)>>> unit_checks(const SelftestOptions& opt) {
  using examples::mat2;
  std::vector<std::pair<std::string, std::function<void(Expect&)>>> c;
  const HermitianForm I2 = HermitianForm::identity(2);

  c.emplace_back("adjoint/identity_gram", [](Expect& e) {
    CMatrix f(3, 3);
    f << 1.0, Complex(2, 1), 0.5, Complex(0, -3), 4.0, 1.0, 2.0, Complex(1, 1), -1.0;
    e.below((adjoint(f, HermitianForm::identity(3)) - f.adjoint()).norm(), 1e-14, "conjugate transpose");
  });
  c.emplace_back("adjoint/self_adjoint", [](Expect& e) {
    CMatrix G(2, 2), S(2, 2);
    G << 3.0, Complex(1, 1), Complex(1, -1), 2.0;
    S << 1.0, Complex(0.5, 2), Complex(0.5, -2), -3.0;
    const CMatrix f = G.inverse() * S;
    e.below((adjoint(f, HermitianForm(G)) - f).norm(), 1e-13, "h-self-adjoint fixed");
  });
  c.emplace_back("adjoint/e12_diag41", [](Expect& e) {
    CMatrix G = CMatrix::Zero(2, 2);
    G(0, 0) = 4.0;
    G(1, 1) = 1.0;
    e.below((adjoint(mat2(0, 1, 0, 0), HermitianForm(G)) - mat2(0, 0, 4, 0)).norm(), 1e-14, "4 e21");
  });
  c.emplace_back("schur/upper_triangular", [=](Expect& e) {
    CMatrix f(3, 3);
    f << 1.0, 2.0, Complex(0, 1), 0.0, -2.0, 3.0, 0.0, 0.0, Complex(0.5, 1);
    const SchurParts s = schur_decompose(f, HermitianForm::identity(3));
    const CMatrix d = f.diagonal().asDiagonal();
    // Unitary reordering keeps the norms; in canonical order the blocks are literal.
    e.near(s.diag_part.squaredNorm(), d.squaredNorm(), 1e-12, "|f_a|^2");
    e.near(s.upper_part.squaredNorm(), (f - d).squaredNorm(), 1e-12, "|f_u|^2");
  });
  c.emplace_back("schur/normal", [](Expect& e) {
    CMatrix G(2, 2);
    G << 2.0, 0.5, 0.5, 1.0;
    const HermitianForm h(G);
    const auto [half, w] = detail::sqrt_pair(G);
    // f = W N W^{-1} with N normal is h-normal.
    const CMatrix n = mat2(1.0, Complex(0, 2), Complex(0, 2), 1.0);
    const CMatrix f = w * n * half;
    e.below(hs_norm(commutator(f, adjoint(f, h)), h), 1e-12, "normality");
    e.below(schur_decompose(f, h).upper_part.norm(), 1e-12, "f_u");
  });
  c.emplace_back("schur/hand_2x2", [=](Expect& e) {
    const SchurParts s = schur_decompose(mat2(1, 1, 0, 0), I2);
    e.near(hs_norm_squared(s.diag_part, I2), 1.0, 1e-12, "|f_a|^2");
    e.near(hs_norm_squared(s.upper_part, I2), 1.0, 1e-12, "|f_u|^2");
  });
  c.emplace_back("jordan_chevalley/companion_z2", [](Expect& e) {
    const CMatrix f = examples::companion3().evaluate_unchecked(2.0);
    const JordanChevalleyParts jc = jordan_chevalley(f);
    CMatrix fs = CMatrix::Zero(3, 3), fn = CMatrix::Zero(3, 3);
    fs(0, 2) = 0.5;
    fs(1, 2) = 1.0;
    fs(2, 2) = 2.0;
    fn(0, 1) = 1.0;
    fn(0, 2) = -0.5;
    e.below((jc.semisimple - fs).cwiseAbs().maxCoeff(), 1e-10, "f_s");
    e.below((jc.nilpotent - fn).cwiseAbs().maxCoeff(), 1e-10, "f_n");
  });
  c.emplace_back("jordan_chevalley/strictly_upper", [](Expect& e) {
    CMatrix f = CMatrix::Zero(3, 3);
    f(0, 1) = 2.0;
    f(0, 2) = Complex(1, 1);
    f(1, 2) = -1.0;
    const JordanChevalleyParts jc = jordan_chevalley(f);
    e.below(jc.semisimple.norm(), 1e-12, "f_s");
    e.below((jc.nilpotent - f).norm(), 1e-12, "f_n");
  });
  c.emplace_back("jordan_chevalley/projections_2x2", [](Expect& e) {
    const JordanChevalleyParts jc = jordan_chevalley(mat2(1, 1, 0, 2));
    e(jc.projections.size() == 2, "two projections");
    if (jc.projections.size() != 2) return;
    e.below((jc.projections[0] - mat2(1, -1, 0, 0)).norm(), 1e-12, "pi_1");
    e.below((jc.projections[1] - mat2(0, 1, 0, 1)).norm(), 1e-12, "pi_2");
    e.below(jc.nilpotent.norm(), 1e-12, "f_n");
  });
  c.emplace_back("orthogonality/orthogonal_projection", [](Expect& e) {
    CMatrix G(2, 2);
    G << 2.0, Complex(0.5, 0.5), Complex(0.5, -0.5), 1.0;
    const HermitianForm h(G);
    CMatrix v(2, 1);
    v << 1.0, Complex(0.3, -1);
    const CMatrix p = orthogonal_projection(v, h);
    e.below(orthogonality_defect({p, CMatrix::Identity(2, 2) - p}, h).defect[0], 1e-12, "defect");
  });
  c.emplace_back("orthogonality/delta_example", [=](Expect& e) {
    for (double d : {0.1, 0.5, 2.0}) {
      // Range span(delta, 1), kernel span(1, 0).
      const CMatrix p = mat2(0.0, d, 0.0, 1.0);
      e.near(orthogonality_defect({p}, I2).defect[0], d, 1e-12, "defect");
    }
  });
  c.emplace_back("orthogonality/projection_identities_random", [=](Expect& e) {
    const auto [worst1, worst2] = projection_identity_errors(opt.seed, 10000);
    e.below(worst1, 1e-9, "|pi - pi'| vs |pi_u|");
    e.below(worst2, 1e-9, "|pi - pi'| vs |pi - pi*|/sqrt2");
  });
  c.emplace_back("vector_distance/examples", [=](Expect& e) {
    CMatrix G(2, 2);
    G << 2.0, Complex(0, 1), Complex(0, -1), 3.0;
    for (double k : vector_distance(HermitianForm(G), HermitianForm(G)).kappas) e.below(std::abs(k), 1e-12, "equal metrics");
    CMatrix D = CMatrix::Zero(2, 2);
    D(0, 0) = std::exp(2.0);
    D(1, 1) = std::exp(-2.0);
    const auto k = vector_distance(I2, HermitianForm(D)).kappas;
    e.near(k[0], 1.0, 1e-12, "kappa_1");
    e.near(k[1], -1.0, 1e-12, "kappa_2");
    const auto a = vector_distance(HermitianForm(G), HermitianForm(D)).kappas;
    const auto b = vector_distance(HermitianForm(D), HermitianForm(G)).kappas;
    e.near(a[0], -b[1], 1e-12, "antisymmetry 1");
    e.near(a[1], -b[0], 1e-12, "antisymmetry 2");
  });
  c.emplace_back("commutators/examples", [=](Expect& e) {
    const CommutatorNorms d = commutator_norms(mat2(2, 0, 0, -1), I2);
    e.below(d.semisimple + d.nil_semi + d.semi_nil, 1e-14, "diagonal");
    const CommutatorNorms n = commutator_norms(mat2(0, 3, 0, 0), I2);
    e.below(n.nil_semi + n.semi_nil, 1e-14, "nilpotent");
    // f_s = f for [[1,1],[0,-1]]; direct 2x2 arithmetic of [f, f^dagger].
    const CMatrix f = mat2(1, 1, 0, -1);
    const CMatrix direct = f * f.adjoint() - f.adjoint() * f;
    const CommutatorNorms s = commutator_norms(f, I2);
    e(s.semisimple > 0.0, "nonzero semisimple commutator");
    e.near(s.semisimple, direct.norm(), 1e-12, "semisimple commutator");
  });
  c.emplace_back("field/evaluate", [](Expect& e) {
    e.below((examples::square_root().evaluate(0.0) - mat2(0, 0, 1, 0)).norm(), 1e-15, "constant term");
    const CMatrix a = mat2(1, Complex(0, 2), 3, -1);
    const HiggsField c = HiggsField::constant(a);
    for (Complex z : {Complex(0, 0), Complex(0.5, -0.7), Complex(-1, 1)}) e.below((c.evaluate(z) - a).norm(), 1e-15, "constant");
    CMatrix f = CMatrix::Zero(3, 3);
    f(0, 1) = f(1, 2) = 1.0;
    f(2, 2) = 2.0;
    e.below((examples::companion3().evaluate_unchecked(2.0) - f).norm(), 1e-15, "3x3 at z=2");
  });
  c.emplace_back("field/critical_set", [](Expect& e) {
    const SpectralCertificate s = critical_set(examples::square_root());
    e(s.critical_points.size() == 1 && std::abs(s.critical_points.at(0)) < 1e-8, "critical set {0}");
    e(s.m == 2, "m = 2 for the square-root field");
    const SpectralCertificate n = critical_set(examples::nilpotent());
    e(n.critical_points.empty() && n.m == 1, "nilpotent: empty, m = 1");
    const SpectralCertificate d = critical_set(examples::diagonal());
    e(d.critical_points.empty() && d.m == 2, "diagonal: empty, m = 2");
    e.near(d.d, 2.0, 1e-9, "diagonal d");
    e.near(d.A, 0.5, 1e-9, "diagonal A");
  });
  c.emplace_back("field/certify", [](Expect& e) {
    const SpectralCertificate d = certify_S(examples::diagonal(), 8.0);
    e.near(d.d, 16.0, 1e-9, "d at R=8");
    e.near(d.A, 0.5, 1e-9, "A at R=8");
    bool threw = false;
    try {
      certify_S(examples::square_root(), 1.0);
    } catch (const NotCertifiable&) {
      threw = true;
    }
    e(threw, "square-root field not certifiable");
    const SpectralCertificate m = certify_S(examples::mixed(), 1.0);
    e.near(m.d, 1.0, 1e-9, "mixed d");
    e.near(m.A, 2.0 / 3.0, 1e-9, "mixed A");
    e(m.m == 2, "mixed m = 2");
  });
  c.emplace_back("field/branches", [](Expect& e) {
    const BranchTracks t = branch_continuation(examples::diagonal(), PathSpec::segment(0.0, 1.0));
    e(t.non_critical, "diagonal along the real segment is non-critical");
    for (const auto& tr : t.lambda)
      for (const Complex& l : tr) e.below(std::abs(l - tr.front()), 1e-14, "constant tracks");
    PathSpec g;
    g.position = [](double s) { return std::polar(1.0, kPi * s / 4.0) * (1.0 + s) / 2.0; };
    g.velocity = [](double s) {
      const Complex w = std::polar(1.0, kPi * s / 4.0);
      return w * (0.5 + kI * (kPi / 4.0) * (1.0 + s) / 2.0);
    };
    const BranchTracks r = branch_continuation(examples::square_root(), g);
    double err = 0.0;
    for (const auto& tr : r.lambda) {
      const double sign = (tr.front() / std::sqrt(g.at(0.0))).real() > 0 ? 1.0 : -1.0;
      for (std::size_t k = 0; k < tr.size(); ++k) err = std::max(err, std::abs(tr[k] - sign * std::sqrt(g.at(r.s[k]))));
    }
    e.below(err, 1e-10, "tracks +-sqrt(gamma)");
    e.info(std::string("non-critical verdict ") + (r.non_critical ? "true" : "false"));
    const BranchTracks loop = branch_continuation(examples::square_root(), PathSpec::circle(0.0, 0.5));
    e(loop.permutation == std::vector<int>({1, 0}), "monodromy swaps the sheets");
  });
  c.emplace_back("field/alpha", [](Expect& e) {
    const PathSpec s = PathSpec::segment(0.0, 1.0);
    const auto a = alpha_integrals(examples::diagonal(), s);
    e.near(a[0], 1.0, 1e-12, "alpha_1");
    e.near(a[1], -1.0, 1e-12, "alpha_2");
    // Distinct imaginary eigenvalues make a real path critical; a repeated one does not.
    const auto im = alpha_integrals(HiggsField::constant(mat2(kI, 1.0, 0, kI)), s);
    for (double v : im) e.below(std::abs(v), 1e-14, "imaginary eigenvalues");
    bool threw = false;
    try {
      alpha_integrals(HiggsField::constant(mat2(kI, 0, 0, -kI)), s);
    } catch (const NonCriticalPathViolation&) {
      threw = true;
    }
    e(threw, "distinct imaginary eigenvalues rejected as critical");
    const PathSpec arc = PathSpec::segment(Complex(-0.3, 0.1), Complex(0.4, 0.2));
    const auto f = alpha_integrals(examples::semisimple(), arc), b = alpha_integrals(examples::semisimple(), arc.reversed());
    e.near(f[0], -b[1], 1e-12, "reversal 1");
    e.near(f[1], -b[0], 1e-12, "reversal 2");
  });
  c.emplace_back("solver/residual_examples", [=](Expect& e) {
    const MetricField id(opt.grid, 2);
    double r0 = 0.0, r1 = 0.0, c0 = 0.0;
    const auto rd = hitchin_residual(id, examples::diagonal(), 3.0);
    const auto rn = hitchin_residual(id, examples::nilpotent(), 1.0);
    const auto rz = hitchin_residual(id, examples::semisimple(), 0.0);
    const auto cz = curvature(id);
    for (int idx = 0; idx < opt.grid.size(); ++idx) {
      if (opt.grid.on_boundary(idx)) continue;
      r0 = std::max(r0, rd[idx].norm());
      r1 = std::max(r1, (rn[idx] + mat2(1, 0, 0, -1)).norm());
      c0 = std::max(c0, (rz[idx] - cz[idx]).norm());
    }
    e.below(r0, 1e-14, "diagonal at identity");
    e.below(r1, 1e-14, "nilpotent at identity");
    e.below(c0, 1e-14, "R = 0 is pure curvature");
  });
  c.emplace_back("solver/diagonal_exact", [=](Expect& e) {
    SolverConfig cfg;
    cfg.tolerance = opt.solver_tolerance;
    HitchinSolver s(examples::diagonal(), opt.grid, cfg);
    const SolveReport r = s.solve(4.0);
    double dev = 0.0;
    const MetricField hm = s.metric();
    for (const auto& g : hm.grams()) dev = std::max(dev, (g - CMatrix::Identity(2, 2)).norm());
    e.below(dev, 1e-14, "H = identity");
    e(r.newton_iterations == 0, "no Newton iterations");
  });
  c.emplace_back("solver/radial_oracle_R4_N129", [=](Expect& e) {
    e.below(radial_oracle_error(4.0, 129, opt.solver_tolerance), 5e-4, "sup-relative error on D(0.9)");
  });
  c.emplace_back("solver/determinant", [=](Expect& e) {
    SolverConfig cfg;
    cfg.tolerance = opt.solver_tolerance;
    HitchinSolver s(examples::semisimple(), opt.grid, cfg);
    const SolveReport r = s.solve(2.0);
    e(r.converged, "converged");
    double dev = 0.0;
    const MetricField hm = s.metric();
    for (const auto& g : hm.grams()) dev = std::max(dev, std::abs(g.determinant() - 1.0));
    e.below(dev, 1e-6, "|det H - 1|");
  });
  c.emplace_back("solver/radial_oracle_properties", [](Expect& e) {
    const double rho = 2.4;
    const RadialProfile tiny = radial_oracle(1e-4, rho);
    double sup = 0.0;
    for (double r = 0.0; r <= rho; r += 0.05) sup = std::max(sup, std::abs(tiny(r)));
    e.below(sup, 1e-6, "u -> 0 as R -> 0");
    double top = -1.0;
    for (double R : {0.5, 2.0, 8.0}) {
      const RadialProfile p = radial_oracle(R, rho);
      for (double r = 0.0; r <= rho; r += 0.05) top = std::max(top, p(r));
    }
    e.below(top, 1e-12, "u <= 0");
    for (double R : {0.5, 2.0, 8.0})
      e(radial_oracle(2.0 * R, rho).center_value() < radial_oracle(R, rho).center_value(), "u(0) decreases when R doubles");
  });
  c.emplace_back("solver/connection_examples", [=](Expect& e) {
    const Grid& g = opt.grid;
    const MetricField id(g, 2);
    double z0 = 0.0;
    for (const auto& a : chern_connection(id)) z0 = std::max(z0, a.norm());
    e.below(z0, 1e-14, "identity metric");
    // H = diag(e^q, e^-q) with q = x^2 y: connection diag(q_z, -q_z), q_z = (q_x - i q_y)/2.
    auto q = [](Complex z) { return z.real() * z.real() * z.imag(); };
    auto qz = [](Complex z) { return 0.5 * Complex(2.0 * z.real() * z.imag(), -z.real() * z.real()); };
    std::vector<CMatrix> logs, grams;
    for (int idx = 0; idx < g.size(); ++idx) {
      const double v = q(g.point(idx));
      logs.push_back(mat2(v, 0, 0, -v));
      grams.push_back(mat2(std::exp(v), 0, 0, std::exp(-v)));
    }
    const MetricField h(g, logs, grams);
    const auto conn = chern_connection(h);
    double err = 0.0;
    for (int idx : g.disk_nodes(1.0)) {
      const Complex d = qz(g.point(idx));
      err = std::max(err, (conn[idx] - mat2(d, 0, 0, -d)).norm());
    }
    e.below(err, 2.0 * g.spacing() * g.spacing(), "manufactured diag(q_z, -q_z)");
    // Constant unitary conjugation: H -> U^dagger H U conjugates the connection by U^{-1}.
    const CMatrix u = mat2(std::cos(0.4), Complex(0, 1) * std::sin(0.4), Complex(0, 1) * std::sin(0.4), std::cos(0.4));
    std::vector<CMatrix> logs2, grams2;
    for (int idx = 0; idx < g.size(); ++idx) {
      logs2.push_back(u.adjoint() * logs[idx] * u);
      grams2.push_back(u.adjoint() * grams[idx] * u);
    }
    const auto conn2 = chern_connection(MetricField(g, logs2, grams2));
    double cov = 0.0;
    for (int idx = 0; idx < g.size(); ++idx) cov = std::max(cov, (conn2[idx] - u.adjoint() * conn[idx] * u).norm());
    e.below(cov, 1e-10, "gauge covariance");
  });
  c.emplace_back("solver/curvature_examples", [=](Expect& e) {
    double z0 = 0.0;
    for (const auto& f : curvature(MetricField(opt.grid, 2))) z0 = std::max(z0, f.norm());
    e.below(z0, 1e-14, "identity metric");
    SolverConfig cfg;
    cfg.tolerance = opt.solver_tolerance;
    const double R = 2.0;
    HitchinSolver s(examples::nilpotent(), opt.grid, cfg);
    const SolveReport rep = s.solve(R);
    const MetricField h = s.metric();
    const auto F = curvature(h);
    double bal = 0.0, tr = 0.0;
    for (int idx = 0; idx < opt.grid.size(); ++idx) {
      if (opt.grid.on_boundary(idx)) continue;
      const CMatrix f = R * examples::nilpotent().evaluate(opt.grid.point(idx));
      const HermitianForm form(h.gram(idx));
      bal = std::max(bal, hs_norm(F[idx] - commutator(f, adjoint(f, form)), form));
      tr = std::max(tr, std::abs(F[idx].trace()));
    }
    e.below(bal, 10.0 * rep.tolerance, "F = R^2 [f, f*] to the solver tolerance");
    e.below(tr, 10.0 * rep.tolerance, "tr F");
  });
  c.emplace_back("solver/manufactured_order", [](Expect& e) {
    const double e1 = manufactured_error(17, 0.5), e2 = manufactured_error(33, 0.5), e3 = manufactured_error(65, 0.5);
    const double o1 = std::log2(e1 / e2), o2 = std::log2(e2 / e3);
    std::ostringstream s;
    s << "errors " << e1 << " " << e2 << " " << e3;
    e.info(s.str());
    e(o1 >= 1.8 && o2 >= 1.8, "observed order " + std::to_string(o1) + ", " + std::to_string(o2) + " below 1.8");
  });
  c.emplace_back("fit/synthetic", [](Expect& e) {
    std::vector<double> R, y1, y2, y3, zero;
    for (double r = 1.0; r <= 16.0; r += 1.0) {
      R.push_back(r);
      y1.push_back(3.0 * std::exp(-2.0 * r));
      y2.push_back(5.0 / r);
      y3.push_back(3.0 * std::exp(-2.0 * r) + 1e-10);
      zero.push_back(0.0);
    }
    const DecayFit a = fit_decay(R, y1, zero);
    e(a.model == DecayModel::exponential, "exponential selected");
    e.near(a.C, 3.0, 1e-6, "C");
    e.near(a.c, 2.0, 1e-6, "c");
    const DecayFit b = fit_decay(R, y2, zero);
    e(b.model == DecayModel::reciprocal, "reciprocal selected");
    e.near(b.C, 5.0, 1e-6, "C");
    const DecayFit d = fit_decay(R, y3, std::vector<double>(R.size(), 1e-9));
    e.near(d.c, 2.0, 1e-2, "censored c");
  });
  c.emplace_back("transport/zero_connection", [=](Expect& e) {
    const CMatrix p = transport(MetricField(opt.grid, 2), examples::semisimple(), 0.0, PathSpec::segment(-0.5, Complex(0.3, 0.4)));
    e.below((p - CMatrix::Identity(2, 2)).norm(), 1e-12, "identity");
  });
  c.emplace_back("transport/diagonal_closed_form", [=](Expect& e) {
    const MetricField id(opt.grid, 2);
    for (double R : {0.5, 1.0, 2.0, 4.0}) {
      const CMatrix p = transport(id, examples::diagonal(), R, PathSpec::segment(0.0, 1.0));
      const CMatrix want = mat2(std::exp(-2.0 * R), 0, 0, std::exp(2.0 * R));
      e.below((p - want).norm() / want.norm(), 1e-8, "relative error");
    }
  });
  c.emplace_back("transport/loop_identity_exact_metric", [=](Expect& e) {
    const CMatrix p = transport(MetricField(opt.grid, 2), examples::diagonal(), 1.0, PathSpec::circle(0.0, 0.4));
    e.below((p - CMatrix::Identity(2, 2)).norm(), opt.transport_tolerance, "holonomy");
  });
  c.emplace_back("transport/wedge_norms", [=](Expect& e) {
    for (double k : wedge_log_norms(CMatrix::Identity(2, 2), I2, I2)) e.below(std::abs(k), 1e-14, "identity");
    const double R = 3.0;
    const auto w = wedge_log_norms(mat2(std::exp(-2.0 * R), 0, 0, std::exp(2.0 * R)), I2, I2);
    e.near(w[0], 2.0 * R, 1e-12, "log|Pi|");
    e.near(w[1], 0.0, 1e-12, "log|wedge^2 Pi|");
    std::mt19937_64 rng(opt.seed + 7);
    for (int t = 0; t < 100; ++t) {
      const HermitianForm h0 = random_form(rng, 3), h1 = random_form(rng, 3);
      const HermitianForm pf = random_form(rng, 3);
      const CMatrix pi = pf.gram() * random_form(rng, 3).gram();
      const double want = std::log(std::abs(pi.determinant())) + 0.5 * std::log(h1.gram().determinant().real()) -
                          0.5 * std::log(h0.gram().determinant().real());
      e.near(wedge_log_norms(pi, h0, h1)[2], want, 1e-9 * (1.0 + std::abs(want)), "top wedge vs determinant");
    }
  });
  c.emplace_back("wkb/diagonal_exact", [=](Expect& e) {
    const MetricField id(opt.grid, 2);
    double worst = 0.0;
    for (double R : sqrt2_schedule(1.0, 64.0)) {
      const TransportReport r = wkb_report(examples::diagonal(), id, R, PathSpec::segment(0.0, 1.0));
      worst = std::max(worst, r.discrepancy);
      e.near(r.beta[0] / R, 2.0, 1e-8, "beta_1 / R");
      e.near(r.beta[1] / R, -2.0, 1e-8, "beta_2 / R");
    }
    e.below(worst, 1e-8, "discrepancy");
    const TransportReport z = wkb_report(examples::diagonal(), id, 0.0, PathSpec::segment(0.0, 1.0));
    e.below(std::abs(z.beta[0]) + std::abs(z.beta[1]), 1e-12, "beta at R = 0");
    e.near(z.discrepancy, 2.0, 1e-12, "discrepancy at R = 0");
  });
  c.emplace_back("energy/identities", [=](Expect& e) {
    const MetricField id(opt.grid, 2);
    const PullbackTensors d = pullback_tensors(examples::diagonal(), id, 3.0);
    double gap = 0.0;
    for (int idx = 0; idx < opt.grid.size(); ++idx) gap = std::max(gap, std::abs(d.gap(idx)));
    e.below(gap, 1e-12, "diagonal gap");
    CMatrix G(2, 2);
    G << 2.0, Complex(0.3, 0.1), Complex(0.3, -0.1), 0.7;
    std::vector<CMatrix> logs(opt.grid.size(), hermitian_log(G)), grams(opt.grid.size(), G);
    const PullbackTensors s = pullback_tensors(examples::square_root(), MetricField(opt.grid, logs, grams), 2.0);
    double holo = 0.0;
    for (int idx = 0; idx < opt.grid.size(); ++idx) holo = std::max(holo, std::abs(s.g_holo[idx] - 4.0 * s.toral_holo[idx]));
    e.below(holo, 1e-10, "g_holo - R^2 toral_holo");
  });
  return c;
}

/// Checks that need solver sweeps; the chains are shared between them.
inline std::vector<CheckResult> sweep_checks(const SelftestOptions& opt, const std::function<void(const CheckResult&)>& report) {
  SolverConfig cfg;
  cfg.tolerance = opt.solver_tolerance;
  const double rmax = std::min(opt.rmax, 64.0);
  const std::vector<double> schedule = sqrt2_schedule(1.0, rmax);
  *opt.log << "selftest: solving example chains up to R = " << rmax << '\n';
  const std::vector<HiggsField> fields = {examples::semisimple(), examples::nilpotent(), examples::mixed(),
                                          examples::mixed_conjugated(), examples::diagonal()};
  const auto chains = parallel_map<Chain>(static_cast<int>(fields.size()), opt.jobs, [&](int k) {
    return solve_chain(fields[k], opt.grid, cfg, schedule);
  });
  const Chain &semi = chains[0], &nil = chains[1], &mixed = chains[2], &conj = chains[3], &diag = chains[4];

  std::vector<CheckResult> out;
  auto add = [&](const std::string& name, const std::function<void(Expect&)>& body) {
    out.push_back(run_check(name, body));
    report(out.back());
  };
  auto values = [](const std::vector<RegionMeasurement>& m, double RegionMeasurement::*q) {
    std::vector<double> v;
    for (const auto& x : m) v.push_back(x.*q);
    return v;
  };

  const auto m_semi = measure_chain(fields[0], semi, schedule, 0.5, opt.jobs);
  const auto m_diag = measure_chain(fields[4], diag, schedule, 0.5, opt.jobs);
  const auto m_nil = measure_chain(fields[1], nil, schedule, 0.5, opt.jobs);
  const auto m_mixed = measure_chain(fields[2], mixed, schedule, 0.5, opt.jobs);
  const auto m_conj = measure_chain(fields[3], conj, schedule, 0.5, opt.jobs);
  const double solver_tol = opt.solver_tolerance;

  add("decoupling/diagonal_vanishes", [&](Expect& e) {
    double worst = 0.0, rem = 0.0;
    for (std::size_t k = 0; k < m_diag.size(); ++k) {
      const auto& m = m_diag[k];
      worst = std::max({worst, m.orthogonality, m.parallelity, m.nilpotent, m.comm_semisimple, m.comm_nil_semi,
                        m.comm_semi_nil, m.curvature_balance});
      rem = std::max(rem, m.remainder_total);
    }
    e.below(worst, solver_tol, "decoupling quantities");
    e.below(rem, solver_tol, "remainder");
  });
  add("decoupling/semisimple_orthogonality", [&](Expect& e) {
    const DecaySweep s = make_sweep("orthogonality", semi, schedule, values(m_semi, &RegionMeasurement::orthogonality), opt.fit_floor);
    e.info(describe(s));
    for (std::size_t k = 1; k < s.values.size(); ++k)
      if (!s.censored[k]) e(s.values[k] < s.values[k - 1], "not strictly decreasing");
    e(exponential_decay(s), "no exponential fit with c > 0");
  });
  add("decoupling/flat_metric_defect", [&](Expect& e) {
    // At R = 0 the metric is flat; eigenlines span(1,0), span(1,-2) give defect 1/2.
    const RegionMeasurement m = measure_region(fields[0], MetricField(opt.grid, 2), 0.0, 0.5);
    e.near(m.orthogonality, 0.5, 1e-12, "defect");
  });
  add("decoupling/nilpotent_norm", [&](Expect& e) {
    double semi_nil = 0.0;
    for (const auto& m : m_semi) semi_nil = std::max(semi_nil, m.nilpotent);
    e.below(semi_nil, 1e-12, "semisimple field");
    std::vector<double> v = values(m_nil, &RegionMeasurement::nilpotent);
    e(bounded_sweep(v), "nilpotent sweep bounded");
    std::ostringstream s;
    s << "nilpotent |R f_n| sweep:";
    for (double x : v) s << " " << std::setprecision(4) << x;
    e.info(s.str());
    const std::vector<double> m = values(m_mixed, &RegionMeasurement::nilpotent);
    e(bounded_sweep(m), "mixed sweep bounded");
  });
  add("decoupling/parallelity", [&](Expect& e) {
    double diag_par = 0.0;
    for (const auto& m : m_diag) diag_par = std::max(diag_par, m.parallelity);
    e.below(diag_par, solver_tol, "diagonal field");
    const DecaySweep s = make_sweep("parallelity", semi, schedule, values(m_semi, &RegionMeasurement::parallelity), opt.fit_floor);
    e.info(describe(s));
    e(exponential_decay(s), "no exponential fit with c > 0");
    for (const auto& m : m_semi) e(m.second_fundamental <= m.parallelity * (1.0 + 1e-12), "|B| <= |d pi|");
    for (const auto& m : m_conj) e(m.second_fundamental <= m.parallelity * (1.0 + 1e-12), "|B| <= |d pi| (mixed)");
  });
  add("decoupling/commutators", [&](Expect& e) {
    for (std::size_t k = 0; k < m_nil.size(); ++k) {
      const auto& m = m_nil[k];
      e.below(m.comm_semisimple + m.comm_nil_semi + m.comm_semi_nil, 1e-12, "nilpotent: semisimple terms");
      e.near(m.curvature_balance, m.hitchin_residual, 1e-12 + 1e-9 * m.hitchin_residual, "nilpotent: balance = residual");
    }
    for (const auto& m : m_diag)
      e.below(m.comm_semisimple + m.comm_nil_semi + m.comm_semi_nil + m.curvature_balance, solver_tol, "diagonal");
    for (auto [name, q] : std::vector<std::pair<std::string, double RegionMeasurement::*>>{
             {"comm_semisimple", &RegionMeasurement::comm_semisimple},
             {"comm_nil_semi", &RegionMeasurement::comm_nil_semi},
             {"comm_semi_nil", &RegionMeasurement::comm_semi_nil},
             {"curvature_balance", &RegionMeasurement::curvature_balance}}) {
      const DecaySweep s = make_sweep(name, conj, schedule, values(m_conj, q), opt.fit_floor);
      e.info(describe(s));
      e(exponential_decay(s), name + " not exponentially decaying");
    }
  });
  add("decoupling/remainder", [&](Expect& e) {
    double d = 0.0;
    for (const auto& m : m_diag) d = std::max(d, m.remainder_total);
    e.below(d, solver_tol, "diagonal field");
    const DecaySweep s = make_sweep("remainder", semi, schedule, values(m_semi, &RegionMeasurement::remainder_total), opt.fit_floor);
    e.info(describe(s));
    e(exponential_decay(s), "no exponential fit with c > 0");
    // One generalized eigenspace: the block metric is h itself.
    for (const auto& m : m_nil) e.below(m.remainder_nilpotent + m.remainder_connection, 1e-12, "m = 1 remainder");
  });
  add("decoupling/decoupled_residuals", [&](Expect& e) {
    for (const auto& m : m_nil) {
      e.below(m.comm_semisimple + m.comm_semi_nil, 1e-12, "nilpotent: semisimple residuals");
      e.near(m.curvature_balance, m.hitchin_residual, 1e-12 + 1e-9 * m.hitchin_residual, "nilpotent: curvature = residual");
    }
    for (const auto& m : m_diag) e.below(m.curvature_balance + m.comm_semisimple + m.comm_semi_nil, solver_tol, "diagonal");
    for (auto [name, q] : std::vector<std::pair<std::string, double RegionMeasurement::*>>{
             {"curvature", &RegionMeasurement::curvature_balance},
             {"semisimple", &RegionMeasurement::comm_semisimple},
             {"mixed", &RegionMeasurement::comm_semi_nil}}) {
      const DecaySweep s = make_sweep(name, conj, schedule, values(m_conj, q), opt.fit_floor);
      e.info(describe(s));
      // Monotone beyond the first two points, up to the censoring floor.
      for (std::size_t k = 3; k < s.values.size(); ++k)
        if (!s.censored[k]) e(s.values[k] <= s.values[k - 1], name + " not decreasing at R = " + CsvWriter::format(s.R[k]));
    }
  });
  add("solver/higgs_bound_ratio", [&](Expect& e) {
    // Non-increasing beyond the first three continuation steps.
    for (int k : {0, 1, 2, 3}) {
      const auto& c = chains[k];
      std::vector<double> v(c.R.size());
      for (std::size_t i = 0; i < c.R.size(); ++i) v[i] = higgs_bound_ratio(fields[k], c.metrics[i], c.R[i]);
      std::ostringstream s;
      s << "field " << k << " [" << std::setprecision(4);
      for (std::size_t i = 0; i < v.size(); ++i) s << (i ? " " : "") << v[i];
      e.info(s.str() + "]");
      std::size_t i = 4;
      while (i < v.size() && v[i] <= v[i - 1] * (1.0 + 1e-9)) ++i;
      e(i == v.size(), "field " + std::to_string(k) + " ratio increases from R = " + CsvWriter::format(c.R[i < v.size() ? i : 0]));
    }
  });
  add("solver/nilpotent_weighted_bound", [&](Expect& e) {
    std::vector<double> v;
    for (std::size_t i = 0; i < nil.R.size(); ++i) v.push_back(weighted_nilpotent_max(fields[1], nil.metrics[i], nil.R[i], 1.0));
    std::ostringstream s;
    s << "weighted |R f_n| on D(1) [" << std::setprecision(4);
    for (std::size_t i = 0; i < v.size(); ++i) s << (i ? " " : "") << v[i];
    e.info(s.str() + "]");
    e(bounded_sweep(v), "weighted nilpotent norm bounded");
  });
  add("wkb/semisimple_trend", [&](Expect& e) {
    const PathSpec path = PathSpec::segment(-0.3, 0.3);
    const auto reps = parallel_map<TransportReport>(static_cast<int>(schedule.size()), opt.jobs, [&](int k) {
      return wkb_report(fields[0], semi.metrics[semi.find(schedule[k])], schedule[k], path);
    });
    DecaySweep s;
    s.quantity = "wkb_discrepancy";
    for (const auto& r : reps) {
      s.R.push_back(r.R);
      s.values.push_back(r.discrepancy);
      s.floors.push_back(opt.fit_floor * r.integrator_error);
    }
    fit_sweep(s);
    e.info(describe(s));
    e(decreasing_suffix(s.values, s.censored) >= 3, "not eventually decreasing");
    e(exponential_decay(s), "no exponential fit with c > 0");
  });
  add("transport/loop_identity_solved_metric", [&](Expect& e) {
    const CMatrix p = transport(semi.metrics[semi.find(1.0)], fields[0], 1.0, PathSpec::circle(0.0, 0.4));
    e.below((p - CMatrix::Identity(2, 2)).norm(), opt.transport_tolerance, "holonomy");
  });
  add("energy/sweeps", [&](Expect& e) {
    auto gaps = [&](const HiggsField& phi, const Chain& c, const std::vector<double>& R, std::vector<EnergyPoint>& pts) {
      const std::vector<int> region = opt.grid.disk_nodes(0.5);
      pts = parallel_map<EnergyPoint>(static_cast<int>(R.size()), opt.jobs, [&](int k) {
        const int i = c.find(R[k]);
        EnergyPoint p = energy_point(pullback_tensors(phi, c.metrics[i], R[k]), region);
        p.residual = c.reports[i].residual_sup;
        return p;
      });
      std::vector<double> v;
      for (const auto& p : pts) v.push_back(std::max(0.0, p.gap_max));
      return v;
    };
    std::vector<EnergyPoint> ps, pn, pm, pd;
    const DecaySweep semi_gap = make_sweep("energy_gap", semi, schedule, gaps(fields[0], semi, schedule, ps), opt.fit_floor);
    e.info(describe(semi_gap));
    e(exponential_decay(semi_gap), "semisimple gap not exponentially decaying");
    const std::vector<double> dg = gaps(fields[4], diag, schedule, pd);
    for (std::size_t k = 0; k < dg.size(); ++k) e.below(dg[k], 1e-12 * std::max(1.0, schedule[k] * schedule[k]), "diagonal gap");
    // The gap is a squared norm; boundedness is judged on its square root.
    auto root = [](std::vector<double> v) {
      for (double& x : v) x = std::sqrt(x);
      return v;
    };
    auto show = [&](const std::string& name, const std::vector<double>& v) {
      std::ostringstream s;
      s << name << " [" << std::setprecision(4);
      for (std::size_t k = 0; k < v.size(); ++k) s << (k ? " " : "") << v[k];
      e.info(s.str() + "]");
    };
    const std::vector<double> ng = gaps(fields[1], nil, schedule, pn);
    show("nilpotent gap", ng);
    e(bounded_sweep(root(ng)), "nilpotent gap bounded");
    e(ng.back() > 0.0, "nilpotent gap non-vanishing");
    const std::vector<double> mg = gaps(fields[2], mixed, schedule, pm);
    show("mixed gap", mg);
    e(bounded_sweep(root(mg)) && mg.back() > 0.1 * mg.front(), "mixed gap bounded, not decaying");
    const PullbackTensors t = pullback_tensors(fields[1], nil.metrics.back(), nil.R.back());
    double toral = 0.0, gmin = 1e300;
    for (int idx : opt.grid.disk_nodes(0.5)) {
      toral = std::max(toral, t.toral_mixed[idx] + std::abs(t.toral_holo[idx]));
      gmin = std::min(gmin, t.g_mixed[idx]);
    }
    e.below(toral, 1e-12, "nilpotent toral tensors");
    e(gmin > 0.0, "nilpotent g_mixed positive");
    for (const auto* pts : {&ps, &pn, &pm, &pd})
      for (const auto& p : *pts) {
        e.below(p.split_error, 1e-9 * std::max(1.0, p.R * p.R), "split identity");
        e(p.lower_margin >= -1e-8, "lower bound");
      }
  });
  return out;
}

/// Experiment-level examples: diagonal sweep and the constant diagonal WKB run.
inline std::vector<std::pair<std::string, std::function<void(Expect&)>>> experiment_checks(const SelftestOptions& opt) {
  std::vector<std::pair<std::string, std::function<void(Expect&)>>> c;
  auto diag_ctx = [&]() {
    RunContext ctx;
    ctx.config.field = examples::diagonal();
    ctx.config.grid = opt.grid;
    ctx.config.R_schedule = sqrt2_schedule(1.0, std::min(opt.rmax, 64.0));
    ctx.config.paths = {PathSpec::segment(0.0, 1.0)};
    ctx.config.solver.tolerance = opt.solver_tolerance;
    ctx.config.tolerances.hitchin_residual = opt.solver_tolerance;
    ctx.jobs = opt.jobs;
    ctx.log = &null_stream();
    return ctx;
  };
  c.emplace_back("experiment/diagonal_sweep_zero", [=](Expect& e) {
    const SweepResult r = sweep_measurements(diag_ctx());
    for (const auto& s : r.sweeps)
      for (double v : s.values) e.below(v, opt.solver_tolerance, s.quantity);
  });
  c.emplace_back("experiment/diagonal_wkb", [=](Expect& e) {
    const WkbResult r = wkb_measurements(diag_ctx());
    for (const auto& s : r.sweeps)
      for (double v : s.values) e.below(v, 1e-8, "discrepancy");
  });
  c.emplace_back("experiment/config_hash", [](Expect& e) {
    json j = {{"field", to_json(examples::semisimple())},
              {"R_schedule", {{"values", {1.0, 2.0}}}},
              {"tolerances", {{"hitchin_residual", 1e-10}, {"transport", 1e-6}, {"fit_floor", 10.0}}}};
    const std::string a = config_hash(parse_config(j));
    e(a == config_hash(parse_config(j)), "hash is deterministic");
    j["tolerances"]["transport"] = 2e-6;
    e(a != config_hash(parse_config(j)), "tolerance change alters the hash");
    j["bogus"] = 1;
    bool threw = false;
    try {
      parse_config(j);
    } catch (const ConfigError&) {
      threw = true;
    }
    e(threw, "unknown key rejected");
  });
  return c;
}

/// Runs every check, printing one line each; returns the number of failures.
inline int run_selftest(const SelftestOptions& opt, std::ostream& os) {
  int failures = 0;
  auto print = [&](const CheckResult& r) {
    if (!r.pass) ++failures;
    os << (r.pass ? "ok   " : "FAIL ") << r.name << " (" << std::fixed << std::setprecision(1) << r.seconds << "s)"
       << std::defaultfloat;
    if (!r.detail.empty()) os << "  " << r.detail;
    os << std::endl;
  };
  for (const auto& [name, body] : unit_checks(opt)) print(run_check(name, body));
  for (const auto& [name, body] : experiment_checks(opt)) print(run_check(name, body));
  sweep_checks(opt, print);
  return failures;
}

}  // namespace hitchin

#endif  // HITCHIN_SELFTEST_HPP
