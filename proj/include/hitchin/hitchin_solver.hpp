#ifndef HITCHIN_HITCHIN_SOLVER_HPP
#define HITCHIN_HITCHIN_SOLVER_HPP

// Hitchin's equation for the metric H in a fixed holomorphic frame,
//
//   K(H) = dbar(H^{-1} d H) - [R Phi, H^{-1} (R Phi)^dagger H] = 0,
//
// on a square grid, with unknowns S = log H at the nodes. Derivatives are
// taken through the log-ratios L_k = log(H_c^{-1} H_k) towards the four
// neighbours k of a node c: A_x = (L_E - L_W) / 2h, div A = sum_k L_k / h^2,
// and dbar(H^{-1} d H) = div A / 4 + (i/4) [A_x, A_y] since A = H^{-1} dH is
// flat. The scheme is second order, covariant under constant changes of
// holomorphic frame, and its trace is exactly the five-point Laplacian of
// log det H, so det H = 1 holds to solver accuracy for trace-free fields with
// unimodular boundary data. Everything is evaluated in the frame whitened by
// H_c^{-1/2}, where the log-ratios are Hermitian and |K|_h is a Frobenius norm.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/UmfPackSupport>

#include "hitchin/core.hpp"
#include "hitchin/grid.hpp"
#include "hitchin/higgs_field.hpp"

namespace hitchin {

struct SolverConfig {
  double tolerance = 1e-9;  // converged when sup|K|_h <= max(tolerance, 32 eps / h^2) * (1 + R^2 max|f|^2)
  int max_newton = 40;
  double R_start = 0.25;
  double growth = std::sqrt(2.0);
  int max_halvings = 8;
  double fd_step = 1e-6;
  /// Log coordinates S of the boundary metric; identity metric when empty.
  std::function<CMatrix(Complex)> boundary_log;
  /// Hermitian source M with H K(H) = M imposed instead of K(H) = 0.
  std::function<CMatrix(Complex)> source;
};

struct SolveReport {
  double R = 0.0;
  double residual_sup = 0.0;
  double tolerance = 0.0;
  int newton_iterations = 0;
  int factorizations = 0;
  std::vector<double> continuation_steps;
  bool converged = false;
};

class NonConvergence : public Error {
public:
  NonConvergence(const std::string& what, SolveReport r) : Error(what), report(std::move(r)) {}
  SolveReport report;
};

namespace detail {

template <class Mat>
Mat hermitian_log_t(const Mat& x) {
  Eigen::SelfAdjointEigenSolver<Mat> es(x);
  const auto l = es.eigenvalues().array().log().matrix().eval();
  return es.eigenvectors() * l.asDiagonal() * es.eigenvectors().adjoint();
}

/// Whitened curvature dbar(H^{-1} dH) from the whitened log-ratios M_k = log(W H_k W).
template <class Mat>
Mat whitened_curvature(const Mat& me, const Mat& mw, const Mat& mn, const Mat& ms, double h) {
  const Mat mx = (me - mw) / (2.0 * h);
  const Mat my = (mn - ms) / (2.0 * h);
  return (me + mw + mn + ms) / (4.0 * h * h) + Complex(0.0, 0.25) * (mx * my - my * mx);
}

/// H^{1/2} and H^{-1/2} of a positive Hermitian matrix.
inline std::pair<CMatrix, CMatrix> sqrt_pair(const CMatrix& g) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(g);
  const RVector s = es.eigenvalues().array().sqrt();
  const RVector si = s.cwiseInverse();
  return {es.eigenvectors() * s.asDiagonal() * es.eigenvectors().adjoint(),
          es.eigenvectors() * si.asDiagonal() * es.eigenvectors().adjoint()};
}

/// Whitened d_x and d_y log-ratio derivatives at node (i, j): centered in the
/// interior, one-sided second order on the boundary.
inline std::pair<CMatrix, CMatrix> whitened_gradient(const Grid& g, const std::vector<CMatrix>& grams, int i, int j,
                                                     const CMatrix& w) {
  const int n = g.points;
  const double h = g.spacing();
  auto m = [&](int a, int b) { return hermitian_log_t<CMatrix>(w * grams[g.index(a, b)] * w); };
  auto deriv = [&](int k, bool x) -> CMatrix {
    auto at = [&](int s) { return x ? m(s, j) : m(i, s); };
    if (k > 0 && k < n - 1) return (at(k + 1) - at(k - 1)) / (2.0 * h);
    if (k == 0) return (4.0 * at(1) - at(2)) / (2.0 * h);
    return -(4.0 * at(n - 2) - at(n - 3)) / (2.0 * h);
  };
  return {deriv(i, true), deriv(j, false)};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Pointwise differential quantities of a metric field

/// H^{-1} d_z H at node (i, j) of a gram field.
inline CMatrix connection_at(const Grid& g, const std::vector<CMatrix>& grams, int i, int j) {
  const auto [hs, w] = detail::sqrt_pair(grams[g.index(i, j)]);
  const auto [mx, my] = detail::whitened_gradient(g, grams, i, j, w);
  return w * (0.5 * (mx - kI * my)) * hs;
}

/// Coefficient of dzbar ^ dz in the Chern curvature, dbar(H^{-1} d H), at an interior node.
inline CMatrix curvature_at(const Grid& g, const std::vector<CMatrix>& grams, int idx) {
  const auto [hs, w] = detail::sqrt_pair(grams[idx]);
  const int n = g.points;
  auto m = [&](int k) { return detail::hermitian_log_t<CMatrix>(w * grams[k] * w); };
  return w * detail::whitened_curvature<CMatrix>(m(idx + 1), m(idx - 1), m(idx + n), m(idx - n), g.spacing()) * hs;
}

/// H^{-1} d_z H at every node; one-sided differences on the boundary.
inline std::vector<CMatrix> chern_connection(const MetricField& h) {
  const Grid& g = h.grid();
  std::vector<CMatrix> out(g.size());
  for (int j = 0; j < g.points; ++j)
    for (int i = 0; i < g.points; ++i) out[g.index(i, j)] = connection_at(g, h.grams(), i, j);
  return out;
}

/// dbar(H^{-1} d H) at interior nodes (zero on the boundary).
inline std::vector<CMatrix> curvature(const MetricField& h) {
  const Grid& g = h.grid();
  std::vector<CMatrix> out(g.size(), CMatrix::Zero(h.dim(), h.dim()));
  for (int j = 1; j < g.points - 1; ++j)
    for (int i = 1; i < g.points - 1; ++i) out[g.index(i, j)] = curvature_at(g, h.grams(), g.index(i, j));
  return out;
}

/// K(H) of the module header at interior nodes (zero on the boundary).
inline std::vector<CMatrix> hitchin_residual(const MetricField& h, const HiggsField& phi, double R) {
  if (phi.rank() != h.dim()) throw DimensionMismatch("hitchin_residual: rank and metric dimension differ");
  const Grid& g = h.grid();
  std::vector<CMatrix> out(g.size(), CMatrix::Zero(h.dim(), h.dim()));
  for (int j = 1; j < g.points - 1; ++j)
    for (int i = 1; i < g.points - 1; ++i) {
      const int idx = g.index(i, j);
      const CMatrix f = R * phi.evaluate_unchecked(g.point(idx));
      const CMatrix& gram = h.gram(idx);
      const CMatrix fstar = gram.llt().solve(f.adjoint() * gram);
      out[idx] = curvature_at(g, h.grams(), idx) - commutator(f, fstar);
    }
  return out;
}

// ---------------------------------------------------------------------------
// Newton-continuation solver

namespace detail {

class SolverBackend {
public:
  virtual ~SolverBackend() = default;
  virtual SolveReport solve_to(double R) = 0;
  virtual MetricField metric() const = 0;
  virtual double current_R() const = 0;
};

template <int D>
class SolverImpl final : public SolverBackend {
  using Mat = Eigen::Matrix<Complex, D, D>;
  using RVec = Eigen::Matrix<double, D, 1>;
  using SpMat = Eigen::SparseMatrix<double>;

public:
  SolverImpl(const HiggsField& phi, const Grid& grid, SolverConfig cfg)
      : grid_(grid), cfg_(std::move(cfg)), n_(phi.rank()), nd_(n_ * n_), stride_(grid.points) {
    const int nodes = grid_.size();
    s_.assign(nodes, Mat::Zero(n_, n_));
    phi_.resize(nodes);
    src_.assign(nodes, Mat::Zero(n_, n_));
    gram_.resize(nodes);
    half_.resize(nodes);
    whiten_.resize(nodes);
    for (int idx = 0; idx < nodes; ++idx) {
      const Complex z = grid_.point(idx);
      phi_[idx] = phi.evaluate_unchecked(z);
      max_f2_ = std::max(max_f2_, phi_[idx].squaredNorm());
      if (grid_.on_boundary(idx) && cfg_.boundary_log) {
        Mat b = cfg_.boundary_log(z);
        s_[idx] = 0.5 * (b + b.adjoint());
      }
      if (!grid_.on_boundary(idx) && cfg_.source) {
        Mat m = cfg_.source(z);
        src_[idx] = 0.5 * (m + m.adjoint());
      }
    }
    const int m = grid_.points - 2;
    unknowns_ = m * m * nd_;
    for (int idx = 0; idx < nodes; ++idx) update_eigen(idx);
  }

  double current_R() const override { return solved_ ? R_ : -1.0; }

  MetricField metric() const override {
    std::vector<CMatrix> logs, grams;
    for (int idx = 0; idx < grid_.size(); ++idx) {
      logs.push_back(s_[idx]);
      grams.push_back(gram_[idx]);
    }
    return MetricField(grid_, std::move(logs), std::move(grams));
  }

  SolveReport solve_to(double target) override {
    if (!(target >= 0.0)) throw ContractViolation("solve: R must be non-negative");
    SolveReport rep;
    rep.R = target;
    if (!solved_) {
      if (!newton(0.0, rep)) fail("solve: Newton failed at R = 0", rep);
      solved_ = true;
      R_ = 0.0;
      rep.continuation_steps.push_back(0.0);
    }
    if (target < R_) {
      if (!newton(target, rep)) fail("solve: Newton failed when decreasing R", rep);
      prev_.reset();
      R_ = target;
      rep.continuation_steps.push_back(target);
    }
    int halvings = 0;
    double step_factor = cfg_.growth;
    while (R_ < target) {
      const double next = R_ == 0.0 ? std::min(cfg_.R_start * step_factor / cfg_.growth, target)
                                    : std::min(R_ * step_factor, target);
      const std::vector<Mat> saved = s_;
      predict(next);
      if (newton(next, rep)) {
        prev_s_ = saved;
        prev_ = R_;
        R_ = next;
        rep.continuation_steps.push_back(next);
        step_factor = std::min(cfg_.growth, step_factor * step_factor);
        halvings = 0;
      } else {
        s_ = saved;
        for (int idx = 0; idx < grid_.size(); ++idx) update_eigen(idx);
        if (++halvings > cfg_.max_halvings) fail("solve: continuation step failed to converge", rep);
        step_factor = std::sqrt(step_factor);
      }
    }
    // Verification at the target, which is a no-op when already converged.
    if (!newton(target, rep)) fail("solve: Newton failed at the target", rep);
    rep.converged = true;
    return rep;
  }

private:
  [[noreturn]] void fail(const std::string& msg, SolveReport rep) {
    rep.converged = false;
    throw NonConvergence(msg, std::move(rep));
  }

  int interior_index(int i, int j) const { return (j - 1) * (grid_.points - 2) + (i - 1); }

  void update_eigen(int idx) {
    Eigen::SelfAdjointEigenSolver<Mat> es(s_[idx]);
    const auto& v = es.eigenvectors();
    const RVec lam = es.eigenvalues();
    const RVec e = lam.array().exp(), eh = (0.5 * lam.array()).exp(), ehi = (-0.5 * lam.array()).exp();
    gram_[idx] = v * e.asDiagonal() * v.adjoint();
    half_[idx] = v * eh.asDiagonal() * v.adjoint();
    whiten_[idx] = v * ehi.asDiagonal() * v.adjoint();
  }

  /// H^{-1/2} K H^{1/2}, whose Frobenius norm is |K|_h.
  Mat node_residual(int idx, double R) const {
    const Mat& w = whiten_[idx];
    auto m = [&](int k) { return hermitian_log_t<Mat>(w * gram_[k] * w); };
    Mat r = whitened_curvature<Mat>(m(idx + 1), m(idx - 1), m(idx + stride_), m(idx - stride_), h_());
    const Mat p = R * (half_[idx] * phi_[idx] * w);
    r -= p * p.adjoint() - p.adjoint() * p;
    r -= w * src_[idx] * w;
    return 0.5 * (r + r.adjoint());
  }

  void pack(const Mat& r, double* out) const {
    int k = 0;
    for (int a = 0; a < n_; ++a) out[k++] = r(a, a).real();
    for (int a = 0; a < n_; ++a)
      for (int b = a + 1; b < n_; ++b) {
        out[k++] = r(a, b).real();
        out[k++] = r(a, b).imag();
      }
  }

  Mat basis(int k) const {
    Mat e = Mat::Zero(n_, n_);
    if (k < n_) {
      e(k, k) = 1.0;
      return e;
    }
    k -= n_;
    for (int a = 0; a < n_; ++a)
      for (int b = a + 1; b < n_; ++b) {
        if (k == 0) {
          e(a, b) = 1.0;
          e(b, a) = 1.0;
          return e;
        }
        if (k == 1) {
          e(a, b) = kI;
          e(b, a) = -kI;
          return e;
        }
        k -= 2;
      }
    return e;
  }

  /// Residual vector and its sup over nodes of the Frobenius norm (= |K|_h).
  double residual(double R, Eigen::VectorXd& out) const {
    out.resize(unknowns_);
    double sup = 0.0;
    const int np = grid_.points;
    for (int j = 1; j < np - 1; ++j)
      for (int i = 1; i < np - 1; ++i) {
        const Mat r = node_residual(grid_.index(i, j), R);
        sup = std::max(sup, r.norm());
        pack(r, out.data() + interior_index(i, j) * nd_);
      }
    return sup;
  }

  void apply_step(const std::vector<Mat>& base, const Eigen::VectorXd& delta, double t) {
    const int np = grid_.points;
    for (int j = 1; j < np - 1; ++j)
      for (int i = 1; i < np - 1; ++i) {
        const int idx = grid_.index(i, j);
        const double* d = delta.data() + interior_index(i, j) * nd_;
        Mat s = base[idx];
        for (int k = 0; k < nd_; ++k) s += (t * d[k]) * basis(k);
        s_[idx] = 0.5 * (s + s.adjoint());
        update_eigen(idx);
      }
  }

  void predict(double next) {
    if (!prev_ || R_ <= *prev_) return;
    Eigen::VectorXd r;
    const double keep = residual(next, r);
    const std::vector<Mat> cur = s_;
    const double w = (next - R_) / (R_ - *prev_);
    for (int idx = 0; idx < grid_.size(); ++idx) {
      if (grid_.on_boundary(idx)) continue;
      s_[idx] = cur[idx] + w * (cur[idx] - prev_s_[idx]);
      update_eigen(idx);
    }
    if (residual(next, r) > keep) {
      s_ = cur;
      for (int idx = 0; idx < grid_.size(); ++idx) update_eigen(idx);
    }
  }

  /// Jacobian of the residual by forward differences, five node colours at once.
  void assemble(double R, const Eigen::VectorXd& r0, SpMat& jac) {
    const int np = grid_.points;
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(unknowns_) * 5 * nd_);
    std::vector<double> buf(nd_);
    std::vector<double> eps(grid_.size(), 0.0);
    for (int colour = 0; colour < 5; ++colour)
      for (int k = 0; k < nd_; ++k) {
        const Mat e = basis(k);
        std::vector<int> touched;
        for (int j = 1; j < np - 1; ++j)
          for (int i = 1; i < np - 1; ++i) {
            if ((i + 2 * j) % 5 != colour) continue;
            const int idx = grid_.index(i, j);
            eps[idx] = cfg_.fd_step * (1.0 + s_[idx].norm());
            s_[idx] += eps[idx] * e;
            update_eigen(idx);
            touched.push_back(idx);
          }
        for (int j = 1; j < np - 1; ++j)
          for (int i = 1; i < np - 1; ++i) {
            int pi = -1, pj = -1;
            const int cand[5][2] = {{i, j}, {i + 1, j}, {i - 1, j}, {i, j + 1}, {i, j - 1}};
            for (const auto& c : cand)
              if ((c[0] + 2 * c[1]) % 5 == colour) {
                pi = c[0];
                pj = c[1];
              }
            if (pi < 1 || pj < 1 || pi > np - 2 || pj > np - 2) continue;
            const int pidx = grid_.index(pi, pj);
            const Mat r = node_residual(grid_.index(i, j), R);
            pack(r, buf.data());
            const int row0 = interior_index(i, j) * nd_;
            const int col = interior_index(pi, pj) * nd_ + k;
            for (int a = 0; a < nd_; ++a) trip.emplace_back(row0 + a, col, (buf[a] - r0(row0 + a)) / eps[pidx]);
          }
        for (int idx : touched) {
          s_[idx] -= eps[idx] * e;
          s_[idx] = 0.5 * (s_[idx] + s_[idx].adjoint());
          update_eigen(idx);
        }
      }
    jac.resize(unknowns_, unknowns_);
    jac.setFromTriplets(trip.begin(), trip.end());
  }

  bool newton(double R, SolveReport& rep) {
    Eigen::VectorXd r;
    double sup = residual(R, r);
    // Requests below the discrete roundoff floor eps / h^2 are clamped to it.
    const double floor = 32.0 * std::numeric_limits<double>::epsilon() / (h_() * h_());
    const double tol = std::max(cfg_.tolerance, floor) * (1.0 + R * R * max_f2_);
    rep.tolerance = tol;
    rep.residual_sup = sup;
    for (int it = 0; it < cfg_.max_newton; ++it) {
      if (sup <= tol) return true;
      bool fresh = false;
      bool accepted = false;
      for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
        if (!have_factor_ || attempt == 1) {
          assemble(R, r, jac_);
          if (!analyzed_) {
            lu_.analyzePattern(jac_);
            analyzed_ = true;
          }
          lu_.factorize(jac_);
          if (lu_.info() != Eigen::Success) return false;
          have_factor_ = true;
          fresh = true;
          ++rep.factorizations;
        }
        const Eigen::VectorXd delta = -lu_.solve(r);
        if (!delta.allFinite()) {
          have_factor_ = false;
          continue;
        }
        const std::vector<Mat> base = s_;
        double t = 1.0;
        for (int ls = 0; ls < (fresh ? 14 : 1); ++ls, t *= 0.5) {
          apply_step(base, delta, t);
          Eigen::VectorXd rt;
          const double st = residual(R, rt);
          const bool ok = fresh ? st <= (1.0 - 1e-4 * t) * sup : st <= 0.5 * sup;
          if (ok && std::isfinite(st)) {
            r = std::move(rt);
            sup = st;
            accepted = true;
            break;
          }
        }
        if (!accepted) {
          s_ = base;
          for (int idx = 0; idx < grid_.size(); ++idx) update_eigen(idx);
          if (fresh) break;
        }
      }
      if (!accepted) {
        rep.residual_sup = sup;
        return false;
      }
      ++rep.newton_iterations;
      rep.residual_sup = sup;
    }
    return sup <= tol;
  }

  double h_() const { return grid_.spacing(); }

  Grid grid_;
  SolverConfig cfg_;
  int n_, nd_, stride_;
  int unknowns_ = 0;
  double max_f2_ = 0.0;
  std::vector<Mat> s_, phi_, src_, gram_, half_, whiten_;
  std::vector<Mat> prev_s_;
  std::optional<double> prev_;
  double R_ = 0.0;
  bool solved_ = false;
  SpMat jac_;  // referenced by the factorization
  Eigen::UmfPackLU<SpMat> lu_;
  bool analyzed_ = false;
  bool have_factor_ = false;
};

}  // namespace detail

/// Stateful solver: successive calls to solve() continue in R from the last
/// converged metric.
class HitchinSolver {
public:
  HitchinSolver(const HiggsField& phi, const Grid& grid, SolverConfig cfg = {}) : phi_(phi), grid_(grid) {
    switch (phi.rank()) {
      case 2: impl_ = std::make_unique<detail::SolverImpl<2>>(phi, grid, std::move(cfg)); break;
      case 3: impl_ = std::make_unique<detail::SolverImpl<3>>(phi, grid, std::move(cfg)); break;
      case 4: impl_ = std::make_unique<detail::SolverImpl<4>>(phi, grid, std::move(cfg)); break;
      default: impl_ = std::make_unique<detail::SolverImpl<Eigen::Dynamic>>(phi, grid, std::move(cfg)); break;
    }
  }

  SolveReport solve(double R) { return impl_->solve_to(R); }
  MetricField metric() const { return impl_->metric(); }
  const HiggsField& field() const { return phi_; }
  const Grid& grid() const { return grid_; }

private:
  HiggsField phi_;
  Grid grid_;
  std::unique_ptr<detail::SolverBackend> impl_;
};

inline std::pair<MetricField, SolveReport> solve(const HiggsField& phi, double R, const Grid& grid, SolverConfig cfg = {}) {
  HitchinSolver s(phi, grid, std::move(cfg));
  SolveReport rep = s.solve(R);
  return {s.metric(), rep};
}

// ---------------------------------------------------------------------------
// Radial oracle for the constant nilpotent 2x2 field: H = diag(e^u, e^-u) with
// (1/4)(u'' + u'/r) = R^2 e^{2u}, u'(0) = 0, u(rho) = 0.

class RadialProfile {
public:
  RadialProfile(double R, double rho, double u0, std::vector<double> r, std::vector<double> u, std::vector<double> du)
      : R_(R), rho_(rho), u0_(u0), r_(std::move(r)), u_(std::move(u)), du_(std::move(du)) {}

  double R() const { return R_; }
  double boundary_radius() const { return rho_; }
  double center_value() const { return u0_; }

  /// Cubic Hermite interpolation between accepted integration steps.
  double operator()(double r) const {
    if (r < 0.0 || r > rho_ * (1.0 + 1e-12)) throw DomainError("radial profile: radius outside [0, rho]");
    if (r <= r_.front()) return u0_ + R_ * R_ * std::exp(2.0 * u0_) * r * r;
    auto it = std::upper_bound(r_.begin(), r_.end(), r);
    if (it == r_.end()) return u_.back();
    const std::size_t k = static_cast<std::size_t>(it - r_.begin());
    const double h = r_[k] - r_[k - 1];
    const double t = (r - r_[k - 1]) / h;
    const double h00 = (1 + 2 * t) * (1 - t) * (1 - t), h10 = t * (1 - t) * (1 - t);
    const double h01 = t * t * (3 - 2 * t), h11 = t * t * (t - 1);
    return h00 * u_[k - 1] + h10 * h * du_[k - 1] + h01 * u_[k] + h11 * h * du_[k];
  }

private:
  double R_, rho_, u0_;
  std::vector<double> r_, u_, du_;
};

namespace detail {

struct ShotResult {
  bool blew_up = false;
  double end_value = 0.0;
  std::vector<double> r, u, du;
};

/// Dormand-Prince 5(4) integration of the radial equation from a series start.
inline ShotResult shoot(double R, double rho, double u0, bool keep) {
  const double c = R * R * std::exp(2.0 * u0);
  double r = 1e-6 * rho;
  double y0 = u0 + c * r * r, y1 = 2.0 * c * r;
  ShotResult out;
  if (keep) {
    out.r.push_back(r);
    out.u.push_back(y0);
    out.du.push_back(y1);
  }
  auto rhs = [R](double rr, double a, double b, double& fa, double& fb) {
    fa = b;
    fb = 4.0 * R * R * std::exp(2.0 * a) - b / rr;
  };
  static const double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static const double a21 = 1.0 / 5, a31 = 3.0 / 40, a32 = 9.0 / 40, a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static const double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static const double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static const double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static const double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200, e6 = 22.0 / 525,
                      e7 = -1.0 / 40;
  double h = 1e-4 * rho;
  while (r < rho) {
    h = std::min(h, rho - r);
    double k1a, k1b, k2a, k2b, k3a, k3b, k4a, k4b, k5a, k5b, k6a, k6b, k7a, k7b;
    rhs(r, y0, y1, k1a, k1b);
    rhs(r + c2 * h, y0 + h * a21 * k1a, y1 + h * a21 * k1b, k2a, k2b);
    rhs(r + c3 * h, y0 + h * (a31 * k1a + a32 * k2a), y1 + h * (a31 * k1b + a32 * k2b), k3a, k3b);
    rhs(r + c4 * h, y0 + h * (a41 * k1a + a42 * k2a + a43 * k3a), y1 + h * (a41 * k1b + a42 * k2b + a43 * k3b), k4a, k4b);
    rhs(r + c5 * h, y0 + h * (a51 * k1a + a52 * k2a + a53 * k3a + a54 * k4a),
        y1 + h * (a51 * k1b + a52 * k2b + a53 * k3b + a54 * k4b), k5a, k5b);
    rhs(r + h, y0 + h * (a61 * k1a + a62 * k2a + a63 * k3a + a64 * k4a + a65 * k5a),
        y1 + h * (a61 * k1b + a62 * k2b + a63 * k3b + a64 * k4b + a65 * k5b), k6a, k6b);
    const double n0 = y0 + h * (b1 * k1a + b3 * k3a + b4 * k4a + b5 * k5a + b6 * k6a);
    const double n1 = y1 + h * (b1 * k1b + b3 * k3b + b4 * k4b + b5 * k5b + b6 * k6b);
    rhs(r + h, n0, n1, k7a, k7b);
    const double err0 = h * (e1 * k1a + e3 * k3a + e4 * k4a + e5 * k5a + e6 * k6a + e7 * k7a);
    const double err1 = h * (e1 * k1b + e3 * k3b + e4 * k4b + e5 * k5b + e6 * k6b + e7 * k7b);
    const double sc0 = 1e-13 + 1e-13 * std::max(std::abs(y0), std::abs(n0));
    const double sc1 = 1e-13 + 1e-13 * std::max(std::abs(y1), std::abs(n1));
    const double err = std::max(std::abs(err0) / sc0, std::abs(err1) / sc1);
    if (!std::isfinite(err) || !std::isfinite(n0)) {
      h *= 0.25;
      if (h < 1e-14 * rho) {
        out.blew_up = true;
        return out;
      }
      continue;
    }
    if (err <= 1.0) {
      r += h;
      y0 = n0;
      y1 = n1;
      if (keep) {
        out.r.push_back(r);
        out.u.push_back(y0);
        out.du.push_back(y1);
      }
      if (y0 > 50.0) {
        out.blew_up = true;
        return out;
      }
    }
    h *= std::clamp(0.9 * std::pow(std::max(err, 1e-10), -0.2), 0.2, 5.0);
    if (h < 1e-14 * rho) {
      out.blew_up = true;
      return out;
    }
  }
  out.end_value = y0;
  return out;
}

}  // namespace detail

inline RadialProfile radial_oracle(double R, double rho) {
  if (!(R > 0.0) || !(rho > 0.0)) throw ContractViolation("radial_oracle: R and the radius must be positive");
  auto end_value = [&](double u0) {
    const auto s = detail::shoot(R, rho, u0, false);
    return s.blew_up ? std::numeric_limits<double>::infinity() : s.end_value;
  };
  double hi = 0.0;
  if (!(end_value(hi) > 0.0)) throw OracleError("radial_oracle: upper bracket failed");
  double lo = -1.0 - std::log(R * rho);
  int tries = 0;
  while (end_value(lo) >= 0.0) {
    lo -= 2.0;
    if (++tries > 60) throw OracleError("radial_oracle: lower bracket failed");
  }
  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    mid = 0.5 * (lo + hi);
    const double v = end_value(mid);
    if (std::abs(v) <= 1e-12 || hi - lo < 1e-15) break;
    (v > 0.0 ? hi : lo) = mid;
  }
  auto shot = detail::shoot(R, rho, mid, true);
  if (shot.blew_up || std::abs(shot.end_value) > 1e-10) throw OracleError("radial_oracle: terminal mismatch above 1e-10");
  return RadialProfile(R, rho, mid, std::move(shot.r), std::move(shot.u), std::move(shot.du));
}

}  // namespace hitchin

#endif  // HITCHIN_HITCHIN_SOLVER_HPP
