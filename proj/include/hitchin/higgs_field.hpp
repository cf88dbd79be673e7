#ifndef HITCHIN_HIGGS_FIELD_HPP
#define HITCHIN_HIGGS_FIELD_HPP

// Holomorphic Higgs fields phi = f(z) dz with polynomial matrix entries on
// the square [-L, L]^2, together with their spectral data: critical set,
// S_n(d, A) certificates, eigenvalue branches along paths and the
// integrals alpha_i = -int_gamma Re(phi_i).

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "hitchin/core.hpp"
#include "hitchin/higgs_algebra.hpp"
#include "hitchin/polynomial.hpp"

namespace hitchin {

class HiggsField {
public:
  HiggsField() = default;

  /// `entries` holds rank*rank polynomials in row-major order.
  HiggsField(int rank, std::vector<Polynomial> entries, double half_width = 1.2, bool trace_free = false)
      : rank_(rank), entries_(std::move(entries)), half_width_(half_width), trace_free_(trace_free) {
    if (rank_ < 1) throw ContractViolation("HiggsField: rank must be positive");
    if (static_cast<int>(entries_.size()) != rank_ * rank_)
      throw DimensionMismatch("HiggsField: expected rank^2 entry polynomials");
    if (half_width_ < 1.0) throw ContractViolation("HiggsField: domain half-width must be at least 1");
    for (auto& p : entries_)
      if (p.empty()) p = Polynomial({0.0});
    if (trace_free_) {
      double scale = 0.0, tr = 0.0;
      for (int k = 0; k <= degree(); ++k) {
        Complex t = 0.0;
        for (int i = 0; i < rank_; ++i) {
          t += coefficient(i, i, k);
          scale = std::max(scale, std::abs(coefficient(i, i, k)));
        }
        tr = std::max(tr, std::abs(t));
      }
      if (tr > 1e-14 * std::max(1.0, scale)) throw ContractViolation("HiggsField: trace-free flag set but trace is nonzero");
    }
  }

  /// f(z) = sum_k coeffs[k] z^k.
  static HiggsField from_matrices(const std::vector<CMatrix>& coeffs, double half_width = 1.2, bool trace_free = false) {
    const int n = static_cast<int>(coeffs.at(0).rows());
    std::vector<Polynomial> e;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        std::vector<Complex> c;
        for (const auto& m : coeffs) c.push_back(m(i, j));
        e.emplace_back(std::move(c));
      }
    return HiggsField(n, std::move(e), half_width, trace_free);
  }

  static HiggsField constant(const CMatrix& a, double half_width = 1.2) {
    return from_matrices({a}, half_width, std::abs(a.trace()) < 1e-14 * std::max(1.0, a.norm()));
  }

  int rank() const { return rank_; }
  double half_width() const { return half_width_; }
  bool trace_free() const { return trace_free_; }
  const std::vector<Polynomial>& entries() const { return entries_; }

  int degree() const {
    int d = 0;
    for (const auto& p : entries_) d = std::max(d, p.degree());
    return d;
  }

  Complex coefficient(int i, int j, int k) const {
    const auto& c = entries_[i * rank_ + j].coeffs();
    return k < static_cast<int>(c.size()) ? c[k] : Complex(0.0);
  }

  bool in_domain(Complex z, double slack = 1e-12) const {
    const double lim = half_width_ * (1.0 + slack);
    return std::abs(z.real()) <= lim && std::abs(z.imag()) <= lim;
  }

  /// Horner evaluation of every entry; no domain check.
  CMatrix evaluate_unchecked(Complex z) const {
    CMatrix f(rank_, rank_);
    for (int i = 0; i < rank_; ++i)
      for (int j = 0; j < rank_; ++j) f(i, j) = entries_[i * rank_ + j](z);
    return f;
  }

  CMatrix evaluate(Complex z) const {
    if (!in_domain(z)) throw DomainError("HiggsField::evaluate: point outside the domain square");
    return evaluate_unchecked(z);
  }

  CMatrix derivative(Complex z) const {
    CMatrix f(rank_, rank_);
    for (int i = 0; i < rank_; ++i)
      for (int j = 0; j < rank_; ++j) f(i, j) = entries_[i * rank_ + j].derivative()(z);
    return f;
  }

  HiggsField scaled(double r) const {
    std::vector<Polynomial> e;
    for (const auto& p : entries_) {
      std::vector<Complex> c = p.coeffs();
      for (auto& x : c) x *= r;
      e.emplace_back(std::move(c));
    }
    return HiggsField(rank_, std::move(e), half_width_, trace_free_);
  }

  /// The same Higgs bundle in the holomorphic frame changed by a constant
  /// invertible matrix: f -> P f P^{-1}.
  HiggsField conjugated(const CMatrix& p) const {
    const CMatrix pinv = p.inverse();
    std::vector<CMatrix> coeffs;
    for (int k = 0; k <= degree(); ++k) {
      CMatrix a(rank_, rank_);
      for (int i = 0; i < rank_; ++i)
        for (int j = 0; j < rank_; ++j) a(i, j) = coefficient(i, j, k);
      coeffs.push_back(p * a * pinv);
    }
    HiggsField out = from_matrices(coeffs, half_width_, false);
    out.trace_free_ = trace_free_;
    return out;
  }

  HiggsField with_half_width(double l) const { return HiggsField(rank_, entries_, l, trace_free_); }

private:
  int rank_ = 0;
  std::vector<Polynomial> entries_;
  double half_width_ = 1.2;
  bool trace_free_ = false;
};

// ---------------------------------------------------------------------------
// Serialization: {"rank", "degree", "half_width", "trace_free",
// "coeffs": rank*rank arrays (row-major) of degree+1 [re, im] pairs}

inline nlohmann::json to_json(const HiggsField& phi) {
  nlohmann::json j;
  j["rank"] = phi.rank();
  j["degree"] = phi.degree();
  j["half_width"] = phi.half_width();
  j["trace_free"] = phi.trace_free();
  nlohmann::json entries = nlohmann::json::array();
  for (int i = 0; i < phi.rank(); ++i)
    for (int k = 0; k < phi.rank(); ++k) {
      nlohmann::json arr = nlohmann::json::array();
      for (int d = 0; d <= phi.degree(); ++d) {
        const Complex c = phi.coefficient(i, k, d);
        arr.push_back({c.real(), c.imag()});
      }
      entries.push_back(arr);
    }
  j["coeffs"] = entries;
  return j;
}

inline HiggsField higgs_field_from_json(const nlohmann::json& j) {
  static const std::vector<std::string> keys{"rank", "degree", "half_width", "trace_free", "coeffs"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find(keys.begin(), keys.end(), it.key()) == keys.end())
      throw ConfigError("higgs field: unknown key '" + it.key() + "'");
  try {
    const int n = j.at("rank").get<int>();
    const int deg = j.at("degree").get<int>();
    const auto& coeffs = j.at("coeffs");
    if (n < 1 || deg < 0) throw ConfigError("higgs field: rank must be positive and degree non-negative");
    if (!coeffs.is_array() || static_cast<int>(coeffs.size()) != n * n)
      throw ConfigError("higgs field: coeffs must hold rank^2 entries");
    std::vector<Polynomial> e;
    for (const auto& entry : coeffs) {
      if (!entry.is_array() || static_cast<int>(entry.size()) != deg + 1)
        throw ConfigError("higgs field: each entry must hold degree+1 coefficients");
      std::vector<Complex> c;
      for (const auto& pair : entry) {
        if (!pair.is_array() || pair.size() != 2) throw ConfigError("higgs field: coefficients are [re, im] pairs");
        c.emplace_back(pair[0].get<double>(), pair[1].get<double>());
      }
      e.emplace_back(std::move(c));
    }
    return HiggsField(n, std::move(e), j.value("half_width", 1.2), j.value("trace_free", false));
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("higgs field: ") + ex.what());
  } catch (const ContractViolation& ex) {
    throw ConfigError(ex.what());
  } catch (const DimensionMismatch& ex) {
    throw ConfigError(ex.what());
  }
}

// ---------------------------------------------------------------------------
// Critical set and S_n(d, A) certificates

struct SpectralCertificate {
  double d = 0.0;  // eigenvalue gap lower bound on D(1)
  double A = 0.0;  // max|lambda| <= A d on D(1)
  int m = 0;       // generic number of generalized eigenspaces
  std::vector<Complex> critical_points;
  double scale = 1.0;  // R for a certificate of R phi
  // Diagnostic only: range of rank(f_n) seen on the sample grid. A spread
  // marks Jordan-type jumps, which are not classified further.
  int nilpotent_rank_min = 0;
  int nilpotent_rank_max = 0;
};

struct CriticalSetOptions {
  int grid_samples = 41;  // per side of the dense detection grid
  int disk_radii = 24;
  int disk_angles = 64;
};

namespace detail {

inline int nilpotent_rank(const JordanChevalleyParts& jc) {
  const double nrm = jc.nilpotent.norm();
  if (nrm < 1e-9 * (1.0 + jc.semisimple.norm())) return 0;
  Eigen::JacobiSVD<CMatrix> svd(jc.nilpotent);
  const auto& s = svd.singularValues();
  int r = 0;
  for (int i = 0; i < s.size(); ++i)
    if (s(i) > 1e-7 * s(0)) ++r;
  return r;
}

}  // namespace detail

inline SpectralCertificate critical_set(const HiggsField& phi, const CriticalSetOptions& opt = {}) {
  SpectralCertificate cert;
  const double L = phi.half_width();
  const int g = opt.grid_samples;
  cert.nilpotent_rank_min = phi.rank();
  for (int a = 0; a < g; ++a)
    for (int b = 0; b < g; ++b) {
      const Complex z(-L + 2.0 * L * a / (g - 1), -L + 2.0 * L * b / (g - 1));
      const CMatrix f = phi.evaluate_unchecked(z);
      const ClusterResult cr = cluster_eigenvalues(f);
      cert.m = std::max(cert.m, static_cast<int>(cr.clusters.size()));
      const int nr = detail::nilpotent_rank(jordan_chevalley(f, cr));
      cert.nilpotent_rank_min = std::min(cert.nilpotent_rank_min, nr);
      cert.nilpotent_rank_max = std::max(cert.nilpotent_rank_max, nr);
    }

  if (cert.m > 1) {
    // The discriminant of the square-free part of det(lambda - f(z)) is a
    // polynomial in z of degree <= deg * m (m - 1); interpolate it on a circle
    // enclosing the domain from resultants of the sampled square-free part.
    const int bound = std::max(1, phi.degree()) * cert.m * (cert.m - 1);
    int samples = 16;
    while (samples <= 2 * bound + 1) samples *= 2;
    const double rho = std::sqrt(2.0) * L;
    std::optional<Polynomial> disc;
    for (int attempt = 0; attempt < 8 && !disc; ++attempt) {
      const Complex r0 = std::polar(rho * (1.0 + 0.013 * attempt), 0.37 * attempt);
      std::vector<Complex> vals;
      bool generic = true;
      for (int k = 0; k < samples && generic; ++k) {
        const Complex z = r0 * std::polar(1.0, 2.0 * kPi * k / samples);
        const ClusterResult cr = cluster_eigenvalues(phi.evaluate_unchecked(z));
        if (static_cast<int>(cr.clusters.size()) != cert.m) {
          generic = false;
          break;
        }
        std::vector<Complex> roots;
        for (const auto& c : cr.clusters) roots.push_back(c.value);
        vals.push_back(discriminant(poly_from_roots(roots)));
      }
      if (!generic) continue;
      std::vector<Complex> c(samples, 0.0);
      for (int j = 0; j < samples; ++j) {
        Complex acc = 0.0;
        for (int k = 0; k < samples; ++k) acc += vals[k] * std::polar(1.0, -2.0 * kPi * double(j) * k / samples);
        c[j] = acc / (double(samples) * std::pow(r0, double(j)));
      }
      disc = Polynomial(std::move(c)).trimmed(rho, 1e-9);
    }
    if (!disc) throw DegenerateFamilyError("critical_set: no generic sample circle found");
    if (disc->empty()) throw DegenerateFamilyError("critical_set: discriminant of the square-free part vanishes");

    std::vector<Complex> pts;
    for (const Complex& z : disc->roots()) {
      if (!phi.in_domain(z, 1e-9)) continue;
      bool merged = false;
      for (auto& p : pts)
        if (std::abs(p - z) < 1e-5 * (1.0 + L)) {
          p = 0.5 * (p + z);
          merged = true;
        }
      if (!merged) pts.push_back(z);
    }
    std::sort(pts.begin(), pts.end(), [](Complex a, Complex b) {
      return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
    });
    cert.critical_points = pts;
  }

  // Gap and magnitude over the closed unit disk.
  bool meets_disk = false;
  for (const auto& p : cert.critical_points)
    if (std::abs(p) <= 1.0 + 1e-9) meets_disk = true;
  double min_gap = std::numeric_limits<double>::infinity();
  double max_abs = 0.0;
  for (int a = 0; a <= opt.disk_radii; ++a)
    for (int b = 0; b < (a == 0 ? 1 : opt.disk_angles); ++b) {
      const Complex z = std::polar(double(a) / opt.disk_radii, 2.0 * kPi * b / opt.disk_angles);
      const ClusterResult cr = cluster_eigenvalues(phi.evaluate_unchecked(z));
      max_abs = std::max(max_abs, cr.max_abs);
      if (static_cast<int>(cr.clusters.size()) < cert.m) meets_disk = true;
      min_gap = std::min(min_gap, cr.min_gap);
    }
  if (cert.m <= 1 || meets_disk) {
    cert.d = 0.0;
    cert.A = max_abs == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  } else {
    cert.d = min_gap;
    cert.A = max_abs / min_gap;
  }
  return cert;
}

/// Certificate for R phi: gap R d with the same A.
inline SpectralCertificate certify_S(const HiggsField& phi, double R, const CriticalSetOptions& opt = {}) {
  SpectralCertificate cert = critical_set(phi, opt);
  for (const auto& p : cert.critical_points)
    if (std::abs(p) <= 1.0 + 1e-9) throw NotCertifiable("certify_S: critical point inside the closed unit disk");
  if (cert.m > 1 && cert.d <= 0.0) throw NotCertifiable("certify_S: eigenvalue clusters collide on the unit disk");
  cert.d *= R;
  cert.scale = R;
  return cert;
}

// ---------------------------------------------------------------------------
// Paths

struct PathSpec {
  std::function<Complex(double)> position;
  std::function<Complex(double)> velocity;
  int samples = 256;     // even, for Simpson quadrature
  double margin = -1.0;  // non-criticality margin; negative selects the default
  std::string label = "path";

  Complex at(double s) const { return position(s); }
  Complex derivative(double s) const { return velocity(s); }

  std::vector<double> parameters() const {
    std::vector<double> s(samples + 1);
    for (int k = 0; k <= samples; ++k) s[k] = double(k) / samples;
    return s;
  }

  double length() const {
    double acc = 0.0;
    const int q = std::max(64, samples);
    for (int k = 0; k < q; ++k) acc += std::abs(velocity((k + 0.5) / q)) / q;
    return acc;
  }

  bool closed() const { return std::abs(position(1.0) - position(0.0)) < 1e-12 * (1.0 + std::abs(position(0.0))); }

  PathSpec reversed() const {
    PathSpec p = *this;
    auto pos = position;
    auto vel = velocity;
    p.position = [pos](double s) { return pos(1.0 - s); };
    p.velocity = [vel](double s) { return -vel(1.0 - s); };
    p.label = label + "_reversed";
    return p;
  }

  static PathSpec segment(Complex a, Complex b, int samples = 256) {
    PathSpec p;
    p.position = [a, b](double s) { return a + s * (b - a); };
    p.velocity = [a, b](double) { return b - a; };
    p.samples = samples;
    p.label = "segment";
    return p;
  }

  static PathSpec arc(Complex center, double radius, double theta0, double theta1, int samples = 256) {
    PathSpec p;
    p.position = [=](double s) { return center + std::polar(radius, theta0 + s * (theta1 - theta0)); };
    p.velocity = [=](double s) {
      return kI * (theta1 - theta0) * std::polar(radius, theta0 + s * (theta1 - theta0));
    };
    p.samples = samples;
    p.label = "arc";
    return p;
  }

  static PathSpec circle(Complex center, double radius, int samples = 256) {
    PathSpec p = arc(center, radius, 0.0, 2.0 * kPi, samples);
    p.label = "circle";
    return p;
  }

  /// gamma_2 after gamma_1 (gamma_1 first), each run at double speed.
  static PathSpec concatenate(const PathSpec& first, const PathSpec& second) {
    PathSpec p;
    auto p1 = first.position, p2 = second.position, v1 = first.velocity, v2 = second.velocity;
    p.position = [=](double s) { return s <= 0.5 ? p1(2.0 * s) : p2(2.0 * s - 1.0); };
    p.velocity = [=](double s) { return s <= 0.5 ? 2.0 * v1(2.0 * s) : 2.0 * v2(2.0 * s - 1.0); };
    p.samples = first.samples + second.samples;
    p.label = first.label + "+" + second.label;
    return p;
  }
};

// ---------------------------------------------------------------------------
// Eigenvalue branches

struct BranchTracks {
  std::vector<double> s;
  std::vector<std::vector<Complex>> lambda;  // lambda[i][k]: track i at sample k
  bool non_critical = false;
  double margin = 0.0;
  double min_real_separation = std::numeric_limits<double>::infinity();
  std::vector<int> permutation;  // closed paths: track i ends at the start value of track permutation[i]
};

namespace detail {

/// All eigenvalues with multiplicity, defective clusters replaced by their mean.
inline std::vector<Complex> clustered_eigenvalues(const CMatrix& f, double* sep = nullptr) {
  const ClusterResult cr = cluster_eigenvalues(f);
  std::vector<Complex> out;
  for (const auto& c : cr.clusters)
    for (int k = 0; k < c.multiplicity; ++k) out.push_back(c.value);
  if (sep) *sep = cr.min_gap;
  return out;
}

/// Minimal max-distance assignment of `prev` onto `next` (brute force for small n).
inline std::vector<int> match_eigenvalues(const std::vector<Complex>& prev, const std::vector<Complex>& next) {
  const int n = static_cast<int>(prev.size());
  std::vector<int> perm(n), best;
  std::iota(perm.begin(), perm.end(), 0);
  double best_cost = std::numeric_limits<double>::infinity();
  if (n <= 7) {
    do {
      double cost = 0.0, sum = 0.0;
      for (int i = 0; i < n; ++i) {
        const double d = std::abs(prev[i] - next[perm[i]]);
        cost = std::max(cost, d);
        sum += d;
      }
      cost += 1e-9 * sum;
      if (cost < best_cost) {
        best_cost = cost;
        best = perm;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
  }
  std::vector<bool> used(n, false);
  best.assign(n, -1);
  for (int i = 0; i < n; ++i) {
    int arg = -1;
    double d = std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j)
      if (!used[j] && std::abs(prev[i] - next[j]) < d) {
        d = std::abs(prev[i] - next[j]);
        arg = j;
      }
    used[arg] = true;
    best[i] = arg;
  }
  return best;
}

}  // namespace detail

inline BranchTracks branch_continuation(const HiggsField& phi, const PathSpec& gamma) {
  if (gamma.samples < 2 || gamma.samples % 2 != 0) throw ContractViolation("branch_continuation: samples must be even");
  BranchTracks out;
  out.s = gamma.parameters();
  const int n = phi.rank();
  const int ns = static_cast<int>(out.s.size());
  out.lambda.assign(n, std::vector<Complex>(ns));

  std::vector<Complex> prev = detail::clustered_eigenvalues(phi.evaluate(gamma.at(0.0)));
  for (int i = 0; i < n; ++i) out.lambda[i][0] = prev[i];
  double max_lambda = 0.0, max_vel = 0.0;
  for (int k = 1; k < ns; ++k) {
    double sep = 0.0;
    const std::vector<Complex> next = detail::clustered_eigenvalues(phi.evaluate(gamma.at(out.s[k])), &sep);
    const std::vector<int> perm = detail::match_eigenvalues(prev, next);
    double motion = 0.0;
    for (int i = 0; i < n; ++i) {
      out.lambda[i][k] = next[perm[i]];
      motion = std::max(motion, std::abs(next[perm[i]] - prev[i]));
    }
    if (std::isfinite(sep) && motion >= 0.5 * sep)
      throw PathTooCoarse("branch_continuation: eigenvalue motion per sample comparable to their separation; refine the path");
    prev.clear();
    for (int i = 0; i < n; ++i) prev.push_back(out.lambda[i][k]);
  }
  for (int k = 0; k < ns; ++k) {
    max_vel = std::max(max_vel, std::abs(gamma.derivative(out.s[k])));
    for (int i = 0; i < n; ++i) max_lambda = std::max(max_lambda, std::abs(out.lambda[i][k]));
  }
  out.margin = gamma.margin >= 0.0 ? gamma.margin : 1e-6 * max_lambda * max_vel;

  out.non_critical = true;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      double diff = 0.0;
      for (int k = 0; k < ns; ++k) diff = std::max(diff, std::abs(out.lambda[i][k] - out.lambda[j][k]));
      if (diff <= 1e-8 * (1.0 + max_lambda)) continue;  // the same eigen-1-form along gamma
      for (int k = 0; k < ns; ++k) {
        const Complex v = gamma.derivative(out.s[k]);
        const double sepk = std::abs((out.lambda[i][k] * v).real() - (out.lambda[j][k] * v).real());
        out.min_real_separation = std::min(out.min_real_separation, sepk);
        if (sepk <= out.margin) out.non_critical = false;
      }
    }

  if (gamma.closed()) {
    std::vector<Complex> start, end;
    for (int i = 0; i < n; ++i) {
      start.push_back(out.lambda[i][0]);
      end.push_back(out.lambda[i][ns - 1]);
    }
    out.permutation = detail::match_eigenvalues(end, start);
  }
  return out;
}

/// Simpson weights on the uniform samples of `gamma`.
inline std::vector<double> simpson_weights(int intervals) {
  std::vector<double> w(intervals + 1);
  const double h = 1.0 / intervals;
  for (int k = 0; k <= intervals; ++k) w[k] = h / 3.0 * (k == 0 || k == intervals ? 1.0 : (k % 2 ? 4.0 : 2.0));
  return w;
}

inline std::vector<double> alpha_integrals(const BranchTracks& tracks, const PathSpec& gamma) {
  if (!tracks.non_critical) throw NonCriticalPathViolation("alpha_integrals: path is critical");
  const int ns = static_cast<int>(tracks.s.size());
  const std::vector<double> w = simpson_weights(ns - 1);
  std::vector<double> alpha;
  for (const auto& track : tracks.lambda) {
    double acc = 0.0;
    for (int k = 0; k < ns; ++k) acc -= w[k] * (track[k] * gamma.derivative(tracks.s[k])).real();
    alpha.push_back(acc);
  }
  std::sort(alpha.begin(), alpha.end(), std::greater<>());
  return alpha;
}

inline std::vector<double> alpha_integrals(const HiggsField& phi, const PathSpec& gamma) {
  return alpha_integrals(branch_continuation(phi, gamma), gamma);
}

}  // namespace hitchin

#endif  // HITCHIN_HIGGS_FIELD_HPP
