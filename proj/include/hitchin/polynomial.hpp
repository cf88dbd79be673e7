#ifndef HITCHIN_POLYNOMIAL_HPP
#define HITCHIN_POLYNOMIAL_HPP

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "hitchin/core.hpp"

namespace hitchin {

/// Complex polynomial with coefficients in ascending degree.
class Polynomial {
public:
  Polynomial() = default;
  explicit Polynomial(std::vector<Complex> coeffs) : c_(std::move(coeffs)) {}

  const std::vector<Complex>& coeffs() const { return c_; }
  int degree() const { return static_cast<int>(c_.size()) - 1; }
  bool empty() const { return c_.empty(); }

  Complex operator()(Complex z) const {
    Complex acc = 0.0;
    for (auto it = c_.rbegin(); it != c_.rend(); ++it) acc = acc * z + *it;
    return acc;
  }

  Polynomial derivative() const {
    std::vector<Complex> d;
    for (std::size_t k = 1; k < c_.size(); ++k) d.push_back(double(k) * c_[k]);
    return Polynomial(std::move(d));
  }

  Polynomial operator*(const Polynomial& o) const {
    if (c_.empty() || o.c_.empty()) return {};
    std::vector<Complex> r(c_.size() + o.c_.size() - 1, 0.0);
    for (std::size_t i = 0; i < c_.size(); ++i)
      for (std::size_t j = 0; j < o.c_.size(); ++j) r[i + j] += c_[i] * o.c_[j];
    return Polynomial(std::move(r));
  }

  /// Drops leading coefficients whose contribution on |z| <= radius is below
  /// rel_tol of the largest one.
  Polynomial trimmed(double radius, double rel_tol) const {
    double mx = 0.0;
    for (std::size_t k = 0; k < c_.size(); ++k) mx = std::max(mx, std::abs(c_[k]) * std::pow(radius, double(k)));
    std::vector<Complex> r = c_;
    while (!r.empty() && std::abs(r.back()) * std::pow(radius, double(r.size() - 1)) <= rel_tol * mx) r.pop_back();
    return Polynomial(std::move(r));
  }

  /// Roots via the companion matrix, polished by Newton steps.
  std::vector<Complex> roots() const {
    const int d = degree();
    if (d < 1) return {};
    CMatrix comp = CMatrix::Zero(d, d);
    for (int i = 1; i < d; ++i) comp(i, i - 1) = 1.0;
    for (int i = 0; i < d; ++i) comp(i, d - 1) = -c_[i] / c_[d];
    Eigen::ComplexEigenSolver<CMatrix> es(comp, false);
    const Polynomial dp = derivative();
    std::vector<Complex> out;
    for (int i = 0; i < d; ++i) {
      Complex z = es.eigenvalues()(i);
      for (int it = 0; it < 4; ++it) {
        const Complex df = dp(z);
        if (std::abs(df) == 0.0) break;
        const Complex step = (*this)(z) / df;
        if (!std::isfinite(std::abs(step))) break;
        z -= step;
      }
      out.push_back(z);
    }
    return out;
  }

private:
  std::vector<Complex> c_;
};

/// Coefficients of the degree < m polynomial p with p(radius * w^k) = values[k],
/// w = exp(2 pi i / m). Exact when the true degree is below m.
inline Polynomial interpolate_on_circle(const std::vector<Complex>& values, double radius) {
  const int m = static_cast<int>(values.size());
  std::vector<Complex> c(m, 0.0);
  for (int j = 0; j < m; ++j) {
    Complex acc = 0.0;
    for (int k = 0; k < m; ++k) acc += values[k] * std::polar(1.0, -2.0 * kPi * double(j) * double(k) / m);
    c[j] = acc / (double(m) * std::pow(radius, double(j)));
  }
  return Polynomial(std::move(c));
}

/// Monic polynomial with the given roots, coefficients ascending.
inline std::vector<Complex> poly_from_roots(const std::vector<Complex>& roots) {
  std::vector<Complex> c{1.0};
  for (const Complex& r : roots) {
    std::vector<Complex> next(c.size() + 1, 0.0);
    for (std::size_t k = 0; k < c.size(); ++k) {
      next[k + 1] += c[k];
      next[k] -= r * c[k];
    }
    c = std::move(next);
  }
  return c;
}

/// Resultant of p and q (ascending coefficients) as the Sylvester determinant.
inline Complex resultant(const std::vector<Complex>& p, const std::vector<Complex>& q) {
  const int dp = static_cast<int>(p.size()) - 1;
  const int dq = static_cast<int>(q.size()) - 1;
  if (dp < 0 || dq < 0) return 0.0;
  const int size = dp + dq;
  if (size == 0) return 1.0;
  CMatrix s = CMatrix::Zero(size, size);
  for (int r = 0; r < dq; ++r)
    for (int k = 0; k <= dp; ++k) s(r, r + k) = p[dp - k];
  for (int r = 0; r < dp; ++r)
    for (int k = 0; k <= dq; ++k) s(dq + r, r + k) = q[dq - k];
  return s.fullPivLu().determinant();
}

/// Discriminant of a monic polynomial via Res(p, p').
inline Complex discriminant(const std::vector<Complex>& monic) {
  const int d = static_cast<int>(monic.size()) - 1;
  if (d < 2) return 1.0;
  std::vector<Complex> dp;
  for (int k = 1; k <= d; ++k) dp.push_back(double(k) * monic[k]);
  const double sign = ((d * (d - 1) / 2) % 2 == 0) ? 1.0 : -1.0;
  return sign * resultant(monic, dp);
}

}  // namespace hitchin

#endif  // HITCHIN_POLYNOMIAL_HPP
