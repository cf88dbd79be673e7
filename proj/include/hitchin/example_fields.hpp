#ifndef HITCHIN_EXAMPLE_FIELDS_HPP
#define HITCHIN_EXAMPLE_FIELDS_HPP

// Higgs fields used across the self-test, the tests and the shipped configs.

#include "hitchin/core.hpp"
#include "hitchin/higgs_field.hpp"

namespace hitchin::examples {

inline CMatrix mat2(Complex a, Complex b, Complex c, Complex d) {
  CMatrix m(2, 2);
  m << a, b, c, d;
  return m;
}

/// diag(1, -1) dz.
inline HiggsField diagonal() { return HiggsField::constant(mat2(1.0, 0.0, 0.0, -1.0)); }

/// [[0, 1], [0, 0]] dz.
inline HiggsField nilpotent() { return HiggsField::constant(mat2(0.0, 1.0, 0.0, 0.0)); }

/// [[1, 1], [0, -1]] dz: semisimple with non-orthogonal eigenlines.
inline HiggsField semisimple() { return HiggsField::constant(mat2(1.0, 1.0, 0.0, -1.0)); }

/// [[0, z], [1, 0]] dz: eigenvalues +-sqrt(z), critical point at 0.
inline HiggsField square_root() {
  return HiggsField::from_matrices({mat2(0.0, 0.0, 1.0, 0.0), mat2(0.0, 1.0, 0.0, 0.0)}, 1.2, true);
}

/// diag(-1/3, -1/3, 2/3) dz + e_12 dz.
inline CMatrix mixed_matrix() {
  CMatrix a = CMatrix::Zero(3, 3);
  a(0, 0) = a(1, 1) = -1.0 / 3.0;
  a(2, 2) = 2.0 / 3.0;
  a(0, 1) = 1.0;
  return a;
}

inline HiggsField mixed() { return HiggsField::constant(mixed_matrix()); }

/// Frame change used for the mixed field in the decay sweeps. In the literal
/// frame the generalized eigenspaces are coordinate blocks, the solution is
/// block diagonal and every decoupling quantity vanishes identically.
inline CMatrix mixed_frame() {
  CMatrix p = CMatrix::Identity(3, 3);
  p(0, 2) = 0.5;
  p(1, 2) = 0.5;
  return p;
}

inline HiggsField mixed_conjugated() { return mixed().conjugated(mixed_frame()); }

/// [[0, 1, 0], [0, 0, 1], [0, 0, z]] dz.
inline HiggsField companion3() {
  CMatrix a0 = CMatrix::Zero(3, 3), a1 = CMatrix::Zero(3, 3);
  a0(0, 1) = 1.0;
  a0(1, 2) = 1.0;
  a1(2, 2) = 1.0;
  return HiggsField::from_matrices({a0, a1});
}

}  // namespace hitchin::examples

#endif  // HITCHIN_EXAMPLE_FIELDS_HPP
