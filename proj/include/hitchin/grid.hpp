#ifndef HITCHIN_GRID_HPP
#define HITCHIN_GRID_HPP

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hitchin/core.hpp"
#include "hitchin/higgs_algebra.hpp"

namespace hitchin {

/// Uniform square grid on [-L, L]^2 with N nodes per side, indexed j * N + i.
struct Grid {
  double half_width = 1.2;
  int points = 65;

  Grid() = default;
  Grid(double l, int n) : half_width(l), points(n) {
    if (n < 5 || n % 2 == 0) throw ContractViolation("Grid: points per side must be odd and at least 5");
    if (l < 1.0) throw ContractViolation("Grid: half-width must be at least 1");
  }

  double spacing() const { return 2.0 * half_width / (points - 1); }
  int size() const { return points * points; }
  int index(int i, int j) const { return j * points + i; }
  int col(int idx) const { return idx % points; }
  int row(int idx) const { return idx / points; }
  double coord(int i) const { return -half_width + i * spacing(); }
  Complex point(int i, int j) const { return {coord(i), coord(j)}; }
  Complex point(int idx) const { return point(col(idx), row(idx)); }
  bool on_boundary(int i, int j) const { return i == 0 || j == 0 || i == points - 1 || j == points - 1; }
  bool on_boundary(int idx) const { return on_boundary(col(idx), row(idx)); }

  /// Node indices inside the closed disk of the given radius about 0.
  std::vector<int> disk_nodes(double radius) const {
    std::vector<int> out;
    for (int idx = 0; idx < size(); ++idx)
      if (std::abs(point(idx)) <= radius + 1e-12) out.push_back(idx);
    return out;
  }

  bool operator==(const Grid& o) const { return half_width == o.half_width && points == o.points; }
};

/// Hermitian metric on the grid in log coordinates: H = exp(S) at every node.
class MetricField {
public:
  MetricField() = default;
  MetricField(Grid grid, int dim) : grid_(grid), dim_(dim), log_(grid.size(), CMatrix::Zero(dim, dim)), gram_(grid.size(), CMatrix::Identity(dim, dim)) {}

  MetricField(Grid grid, std::vector<CMatrix> log_coords, std::vector<CMatrix> grams)
      : grid_(grid), dim_(static_cast<int>(log_coords.at(0).rows())), log_(std::move(log_coords)), gram_(std::move(grams)) {
    if (static_cast<int>(log_.size()) != grid_.size() || log_.size() != gram_.size())
      throw DimensionMismatch("MetricField: node count does not match the grid");
  }

  static MetricField from_log(Grid grid, std::vector<CMatrix> log_coords) {
    std::vector<CMatrix> grams;
    grams.reserve(log_coords.size());
    for (const auto& s : log_coords) grams.push_back(hermitian_exp(s));
    return MetricField(grid, std::move(log_coords), std::move(grams));
  }

  const Grid& grid() const { return grid_; }
  int dim() const { return dim_; }
  const CMatrix& gram(int idx) const { return gram_[idx]; }
  const CMatrix& log_coords(int idx) const { return log_[idx]; }
  const std::vector<CMatrix>& grams() const { return gram_; }
  const std::vector<CMatrix>& log_field() const { return log_; }
  HermitianForm form(int idx) const { return HermitianForm(gram_[idx]); }

  /// Bilinear interpolation of the gram matrices.
  CMatrix interpolate(Complex z) const { return interpolate_field(grid_, gram_, z); }

  static CMatrix interpolate_field(const Grid& g, const std::vector<CMatrix>& field, Complex z) {
    const double h = g.spacing();
    double fx = (z.real() + g.half_width) / h;
    double fy = (z.imag() + g.half_width) / h;
    if (fx < -1e-9 || fy < -1e-9 || fx > g.points - 1 + 1e-9 || fy > g.points - 1 + 1e-9)
      throw DomainError("interpolate: point outside the grid");
    int i = std::min(std::max(static_cast<int>(std::floor(fx)), 0), g.points - 2);
    int j = std::min(std::max(static_cast<int>(std::floor(fy)), 0), g.points - 2);
    const double tx = fx - i, ty = fy - j;
    return (1 - tx) * (1 - ty) * field[g.index(i, j)] + tx * (1 - ty) * field[g.index(i + 1, j)] +
           (1 - tx) * ty * field[g.index(i, j + 1)] + tx * ty * field[g.index(i + 1, j + 1)];
  }

private:
  Grid grid_;
  int dim_ = 0;
  std::vector<CMatrix> log_;
  std::vector<CMatrix> gram_;
};

// ---------------------------------------------------------------------------
// Checkpoints: a text file with a version line, the grid parameters and, per
// node, the log coordinates and gram entries row-major as hexfloat pairs.

inline constexpr const char* kCheckpointHeader = "hitchin-metric-checkpoint v1";

namespace detail {

inline std::string hex(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", x);
  return buf;
}

inline double parse_double(const std::string& tok) {
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0') throw ConfigError("checkpoint: malformed number '" + tok + "'");
  return v;
}

inline void write_matrix(std::ostream& os, const CMatrix& m) {
  for (int a = 0; a < m.rows(); ++a)
    for (int b = 0; b < m.cols(); ++b) os << ' ' << hex(m(a, b).real()) << ' ' << hex(m(a, b).imag());
}

inline CMatrix read_matrix(std::istream& is, int n) {
  CMatrix m(n, n);
  std::string re, im;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      if (!(is >> re >> im)) throw ConfigError("checkpoint: truncated node data");
      m(a, b) = Complex(parse_double(re), parse_double(im));
    }
  return m;
}

}  // namespace detail

inline void write_checkpoint(std::ostream& os, const MetricField& h) {
  os << kCheckpointHeader << '\n';
  os << "half_width " << detail::hex(h.grid().half_width) << " points " << h.grid().points << " dim " << h.dim() << '\n';
  for (int idx = 0; idx < h.grid().size(); ++idx) {
    detail::write_matrix(os, h.log_coords(idx));
    detail::write_matrix(os, h.gram(idx));
    os << '\n';
  }
}

inline MetricField read_checkpoint(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kCheckpointHeader) throw ConfigError("checkpoint: unknown format version");
  std::string k1, k2, k3, lw;
  int points = 0, dim = 0;
  if (!(is >> k1 >> lw >> k2 >> points >> k3 >> dim) || k1 != "half_width" || k2 != "points" || k3 != "dim")
    throw ConfigError("checkpoint: malformed grid line");
  const Grid grid(detail::parse_double(lw), points);
  std::vector<CMatrix> logs, grams;
  for (int idx = 0; idx < grid.size(); ++idx) {
    logs.push_back(detail::read_matrix(is, dim));
    grams.push_back(detail::read_matrix(is, dim));
  }
  return MetricField(grid, std::move(logs), std::move(grams));
}

inline void save_checkpoint(const std::string& path, const MetricField& h) {
  std::ofstream os(path);
  if (!os) throw ConfigError("checkpoint: cannot open " + path);
  write_checkpoint(os, h);
}

inline MetricField load_checkpoint(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("checkpoint: cannot open " + path);
  return read_checkpoint(is);
}

}  // namespace hitchin

#endif  // HITCHIN_GRID_HPP
