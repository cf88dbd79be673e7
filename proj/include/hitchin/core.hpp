#ifndef HITCHIN_CORE_HPP
#define HITCHIN_CORE_HPP

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace hitchin {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;

constexpr double kPi = 3.14159265358979323846;
constexpr Complex kI{0.0, 1.0};

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class ConditioningError : public Error {
public:
  using Error::Error;
};

/// Eigenvalue clusters too close to tell apart at the working tolerance.
class ClusteringError : public Error {
public:
  ClusteringError(const std::string& what, double gap1, double gap2)
      : Error(what), nearest_gap(gap1), second_gap(gap2) {}
  double nearest_gap;
  double second_gap;
};

class ContractViolation : public Error {
public:
  using Error::Error;
};

class DimensionMismatch : public Error {
public:
  using Error::Error;
};

class DomainError : public Error {
public:
  using Error::Error;
};

class DegenerateFamilyError : public Error {
public:
  using Error::Error;
};

class NotCertifiable : public Error {
public:
  using Error::Error;
};

class PathTooCoarse : public Error {
public:
  using Error::Error;
};

class NonCriticalPathViolation : public Error {
public:
  using Error::Error;
};

class OracleError : public Error {
public:
  using Error::Error;
};

class InsufficientData : public Error {
public:
  using Error::Error;
};

class InternalInconsistency : public Error {
public:
  using Error::Error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

inline CMatrix identity(int n) { return CMatrix::Identity(n, n); }

inline CMatrix commutator(const CMatrix& a, const CMatrix& b) { return a * b - b * a; }

}  // namespace hitchin

#endif  // HITCHIN_CORE_HPP
