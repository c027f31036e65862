#pragma once

#include <stdexcept>
#include <string>

namespace subsel {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid input or configuration. The CLI maps these to exit code 1.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A numerical routine could not produce a result. The CLI maps these to exit code 2.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class AsymmetricMatrix : public ConfigError {
 public:
  AsymmetricMatrix(int i, int j)
      : ConfigError("matrix is not symmetric at (" + std::to_string(i) + ", " +
                    std::to_string(j) + ")"),
        row(i),
        col(j) {}
  int row, col;
};

class NonPositiveDiagonal : public ConfigError {
 public:
  explicit NonPositiveDiagonal(int i)
      : ConfigError("diagonal entry " + std::to_string(i) + " is not strictly positive"),
        index(i) {}
  int index;
};

class NotPositiveSemiDefinite : public ConfigError {
 public:
  explicit NotPositiveSemiDefinite(double min_eigenvalue)
      : ConfigError("matrix is not positive semi-definite (smallest eigenvalue " +
                    std::to_string(min_eigenvalue) + ")"),
        eigenvalue(min_eigenvalue) {}
  double eigenvalue;
};

class DimensionMismatch : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class InvalidCardinality : public ConfigError {
 public:
  InvalidCardinality(int K, int m)
      : ConfigError("invalid subset size m=" + std::to_string(m) + " for K=" + std::to_string(K)) {}
};

class DegenerateBatch : public ConfigError {
 public:
  explicit DegenerateBatch(long n)
      : ConfigError("sample batch of size " + std::to_string(n) + " is too small (need n >= 2)") {}
};

class EmptyResults : public ConfigError {
 public:
  EmptyResults() : ConfigError("result table is empty") {}
};

class SingularSubmatrix : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class SingularCovariance : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class FactorizationFailed : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class EigenFailure : public NumericalError {
 public:
  EigenFailure() : NumericalError("symmetric eigendecomposition did not converge") {}
};

class InsufficientCoverage : public NumericalError {
 public:
  /// `j == -1` means arm `i` itself has no samples.
  InsufficientCoverage(int i, int j)
      : NumericalError(j < 0 ? "arm " + std::to_string(i) + " has no samples"
                             : "pair (" + std::to_string(i) + ", " + std::to_string(j) +
                                   ") has no samples"),
        first(i),
        second(j) {}
  int first, second;
};

class ZeroVariance : public NumericalError {
 public:
  explicit ZeroVariance(int i)
      : NumericalError("sample variance of arm " + std::to_string(i) + " is zero"), index(i) {}
  int index;
};

class AllGapsZero : public NumericalError {
 public:
  AllGapsZero() : NumericalError("every subset is optimal; no positive gap") {}
};

class ZeroGap : public NumericalError {
 public:
  ZeroGap() : NumericalError("gap is zero (below 1e-12)") {}
};

}  // namespace subsel
