#ifndef RWCRE_ERRORS_HPP
#define RWCRE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace rwcre {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Environment law has a single distinct atom.
class DegenerateLaw : public Error {
 public:
  using Error::Error;
};

/// An atom (or clipping bound) lies outside the open unit interval.
class EllipticityViolation : public Error {
 public:
  using Error::Error;
};

/// No sign change of E[rho^s] - 1 was found below the configured s_max.
class BracketFailure : public Error {
 public:
  using Error::Error;
};

/// Fewer replicas than an estimator needs.
class BudgetTooSmall : public Error {
 public:
  using Error::Error;
};

/// Log-mean-exp weight concentrated on a single replica.
class EffectiveSampleCollapse : public Error {
 public:
  using Error::Error;
};

/// Block-length distribution with an infinite atom.
class UnboundedSupport : public Error {
 public:
  using Error::Error;
};

/// Numerical integration of a Levy density did not converge.
class QuadratureFailure : public Error {
 public:
  using Error::Error;
};

/// A sampler was handed a law outside the regime it serves.
class RegimeMismatch : public Error {
 public:
  using Error::Error;
};

/// Configuration problem; carries the JSON field path that failed.
class ConfigError : public Error {
 public:
  ConfigError(std::string path, const std::string& what)
      : Error(path + ": " + what), path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace rwcre

#endif  // RWCRE_ERRORS_HPP
