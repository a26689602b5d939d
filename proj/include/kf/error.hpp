#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kf {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidParameter : public Error {
 public:
  using Error::Error;
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Riccati iteration did not reach the requested residual.
class NonConvergence : public Error {
 public:
  NonConvergence(int iterations, double residual, const std::string& what)
      : Error(what), iterations_(iterations), residual_(residual) {}
  int iterations() const { return iterations_; }
  double residual() const { return residual_; }

 private:
  int iterations_;
  double residual_;
};

/// R + B^T Pi B could not be factorized.
class SingularInnerSolve : public Error {
 public:
  using Error::Error;
};

class DegenerateSeparation : public Error {
 public:
  using Error::Error;
};

class DatasetGenerationStalled : public Error {
 public:
  DatasetGenerationStalled(std::size_t failures, std::size_t samples, const std::string& what)
      : Error(what), failures_(failures), samples_(samples) {}
  std::size_t failures() const { return failures_; }
  std::size_t samples() const { return samples_; }

 private:
  std::size_t failures_;
  std::size_t samples_;
};

class NonFiniteLoss : public Error {
 public:
  NonFiniteLoss(int epoch, long batch, const std::string& what)
      : Error(what), epoch_(epoch), batch_(batch) {}
  int epoch() const { return epoch_; }
  long batch() const { return batch_; }

 private:
  int epoch_;
  long batch_;
};

/// A controller failed on a specific particle pair during a kinetic step.
class ControllerFailure : public Error {
 public:
  ControllerFailure(long i, long j, const std::string& what) : Error(what), i_(i), j_(j) {}
  long first() const { return i_; }
  long second() const { return j_; }

 private:
  long i_;
  long j_;
};

class NonFiniteState : public Error {
 public:
  using Error::Error;
};

}  // namespace kf
