#pragma once

#include <stdexcept>
#include <string>

namespace mfld {

// Invalid input: malformed distributions, mismatched supports, bad specs.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Instance exceeds the size an exact/exhaustive routine is built for.
class CapacityError : public std::length_error {
 public:
  using std::length_error::length_error;
};

// Iterative solver stopped before reaching its tolerance.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double last_residual, int iterations)
      : std::runtime_error(what), residual_(last_residual), iterations_(iterations) {}

  double residual() const noexcept { return residual_; }
  int iterations() const noexcept { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

// A simulated trajectory left the finite reals.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, std::size_t particle, std::size_t stage)
      : std::runtime_error(what), particle_(particle), stage_(stage) {}

  std::size_t particle() const noexcept { return particle_; }
  std::size_t stage() const noexcept { return stage_; }

 private:
  std::size_t particle_;
  std::size_t stage_;
};

}  // namespace mfld
