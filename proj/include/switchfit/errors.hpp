#ifndef SWITCHFIT_ERRORS_HPP
#define SWITCHFIT_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace switchfit {

/// Caller broke a documented precondition (dimension mismatch, bad index,
/// invalid parameter set).
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed external input: files, schemas, command-line values.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A recursion lost all probability mass (every likelihood ratio underflowed,
/// or a normalizer became non-finite).
class NumericalDegeneracy : public std::runtime_error {
 public:
  NumericalDegeneracy(const std::string& what, std::size_t step)
      : std::runtime_error(what + " (step " + std::to_string(step) + ")"),
        step_(step) {}

  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

/// The M-step cannot produce a parameter set (e.g. zero expected jump mass).
class EstimationDegenerate : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Brute-force enumeration refused because N^T is too large.
class InstanceTooLarge : public std::length_error {
 public:
  using std::length_error::length_error;
};

namespace detail {

inline void require(bool condition, const char* message) {
  if (!condition) throw ContractError(message);
}

}  // namespace detail
}  // namespace switchfit

#endif  // SWITCHFIT_ERRORS_HPP
